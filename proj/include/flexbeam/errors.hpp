#pragma once

#include <stdexcept>
#include <string>

namespace flexbeam {

/// Base class of all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A constitutive parameter violates an admissibility inequality.
struct ParamViolation : Error {
    using Error::Error;
};

/// A displacement's break DOFs disagree with the requested break set.
struct MeshMismatch : Error {
    using Error::Error;
};

/// Two break locations closer than the degeneracy tolerance.
struct DegenerateMesh : Error {
    using Error::Error;
};

/// The clamped-and-broken system lost positive definiteness.
struct SingularSystem : Error {
    using Error::Error;
};

/// An iterative solve exhausted its iteration budget.
struct MaxIterations : Error {
    using Error::Error;
};

/// Clamp values contradict the unilateral constraint at an endpoint.
struct InfeasibleClamp : Error {
    using Error::Error;
};

/// The generalized eigensolve did not converge.
struct EigenFailure : Error {
    using Error::Error;
};

/// A problem-spec file could not be parsed.
struct SpecParseError : Error {
    using Error::Error;
};

} // namespace flexbeam
