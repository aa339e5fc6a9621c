#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "flexbeam/errors.hpp"

namespace flexbeam {

/// Which energy is being minimized: hard device, strengthening, or
/// elastic-plastic strengthening of the clamped beam.
enum class ProblemKind { E1, F1, G1 };

inline const char* to_string(ProblemKind k) {
    switch (k) {
    case ProblemKind::E1: return "E1";
    case ProblemKind::F1: return "F1";
    case ProblemKind::G1: return "G1";
    }
    return "?";
}

/// Crack: displacement jump, priced alpha.
/// Crease: slope jump with continuous displacement, priced beta.
/// Hinge: slope jump in the elastic-plastic model, priced beta plus
///        sigma times the jump magnitude.
enum class BreakKind { Crack, Crease, Hinge };

inline const char* to_string(BreakKind k) {
    switch (k) {
    case BreakKind::Crack: return "crack";
    case BreakKind::Crease: return "crease";
    case BreakKind::Hinge: return "hinge";
    }
    return "?";
}

struct Break {
    double x = 0.0;
    BreakKind kind = BreakKind::Crease;
};

inline bool operator==(const Break& a, const Break& b) { return a.x == b.x && a.kind == b.kind; }

inline bool operator<(const Break& a, const Break& b) {
    if (a.x != b.x) return a.x < b.x;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
}

/// The finite singular set: strictly increasing positions in [-1, 1], each
/// tagged with a kind. Endpoints are admissible break locations.
class BreakConfig {
public:
    BreakConfig() = default;

    explicit BreakConfig(std::vector<Break> breaks) : items_(std::move(breaks)) {
        std::sort(items_.begin(), items_.end());
        for (size_t i = 0; i + 1 < items_.size(); ++i) {
            if (items_[i + 1].x - items_[i].x < 1e-12)
                throw DegenerateMesh("break locations closer than 1e-12: " + std::to_string(items_[i].x) +
                                     " and " + std::to_string(items_[i + 1].x));
        }
        for (const Break& b : items_) {
            if (!(b.x >= -1.0 && b.x <= 1.0))
                throw Error("break location outside [-1, 1]: " + std::to_string(b.x));
        }
    }

    const std::vector<Break>& items() const { return items_; }
    bool empty() const { return items_.empty(); }
    size_t size() const { return items_.size(); }

    int count(BreakKind k) const {
        return static_cast<int>(std::count_if(items_.begin(), items_.end(),
                                              [k](const Break& b) { return b.kind == k; }));
    }

    std::string describe() const {
        std::ostringstream os;
        for (size_t i = 0; i < items_.size(); ++i) {
            if (i) os << ", ";
            os << items_[i].x << ":" << to_string(items_[i].kind);
        }
        return os.str();
    }

    friend bool operator==(const BreakConfig& a, const BreakConfig& b) { return a.items_ == b.items_; }

    /// Lexicographic order used for deterministic tie-breaking.
    friend bool operator<(const BreakConfig& a, const BreakConfig& b) {
        return std::lexicographical_compare(a.items_.begin(), a.items_.end(), b.items_.begin(),
                                            b.items_.end());
    }

private:
    std::vector<Break> items_;
};

/// All constitutive constants. Admissibility depends on the problem kind.
struct ModelParams {
    double eta = 1.0;   ///< bending stiffness of the reinforcement
    double mu = 1.0;    ///< adhesive stiffness
    double gamma = 1.0; ///< bending stiffness of the plate
    double alpha = 1.0; ///< crack release energy
    double beta = 1.0;  ///< crease release energy
    double sigma = 0.0; ///< plastic yield modulus per unit slope jump
};

/// Checks the admissibility inequalities for the given problem kind and
/// throws ParamViolation naming the violated one.
inline void validate_params(const ModelParams& p, ProblemKind problem) {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ParamViolation("parameter violation: " + what);
    };
    require(p.eta > 0.0, "eta > 0 (eta=" + std::to_string(p.eta) + ")");
    require(p.mu > 0.0, "mu > 0 (mu=" + std::to_string(p.mu) + ")");
    if (problem != ProblemKind::E1)
        require(p.gamma > 0.0, "gamma > 0 (gamma=" + std::to_string(p.gamma) + ")");
    if (problem == ProblemKind::G1) {
        require(p.beta >= 0.0, "beta >= 0 (beta=" + std::to_string(p.beta) + ")");
        require(p.sigma >= 0.0, "sigma >= 0 (sigma=" + std::to_string(p.sigma) + ")");
    } else {
        require(p.beta > 0.0, "beta > 0 (beta=" + std::to_string(p.beta) + ")");
        require(p.beta <= p.alpha,
                "beta <= alpha (alpha=" + std::to_string(p.alpha) + ", beta=" + std::to_string(p.beta) + ")");
        require(p.alpha <= 2.0 * p.beta,
                "alpha <= 2*beta (alpha=" + std::to_string(p.alpha) + ", beta=" + std::to_string(p.beta) + ")");
    }
}

/// Checks that the break kinds are admissible for the problem: cracks and
/// creases for E1/F1, hinges only for G1.
inline void validate_breaks(const BreakConfig& K, ProblemKind problem) {
    for (const Break& b : K.items()) {
        if (problem == ProblemKind::G1 && b.kind != BreakKind::Hinge)
            throw MeshMismatch(std::string("G1 admits only hinge breaks, got ") + to_string(b.kind) +
                               " at x=" + std::to_string(b.x));
        if (problem != ProblemKind::G1 && b.kind == BreakKind::Hinge)
            throw MeshMismatch("hinge breaks are specific to G1, got one at x=" + std::to_string(b.x));
    }
}

/// Damage release energy of a break set: alpha per crack plus beta per
/// crease for E1/F1; beta per hinge for G1 (jump magnitudes priced
/// separately).
inline double damage_count(const BreakConfig& K, const ModelParams& p, ProblemKind problem) {
    validate_breaks(K, problem);
    if (problem == ProblemKind::G1) return p.beta * K.count(BreakKind::Hinge);
    return p.alpha * K.count(BreakKind::Crack) + p.beta * K.count(BreakKind::Crease);
}

/// Per-term energy values. `total` is the sum of the parts.
struct EnergyBreakdown {
    double damage = 0.0;    ///< alpha/beta counting term
    double bending_r = 0.0; ///< eta * integral of squared reinforcement curvature
    double load_r = 0.0;    ///< minus the reinforcement load work
    double glue = 0.0;      ///< mu * squared adhesive mismatch
    double bending_p = 0.0; ///< gamma * squared plate curvature (F1/G1)
    double load_p = 0.0;    ///< minus the plate load work (F1/G1)
    double plastic = 0.0;   ///< sigma * summed slope-jump magnitudes (G1)
    double total = 0.0;

    double sum_of_parts() const { return damage + bending_r + load_r + glue + bending_p + load_p + plastic; }

    void finalize() { total = sum_of_parts(); }
};

} // namespace flexbeam
