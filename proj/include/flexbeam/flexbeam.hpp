#pragma once

// Umbrella header: minimisation of the hard-device (E1), strengthening (F1)
// and elastic-plastic (G1) reinforcement energies of a clamped beam with
// free cracks, creases and hinges, optional non-interpenetration
// constraints, break-set search, and verification of the first-order
// conditions, compliance identities and uniqueness thresholds satisfied by
// minimisers.

#include "flexbeam/errors.hpp"
#include "flexbeam/expression.hpp"
#include "flexbeam/fields.hpp"
#include "flexbeam/model.hpp"
#include "flexbeam/mesh.hpp"
#include "flexbeam/fem.hpp"
#include "flexbeam/energy.hpp"
#include "flexbeam/solve.hpp"
#include "flexbeam/search.hpp"
#include "flexbeam/verify.hpp"
#include "flexbeam/io.hpp"
