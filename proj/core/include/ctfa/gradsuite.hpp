#pragma once

#include <cstdint>
#include <vector>

#include "ctfa/gradcheck.hpp"

namespace ctfa {

// Finite-difference checks of every layer type and attention mechanism on
// `instances` random instances each, seeded from `seed`. Each result is named
// "<layer>#<instance>"; gradients are taken with respect to the input and all
// parameters of a random linear functional of the layer output.
std::vector<GradCheckResult> layer_gradient_suite(std::uint64_t seed, std::size_t instances,
                                                  const GradCheckOptions& options = {});

}  // namespace ctfa
