#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ctfa/autodiff.hpp"

namespace ctfa {

struct GradCheckOptions {
    double epsilon = 1e-5;
    double tolerance = 1e-4;
    // Relative error denominator floor: |a - n| / max(|a|, |n|, floor).
    double floor = 1e-6;
    // Per-leaf cap on perturbed entries (each entry has two parts); larger
    // leaves are checked on an evenly strided subset.
    std::size_t max_entries_per_leaf = 256;
};

struct GradCheckResult {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    bool passed = false;
};

// Compares tape gradients of loss_fn() with respect to every leaf against
// central finite differences. loss_fn must rebuild the graph from the current
// leaf values each call and return a scalar.
GradCheckResult check_gradients(std::string name, std::vector<Var> leaves, const std::function<Var()>& loss_fn,
                                const GradCheckOptions& options = {});

}  // namespace ctfa
