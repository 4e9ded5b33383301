#pragma once

#include <string>
#include <vector>

#include "trirec/tensor.hpp"

namespace trirec::nn {

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0.0;
};

// Finite-difference check for every registered differentiable op. Each entry
// reports the max relative error against central differences.
std::vector<GradCheckResult> run_op_gradchecks(uint64_t seed = 0);

// End-to-end objective gradient checks on a tiny model: loss wrt the mask
// token, the triplane tokens, and the patch-embedding weights.
std::vector<GradCheckResult> run_end_to_end_gradchecks(uint64_t seed = 0);

}  // namespace trirec::nn
