#pragma once

#include <functional>
#include <string>
#include <vector>

#include "refcolor/engine/tensor.hpp"

namespace refcolor {

// Central finite-difference verification of reverse-mode gradients.
//
// `forward` must rebuild the computation from the current contents of `leaves`
// and return a scalar loss tensor. Leaves are mutated in place (one coordinate
// nudged at a time), so the closure must read them fresh on every call.
struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_leaf;
    std::int64_t worst_index = -1;
    std::int64_t checked = 0;
    bool passed(double tol) const { return max_rel_err < tol; }
};

struct GradCheckOpts {
    double h = 1e-4;          // central difference step
    double tol = 1e-4;        // relative error threshold
    // Coordinates where both gradients are below this magnitude compare on
    // an absolute scale (relative error is undefined at a true zero, and FD
    // roundoff noise would otherwise dominate the ratio).
    double abs_floor = 1e-4;
    std::int64_t max_coords_per_leaf = 0; // 0 = exhaustive
    std::uint64_t coord_seed = 17;        // coordinate subsampling seed
    // A secant spanning a relu kink is a step-size artifact, not a wrong
    // gradient; coordinates failing at h are re-measured at h/10 and h/100
    // (a genuinely wrong backward fails at every step size).
    int refinements = 2;
};

// Leaves must be f64 tensors with requires_grad set.
GradCheckResult gradcheck(const std::function<Tensor()>& forward,
                          const std::vector<std::pair<std::string, Tensor>>& leaves,
                          const GradCheckOpts& opts = {});

} // namespace refcolor
