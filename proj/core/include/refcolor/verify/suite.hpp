#pragma once

#include <string>
#include <vector>

namespace refcolor::verify {

struct CheckResult {
    std::string name;
    double max_rel_err = 0.0;
    std::int64_t checked = 0;
    bool passed = false;
};

// Finite-difference verification of every differentiable engine operation
// (64-bit, central differences, relative tolerance 1e-4).
std::vector<CheckResult> run_op_checks();

// End-to-end checks through the tiny network configurations and the loss
// stack; parameter coordinates are subsampled.
std::vector<CheckResult> run_net_checks();

} // namespace refcolor::verify
