#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "refcolor/engine/param.hpp"

namespace refcolor {

struct AdamOpts {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction. Per-parameter first/second moment state is keyed
// by parameter name so it can round-trip through checkpoints.
class Adam {
  public:
    Adam() = default;
    explicit Adam(AdamOpts opts) : opts_(opts) {}

    const AdamOpts& opts() const { return opts_; }
    std::int64_t step_count() const { return t_; }

    // Applies one update to every parameter with an accumulated gradient.
    void step(const std::vector<Parameter*>& params);

    struct Slot {
        std::vector<double> m, v;
    };
    // State access for checkpointing.
    std::unordered_map<std::string, Slot>& state() { return state_; }
    const std::unordered_map<std::string, Slot>& state() const { return state_; }
    void set_step_count(std::int64_t t) { t_ = t; }

  private:
    AdamOpts opts_;
    std::int64_t t_ = 0;
    std::unordered_map<std::string, Slot> state_;
};

} // namespace refcolor
