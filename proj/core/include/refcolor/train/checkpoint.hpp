#pragma once

#include <memory>
#include <string>

#include "refcolor/color/colornet.hpp"
#include "refcolor/engine/optim.hpp"
#include "refcolor/loss/losses.hpp"
#include "refcolor/temporal/temporalnet.hpp"
#include "refcolor/train/config.hpp"

namespace refcolor::train {

// Both networks plus the fixed feature pyramid, built deterministically from
// a config (weights seeded by cfg.seed).
struct ModelBundle {
    TrainConfig cfg;
    std::unique_ptr<color::ColorModel> color;
    std::unique_ptr<temporal::TemporalModel> temporal;
    std::unique_ptr<loss::FeaturePyramid> pyramid;

    static ModelBundle build(const TrainConfig& cfg);
};

struct TrainerState {
    ModelBundle bundle;
    Adam opt_color_g, opt_color_d, opt_temporal_g, opt_temporal_d;
    Rng data_rng{1};
    std::int64_t step_color = 0;
    std::int64_t step_temporal = 0;
    std::int64_t step_finetune = 0;
    int stage_done = 0; // 0 = none, 1 = color stage, 2 = temporal stage

    static TrainerState init(const TrainConfig& cfg);
};

// Binary checkpoint: magic + version + config snapshot + counters + data-rng
// state + length-prefixed named blobs (parameters and power-iteration vectors
// at model precision, Adam moments at 64-bit).
void save_checkpoint(const std::string& path, const TrainerState& state);
TrainerState load_checkpoint(const std::string& path);

// Restores named parameter blobs into an existing store; throws on unknown
// names or shape mismatches. Exposed for cross-config validation.
struct ParamBlob {
    std::string name;
    DType dtype;
    std::vector<std::int64_t> shape;
    std::vector<double> values;
};
void restore_params(ParamStore& store, const std::vector<ParamBlob>& blobs, const std::string& what);

} // namespace refcolor::train
