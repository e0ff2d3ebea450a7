#pragma once

#include <functional>
#include <stdexcept>

#include "refcolor/data/dataset.hpp"
#include "refcolor/train/checkpoint.hpp"

namespace refcolor::train {

// Non-finite loss encountered; carries the failing step for diagnostics.
struct NumericError : std::runtime_error {
    std::int64_t step;
    NumericError(const std::string& msg, std::int64_t step_) : std::runtime_error(msg), step(step_) {}
};

struct StepLog {
    std::int64_t step = 0;
    double total = 0, l1 = 0, perc = 0, style = 0, latent = 0, gan_d = 0, gan_g = 0;
};
using LogFn = std::function<void(const StepLog&)>;

// Alternating discriminator/generator Adam steps over random 8-frame windows
// (references at the extremes, one random target per batch item).
void train_color_stage(TrainerState& state, const std::vector<data::Sequence>& train_seqs,
                       const LogFn& log = {});

// Color transform network frozen; the temporal network refines the assembled
// [ref, targets..., ref] volumes with per-frame-averaged losses.
void train_temporal_stage(TrainerState& state, const std::vector<data::Sequence>& train_seqs,
                          const LogFn& log = {});

// Updates both stages' trainable parts on the new sequences only.
void fine_tune(TrainerState& state, const std::vector<data::Sequence>& sequences, const LogFn& log = {});

// One generator pass over a window batch (shared by the trainer and tests).
struct ColorBatch {
    color::GenInputs inputs;
    Tensor target; // [N, 3, H, W]
};
ColorBatch sample_color_batch(TrainerState& state, const std::vector<data::Sequence>& seqs);

} // namespace refcolor::train
