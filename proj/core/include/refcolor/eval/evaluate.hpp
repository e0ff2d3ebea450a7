#pragma once

#include <string>
#include <vector>

#include "refcolor/eval/metrics.hpp"
#include "refcolor/train/checkpoint.hpp"

namespace refcolor::eval {

struct FrameMetrics {
    std::size_t frame_index = 0;
    double mse = 0, psnr = 0, ssim = 0;
};

struct EvalReport {
    std::string sequence_id;
    int k = 0;
    std::vector<FrameMetrics> frames; // non-reference frames only
    double mean_mse = 0, mean_psnr = 0, mean_ssim = 0;
    double ffd = 0; // Frechet distance over Embedder features (pred vs truth)
};

// Reference frame indices at equal spacing including first and last; K = 1
// uses only the first frame.
std::vector<std::size_t> reference_indices(std::size_t length, int k);

// Colors every non-reference frame of the sequence: each segment's targets go
// through the color transform network conditioned on the segment's bounding
// references, then the temporal network refines each segment volume. Returns
// one image per input frame (reference slots carry the ground-truth colors).
std::vector<data::Image> colorize_sequence(train::ModelBundle& bundle, const data::Sequence& seq, int k,
                                           bool use_temporal);

EvalReport evaluate_sequence(train::ModelBundle& bundle, const data::Sequence& seq, int k,
                             bool use_temporal = true);

// Metric aggregation over given predictions (exposed so ground-truth inputs
// and protocol details can be tested without a model).
EvalReport compute_report(const std::vector<data::Image>& preds, const data::Sequence& seq,
                          const std::vector<std::size_t>& ref_indices, int k);

// Embedder feature vectors (one per frame) of line/color pairs.
std::vector<std::vector<double>> embed_features(train::ModelBundle& bundle,
                                                const std::vector<const data::Image*>& lines,
                                                const std::vector<const data::Image*>& colors);

// Adds the Frechet feature distance between predictions and ground truth
// over the evaluated (non-reference) frames.
void fill_ffd(train::ModelBundle& bundle, EvalReport& report, const std::vector<data::Image>& preds,
              const data::Sequence& seq, const std::vector<std::size_t>& ref_indices);

} // namespace refcolor::eval
