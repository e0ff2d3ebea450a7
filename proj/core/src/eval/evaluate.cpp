#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "refcolor/eval/evaluate.hpp"
#include "refcolor/net/layers.hpp"

namespace refcolor::eval {

using data::Image;
using data::Sequence;

std::vector<std::size_t> reference_indices(std::size_t length, int k) {
    if (k < 1) throw std::invalid_argument("reference_indices: K must be >= 1");
    if (length < static_cast<std::size_t>(k) + 1)
        throw std::invalid_argument("reference_indices: sequence of length " + std::to_string(length) +
                                    " too short for K=" + std::to_string(k));
    if (k == 1) return {0};
    std::vector<std::size_t> refs;
    for (int i = 0; i < k; ++i) {
        const double pos = static_cast<double>(i) * static_cast<double>(length - 1) / (k - 1);
        refs.push_back(static_cast<std::size_t>(std::llround(pos)));
    }
    refs.erase(std::unique(refs.begin(), refs.end()), refs.end());
    return refs;
}

namespace {

// Colors the interior frames of [a, b] with references (a, b); K = 1 passes
// a == b and the single reference fills both network slots.
std::vector<Image> color_segment(train::ModelBundle& bundle, const Sequence& seq, std::size_t ref_a,
                                 std::size_t ref_b, const std::vector<std::size_t>& targets) {
    const DType dt = bundle.cfg.dtype();
    if (targets.empty()) return {};
    NoGradGuard ng;
    color::GenInputs in;
    std::vector<const Image*> lines, dists;
    for (auto t : targets) {
        lines.push_back(&seq.frames[t].line);
        dists.push_back(&seq.frames[t].dist);
    }
    in.line = net::tensor_from_images(lines, dt);
    in.dist = net::tensor_from_images(dists, dt);
    for (std::size_t r : {ref_a, ref_b}) {
        std::vector<const Image*> rl(targets.size(), &seq.frames[r].line);
        std::vector<const Image*> rd(targets.size(), &seq.frames[r].dist);
        std::vector<const Image*> rc(targets.size(), &seq.frames[r].color);
        in.ref_lines.push_back(net::tensor_from_images(rl, dt));
        in.ref_dists.push_back(net::tensor_from_images(rd, dt));
        in.ref_colors.push_back(net::tensor_from_images(rc, dt));
    }
    color::GenOutputs out = bundle.color->generator_forward(in);
    std::vector<Image> result;
    for (std::size_t i = 0; i < targets.size(); ++i)
        result.push_back(net::image_from_tensor(out.y_trans, static_cast<std::int64_t>(i)));
    return result;
}

// Refines one segment volume [color_a, preds..., color_b?] in place.
void refine_segment(train::ModelBundle& bundle, const Sequence& seq, std::vector<Image>& preds,
                    std::size_t ref_a, std::size_t ref_b, const std::vector<std::size_t>& targets,
                    bool closing_ref) {
    if (targets.empty()) return;
    const DType dt = bundle.cfg.dtype();
    const int H = seq.frames.front().color.h, W = seq.frames.front().color.w;
    const std::int64_t T = static_cast<std::int64_t>(targets.size()) + (closing_ref ? 2 : 1);
    if (T < 3) return; // too short for the temporal net; keep the transform output
    NoGradGuard ng;

    std::vector<Tensor> line_frames, color_frames;
    auto push = [&](const Image& line, const Image& color) {
        line_frames.push_back(reshape(net::tensor_from_image(line, dt), {1, 1, 1, H, W}));
        color_frames.push_back(reshape(net::tensor_from_image(color, dt), {1, 3, 1, H, W}));
    };
    push(seq.frames[ref_a].line, seq.frames[ref_a].color);
    for (std::size_t t : targets) push(seq.frames[t].line, preds[t]);
    if (closing_ref) push(seq.frames[ref_b].line, seq.frames[ref_b].color);

    Tensor refined = bundle.temporal->refine_sequence(concat(line_frames, 2), concat(color_frames, 2));
    for (std::size_t i = 0; i < targets.size(); ++i) {
        Tensor frame = reshape(slice(refined, 2, static_cast<std::int64_t>(i) + 1, 1), {1, 3, H, W});
        preds[targets[i]] = net::image_from_tensor(frame, 0);
    }
}

} // namespace

std::vector<Image> colorize_sequence(train::ModelBundle& bundle, const Sequence& seq, int k,
                                     bool use_temporal) {
    const std::size_t L = seq.frames.size();
    const auto refs = reference_indices(L, k);
    std::vector<Image> preds(L);
    for (std::size_t r : refs) preds[r] = seq.frames[r].color;

    auto segment_targets = [&](std::size_t a, std::size_t b) {
        std::vector<std::size_t> t;
        for (std::size_t i = a + 1; i < b; ++i) t.push_back(i);
        return t;
    };

    if (refs.size() == 1) {
        std::vector<std::size_t> targets;
        for (std::size_t i = 1; i < L; ++i) targets.push_back(i);
        auto colored = color_segment(bundle, seq, 0, 0, targets);
        for (std::size_t i = 0; i < targets.size(); ++i) preds[targets[i]] = std::move(colored[i]);
        if (use_temporal) refine_segment(bundle, seq, preds, 0, 0, targets, /*closing_ref=*/false);
        return preds;
    }

    for (std::size_t s = 0; s + 1 < refs.size(); ++s) {
        const std::size_t a = refs[s], b = refs[s + 1];
        const auto targets = segment_targets(a, b);
        if (targets.empty()) continue;
        auto colored = color_segment(bundle, seq, a, b, targets);
        for (std::size_t i = 0; i < targets.size(); ++i) preds[targets[i]] = std::move(colored[i]);
        if (use_temporal) refine_segment(bundle, seq, preds, a, b, targets, /*closing_ref=*/true);
    }
    return preds;
}

EvalReport compute_report(const std::vector<Image>& preds, const Sequence& seq,
                          const std::vector<std::size_t>& ref_indices, int k) {
    EvalReport rep;
    rep.sequence_id = seq.source_id;
    rep.k = k;
    std::set<std::size_t> refs(ref_indices.begin(), ref_indices.end());
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        if (refs.count(i)) continue; // reference frames never enter the averages
        FrameMetrics fm;
        fm.frame_index = i;
        fm.mse = mse(preds[i], seq.frames[i].color);
        fm.psnr = psnr(preds[i], seq.frames[i].color);
        fm.ssim = ssim(preds[i], seq.frames[i].color);
        rep.frames.push_back(fm);
    }
    if (rep.frames.empty()) throw std::invalid_argument("compute_report: no non-reference frames");
    for (const auto& fm : rep.frames) {
        rep.mean_mse += fm.mse;
        rep.mean_psnr += fm.psnr;
        rep.mean_ssim += fm.ssim;
    }
    const double n = static_cast<double>(rep.frames.size());
    rep.mean_mse /= n;
    rep.mean_psnr /= n;
    rep.mean_ssim /= n;
    return rep;
}

std::vector<std::vector<double>> embed_features(train::ModelBundle& bundle,
                                                const std::vector<const Image*>& lines,
                                                const std::vector<const Image*>& colors) {
    NoGradGuard ng;
    const DType dt = bundle.cfg.dtype();
    Tensor line_t = net::tensor_from_images(lines, dt);
    Tensor color_t = net::tensor_from_images(colors, dt);
    color::StyleEmbedding style = bundle.color->embedder()({concat({line_t, color_t}, 1)});
    const std::int64_t N = style.sev.shape()[0], E = style.sev.shape()[1];
    std::vector<std::vector<double>> out;
    auto vals = style.sev.to_vector();
    for (std::int64_t i = 0; i < N; ++i)
        out.emplace_back(vals.begin() + i * E, vals.begin() + (i + 1) * E);
    return out;
}

void fill_ffd(train::ModelBundle& bundle, EvalReport& report, const std::vector<Image>& preds,
              const Sequence& seq, const std::vector<std::size_t>& ref_indices) {
    std::set<std::size_t> refs(ref_indices.begin(), ref_indices.end());
    std::vector<const Image*> lines, pred_colors, true_colors;
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        if (refs.count(i)) continue;
        lines.push_back(&seq.frames[i].line);
        pred_colors.push_back(&preds[i]);
        true_colors.push_back(&seq.frames[i].color);
    }
    if (lines.size() < 2) {
        report.ffd = 0.0;
        return;
    }
    report.ffd = frechet_from_features(embed_features(bundle, lines, pred_colors),
                                       embed_features(bundle, lines, true_colors));
}

EvalReport evaluate_sequence(train::ModelBundle& bundle, const Sequence& seq, int k, bool use_temporal) {
    const auto refs = reference_indices(seq.frames.size(), k);
    const auto preds = colorize_sequence(bundle, seq, k, use_temporal);
    EvalReport rep = compute_report(preds, seq, refs, k);
    fill_ffd(bundle, rep, preds, seq, refs);
    return rep;
}

} // namespace refcolor::eval
