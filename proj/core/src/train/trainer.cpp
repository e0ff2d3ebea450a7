#include <cmath>

#include "refcolor/data/dataprep.hpp"
#include "refcolor/net/layers.hpp"
#include "refcolor/train/trainer.hpp"

namespace refcolor::train {

namespace {

using data::Sequence;

void check_finite(double v, const char* what, std::int64_t step) {
    if (!std::isfinite(v))
        throw NumericError(std::string("non-finite ") + what + " at step " + std::to_string(step), step);
}

void clip_grads(const std::vector<Parameter*>& params, double max_norm) {
    if (max_norm <= 0.0) return;
    double total = 0.0;
    for (auto* p : params) {
        if (!p->tensor.has_grad()) continue;
        dispatch_dtype(p->tensor.dtype(), [&](auto tag) {
            using T = decltype(tag);
            for (T g : p->tensor.grad_data<T>()) total += static_cast<double>(g) * static_cast<double>(g);
        });
    }
    total = std::sqrt(total);
    if (total <= max_norm) return;
    const double scale = max_norm / total;
    for (auto* p : params) {
        if (!p->tensor.has_grad()) continue;
        dispatch_dtype(p->tensor.dtype(), [&](auto tag) {
            using T = decltype(tag);
            auto g = p->tensor.node()->grad_buf<T>();
            for (auto& v : g) v = static_cast<T>(static_cast<double>(v) * scale);
        });
    }
}

std::int64_t steps_for(int steps_override, int epochs, std::size_t n_seqs, int batch) {
    if (steps_override > 0) return steps_override;
    const std::int64_t per_epoch =
        std::max<std::int64_t>(1, (static_cast<std::int64_t>(n_seqs) + batch - 1) / batch);
    return per_epoch * epochs;
}

// Per-frame perceptual and style losses averaged over a [N,3,T,H,W] volume.
Tensor per_frame_mean(const std::function<Tensor(const Tensor&, const Tensor&)>& term, const Tensor& pred,
                      const Tensor& target) {
    const std::int64_t T = pred.shape()[2];
    Tensor acc;
    for (std::int64_t t = 0; t < T; ++t) {
        Tensor pf = reshape(slice(pred, 2, t, 1),
                            {pred.shape()[0], pred.shape()[1], pred.shape()[3], pred.shape()[4]});
        Tensor tf = reshape(slice(target, 2, t, 1),
                            {target.shape()[0], target.shape()[1], target.shape()[3], target.shape()[4]});
        Tensor v = term(pf, tf);
        acc = acc.defined() ? add(acc, v) : v;
    }
    return affine(acc, 1.0 / static_cast<double>(T), 0.0);
}

struct TemporalBatch {
    Tensor lines;     // [N, 1, T, H, W]
    Tensor colors_in; // [N, 3, T, H, W] with reference colors at both ends
    Tensor colors_gt; // [N, 3, T, H, W]
};

// Assembles one chronological window volume, running the frozen color
// transform network on the interior frames.
TemporalBatch sample_temporal_batch(TrainerState& state, const std::vector<Sequence>& seqs) {
    const DType dt = state.bundle.cfg.dtype();
    const auto& seq =
        seqs[static_cast<std::size_t>(state.data_rng.uniform_int(0, static_cast<std::int64_t>(seqs.size()) - 1))];
    data::Window win = data::sample_window(seq, state.data_rng);

    const int T = 8;
    const std::size_t n_targets = win.targets.size();

    Tensor y_trans;
    {
        NoGradGuard ng; // the color transform network stays frozen here
        color::GenInputs gin;
        std::vector<const data::Image*> lines, dists;
        for (const auto& f : win.targets) {
            lines.push_back(&f.line);
            dists.push_back(&f.dist);
        }
        gin.line = net::tensor_from_images(lines, dt);
        gin.dist = net::tensor_from_images(dists, dt);
        for (const auto& ref : win.refs.refs) {
            std::vector<const data::Image*> rl(n_targets, &ref.line), rd(n_targets, &ref.dist),
                rc(n_targets, &ref.color);
            gin.ref_lines.push_back(net::tensor_from_images(rl, dt));
            gin.ref_dists.push_back(net::tensor_from_images(rd, dt));
            gin.ref_colors.push_back(net::tensor_from_images(rc, dt));
        }
        y_trans = state.bundle.color->generator_forward(gin).y_trans; // [6, 3, H, W]
    }

    const auto& first = win.refs.refs[0];
    const auto& last = win.refs.refs[1];
    const std::int64_t H = y_trans.shape()[2], W = y_trans.shape()[3];

    std::vector<Tensor> color_frames, gt_frames, line_frames;
    color_frames.push_back(reshape(net::tensor_from_image(first.color, dt), {1, 3, 1, H, W}));
    gt_frames.push_back(color_frames.back());
    line_frames.push_back(reshape(net::tensor_from_image(first.line, dt), {1, 1, 1, H, W}));
    for (std::size_t i = 0; i < n_targets; ++i) {
        color_frames.push_back(reshape(slice(y_trans, 0, static_cast<std::int64_t>(i), 1), {1, 3, 1, H, W}));
        gt_frames.push_back(reshape(net::tensor_from_image(win.targets[i].color, dt), {1, 3, 1, H, W}));
        line_frames.push_back(reshape(net::tensor_from_image(win.targets[i].line, dt), {1, 1, 1, H, W}));
    }
    color_frames.push_back(reshape(net::tensor_from_image(last.color, dt), {1, 3, 1, H, W}));
    gt_frames.push_back(color_frames.back());
    line_frames.push_back(reshape(net::tensor_from_image(last.line, dt), {1, 1, 1, H, W}));

    TemporalBatch b;
    b.lines = concat(line_frames, 2);
    b.colors_in = concat(color_frames, 2).detach();
    b.colors_gt = concat(gt_frames, 2).detach();
    (void)T;
    return b;
}

} // namespace

ColorBatch sample_color_batch(TrainerState& state, const std::vector<Sequence>& seqs) {
    const auto& cfg = state.bundle.cfg;
    const DType dt = cfg.dtype();
    std::vector<const data::Image*> lines, dists, targets;
    std::vector<const data::Image*> ref_lines[2], ref_dists[2], ref_colors[2];
    std::vector<data::Window> windows;
    windows.reserve(static_cast<std::size_t>(cfg.batch));
    for (int b = 0; b < cfg.batch; ++b) {
        const auto& seq = seqs[static_cast<std::size_t>(
            state.data_rng.uniform_int(0, static_cast<std::int64_t>(seqs.size()) - 1))];
        windows.push_back(data::sample_window(seq, state.data_rng));
        const auto& win = windows.back();
        const auto t = static_cast<std::size_t>(state.data_rng.uniform_int(0, 5));
        lines.push_back(&win.targets[t].line);
        dists.push_back(&win.targets[t].dist);
        targets.push_back(&win.targets[t].color);
        for (int r = 0; r < 2; ++r) {
            ref_lines[r].push_back(&win.refs.refs[static_cast<std::size_t>(r)].line);
            ref_dists[r].push_back(&win.refs.refs[static_cast<std::size_t>(r)].dist);
            ref_colors[r].push_back(&win.refs.refs[static_cast<std::size_t>(r)].color);
        }
    }
    ColorBatch batch;
    batch.inputs.line = net::tensor_from_images(lines, dt);
    batch.inputs.dist = net::tensor_from_images(dists, dt);
    for (int r = 0; r < 2; ++r) {
        batch.inputs.ref_lines.push_back(net::tensor_from_images(ref_lines[r], dt));
        batch.inputs.ref_dists.push_back(net::tensor_from_images(ref_dists[r], dt));
        batch.inputs.ref_colors.push_back(net::tensor_from_images(ref_colors[r], dt));
    }
    batch.target = net::tensor_from_images(targets, dt);
    return batch;
}

namespace {

StepLog color_step(TrainerState& state, const std::vector<Sequence>& seqs) {
    auto& bundle = state.bundle;
    const auto& cfg = bundle.cfg;
    auto& color = *bundle.color;

    ColorBatch batch = sample_color_batch(state, seqs);
    color::GenOutputs out = color.generator_forward(batch.inputs);

    // Discriminator step on detached fakes.
    color.params().zero_grad();
    Tensor d_real = color.discriminate(batch.inputs.line, batch.target);
    Tensor d_fake_det = color.discriminate(batch.inputs.line, out.y_trans.detach());
    loss::GanLosses dl = loss::gan_losses(d_real, d_fake_det);
    const double loss_d = dl.d.item();
    dl.d.backward();
    auto d_params = color.discriminator_params();
    clip_grads(d_params, cfg.grad_clip);
    state.opt_color_d.step(d_params);

    // Generator step against the updated discriminator.
    color.params().zero_grad();
    Tensor d_fake = color.discriminate(batch.inputs.line, out.y_trans);
    loss::LossParts parts;
    parts.l1 = loss::l1_loss(out.y_trans, batch.target);
    parts.perc = loss::perceptual_loss(*bundle.pyramid, out.y_trans, batch.target);
    parts.style = loss::style_loss(*bundle.pyramid, out.y_trans, batch.target, cfg.gram_normalize);
    parts.latent = loss::latent_loss(out.y_sim, out.y_mid, batch.target);
    parts.gan = loss::gan_losses(d_real.detach(), d_fake).g;
    Tensor total = loss::total_loss(parts, cfg.weights);

    StepLog log;
    log.total = total.item();
    log.l1 = parts.l1.item();
    log.perc = parts.perc.item();
    log.style = parts.style.item();
    log.latent = parts.latent.item();
    log.gan_d = loss_d;
    log.gan_g = parts.gan.item();

    total.backward();
    auto g_params = color.generator_params();
    clip_grads(g_params, cfg.grad_clip);
    state.opt_color_g.step(g_params);
    color.params().zero_grad();
    return log;
}

StepLog temporal_step(TrainerState& state, const std::vector<Sequence>& seqs) {
    auto& bundle = state.bundle;
    const auto& cfg = bundle.cfg;
    auto& tnet = *bundle.temporal;

    TemporalBatch batch = sample_temporal_batch(state, seqs);
    Tensor refined = tnet.refine_sequence(batch.lines, batch.colors_in);

    tnet.params().zero_grad();
    Tensor d_real = tnet.patch_discriminate(batch.lines, batch.colors_gt);
    Tensor d_fake_det = tnet.patch_discriminate(batch.lines, refined.detach());
    loss::GanLosses dl = loss::gan_losses(d_real, d_fake_det);
    const double loss_d = dl.d.item();
    dl.d.backward();
    auto d_params = tnet.discriminator_params();
    clip_grads(d_params, cfg.grad_clip);
    state.opt_temporal_d.step(d_params);

    tnet.params().zero_grad();
    Tensor d_fake = tnet.patch_discriminate(batch.lines, refined);
    loss::LossParts parts;
    parts.l1 = loss::l1_loss(refined, batch.colors_gt); // equal-size frames: volume mean == frame average
    parts.perc = per_frame_mean(
        [&](const Tensor& a, const Tensor& b) { return loss::perceptual_loss(*bundle.pyramid, a, b); },
        refined, batch.colors_gt);
    parts.style = per_frame_mean(
        [&](const Tensor& a, const Tensor& b) {
            return loss::style_loss(*bundle.pyramid, a, b, cfg.gram_normalize);
        },
        refined, batch.colors_gt);
    parts.gan = loss::gan_losses(d_real.detach(), d_fake).g;
    Tensor total = loss::total_loss(parts, cfg.weights);

    StepLog log;
    log.total = total.item();
    log.l1 = parts.l1.item();
    log.perc = parts.perc.item();
    log.style = parts.style.item();
    log.latent = 0.0;
    log.gan_d = loss_d;
    log.gan_g = parts.gan.item();

    total.backward();
    auto g_params = tnet.generator_params();
    clip_grads(g_params, cfg.grad_clip);
    state.opt_temporal_g.step(g_params);
    tnet.params().zero_grad();
    return log;
}

void validate_dataset(const std::vector<Sequence>& seqs, const char* what) {
    if (seqs.empty()) throw std::invalid_argument(std::string(what) + ": empty dataset");
    for (const auto& s : seqs)
        if (s.frames.size() < 8)
            throw std::invalid_argument(std::string(what) + ": sequence " + s.source_id +
                                        " shorter than 8 frames");
}

} // namespace

void train_color_stage(TrainerState& state, const std::vector<Sequence>& train_seqs, const LogFn& log) {
    validate_dataset(train_seqs, "train_color_stage");
    const auto& cfg = state.bundle.cfg;
    const std::int64_t steps = steps_for(cfg.steps_color, cfg.epochs_color, train_seqs.size(), cfg.batch);
    for (std::int64_t i = 0; i < steps; ++i) {
        StepLog entry = color_step(state, train_seqs);
        entry.step = ++state.step_color;
        check_finite(entry.total, "color-stage loss", entry.step);
        if (log) log(entry);
    }
    state.stage_done = std::max(state.stage_done, 1);
}

void train_temporal_stage(TrainerState& state, const std::vector<Sequence>& train_seqs, const LogFn& log) {
    validate_dataset(train_seqs, "train_temporal_stage");
    if (state.stage_done < 1)
        throw std::invalid_argument("train_temporal_stage: color stage checkpoint required first");
    const auto& cfg = state.bundle.cfg;
    const std::int64_t steps =
        steps_for(cfg.steps_temporal, cfg.epochs_temporal, train_seqs.size(), cfg.batch);
    for (std::int64_t i = 0; i < steps; ++i) {
        StepLog entry = temporal_step(state, train_seqs);
        entry.step = ++state.step_temporal;
        check_finite(entry.total, "temporal-stage loss", entry.step);
        if (log) log(entry);
    }
    state.stage_done = std::max(state.stage_done, 2);
}

void fine_tune(TrainerState& state, const std::vector<Sequence>& sequences, const LogFn& log) {
    validate_dataset(sequences, "fine_tune");
    if (state.stage_done < 1) throw std::invalid_argument("fine_tune: needs a trained checkpoint");
    const auto& cfg = state.bundle.cfg;
    const bool tune_temporal = cfg.finetune_temporal && state.stage_done >= 2;
    const std::int64_t steps =
        steps_for(cfg.steps_finetune, cfg.epochs_finetune, sequences.size(), cfg.batch);
    for (std::int64_t i = 0; i < steps; ++i) {
        StepLog entry = color_step(state, sequences);
        entry.step = ++state.step_finetune;
        check_finite(entry.total, "fine-tune color loss", entry.step);
        if (log) log(entry);
        if (tune_temporal) {
            StepLog tentry = temporal_step(state, sequences);
            tentry.step = state.step_finetune;
            check_finite(tentry.total, "fine-tune temporal loss", tentry.step);
        }
    }
}

} // namespace refcolor::train
