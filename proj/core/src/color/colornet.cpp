#include <stdexcept>

#include "refcolor/color/colornet.hpp"

namespace refcolor::color {

ColorNetConfig ColorNetConfig::tiny(DType dt) {
    ColorNetConfig cfg;
    cfg.enc_channels = {4, 8, 16};
    cfg.embed_channels = {8, 8, 16, 16, 16};
    cfg.disc_channels = {8, 16, 16, 16};
    cfg.dt = dt;
    return cfg;
}

Tensor Encoder::operator()(const Tensor& x) const {
    if (x.ndim() != 4) throw std::invalid_argument("Encoder: expects [N,C,H,W]");
    if (x.shape()[2] % 4 != 0 || x.shape()[3] % 4 != 0)
        throw std::invalid_argument("Encoder: spatial extents must be divisible by 4, got " +
                                    shape_str(x.shape()));
    Tensor h = x;
    for (const auto& conv : convs) h = relu(instance_norm(conv(h), in_eps));
    return h;
}

SimOutput SimLayer::operator()(const Tensor& f_d, const std::vector<SimRef>& refs) const {
    if (refs.empty()) throw std::invalid_argument("SimLayer: needs at least one reference");
    const auto& shape = f_d.shape();
    for (const auto& r : refs)
        if (r.f_dist.shape() != shape || r.f_color.shape() != shape)
            throw std::invalid_argument("SimLayer: reference feature shape mismatch");
    const std::int64_t N = shape[0], Ht = shape[2], Wt = shape[3];
    const std::int64_t P = Ht * Wt;
    const std::int64_t K = static_cast<std::int64_t>(refs.size());

    Tensor rd = reduce_dist(f_d); // [N, Ct, Ht, Wt]
    const std::int64_t Ct = rd.shape()[1];
    Tensor rd_rows = permute(reshape(rd, {N, Ct, P}), {0, 2, 1}); // [N, P, Ct]

    std::vector<Tensor> sims;      // per-ref [N, P, P]
    std::vector<Tensor> color_mats; // per-ref [N, Ct, P]
    std::vector<Tensor> rdi_maps;
    for (const auto& r : refs) {
        Tensor rdi = reduce_dist(r.f_dist);
        rdi_maps.push_back(rdi);
        sims.push_back(matmul(rd_rows, reshape(rdi, {N, Ct, P}))); // target rows x ref cols
        color_mats.push_back(reshape(reduce_color(r.f_color), {N, Ct, P}));
    }
    Tensor sim_cat = concat(sims, 2);            // [N, P, P*K]
    Tensor weights = softmax(sim_cat, 2);        // normalized over reference positions
    Tensor f_c = concat(color_mats, 2);          // [N, Ct, P*K]
    Tensor f_mat_flat = matmul(f_c, permute(weights, {0, 2, 1})); // [N, Ct, P]
    Tensor f_mat = reshape(f_mat_flat, {N, Ct, Ht, Wt});

    SimOutput out;
    out.f_mat = f_mat;
    if (keep_match_matrix) out.match_matrix = permute(weights, {0, 2, 1}); // [N, P*K, P]

    Tensor blend_sum;
    for (std::int64_t i = 0; i < K; ++i) {
        Tensor cat = concat({rdi_maps[static_cast<std::size_t>(i)], rd}, 1); // f_di (.) f_d
        Tensor m_i = sigmoid(conv_m(cat));
        Tensor n_i = sigmoid(conv_n(cat));
        out.m.push_back(m_i);
        out.n.push_back(n_i);
        Tensor f_my = mul(reshape(color_mats[static_cast<std::size_t>(i)], {N, Ct, Ht, Wt}), m_i);
        Tensor blend = add(mul(affine(n_i, -1.0, 1.0), f_mat), mul(f_my, n_i));
        blend_sum = blend_sum.defined() ? add(blend_sum, blend) : blend;
    }
    out.f_sim_pre = affine(blend_sum, 1.0 / static_cast<double>(K), 0.0);
    out.f_sim = project(out.f_sim_pre);
    return out;
}

StyleEmbedding Embedder::operator()(const std::vector<Tensor>& pairs) const {
    if (pairs.empty()) throw std::invalid_argument("Embedder: needs at least one reference pair");
    const std::int64_t N = pairs.front().shape()[0];
    const std::int64_t K = static_cast<std::int64_t>(pairs.size());
    for (const auto& p : pairs)
        if (p.ndim() != 4 || p.shape()[1] != 4 || p.shape()[0] != N)
            throw std::invalid_argument("Embedder: each pair must be [N,4,H,W]");

    Tensor h = concat(pairs, 0); // [K*N, 4, H, W]
    for (const auto& conv : convs) h = relu(conv(h));
    Tensor pooled = mean_axes(h, {2, 3}); // [K*N, E]
    const std::int64_t E = pooled.shape()[1];
    Tensor sev = mean_axes(reshape(pooled, {K, N, E}), {0}); // [N, E]

    Tensor hidden = relu(fc1(sev));
    Tensor flat = fc2(hidden); // [N, blocks * 4 * C]

    StyleEmbedding style;
    style.sev = sev;
    const std::int64_t C = feat_channels;
    for (int b = 0; b < mid_blocks; ++b) {
        std::array<Tensor, 4> block_params;
        for (int j = 0; j < 4; ++j)
            block_params[static_cast<std::size_t>(j)] = slice(flat, 1, (b * 4 + j) * C, C);
        style.p_em.push_back(block_params);
    }
    return style;
}

Tensor MidBlocks::operator()(const Tensor& x, const StyleEmbedding& style) const {
    if (style.p_em.size() != blocks.size())
        throw std::invalid_argument("MidBlocks: style parameters incomplete (" +
                                    std::to_string(style.p_em.size()) + " of " +
                                    std::to_string(blocks.size()) + " blocks)");
    const std::int64_t C = x.shape()[1];
    for (const auto& bp : style.p_em)
        for (const auto& t : bp)
            if (t.shape() != std::vector<std::int64_t>{x.shape()[0], C})
                throw std::invalid_argument("MidBlocks: style parameter shape mismatch");
    Tensor h = x;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto& bp = style.p_em[b];
        Tensor r = blocks[b].conv1(h);
        r = relu(adain(r, bp[0], bp[1], in_eps));
        r = blocks[b].conv2(r);
        r = adain(r, bp[2], bp[3], in_eps);
        h = add(h, r);
    }
    return h;
}

Tensor Decoder::operator()(const Tensor& x) const {
    Tensor h = relu(instance_norm(convs[0](upsample_nearest(x, 2)), in_eps));
    h = relu(instance_norm(convs[1](upsample_nearest(h, 2)), in_eps));
    h = relu(instance_norm(convs[2](h), in_eps));
    return affine(tanh_op(convs[3](h)), 0.5, 0.5);
}

Tensor LatentDecoder::operator()(const Tensor& features) const {
    Tensor rgb = affine(tanh_op(conv(features)), 0.5, 0.5);
    return upsample_nearest(rgb, upsample);
}

Tensor Discriminator::operator()(const Tensor& line, const Tensor& color) const {
    if (line.shape()[2] != color.shape()[2] || line.shape()[3] != color.shape()[3])
        throw std::invalid_argument("Discriminator: line/color size mismatch");
    Tensor h = concat({line, color}, 1);
    for (std::size_t i = 0; i + 1 < convs.size(); ++i) h = leaky_relu(convs[i](h), 0.2);
    Tensor logits = convs.back()(h);        // [N, 1, h', w']
    return mean_axes(logits, {2, 3});       // [N, 1]
}

ColorModel::ColorModel(const ColorNetConfig& cfg, Rng& rng) : cfg_(cfg) {
    const DType dt = cfg.dt;
    if (cfg.enc_channels.size() != 3 || cfg.embed_channels.size() != 5 || cfg.disc_channels.size() != 4)
        throw std::invalid_argument("ColorModel: enc_channels needs 3 entries, embed_channels 5, disc_channels 4");
    if (cfg.feat_channels() % cfg.reduce_ratio != 0)
        throw std::invalid_argument("ColorModel: encoder output channels must divide by reduce_ratio");

    auto build_encoder = [&](const char* name, int in_ch) {
        Encoder e;
        e.in_eps = cfg.in_eps;
        const int strides[3] = {1, 2, 2};
        for (int i = 0; i < 3; ++i) {
            e.convs[static_cast<std::size_t>(i)] = net::conv2d_layer(
                params_, std::string("g.") + name + ".conv" + std::to_string(i + 1), in_ch,
                cfg.enc_channels[static_cast<std::size_t>(i)], 3, strides[i], 1, rng, dt,
                /*spectral=*/true);
            in_ch = cfg.enc_channels[static_cast<std::size_t>(i)];
        }
        return e;
    };
    enl_ = build_encoder("enl", 1);
    end_ = build_encoder("end", 1);
    enc_ = build_encoder("enc", 3);

    const int C = cfg.feat_channels();
    const int Ct = cfg.reduced_channels();
    sim_.reduce_dist = net::conv2d_layer(params_, "g.sim.reduce_dist", C, Ct, 1, 1, 0, rng, dt, false);
    sim_.reduce_color = net::conv2d_layer(params_, "g.sim.reduce_color", C, Ct, 1, 1, 0, rng, dt, false);
    sim_.conv_m = net::conv2d_layer(params_, "g.sim.mask_m", 2 * Ct, 1, cfg.mask_kernel, 1,
                                    (cfg.mask_kernel - 1) / 2, rng, dt, false);
    sim_.conv_n = net::conv2d_layer(params_, "g.sim.mask_n", 2 * Ct, 1, cfg.mask_kernel, 1,
                                    (cfg.mask_kernel - 1) / 2, rng, dt, false);
    sim_.project = net::conv2d_layer(params_, "g.sim.project", Ct, C, 1, 1, 0, rng, dt, false);
    sim_.keep_match_matrix = cfg.keep_match_matrix;

    {
        int in_ch = 4;
        for (int i = 0; i < 5; ++i) {
            embedder_.convs[static_cast<std::size_t>(i)] =
                net::conv2d_layer(params_, "g.embed.conv" + std::to_string(i + 1), in_ch,
                                  cfg.embed_channels[static_cast<std::size_t>(i)], 3, 2, 1, rng, dt,
                                  /*spectral=*/false);
            in_ch = cfg.embed_channels[static_cast<std::size_t>(i)];
        }
        const int E = cfg.embed_dim();
        embedder_.fc1 = net::linear_layer(params_, "g.embed.fc1", E, E, rng, dt);
        embedder_.fc2 = net::linear_layer(params_, "g.embed.fc2", E, cfg.mid_blocks * 4 * C, rng, dt);
        embedder_.mid_blocks = cfg.mid_blocks;
        embedder_.feat_channels = C;
        // Start at identity-ish AdaIN: gamma bias 1, beta bias 0.
        dispatch_dtype(dt, [&](auto tag) {
            using T = decltype(tag);
            auto b = embedder_.fc2.b->tensor.data<T>();
            for (int blk = 0; blk < cfg.mid_blocks; ++blk)
                for (int j = 0; j < 4; j += 2) // gamma slots 0 and 2
                    for (int c = 0; c < C; ++c) b[(blk * 4 + j) * C + c] = static_cast<T>(1.0);
        });
    }

    mid_.in_eps = cfg.in_eps;
    for (int b = 0; b < cfg.mid_blocks; ++b) {
        MidBlocks::Block blk;
        blk.conv1 = net::conv2d_layer(params_, "g.mid" + std::to_string(b) + ".conv1", C, C, 3, 1, 1, rng,
                                      dt, false);
        blk.conv2 = net::conv2d_layer(params_, "g.mid" + std::to_string(b) + ".conv2", C, C, 3, 1, 1, rng,
                                      dt, false);
        mid_.blocks.push_back(blk);
    }

    decoder_.in_eps = cfg.in_eps;
    const int dec_ch[4] = {C / 2, C / 4, C / 8, 3};
    int in_ch = C;
    for (int i = 0; i < 4; ++i) {
        decoder_.convs[static_cast<std::size_t>(i)] = net::conv2d_layer(
            params_, "g.dec.conv" + std::to_string(i + 1), in_ch, dec_ch[i], 3, 1, 1, rng, dt,
            /*spectral=*/true);
        in_ch = dec_ch[i];
    }

    latent_sim_.conv = net::conv2d_layer(params_, "g.latent_sim.conv", C, 3, 1, 1, 0, rng, dt, false);
    latent_mid_.conv = net::conv2d_layer(params_, "g.latent_mid.conv", C, 3, 1, 1, 0, rng, dt, false);

    {
        int dch = 4;
        for (std::size_t i = 0; i < cfg.disc_channels.size(); ++i) {
            disc_.convs[i] = net::conv2d_layer(params_, "d.conv" + std::to_string(i + 1), dch,
                                               cfg.disc_channels[i], 3, 2, 1, rng, dt, /*spectral=*/true);
            dch = cfg.disc_channels[i];
        }
        disc_.convs[4] =
            net::conv2d_layer(params_, "d.conv5", dch, 1, 3, 1, 1, rng, dt, /*spectral=*/false);
    }
}

std::vector<Parameter*> ColorModel::generator_params() {
    std::vector<Parameter*> out;
    for (auto* p : params_.all())
        if (p->name.rfind("g.", 0) == 0) out.push_back(p);
    return out;
}

std::vector<Parameter*> ColorModel::discriminator_params() {
    std::vector<Parameter*> out;
    for (auto* p : params_.all())
        if (p->name.rfind("d.", 0) == 0) out.push_back(p);
    return out;
}

GenOutputs ColorModel::generator_forward(const GenInputs& in) const {
    const std::size_t K = in.ref_lines.size();
    if (K == 0 || in.ref_dists.size() != K || in.ref_colors.size() != K)
        throw std::invalid_argument("generator_forward: needs K >= 1 aligned reference triples");

    Tensor f_l = enl_(in.line);
    Tensor f_d = end_(in.dist);
    std::vector<SimRef> refs;
    refs.reserve(K);
    std::vector<Tensor> pairs;
    pairs.reserve(K);
    for (std::size_t i = 0; i < K; ++i) {
        refs.push_back({end_(in.ref_dists[i]), enc_(in.ref_colors[i])});
        pairs.push_back(concat({in.ref_lines[i], in.ref_colors[i]}, 1));
    }

    GenOutputs out;
    out.sim = sim_(f_d, refs);
    StyleEmbedding style = embedder_(pairs);
    out.sev = style.sev;

    Tensor mid_in = add(f_l, out.sim.f_sim);
    Tensor f_mid = mid_(mid_in, style);
    out.y_trans = decoder_(f_mid);
    out.y_sim = latent_sim_(out.sim.f_sim);
    out.y_mid = latent_mid_(f_mid);
    return out;
}

} // namespace refcolor::color
