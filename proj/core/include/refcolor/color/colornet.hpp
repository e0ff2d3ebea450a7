#pragma once

#include <array>
#include <vector>

#include "refcolor/net/layers.hpp"

namespace refcolor::color {

struct ColorNetConfig {
    std::vector<int> enc_channels{64, 128, 256};              // 3 conv layers, strides 1,2,2
    std::vector<int> embed_channels{64, 128, 256, 256, 256};  // 5 conv layers, stride 2
    std::vector<int> disc_channels{64, 128, 256, 512};        // + final 1-channel conv
    int mid_blocks = 8;
    int reduce_ratio = 8; // C_tilde = C / reduce_ratio
    int mask_kernel = 1;
    double in_eps = 1e-5;
    bool keep_match_matrix = false;
    DType dt = DType::F32;

    int feat_channels() const { return enc_channels.back(); }
    int reduced_channels() const { return enc_channels.back() / reduce_ratio; }
    int embed_dim() const { return embed_channels.back(); }

    static ColorNetConfig tiny(DType dt); // 32x32-scale config for checks
};

// Three-layer encoder (conv + instance norm + ReLU, strides 1,2,2); output is
// exactly quarter resolution.
struct Encoder {
    std::array<net::Conv2dLayer, 3> convs;
    double in_eps = 1e-5;
    Tensor operator()(const Tensor& x) const;
};

struct SimOutput {
    Tensor f_sim;             // [N, C, Ht, Wt] projected similarity feature
    Tensor f_sim_pre;         // [N, Ct, Ht, Wt] pre-projection blend
    Tensor f_mat;             // [N, Ct, Ht, Wt] matching-based transform feature
    std::vector<Tensor> m;    // K masks [N, 1, Ht, Wt]
    std::vector<Tensor> n;
    Tensor match_matrix;      // [N, Ht*Wt*K, Ht*Wt]; defined only when kept
};

struct SimRef {
    Tensor f_dist;  // EnD features of the reference distance field
    Tensor f_color; // EnC features of the reference color image
};

// Similarity-based color transform layer: non-local matching from target
// distance features to reference positions plus learned selection masks.
struct SimLayer {
    net::Conv2dLayer reduce_dist;  // 1x1, C -> Ct (shared for target and refs)
    net::Conv2dLayer reduce_color; // 1x1, C -> Ct
    net::Conv2dLayer conv_m;       // mask_kernel, 2Ct -> 1
    net::Conv2dLayer conv_n;
    net::Conv2dLayer project;      // 1x1, Ct -> C
    bool keep_match_matrix = false;

    SimOutput operator()(const Tensor& f_d, const std::vector<SimRef>& refs) const;
};

struct StyleEmbedding {
    Tensor sev; // [N, E]
    // Per mid block: gamma1, beta1, gamma2, beta2, each [N, C].
    std::vector<std::array<Tensor, 4>> p_em;
};

// Five stride-2 convolutions, global average pooling, mean over references,
// then a two-layer fully connected map to the AdaIN parameters. No spectral
// normalization anywhere in this path.
struct Embedder {
    std::array<net::Conv2dLayer, 5> convs;
    net::LinearLayer fc1, fc2;
    int mid_blocks = 8;
    int feat_channels = 256;

    // pairs: K tensors of [N, 4, H, W] (line concat color).
    StyleEmbedding operator()(const std::vector<Tensor>& pairs) const;
};

struct MidBlocks {
    struct Block {
        net::Conv2dLayer conv1, conv2;
    };
    std::vector<Block> blocks;
    double in_eps = 1e-5;
    Tensor operator()(const Tensor& x, const StyleEmbedding& style) const;
};

struct Decoder {
    std::array<net::Conv2dLayer, 4> convs; // up, conv; up, conv; conv; conv
    double in_eps = 1e-5;
    Tensor operator()(const Tensor& x) const;
};

// Single 1x1 convolution to RGB plus nearest upsample back to input size.
struct LatentDecoder {
    net::Conv2dLayer conv;
    int upsample = 4;
    Tensor operator()(const Tensor& features) const;
};

struct Discriminator {
    std::array<net::Conv2dLayer, 5> convs; // spectral on all but the last
    Tensor operator()(const Tensor& line, const Tensor& color) const; // [N,1] logits
};

struct GenInputs {
    Tensor line; // [N, 1, H, W]
    Tensor dist; // [N, 1, H, W]
    std::vector<Tensor> ref_lines;
    std::vector<Tensor> ref_dists;
    std::vector<Tensor> ref_colors;
};

struct GenOutputs {
    Tensor y_trans, y_sim, y_mid; // [N, 3, H, W] in [0,1]
    SimOutput sim;
    Tensor sev;
};

class ColorModel {
  public:
    ColorModel(const ColorNetConfig& cfg, Rng& rng);

    const ColorNetConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    std::vector<Parameter*> generator_params();
    std::vector<Parameter*> discriminator_params();

    Tensor encode_line(const Tensor& x) const { return enl_(x); }
    Tensor encode_dist(const Tensor& d) const { return end_(d); }
    Tensor encode_color(const Tensor& y) const { return enc_(y); }

    GenOutputs generator_forward(const GenInputs& in) const;
    Tensor discriminate(const Tensor& line, const Tensor& color) const { return disc_(line, color); }

    // Component access for tests and inspection.
    Encoder& enl() { return enl_; }
    Encoder& end() { return end_; }
    Encoder& enc() { return enc_; }
    SimLayer& sim() { return sim_; }
    Embedder& embedder() { return embedder_; }
    MidBlocks& mid() { return mid_; }
    Decoder& decoder() { return decoder_; }
    Discriminator& discriminator() { return disc_; }
    LatentDecoder& latent_sim() { return latent_sim_; }
    LatentDecoder& latent_mid() { return latent_mid_; }

  private:
    ColorNetConfig cfg_;
    ParamStore params_;
    Encoder enl_, end_, enc_;
    SimLayer sim_;
    Embedder embedder_;
    MidBlocks mid_;
    Decoder decoder_;
    LatentDecoder latent_sim_, latent_mid_;
    Discriminator disc_;
};

} // namespace refcolor::color
