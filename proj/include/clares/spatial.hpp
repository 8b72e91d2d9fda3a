#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "clares/nn.hpp"

namespace clares {

struct SpatialConfigView {
    std::size_t base_channels = 64;
    std::size_t embed_dim = 256;
    std::size_t se_reduction = 16;
    std::size_t cbam_kernel = 7;
    double internal_dropout = 0.1;
};

// Channel gate from pooled statistics:
// gate = sigmoid(W2 . Dropout(GELU(W1 . [GAP(x); GMP(x)])))
// hidden size max(C / reduction, 4).
template <class S>
struct SeBlock {
    Linear<S> fc1, fc2;
    double dropout_p = 0.1;

    SeBlock() = default;
    SeBlock(std::size_t channels, std::size_t reduction, double drop, Rng& rng)
        : fc1(2 * channels, std::max<std::size_t>(channels / reduction, 4), rng),
          fc2(std::max<std::size_t>(channels / reduction, 4), channels, rng),
          dropout_p(drop) {}

    Tensor<S> gate(const Tensor<S>& x, const Ctx& ctx) const {
        auto pooled = concat<S>({global_avg_pool(x), global_max_pool(x)}, 1);  // (N,2C)
        auto h = gelu(fc1.forward(pooled));
        h = dropout(h, dropout_p, ctx.training, ctx.rng);
        return sigmoid(fc2.forward(h));  // (N,C)
    }

    Tensor<S> forward(const Tensor<S>& x, const Ctx& ctx) const {
        return mul_channel_gate(x, gate(x, ctx));
    }

    void collect(const std::string& p, StateDict<S>& sd) {
        fc1.collect(p + ".fc1", sd);
        fc2.collect(p + ".fc2", sd);
    }
};

// Multi-scale stem: four parallel convolutions (1,3,5,7) with
// base_channels/4 outputs each, concatenated and refined by an SE block.
template <class S>
struct MultiScaleStem {
    std::vector<Conv2dLayer<S>> branches;
    SeBlock<S> se;

    MultiScaleStem() = default;
    MultiScaleStem(const SpatialConfigView& cfg, Rng& rng) {
        const std::size_t per = cfg.base_channels / 4;
        for (std::size_t k : {std::size_t{1}, std::size_t{3}, std::size_t{5},
                              std::size_t{7}})
            branches.emplace_back(1, per, k, rng, 1, k / 2);
        se = SeBlock<S>(cfg.base_channels, cfg.se_reduction, cfg.internal_dropout, rng);
    }

    Tensor<S> forward(const Tensor<S>& x, const Ctx& ctx) const {
        // the widest branch must fit the patch, padding aside
        if (x.dim(2) < 7 || x.dim(3) < 7)
            throw ArgumentError("stem: patch smaller than the largest kernel");
        std::vector<Tensor<S>> outs;
        outs.reserve(branches.size());
        for (const auto& b : branches) outs.push_back(b.forward(x));
        return se.forward(concat(outs, 1), ctx);
    }

    void collect(const std::string& p, StateDict<S>& sd) {
        for (std::size_t i = 0; i < branches.size(); ++i)
            branches[i].collect(p + ".branch" + std::to_string(i), sd);
        se.collect(p + ".se", sd);
    }
};

// Residual block with dilated second convolution and SE-gated residual path:
//   F^ = BN2(Conv3x3,d(Dropout(GELU(BN1(Conv3x3(x))))))
//   out = GELU(x + SE(F^))
template <class S>
struct ResidualBlock {
    Conv2dLayer<S> conv1, conv2;
    BatchNorm2d<S> bn1, bn2;
    SeBlock<S> se;
    double dropout_p = 0.1;

    ResidualBlock() = default;
    ResidualBlock(std::size_t channels, std::size_t dilation, const SpatialConfigView& cfg,
                  Rng& rng)
        : conv1(channels, channels, 3, rng, 1, 1),
          conv2(channels, channels, 3, rng, dilation, dilation),
          bn1(channels),
          bn2(channels),
          se(channels, cfg.se_reduction, cfg.internal_dropout, rng),
          dropout_p(cfg.internal_dropout) {}

    Tensor<S> forward(const Tensor<S>& x, Ctx& ctx) {
        auto h = gelu(bn1.forward(conv1.forward(x), ctx));
        h = dropout(h, dropout_p, ctx.training, ctx.rng);
        h = bn2.forward(conv2.forward(h), ctx);
        return gelu(add(x, se.forward(h, ctx)));
    }

    void collect(const std::string& p, StateDict<S>& sd) {
        conv1.collect(p + ".conv1", sd);
        conv2.collect(p + ".conv2", sd);
        bn1.collect(p + ".bn1", sd);
        bn2.collect(p + ".bn2", sd);
        se.collect(p + ".se", sd);
    }
};

// Channel attention with a shared MLP over GAP and GMP vectors, then spatial
// attention from four channel-wise statistics (mean, max, std, min) through a
// 7x7 convolution.
template <class S>
struct CbamBlock {
    Linear<S> mlp1, mlp2;  // shared across the two pooled vectors
    Conv2dLayer<S> spatial_conv;

    CbamBlock() = default;
    CbamBlock(std::size_t channels, const SpatialConfigView& cfg, Rng& rng)
        : mlp1(channels, std::max<std::size_t>(channels / cfg.se_reduction, 4), rng),
          mlp2(std::max<std::size_t>(channels / cfg.se_reduction, 4), channels, rng),
          spatial_conv(4, 1, cfg.cbam_kernel, rng, 1, 0),
          spatial_pad(cfg.cbam_kernel / 2) {}

    Tensor<S> channel_gate(const Tensor<S>& x) const {
        auto shared = [&](const Tensor<S>& v) { return mlp2.forward(gelu(mlp1.forward(v))); };
        return sigmoid(add(shared(global_avg_pool(x)), shared(global_max_pool(x))));
    }

    Tensor<S> forward(const Tensor<S>& x, const Ctx& /*ctx*/) const {
        auto xc = mul_channel_gate(x, channel_gate(x));
        auto stats = channel_stats(xc);  // (N,4,H,W)
        // reflection padding keeps the gate free of border artifacts: a
        // spatially constant input yields a spatially constant gate
        auto gate = sigmoid(spatial_conv.forward(reflect_pad2d(stats, spatial_pad)));
        auto g3 = reshape(gate, {x.dim(0), x.dim(2), x.dim(3)});
        return mul_spatial_gate(xc, g3);
    }

    std::size_t spatial_pad = 3;

    void collect(const std::string& p, StateDict<S>& sd) {
        mlp1.collect(p + ".mlp1", sd);
        mlp2.collect(p + ".mlp2", sd);
        spatial_conv.collect(p + ".spatial_conv", sd);
    }
};

// The full spatial pathway. Input (N,T,P,P) is flattened to N*T
// single-channel band images (weights shared across bands), pushed through
// stem -> 4 residual blocks (dilations 1..4) -> CBAM, pooled (GAP||GMP) and
// projected to the embedding width with a layer-normalized linear map.
// Output: (N,T,D).
template <class S>
struct SpatialExtractor {
    SpatialConfigView cfg;
    MultiScaleStem<S> stem;
    std::vector<ResidualBlock<S>> blocks;
    CbamBlock<S> cbam;
    Linear<S> proj;
    LayerNormLayer<S> proj_norm;

    SpatialExtractor() = default;
    SpatialExtractor(const SpatialConfigView& cfg_, Rng& rng) : cfg(cfg_) {
        stem = MultiScaleStem<S>(cfg, rng);
        for (std::size_t d = 1; d <= 4; ++d)
            blocks.emplace_back(cfg.base_channels, d, cfg, rng);
        cbam = CbamBlock<S>(cfg.base_channels, cfg, rng);
        proj = Linear<S>(2 * cfg.base_channels, cfg.embed_dim, rng);
        proj_norm = LayerNormLayer<S>(cfg.embed_dim);
    }

    Tensor<S> forward(const Tensor<S>& x, Ctx& ctx) {
        if (x.ndim() != 4) throw DimensionError("spatial extractor: expected (N,T,P,P)");
        const std::size_t n = x.dim(0), t = x.dim(1), p = x.dim(2);
        if (p < 7 || p % 2 == 0)
            throw ArgumentError("spatial extractor: patch size must be odd and >= 7");
        auto h = reshape(x, {n * t, std::size_t{1}, p, x.dim(3)});
        h = stem.forward(h, ctx);
        for (auto& blk : blocks) h = blk.forward(h, ctx);
        h = cbam.forward(h, ctx);
        auto pooled = concat<S>({global_avg_pool(h), global_max_pool(h)}, 1);
        auto e = proj_norm.forward(proj.forward(pooled));  // (N*T, D)
        return reshape(e, {n, t, cfg.embed_dim});
    }

    void collect(const std::string& p, StateDict<S>& sd) {
        stem.collect(p + ".stem", sd);
        for (std::size_t i = 0; i < blocks.size(); ++i)
            blocks[i].collect(p + ".block" + std::to_string(i), sd);
        cbam.collect(p + ".cbam", sd);
        proj.collect(p + ".proj", sd);
        proj_norm.collect(p + ".proj_norm", sd);
    }
};

}  // namespace clares
