#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "clares/spatial.hpp"
#include "clares/spectral.hpp"

namespace clares {

// Every architecture hyperparameter in one place. The defaults are the full
// configuration (embedding 256, 64 base channels, 3 encoder layers); tests
// and the synthetic pipeline shrink them.
struct ModelConfig {
    std::size_t classes = 16;
    std::size_t embed_dim = 256;
    std::size_t base_channels = 64;
    std::size_t encoder_layers = 3;
    std::size_t heads = 8;
    std::size_t patch = 11;
    std::size_t head_hidden = 128;
    std::size_t pe_t_max = 512;
    std::size_t se_reduction = 16;
    std::size_t cbam_kernel = 7;
    std::vector<std::size_t> scales = {1, 2, 4};
    LatentBounds latents;  // 16 / 16 / 8 / 64
    double attn_dropout = 0.1;
    double internal_dropout = 0.1;
    double head_dropout1 = 0.5;
    double head_dropout2 = 0.25;
    // Weight init: fan-in scaled uniform U(+-1/sqrt(fan_in)) for linear/conv/
    // rnn/attention weights and biases; N(0, 0.02) for the learnable
    // positional table and the latent banks. Seeded from TrainConfig.
    void validate() const {
        if (classes < 2) throw ConfigError("model.classes: need at least 2 classes");
        if (embed_dim == 0 || embed_dim % 2 != 0)
            throw ConfigError("model.embed_dim: must be positive and even");
        if (embed_dim % heads != 0)
            throw ConfigError("model.heads: embed_dim must be divisible by heads");
        if (base_channels == 0 || base_channels % 4 != 0)
            throw ConfigError("model.base_channels: must be a positive multiple of 4");
        if (encoder_layers == 0)
            throw ConfigError("model.encoder_layers: must be positive");
        if (patch < 7 || patch % 2 == 0)
            throw ConfigError("model.patch: must be odd and >= 7");
        if (scales.empty() || scales.front() != 1)
            throw ConfigError("model.scales: must be ascending and contain 1");
        for (std::size_t i = 1; i < scales.size(); ++i)
            if (scales[i] <= scales[i - 1])
                throw ConfigError("model.scales: must be strictly ascending");
        if (latents.l_min == 0 || latents.l_min > latents.l_max)
            throw ConfigError("model.latents: min/max out of order");
        if (head_hidden == 0) throw ConfigError("model.head_hidden: must be positive");
    }
};

template <class S>
struct ClaresNet {
    ModelConfig cfg;
    SpatialExtractor<S> spatial;
    HybridPositionalEncoding<S> pos_enc;
    std::vector<SpectralEncoderLayer<S>> layers;
    HierarchicalFusion<S> fusion;
    ClassifierHead<S> head;

    struct Output {
        Tensor<S> logits;    // (N, C)
        Tensor<S> features;  // (N, D), the fused representation
    };

    ClaresNet() = default;
    ClaresNet(const ModelConfig& cfg_, Rng& rng) : cfg(cfg_) {
        cfg.validate();
        SpatialConfigView sv;
        sv.base_channels = cfg.base_channels;
        sv.embed_dim = cfg.embed_dim;
        sv.se_reduction = cfg.se_reduction;
        sv.cbam_kernel = cfg.cbam_kernel;
        sv.internal_dropout = cfg.internal_dropout;
        spatial = SpatialExtractor<S>(sv, rng);
        pos_enc = HybridPositionalEncoding<S>(cfg.embed_dim, cfg.pe_t_max, rng);
        for (std::size_t l = 0; l < cfg.encoder_layers; ++l)
            layers.emplace_back(cfg.embed_dim, cfg.heads, cfg.scales, cfg.latents,
                                cfg.attn_dropout, cfg.internal_dropout, rng);
        fusion = HierarchicalFusion<S>(cfg.embed_dim, cfg.heads, cfg.attn_dropout, rng);
        head = ClassifierHead<S>(cfg.embed_dim, cfg.head_hidden, cfg.classes,
                                 cfg.head_dropout1, cfg.head_dropout2, rng);
    }

    Output forward(const Tensor<S>& x, Ctx& ctx) {
        auto embedded = pos_enc.add_to(spatial.forward(x, ctx));
        std::vector<Tensor<S>> states;
        states.reserve(layers.size());
        auto h = embedded;
        for (auto& layer : layers) {
            h = layer.forward(h, ctx);
            states.push_back(h);
        }
        auto f = fusion.forward(states, ctx);
        return {head.forward(f, ctx), f};
    }

    StateDict<S> state_dict() {
        StateDict<S> sd;
        spatial.collect("spatial", sd);
        pos_enc.collect("pos_enc", sd);
        for (std::size_t i = 0; i < layers.size(); ++i)
            layers[i].collect("encoder" + std::to_string(i), sd);
        fusion.collect("fusion", sd);
        head.collect("head", sd);
        return sd;
    }

    std::size_t param_count() { return state_dict().param_count(); }
};

}  // namespace clares
