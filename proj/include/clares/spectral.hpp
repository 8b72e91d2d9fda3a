#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "clares/nn.hpp"

namespace clares {

struct LatentBounds {
    std::size_t l_base = 16;
    std::size_t t_base = 16;
    std::size_t l_min = 8;
    std::size_t l_max = 64;
};

// Number of latent tokens for a sequence of length t:
//   L' = floor(l_base * log2(max(t, t_base) / t_base)),  L = clamp(L', l_min, l_max)
inline std::size_t latent_count(std::size_t t, const LatentBounds& b = {}) {
    if (t == 0) throw ArgumentError("latent_count: sequence length must be positive");
    const double ratio =
        static_cast<double>(std::max(t, b.t_base)) / static_cast<double>(b.t_base);
    const double raw = std::floor(static_cast<double>(b.l_base) * std::log2(ratio));
    const auto l = static_cast<std::size_t>(raw);
    return std::min(std::max(l, b.l_min), b.l_max);
}

// Hybrid positional encoding: first D/2 features follow the sinusoidal law
// evaluated with the half width as its dimension normalizer, the remaining
// D/2 are a trainable table. Rows t in [0, T) are added to the embeddings.
template <class S>
struct HybridPositionalEncoding {
    std::size_t dim = 0;    // D (even); each half is D/2
    std::size_t t_max = 0;  // learnable rows available
    Tensor<S> learn_table;  // (t_max, D/2), N(0, 0.02)

    HybridPositionalEncoding() = default;
    HybridPositionalEncoding(std::size_t d, std::size_t t_max_, Rng& rng)
        : dim(d), t_max(t_max_) {
        if (d % 2 != 0) throw ArgumentError("positional encoding: D must be even");
        learn_table = gaussian_tensor<S>({t_max, d / 2}, 0.0, 0.02, rng, true);
    }

    // Fixed half, rows [0, t): entry j uses pair index i = j/2 and
    // angle = t / 10000^(2i / (D/2)); even j -> sin, odd j -> cos.
    Tensor<S> sin_table(std::size_t t) const {
        const std::size_t half = dim / 2;
        Tensor<S> tab = Tensor<S>::zeros({t, half});
        for (std::size_t row = 0; row < t; ++row)
            for (std::size_t j = 0; j < half; ++j) {
                const double expo =
                    2.0 * static_cast<double>(j / 2) / static_cast<double>(half);
                const double angle =
                    static_cast<double>(row) / std::pow(10000.0, expo);
                tab.values()[row * half + j] =
                    static_cast<S>((j % 2 == 0) ? std::sin(angle) : std::cos(angle));
            }
        return tab;
    }

    // (T, D) table; T limited by the learnable rows.
    Tensor<S> table(std::size_t t) const {
        if (t > t_max)
            throw ArgumentError("positional encoding: sequence length " +
                                std::to_string(t) + " exceeds capacity " +
                                std::to_string(t_max));
        auto learned = slice(learn_table, 0, 0, t);
        return concat<S>({sin_table(t), learned}, 1);
    }

    // E (N,T,D) -> E + PE
    Tensor<S> add_to(const Tensor<S>& e) const {
        return add_suffix(e, table(e.dim(1)));
    }

    void collect(const std::string& p, StateDict<S>& sd) {
        sd.add(p + ".learn_table", learn_table, true);
    }
};

// ---------------------------------------------------------------------------
// Multi-Scale Spectral Latent Attention.
//
// Per scale s: downsample the sequence, slice L(T_s) rows from the shared
// latent bank, then encode (input->latent cross-attention), process (latent
// self-attention + FFN) and decode (latent->output cross-attention). Scale
// outputs are upsampled back to length T by nearest-neighbor repetition,
// concatenated on features and fused through a 3D->2D->D FFN with a residual
// back to the input. Attention/FFN parameters are per scale; the latent bank
// is shared across scales.
// ---------------------------------------------------------------------------
template <class S>
struct MslaScalePath {
    MultiHeadAttention<S> encode_attn, self_attn, decode_attn;
    FeedForward<S> latent_ffn;
    LayerNormLayer<S> ln_encode, ln_self, ln_decode;

    MslaScalePath() = default;
    MslaScalePath(std::size_t dim, std::size_t heads, double attn_drop,
                  double internal_drop, std::size_t latent_expansion, Rng& rng)
        : encode_attn(dim, heads, attn_drop, rng),
          self_attn(dim, heads, attn_drop, rng),
          decode_attn(dim, heads, attn_drop, rng),
          latent_ffn(dim, latent_expansion * dim, dim, internal_drop, rng),
          ln_encode(dim),
          ln_self(dim),
          ln_decode(dim) {}

    void collect(const std::string& p, StateDict<S>& sd) {
        encode_attn.collect(p + ".encode_attn", sd);
        self_attn.collect(p + ".self_attn", sd);
        decode_attn.collect(p + ".decode_attn", sd);
        latent_ffn.collect(p + ".latent_ffn", sd);
        ln_encode.collect(p + ".ln_encode", sd);
        ln_self.collect(p + ".ln_self", sd);
        ln_decode.collect(p + ".ln_decode", sd);
    }
};

template <class S>
struct MslaBlock {
    std::vector<std::size_t> scales;
    LatentBounds bounds;
    Tensor<S> latent_bank;  // (l_max, D), shared across scales
    std::vector<MslaScalePath<S>> paths;
    FeedForward<S> fuse_ffn;  // 3D -> 2D -> D
    LayerNormLayer<S> ln_fuse;

    MslaBlock() = default;
    MslaBlock(std::size_t dim, std::size_t heads, std::vector<std::size_t> scales_,
              const LatentBounds& bounds_, double attn_drop, double internal_drop,
              std::size_t latent_expansion, Rng& rng)
        : scales(std::move(scales_)), bounds(bounds_) {
        latent_bank = gaussian_tensor<S>({bounds.l_max, dim}, 0.0, 0.02, rng, true);
        for (std::size_t i = 0; i < scales.size(); ++i)
            paths.emplace_back(dim, heads, attn_drop, internal_drop, latent_expansion,
                               rng);
        fuse_ffn = FeedForward<S>(scales.size() * dim, 2 * dim, dim, internal_drop, rng);
        ln_fuse = LayerNormLayer<S>(dim);
    }

    Tensor<S> forward(const Tensor<S>& e, Ctx& ctx) {
        if (e.ndim() != 3) throw DimensionError("msla: expected (N,T,D)");
        const std::size_t n = e.dim(0), t = e.dim(1);
        std::vector<Tensor<S>> outs;
        outs.reserve(scales.size());
        for (std::size_t si = 0; si < scales.size(); ++si) {
            const std::size_t s = scales[si];
            auto& path = paths[si];
            auto es = (s == 1) ? e : avgpool_seq(e, s);
            const std::size_t ts = es.dim(1);
            const std::size_t l = latent_count(ts, bounds);
            auto lat = broadcast_batch(slice(latent_bank, 0, 0, l), n);
            auto z = path.ln_encode.forward(
                add(lat, path.encode_attn.forward(lat, es, es, ctx)));
            z = path.ln_self.forward(add(z, path.self_attn.forward(z, z, z, ctx)));
            z = add(z, path.latent_ffn.forward(z, ctx));
            auto o = path.decode_attn.forward(es, z, z, ctx);
            o = path.ln_decode.forward(add(es, o));
            if (s > 1) o = slice(repeat_interleave(o, 1, s), 1, 0, t);
            outs.push_back(o);
        }
        auto fused = fuse_ffn.forward(concat(outs, 2), ctx);
        return ln_fuse.forward(add(e, fused));
    }

    void collect(const std::string& p, StateDict<S>& sd) {
        sd.add(p + ".latent_bank", latent_bank, true);
        for (std::size_t i = 0; i < paths.size(); ++i)
            paths[i].collect(p + ".scale" + std::to_string(scales[i]), sd);
        fuse_ffn.collect(p + ".fuse_ffn", sd);
        ln_fuse.collect(p + ".ln_fuse", sd);
    }
};

// ---------------------------------------------------------------------------
// Spectral encoder layer:
//   H_rnn = BiGRU(BiLSTM(H_prev)) + H_prev
//   H     = H_prev + LN(FFN4(MSLA(H_rnn)))
// RNN hidden width is D/2 per direction so the bidirectional output keeps D.
// ---------------------------------------------------------------------------
template <class S>
struct SpectralEncoderLayer {
    BiLstm<S> lstm;
    BiGru<S> gru;
    MslaBlock<S> msla;
    FeedForward<S> ffn;
    LayerNormLayer<S> ln_out;

    SpectralEncoderLayer() = default;
    SpectralEncoderLayer(std::size_t dim, std::size_t heads,
                         const std::vector<std::size_t>& scales,
                         const LatentBounds& bounds, double attn_drop,
                         double internal_drop, Rng& rng) {
        lstm = BiLstm<S>(dim, dim / 2, rng);
        gru = BiGru<S>(dim, dim / 2, rng);
        msla = MslaBlock<S>(dim, heads, scales, bounds, attn_drop, internal_drop, 2, rng);
        ffn = FeedForward<S>(dim, 4 * dim, dim, internal_drop, rng);
        ln_out = LayerNormLayer<S>(dim);
    }

    Tensor<S> forward(const Tensor<S>& h_prev, Ctx& ctx) {
        auto h_rnn = add(gru.forward(lstm.forward(h_prev)), h_prev);
        auto attended = msla.forward(h_rnn, ctx);
        return add(h_prev, ln_out.forward(ffn.forward(attended, ctx)));
    }

    void collect(const std::string& p, StateDict<S>& sd) {
        lstm.collect(p + ".bilstm", sd);
        gru.collect(p + ".bigru", sd);
        msla.collect(p + ".msla", sd);
        ffn.collect(p + ".ffn", sd);
        ln_out.collect(p + ".ln_out", sd);
    }
};

// ---------------------------------------------------------------------------
// Hierarchical fusion: mean-pool each layer output into a summary vector,
// stack the summaries, and let the last layer's summary query the stack:
//   f = LN(s_n + CrossAttn(Q=s_n, K=V=[s_1..s_n]))
// ---------------------------------------------------------------------------
template <class S>
struct HierarchicalFusion {
    MultiHeadAttention<S> attn;
    LayerNormLayer<S> ln;

    HierarchicalFusion() = default;
    HierarchicalFusion(std::size_t dim, std::size_t heads, double attn_drop, Rng& rng)
        : attn(dim, heads, attn_drop, rng), ln(dim) {}

    Tensor<S> forward(const std::vector<Tensor<S>>& layer_outputs, Ctx& ctx) const {
        if (layer_outputs.empty()) throw ArgumentError("fusion: need at least one layer");
        const std::size_t n = layer_outputs[0].dim(0);
        const std::size_t d = layer_outputs[0].dim(2);
        std::vector<Tensor<S>> summaries;
        summaries.reserve(layer_outputs.size());
        for (const auto& h : layer_outputs)
            summaries.push_back(reshape(mean_seq(h), {n, std::size_t{1}, d}));
        auto stack = concat(summaries, 1);  // (N, n_layers, D)
        const auto& q = summaries.back();   // (N, 1, D)
        auto fused = ln.forward(add(q, attn.forward(q, stack, stack, ctx)));
        return reshape(fused, {n, d});
    }

    void collect(const std::string& p, StateDict<S>& sd) {
        attn.collect(p + ".attn", sd);
        ln.collect(p + ".ln", sd);
    }
};

// ---------------------------------------------------------------------------
// Classification head with differentiated dropout:
//   z      = GELU(W1 . Dropout_0.5(LN(f)) + b1)
//   logits = W2 . Dropout_0.25(z) + b2
// ---------------------------------------------------------------------------
template <class S>
struct ClassifierHead {
    LayerNormLayer<S> ln;
    Linear<S> fc1, fc2;
    double dropout1 = 0.5, dropout2 = 0.25;

    ClassifierHead() = default;
    ClassifierHead(std::size_t dim, std::size_t hidden, std::size_t classes,
                   double drop1, double drop2, Rng& rng)
        : ln(dim), fc1(dim, hidden, rng), fc2(hidden, classes, rng),
          dropout1(drop1), dropout2(drop2) {}

    Tensor<S> forward(const Tensor<S>& f, const Ctx& ctx) const {
        auto h = dropout(ln.forward(f), dropout1, ctx.training, ctx.rng);
        auto z = gelu(fc1.forward(h));
        z = dropout(z, dropout2, ctx.training, ctx.rng);
        return fc2.forward(z);
    }

    void collect(const std::string& p, StateDict<S>& sd) {
        ln.collect(p + ".ln", sd);
        fc1.collect(p + ".fc1", sd);
        fc2.collect(p + ".fc2", sd);
    }
};

}  // namespace clares
