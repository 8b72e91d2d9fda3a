#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "clares/ops.hpp"
#include "clares/tensor.hpp"

namespace clares {

// Forward-pass context: train/eval switch plus the rng that dropout consumes.
struct Ctx {
    bool training = false;
    Rng* rng = nullptr;
};

// Named views of a model's state. Parameters are trainable leaves (decay
// marks whether AdamW applies weight decay: weight matrices yes,
// biases/normalization affine terms no). Buffers are non-trainable state
// (batch-norm running statistics) that checkpoints must carry.
template <class S>
struct ParamEntry {
    std::string name;
    Tensor<S> tensor;
    bool decay = true;
};

template <class S>
struct BufferEntry {
    std::string name;
    std::vector<S>* data;
};

template <class S>
struct StateDict {
    std::vector<ParamEntry<S>> params;
    std::vector<BufferEntry<S>> buffers;

    void add(const std::string& name, Tensor<S> t, bool decay) {
        params.push_back({name, std::move(t), decay});
    }
    void add_buffer(const std::string& name, std::vector<S>* v) {
        buffers.push_back({name, v});
    }
    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& p : params) n += p.tensor.size();
        return n;
    }
};

// Fan-in scaled uniform init, U(-1/sqrt(fan_in), +1/sqrt(fan_in)), applied to
// weights and biases alike. Embedding-style tables use N(0, 0.02) instead.
template <class S>
Tensor<S> init_fan_in(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return uniform_tensor<S>(std::move(shape), -bound, bound, rng, true);
}

// ---------------------------------------------------------------------------

template <class S>
struct Linear {
    Tensor<S> w;  // (in, out)
    Tensor<S> b;  // (out)

    Linear() = default;
    Linear(std::size_t in, std::size_t out, Rng& rng)
        : w(init_fan_in<S>({in, out}, in, rng)), b(init_fan_in<S>({out}, in, rng)) {}

    Tensor<S> forward(const Tensor<S>& x) const { return add_suffix(matmul(x, w), b); }

    void collect(const std::string& p, StateDict<S>& sd) {
        sd.add(p + ".w", w, true);
        sd.add(p + ".b", b, false);
    }
};

template <class S>
struct Conv2dLayer {
    Tensor<S> w;  // (cout, cin, k, k)
    Tensor<S> b;  // (cout)
    std::size_t dilation = 1;
    std::size_t padding = 0;

    Conv2dLayer() = default;
    Conv2dLayer(std::size_t cin, std::size_t cout, std::size_t k, Rng& rng,
                std::size_t dilation_ = 1, std::size_t padding_ = 0)
        : w(init_fan_in<S>({cout, cin, k, k}, cin * k * k, rng)),
          b(init_fan_in<S>({cout}, cin * k * k, rng)),
          dilation(dilation_),
          padding(padding_) {}

    Tensor<S> forward(const Tensor<S>& x) const {
        return conv2d(x, w, b, dilation, padding);
    }

    void collect(const std::string& p, StateDict<S>& sd) {
        sd.add(p + ".w", w, true);
        sd.add(p + ".b", b, false);
    }
};

template <class S>
struct BatchNorm2d {
    Tensor<S> gamma, beta;
    std::vector<S> running_mean, running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    BatchNorm2d() = default;
    explicit BatchNorm2d(std::size_t channels)
        : gamma(Tensor<S>::full({channels}, S(1))),
          beta(Tensor<S>::zeros({channels})),
          running_mean(channels, S(0)),
          running_var(channels, S(1)) {
        gamma.set_requires_grad(true);
        beta.set_requires_grad(true);
    }

    Tensor<S> forward(const Tensor<S>& x, const Ctx& ctx) {
        if (ctx.training)
            return batch_norm_train(x, gamma, beta, running_mean, running_var, momentum,
                                    eps);
        return batch_norm_eval(x, gamma, beta, running_mean, running_var, eps);
    }

    void collect(const std::string& p, StateDict<S>& sd) {
        sd.add(p + ".gamma", gamma, false);
        sd.add(p + ".beta", beta, false);
        sd.add_buffer(p + ".running_mean", &running_mean);
        sd.add_buffer(p + ".running_var", &running_var);
    }
};

template <class S>
struct LayerNormLayer {
    Tensor<S> gain, bias;
    double eps = 1e-5;

    LayerNormLayer() = default;
    explicit LayerNormLayer(std::size_t dim)
        : gain(Tensor<S>::full({dim}, S(1))), bias(Tensor<S>::zeros({dim})) {
        gain.set_requires_grad(true);
        bias.set_requires_grad(true);
    }

    Tensor<S> forward(const Tensor<S>& x) const { return layer_norm(x, gain, bias, eps); }

    void collect(const std::string& p, StateDict<S>& sd) {
        sd.add(p + ".gain", gain, false);
        sd.add(p + ".bias", bias, false);
    }
};

// Two-layer FFN with GELU and internal dropout: in -> hidden -> out.
template <class S>
struct FeedForward {
    Linear<S> lin1, lin2;
    double dropout_p = 0.1;

    FeedForward() = default;
    FeedForward(std::size_t in, std::size_t hidden, std::size_t out, double drop,
                Rng& rng)
        : lin1(in, hidden, rng), lin2(hidden, out, rng), dropout_p(drop) {}

    Tensor<S> forward(const Tensor<S>& x, const Ctx& ctx) const {
        auto h = gelu(lin1.forward(x));
        h = dropout(h, dropout_p, ctx.training, ctx.rng);
        return lin2.forward(h);
    }

    void collect(const std::string& p, StateDict<S>& sd) {
        lin1.collect(p + ".lin1", sd);
        lin2.collect(p + ".lin2", sd);
    }
};

// ---------------------------------------------------------------------------
// Multi-head scaled dot-product attention. Projections are bias-free D x D
// maps; softmax runs over the key axis with 1/sqrt(d_k) scaling and dropout is
// applied to the attention weights after the softmax.
// ---------------------------------------------------------------------------
template <class S>
struct MultiHeadAttention {
    Tensor<S> wq, wk, wv, wo;  // (D, D)
    std::size_t heads = 1;
    double attn_dropout = 0.0;

    MultiHeadAttention() = default;
    MultiHeadAttention(std::size_t dim, std::size_t h, double drop, Rng& rng)
        : wq(init_fan_in<S>({dim, dim}, dim, rng)),
          wk(init_fan_in<S>({dim, dim}, dim, rng)),
          wv(init_fan_in<S>({dim, dim}, dim, rng)),
          wo(init_fan_in<S>({dim, dim}, dim, rng)),
          heads(h),
          attn_dropout(drop) {
        if (dim % h != 0) throw ArgumentError("attention: dim must be divisible by heads");
    }

    // q (N,Tq,D), k/v (N,Tkv,D) -> (N,Tq,D). attn_out, when given, receives
    // the post-softmax weights (N*heads, Tq, Tkv) before dropout.
    Tensor<S> forward(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v,
                      const Ctx& ctx, Tensor<S>* attn_out = nullptr) const {
        if (q.ndim() != 3 || k.ndim() != 3 || v.ndim() != 3)
            throw DimensionError("attention: expected (N,T,D) operands");
        if (k.dim(1) == 0) throw ArgumentError("attention: empty key axis");
        const std::size_t n = q.dim(0), tq = q.dim(1), d = q.dim(2);
        const std::size_t tkv = k.dim(1);
        const std::size_t dk = d / heads;
        auto split = [&](const Tensor<S>& x, std::size_t t) {
            // (N,T,D) -> (N*h, T, dk)
            auto r = reshape(x, {n, t, heads, dk});
            r = permute(r, {0, 2, 1, 3});
            return reshape(r, {n * heads, t, dk});
        };
        auto qh = split(matmul(q, wq), tq);
        auto kh = split(matmul(k, wk), tkv);
        auto vh = split(matmul(v, wv), tkv);
        auto scores = mul_scalar(bmm(qh, kh, false, true),
                                 static_cast<S>(1.0 / std::sqrt(static_cast<double>(dk))));
        auto attn = softmax_lastdim(scores);
        if (attn_out != nullptr) *attn_out = attn;
        attn = dropout(attn, attn_dropout, ctx.training, ctx.rng);
        auto ctx_h = bmm(attn, vh);  // (N*h, Tq, dk)
        auto merged = reshape(ctx_h, {n, heads, tq, dk});
        merged = reshape(permute(merged, {0, 2, 1, 3}), {n, tq, d});
        return matmul(merged, wo);
    }

    void collect(const std::string& p, StateDict<S>& sd) {
        sd.add(p + ".wq", wq, true);
        sd.add(p + ".wk", wk, true);
        sd.add(p + ".wv", wv, true);
        sd.add(p + ".wo", wo, true);
    }
};

// ---------------------------------------------------------------------------
// Recurrent layers. Gate equations follow the common convention (documented
// here because checkpoints and the scalar oracles in the tests depend on it):
//
// LSTM, gate packing [i f g o]:
//   i = sig(Wi x + bi + Ui h + ci)     f = sig(Wf x + ...)
//   g = tanh(Wg x + ...)               o = sig(Wo x + ...)
//   c' = f*c + i*g                     h' = o * tanh(c')
//
// GRU, gate packing [r z n]:
//   r = sig(Wr x + br + Ur h + cr)     z = sig(Wz x + ...)
//   n = tanh(Wn x + bn + r * (Un h + cn))
//   h' = (1 - z) * n + z * h
//
// Initial hidden/cell states are zeros. Both run on (N,T,Din) and emit every
// timestep.
// ---------------------------------------------------------------------------
template <class S>
struct LstmCellParams {
    Tensor<S> w_ih;  // (Din, 4*Dh)
    Tensor<S> w_hh;  // (Dh, 4*Dh)
    Tensor<S> b_ih, b_hh;

    LstmCellParams() = default;
    LstmCellParams(std::size_t din, std::size_t dh, Rng& rng)
        : w_ih(init_fan_in<S>({din, 4 * dh}, dh, rng)),
          w_hh(init_fan_in<S>({dh, 4 * dh}, dh, rng)),
          b_ih(init_fan_in<S>({4 * dh}, dh, rng)),
          b_hh(init_fan_in<S>({4 * dh}, dh, rng)) {}

    void collect(const std::string& p, StateDict<S>& sd) {
        sd.add(p + ".w_ih", w_ih, true);
        sd.add(p + ".w_hh", w_hh, true);
        sd.add(p + ".b_ih", b_ih, false);
        sd.add(p + ".b_hh", b_hh, false);
    }
};

template <class S>
Tensor<S> lstm_direction(const Tensor<S>& x, const LstmCellParams<S>& p) {
    const std::size_t n = x.dim(0), t = x.dim(1);
    const std::size_t dh = p.w_hh.dim(0);
    Tensor<S> h = Tensor<S>::zeros({n, dh});
    Tensor<S> c = Tensor<S>::zeros({n, dh});
    std::vector<Tensor<S>> outs;
    outs.reserve(t);
    for (std::size_t step = 0; step < t; ++step) {
        auto xt = reshape(slice(x, 1, step, 1), {n, x.dim(2)});
        auto gates = add_suffix(add_suffix(add(matmul(xt, p.w_ih), matmul(h, p.w_hh)),
                                           p.b_ih),
                                p.b_hh);
        auto i = sigmoid(slice(gates, 1, 0, dh));
        auto f = sigmoid(slice(gates, 1, dh, dh));
        auto g = tanh_op(slice(gates, 1, 2 * dh, dh));
        auto o = sigmoid(slice(gates, 1, 3 * dh, dh));
        c = add(mul(f, c), mul(i, g));
        h = mul(o, tanh_op(c));
        outs.push_back(reshape(h, {n, 1, dh}));
    }
    return concat(outs, 1);
}

template <class S>
struct GruCellParams {
    Tensor<S> w_ih;  // (Din, 3*Dh)
    Tensor<S> w_hh;  // (Dh, 3*Dh)
    Tensor<S> b_ih, b_hh;

    GruCellParams() = default;
    GruCellParams(std::size_t din, std::size_t dh, Rng& rng)
        : w_ih(init_fan_in<S>({din, 3 * dh}, dh, rng)),
          w_hh(init_fan_in<S>({dh, 3 * dh}, dh, rng)),
          b_ih(init_fan_in<S>({3 * dh}, dh, rng)),
          b_hh(init_fan_in<S>({3 * dh}, dh, rng)) {}

    void collect(const std::string& p, StateDict<S>& sd) {
        sd.add(p + ".w_ih", w_ih, true);
        sd.add(p + ".w_hh", w_hh, true);
        sd.add(p + ".b_ih", b_ih, false);
        sd.add(p + ".b_hh", b_hh, false);
    }
};

template <class S>
Tensor<S> gru_direction(const Tensor<S>& x, const GruCellParams<S>& p) {
    const std::size_t n = x.dim(0), t = x.dim(1);
    const std::size_t dh = p.w_hh.dim(0);
    Tensor<S> h = Tensor<S>::zeros({n, dh});
    std::vector<Tensor<S>> outs;
    outs.reserve(t);
    for (std::size_t step = 0; step < t; ++step) {
        auto xt = reshape(slice(x, 1, step, 1), {n, x.dim(2)});
        auto gi = add_suffix(matmul(xt, p.w_ih), p.b_ih);
        auto gh = add_suffix(matmul(h, p.w_hh), p.b_hh);
        auto r = sigmoid(add(slice(gi, 1, 0, dh), slice(gh, 1, 0, dh)));
        auto z = sigmoid(add(slice(gi, 1, dh, dh), slice(gh, 1, dh, dh)));
        auto ng = tanh_op(add(slice(gi, 1, 2 * dh, dh),
                              mul(r, slice(gh, 1, 2 * dh, dh))));
        // h' = (1-z)*n + z*h = n + z*(h - n)
        h = add(ng, mul(z, sub(h, ng)));
        outs.push_back(reshape(h, {n, 1, dh}));
    }
    return concat(outs, 1);
}

// Bidirectional wrappers: run a reversed copy through the backward-direction
// parameters and concatenate features, (N,T,Din) -> (N,T,2*Dh).
template <class S>
struct BiLstm {
    LstmCellParams<S> fwd, bwd;

    BiLstm() = default;
    BiLstm(std::size_t din, std::size_t dh, Rng& rng) : fwd(din, dh, rng), bwd(din, dh, rng) {}

    Tensor<S> forward(const Tensor<S>& x) const {
        auto f = lstm_direction(x, fwd);
        auto b = flip(lstm_direction(flip(x, 1), bwd), 1);
        return concat<S>({f, b}, 2);
    }

    void collect(const std::string& p, StateDict<S>& sd) {
        fwd.collect(p + ".fwd", sd);
        bwd.collect(p + ".bwd", sd);
    }
};

template <class S>
struct BiGru {
    GruCellParams<S> fwd, bwd;

    BiGru() = default;
    BiGru(std::size_t din, std::size_t dh, Rng& rng) : fwd(din, dh, rng), bwd(din, dh, rng) {}

    Tensor<S> forward(const Tensor<S>& x) const {
        auto f = gru_direction(x, fwd);
        auto b = flip(gru_direction(flip(x, 1), bwd), 1);
        return concat<S>({f, b}, 2);
    }

    void collect(const std::string& p, StateDict<S>& sd) {
        fwd.collect(p + ".fwd", sd);
        bwd.collect(p + ".bwd", sd);
    }
};

}  // namespace clares
