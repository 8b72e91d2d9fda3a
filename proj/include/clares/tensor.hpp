#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "clares/error.hpp"
#include "clares/linalg.hpp"
#include "clares/rng.hpp"

namespace clares {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += std::to_string(s[i]);
        if (i + 1 < s.size()) out += ",";
    }
    return out + ")";
}

// Reverse-mode tape is built implicitly: each op output holds its parents and
// a closure that pulls the output gradient into the parents. Disabled inside
// NoGradGuard scopes (evaluation / finite differences).
inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev; }
};

// Checked mode: every op output is scanned for NaN/Inf.
inline bool& finite_checks() {
    thread_local bool enabled = false;
    return enabled;
}

namespace detail {

template <class S>
struct Node {
    Shape shape;
    std::vector<S> value;
    std::vector<S> grad;  // allocated lazily, same length as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;  // pulls this->grad into parents
};

template <class S>
inline std::vector<S>& ensure_grad(Node<S>& n) {
    if (n.grad.empty()) n.grad.assign(n.value.size(), S(0));
    return n.grad;
}

}  // namespace detail

template <class S>
class Tensor {
public:
    using Node = detail::Node<S>;

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return from_data(std::move(shape), {}, requires_grad);
    }

    static Tensor full(Shape shape, S v) {
        Tensor t = zeros(std::move(shape));
        std::fill(t.values().begin(), t.values().end(), v);
        return t;
    }

    static Tensor scalar(S v) { return full({}, v); }

    static Tensor from_data(Shape shape, std::vector<S> data, bool requires_grad = false) {
        auto n = std::make_shared<Node>();
        const std::size_t count = numel(shape);
        n->shape = std::move(shape);
        if (data.empty())
            n->value.assign(count, S(0));
        else {
            if (data.size() != count)
                throw DimensionError("tensor data length " + std::to_string(data.size()) +
                                     " does not match shape " + shape_str(n->shape));
            n->value = std::move(data);
        }
        n->requires_grad = requires_grad;
        Tensor t;
        t.n_ = std::move(n);
        return t;
    }

    bool defined() const { return static_cast<bool>(n_); }
    const Shape& shape() const { return n_->shape; }
    std::size_t ndim() const { return n_->shape.size(); }
    std::size_t dim(std::size_t i) const { return n_->shape[i]; }
    std::size_t size() const { return n_->value.size(); }

    std::vector<S>& values() { return n_->value; }
    const std::vector<S>& values() const { return n_->value; }
    S* data() { return n_->value.data(); }
    const S* data() const { return n_->value.data(); }

    S item() const {
        if (size() != 1) throw ArgumentError("item() requires a single-element tensor");
        return n_->value[0];
    }

    bool requires_grad() const { return n_->requires_grad; }
    Tensor& set_requires_grad(bool b) {
        n_->requires_grad = b;
        return *this;
    }

    std::vector<S>& grad() { return detail::ensure_grad(*n_); }
    const std::vector<S>& grad() const { return detail::ensure_grad(*n_); }
    bool has_grad() const { return !n_->grad.empty(); }
    void zero_grad() {
        if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), S(0));
    }

    // Reverse pass from a scalar. Leaf gradients accumulate additively across
    // calls; interior-node gradients are recomputed per pass (they are pure
    // functions of the seed), so a second backward() without zero_grad() adds
    // exactly one more unit pass onto the leaves.
    void backward() const {
        if (size() != 1) throw ArgumentError("backward() requires a scalar loss");
        if (!n_->requires_grad) return;
        std::vector<std::shared_ptr<Node>> order;
        topo_sort(n_, order);
        for (auto& node : order)
            if (node->backward && !node->grad.empty())
                std::fill(node->grad.begin(), node->grad.end(), S(0));
        detail::ensure_grad(*n_)[0] += S(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node& node = **it;
            if (node.backward) node.backward(node);
        }
    }

    // Value copy with no graph attached.
    Tensor detach() const { return from_data(n_->shape, n_->value, false); }

    std::shared_ptr<Node> node() const { return n_; }
    static Tensor wrap(std::shared_ptr<Node> n) {
        Tensor t;
        t.n_ = std::move(n);
        return t;
    }

private:
    static void topo_sort(const std::shared_ptr<Node>& root,
                          std::vector<std::shared_ptr<Node>>& order) {
        // Iterative post-order DFS over grad-requiring nodes.
        std::unordered_set<const Node*> seen;
        std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
        stack.emplace_back(root, 0);
        seen.insert(root.get());
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->parents.size()) {
                auto parent = node->parents[next++];
                if (parent->requires_grad && !seen.count(parent.get())) {
                    seen.insert(parent.get());
                    stack.emplace_back(std::move(parent), 0);
                }
            } else {
                order.push_back(node);
                stack.pop_back();
            }
        }
    }

    std::shared_ptr<Node> n_;
};

namespace detail {

template <class S>
inline Tensor<S> make_op(const char* name, Shape shape, std::vector<S> value,
                         std::vector<Tensor<S>> parents,
                         std::function<void(Node<S>&)> backward) {
    Tensor<S> out = Tensor<S>::from_data(std::move(shape), std::move(value));
    if (finite_checks()) {
        for (S v : out.values())
            if (!std::isfinite(static_cast<double>(v)))
                throw NumericError(std::string("non-finite value produced by ") + name);
    }
    if (grad_mode()) {
        bool needs = false;
        for (const auto& p : parents) needs = needs || p.requires_grad();
        if (needs) {
            auto n = out.node();
            n->requires_grad = true;
            n->parents.reserve(parents.size());
            for (auto& p : parents) n->parents.push_back(p.node());
            n->backward = std::move(backward);
        }
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <class S>
inline void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    check_same_shape(a, b, "add");
    std::vector<S> v(a.size());
    const S* pa = a.data();
    const S* pb = b.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = pa[i] + pb[i];
    return detail::make_op<S>("add", a.shape(), std::move(v), {a, b},
                              [](detail::Node<S>& self) {
                                  for (int k = 0; k < 2; ++k) {
                                      auto& p = *self.parents[k];
                                      if (!p.requires_grad) continue;
                                      auto& g = detail::ensure_grad(p);
                                      for (std::size_t i = 0; i < g.size(); ++i)
                                          g[i] += self.grad[i];
                                  }
                              });
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
    check_same_shape(a, b, "sub");
    std::vector<S> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] - b.data()[i];
    return detail::make_op<S>("sub", a.shape(), std::move(v), {a, b},
                              [](detail::Node<S>& self) {
                                  auto& pa = *self.parents[0];
                                  auto& pb = *self.parents[1];
                                  if (pa.requires_grad) {
                                      auto& g = detail::ensure_grad(pa);
                                      for (std::size_t i = 0; i < g.size(); ++i)
                                          g[i] += self.grad[i];
                                  }
                                  if (pb.requires_grad) {
                                      auto& g = detail::ensure_grad(pb);
                                      for (std::size_t i = 0; i < g.size(); ++i)
                                          g[i] -= self.grad[i];
                                  }
                              });
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    check_same_shape(a, b, "mul");
    std::vector<S> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] * b.data()[i];
    return detail::make_op<S>("mul", a.shape(), std::move(v), {a, b},
                              [](detail::Node<S>& self) {
                                  auto& pa = *self.parents[0];
                                  auto& pb = *self.parents[1];
                                  if (pa.requires_grad) {
                                      auto& g = detail::ensure_grad(pa);
                                      for (std::size_t i = 0; i < g.size(); ++i)
                                          g[i] += self.grad[i] * pb.value[i];
                                  }
                                  if (pb.requires_grad) {
                                      auto& g = detail::ensure_grad(pb);
                                      for (std::size_t i = 0; i < g.size(); ++i)
                                          g[i] += self.grad[i] * pa.value[i];
                                  }
                              });
}

template <class S>
Tensor<S> mul_scalar(const Tensor<S>& a, S c) {
    std::vector<S> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] * c;
    return detail::make_op<S>("mul_scalar", a.shape(), std::move(v), {a},
                              [c](detail::Node<S>& self) {
                                  auto& p = *self.parents[0];
                                  if (!p.requires_grad) return;
                                  auto& g = detail::ensure_grad(p);
                                  for (std::size_t i = 0; i < g.size(); ++i)
                                      g[i] += self.grad[i] * c;
                              });
}

template <class S>
Tensor<S> add_scalar(const Tensor<S>& a, S c) {
    std::vector<S> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] + c;
    return detail::make_op<S>("add_scalar", a.shape(), std::move(v), {a},
                              [](detail::Node<S>& self) {
                                  auto& p = *self.parents[0];
                                  if (!p.requires_grad) return;
                                  auto& g = detail::ensure_grad(p);
                                  for (std::size_t i = 0; i < g.size(); ++i)
                                      g[i] += self.grad[i];
                              });
}

// Exact Gaussian-CDF GELU: x * Phi(x), Phi(x) = (1 + erf(x / sqrt(2))) / 2.
template <class S>
Tensor<S> gelu(const Tensor<S>& a) {
    constexpr double kInvSqrt2 = 0.70710678118654752440;
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    std::vector<S> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = static_cast<double>(a.data()[i]);
        v[i] = static_cast<S>(x * 0.5 * (1.0 + std::erf(x * kInvSqrt2)));
    }
    return detail::make_op<S>(
        "gelu", a.shape(), std::move(v), {a}, [](detail::Node<S>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            auto& g = detail::ensure_grad(p);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double x = static_cast<double>(p.value[i]);
                const double phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                g[i] += self.grad[i] * static_cast<S>(phi + x * pdf);
            }
        });
}

template <class S>
Tensor<S> sigmoid(const Tensor<S>& a) {
    std::vector<S> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = static_cast<double>(a.data()[i]);
        v[i] = static_cast<S>(1.0 / (1.0 + std::exp(-x)));
    }
    return detail::make_op<S>("sigmoid", a.shape(), std::move(v), {a},
                              [](detail::Node<S>& self) {
                                  auto& p = *self.parents[0];
                                  if (!p.requires_grad) return;
                                  auto& g = detail::ensure_grad(p);
                                  for (std::size_t i = 0; i < g.size(); ++i) {
                                      const S y = self.value[i];
                                      g[i] += self.grad[i] * y * (S(1) - y);
                                  }
                              });
}

template <class S>
Tensor<S> tanh_op(const Tensor<S>& a) {
    std::vector<S> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = static_cast<S>(std::tanh(static_cast<double>(a.data()[i])));
    return detail::make_op<S>("tanh", a.shape(), std::move(v), {a},
                              [](detail::Node<S>& self) {
                                  auto& p = *self.parents[0];
                                  if (!p.requires_grad) return;
                                  auto& g = detail::ensure_grad(p);
                                  for (std::size_t i = 0; i < g.size(); ++i) {
                                      const S y = self.value[i];
                                      g[i] += self.grad[i] * (S(1) - y * y);
                                  }
                              });
}

// ---------------------------------------------------------------------------
// Broadcast helpers (only the patterns the model needs)
// ---------------------------------------------------------------------------

// out = x + t where t's shape is a trailing suffix of x's shape
// (bias over features, positional table over the batch axis, ...).
template <class S>
Tensor<S> add_suffix(const Tensor<S>& x, const Tensor<S>& t) {
    const std::size_t nd = x.ndim();
    const std::size_t td = t.ndim();
    if (td > nd) throw DimensionError("add_suffix: suffix has more dims than tensor");
    for (std::size_t i = 0; i < td; ++i)
        if (x.shape()[nd - td + i] != t.shape()[i])
            throw DimensionError("add_suffix: suffix shape mismatch");
    const std::size_t inner = t.size();
    const std::size_t outer = x.size() / std::max<std::size_t>(inner, 1);
    std::vector<S> v(x.size());
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i)
            v[o * inner + i] = x.data()[o * inner + i] + t.data()[i];
    return detail::make_op<S>(
        "add_suffix", x.shape(), std::move(v), {x, t},
        [inner, outer](detail::Node<S>& self) {
            auto& px = *self.parents[0];
            auto& pt = *self.parents[1];
            if (px.requires_grad) {
                auto& g = detail::ensure_grad(px);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            }
            if (pt.requires_grad) {
                auto& g = detail::ensure_grad(pt);
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t i = 0; i < inner; ++i)
                        g[i] += self.grad[o * inner + i];
            }
        });
}

// t (shape d...) -> (n, d...): shared latents / summaries expanded per sample.
template <class S>
Tensor<S> broadcast_batch(const Tensor<S>& t, std::size_t n) {
    Shape shape;
    shape.push_back(n);
    for (std::size_t d : t.shape()) shape.push_back(d);
    const std::size_t inner = t.size();
    std::vector<S> v(n * inner);
    for (std::size_t b = 0; b < n; ++b)
        std::copy(t.data(), t.data() + inner, v.begin() + b * inner);
    return detail::make_op<S>("broadcast_batch", std::move(shape), std::move(v), {t},
                              [n, inner](detail::Node<S>& self) {
                                  auto& p = *self.parents[0];
                                  if (!p.requires_grad) return;
                                  auto& g = detail::ensure_grad(p);
                                  for (std::size_t b = 0; b < n; ++b)
                                      for (std::size_t i = 0; i < inner; ++i)
                                          g[i] += self.grad[b * inner + i];
                              });
}

// x (N,C,H,W) * gate (N,C), broadcast over space.
template <class S>
Tensor<S> mul_channel_gate(const Tensor<S>& x, const Tensor<S>& gate) {
    if (x.ndim() != 4 || gate.ndim() != 2 || x.dim(0) != gate.dim(0) ||
        x.dim(1) != gate.dim(1))
        throw DimensionError("mul_channel_gate: expected (N,C,H,W) and (N,C)");
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    std::vector<S> v(x.size());
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const S g = gate.data()[b * c + ch];
            const std::size_t base = (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) v[base + i] = x.data()[base + i] * g;
        }
    return detail::make_op<S>(
        "mul_channel_gate", x.shape(), std::move(v), {x, gate},
        [n, c, hw](detail::Node<S>& self) {
            auto& px = *self.parents[0];
            auto& pg = *self.parents[1];
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const std::size_t base = (b * c + ch) * hw;
                    if (px.requires_grad) {
                        auto& gx = detail::ensure_grad(px);
                        const S g = pg.value[b * c + ch];
                        for (std::size_t i = 0; i < hw; ++i)
                            gx[base + i] += self.grad[base + i] * g;
                    }
                    if (pg.requires_grad) {
                        auto& gg = detail::ensure_grad(pg);
                        S acc = S(0);
                        for (std::size_t i = 0; i < hw; ++i)
                            acc += self.grad[base + i] * px.value[base + i];
                        gg[b * c + ch] += acc;
                    }
                }
        });
}

// x (N,C,H,W) * gate (N,H,W), broadcast over channels.
template <class S>
Tensor<S> mul_spatial_gate(const Tensor<S>& x, const Tensor<S>& gate) {
    if (x.ndim() != 4 || gate.ndim() != 3 || x.dim(0) != gate.dim(0) ||
        x.dim(2) != gate.dim(1) || x.dim(3) != gate.dim(2))
        throw DimensionError("mul_spatial_gate: expected (N,C,H,W) and (N,H,W)");
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    std::vector<S> v(x.size());
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t base = (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i)
                v[base + i] = x.data()[base + i] * gate.data()[b * hw + i];
        }
    return detail::make_op<S>(
        "mul_spatial_gate", x.shape(), std::move(v), {x, gate},
        [n, c, hw](detail::Node<S>& self) {
            auto& px = *self.parents[0];
            auto& pg = *self.parents[1];
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const std::size_t base = (b * c + ch) * hw;
                    if (px.requires_grad) {
                        auto& gx = detail::ensure_grad(px);
                        for (std::size_t i = 0; i < hw; ++i)
                            gx[base + i] += self.grad[base + i] * pg.value[b * hw + i];
                    }
                    if (pg.requires_grad) {
                        auto& gg = detail::ensure_grad(pg);
                        for (std::size_t i = 0; i < hw; ++i)
                            gg[b * hw + i] += self.grad[base + i] * px.value[base + i];
                    }
                }
        });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape) {
    if (numel(shape) != x.size())
        throw DimensionError("reshape: element count mismatch " + shape_str(x.shape()) +
                             " -> " + shape_str(shape));
    return detail::make_op<S>("reshape", std::move(shape), x.values(), {x},
                              [](detail::Node<S>& self) {
                                  auto& p = *self.parents[0];
                                  if (!p.requires_grad) return;
                                  auto& g = detail::ensure_grad(p);
                                  for (std::size_t i = 0; i < g.size(); ++i)
                                      g[i] += self.grad[i];
                              });
}

inline std::vector<std::size_t> strides_of(const Shape& s) {
    std::vector<std::size_t> st(s.size(), 1);
    for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
    return st;
}

template <class S>
Tensor<S> permute(const Tensor<S>& x, const std::vector<std::size_t>& perm) {
    const std::size_t nd = x.ndim();
    if (perm.size() != nd) throw DimensionError("permute: axis count mismatch");
    Shape out_shape(nd);
    for (std::size_t i = 0; i < nd; ++i) out_shape[i] = x.shape()[perm[i]];
    const auto in_strides = strides_of(x.shape());
    const auto out_strides = strides_of(out_shape);
    std::vector<S> v(x.size());
    const std::size_t total = x.size();
    std::vector<std::size_t> idx(nd, 0);
    for (std::size_t o = 0; o < total; ++o) {
        std::size_t rem = o, src = 0;
        for (std::size_t i = 0; i < nd; ++i) {
            const std::size_t coord = rem / out_strides[i];
            rem %= out_strides[i];
            src += coord * in_strides[perm[i]];
        }
        v[o] = x.data()[src];
    }
    return detail::make_op<S>(
        "permute", std::move(out_shape), std::move(v), {x},
        [perm, in_strides, out_strides, nd](detail::Node<S>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            auto& g = detail::ensure_grad(p);
            for (std::size_t o = 0; o < self.grad.size(); ++o) {
                std::size_t rem = o, src = 0;
                for (std::size_t i = 0; i < nd; ++i) {
                    const std::size_t coord = rem / out_strides[i];
                    rem %= out_strides[i];
                    src += coord * in_strides[perm[i]];
                }
                g[src] += self.grad[o];
            }
        });
}

template <class S>
Tensor<S> slice(const Tensor<S>& x, std::size_t axis, std::size_t start, std::size_t len) {
    if (axis >= x.ndim()) throw DimensionError("slice: axis out of range");
    if (start + len > x.dim(axis)) throw DimensionError("slice: range out of bounds");
    Shape out_shape = x.shape();
    out_shape[axis] = len;
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
    for (std::size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
    const std::size_t in_axis = x.dim(axis);
    std::vector<S> v(numel(out_shape));
    for (std::size_t o = 0; o < outer; ++o)
        std::copy(x.data() + (o * in_axis + start) * inner,
                  x.data() + (o * in_axis + start + len) * inner,
                  v.begin() + o * len * inner);
    return detail::make_op<S>(
        "slice", std::move(out_shape), std::move(v), {x},
        [outer, inner, in_axis, start, len](detail::Node<S>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            auto& g = detail::ensure_grad(p);
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t j = 0; j < len * inner; ++j)
                    g[(o * in_axis + start) * inner + j] += self.grad[o * len * inner + j];
        });
}

template <class S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts, std::size_t axis) {
    if (parts.empty()) throw ArgumentError("concat: no inputs");
    const std::size_t nd = parts[0].ndim();
    if (axis >= nd) throw DimensionError("concat: axis out of range");
    Shape out_shape = parts[0].shape();
    std::size_t total_axis = 0;
    for (const auto& p : parts) {
        if (p.ndim() != nd) throw DimensionError("concat: rank mismatch");
        for (std::size_t i = 0; i < nd; ++i)
            if (i != axis && p.shape()[i] != out_shape[i])
                throw DimensionError("concat: shape mismatch off the concat axis");
        total_axis += p.dim(axis);
    }
    out_shape[axis] = total_axis;
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= out_shape[i];
    for (std::size_t i = axis + 1; i < nd; ++i) inner *= out_shape[i];
    std::vector<S> v(numel(out_shape));
    std::vector<std::size_t> axis_sizes;
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t a = p.dim(axis);
        axis_sizes.push_back(a);
        for (std::size_t o = 0; o < outer; ++o)
            std::copy(p.data() + o * a * inner, p.data() + (o + 1) * a * inner,
                      v.begin() + (o * total_axis + offset) * inner);
        offset += a;
    }
    return detail::make_op<S>(
        "concat", std::move(out_shape), std::move(v), parts,
        [outer, inner, total_axis, axis_sizes](detail::Node<S>& self) {
            std::size_t off = 0;
            for (std::size_t k = 0; k < axis_sizes.size(); ++k) {
                const std::size_t a = axis_sizes[k];
                auto& p = *self.parents[k];
                if (p.requires_grad) {
                    auto& g = detail::ensure_grad(p);
                    for (std::size_t o = 0; o < outer; ++o)
                        for (std::size_t j = 0; j < a * inner; ++j)
                            g[o * a * inner + j] +=
                                self.grad[(o * total_axis + off) * inner + j];
                }
                off += a;
            }
        });
}

template <class S>
Tensor<S> flip(const Tensor<S>& x, std::size_t axis) {
    if (axis >= x.ndim()) throw DimensionError("flip: axis out of range");
    std::size_t outer = 1, inner = 1;
    const std::size_t n = x.dim(axis);
    for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
    for (std::size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
    std::vector<S> v(x.size());
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t k = 0; k < n; ++k)
            std::copy(x.data() + (o * n + k) * inner, x.data() + (o * n + k + 1) * inner,
                      v.begin() + (o * n + (n - 1 - k)) * inner);
    return detail::make_op<S>("flip", x.shape(), std::move(v), {x},
                              [outer, inner, n](detail::Node<S>& self) {
                                  auto& p = *self.parents[0];
                                  if (!p.requires_grad) return;
                                  auto& g = detail::ensure_grad(p);
                                  for (std::size_t o = 0; o < outer; ++o)
                                      for (std::size_t k = 0; k < n; ++k)
                                          for (std::size_t j = 0; j < inner; ++j)
                                              g[(o * n + k) * inner + j] +=
                                                  self.grad[(o * n + (n - 1 - k)) * inner + j];
                              });
}

// Nearest-neighbor upsampling along an axis: every entry repeated k times.
template <class S>
Tensor<S> repeat_interleave(const Tensor<S>& x, std::size_t axis, std::size_t k) {
    if (axis >= x.ndim()) throw DimensionError("repeat_interleave: axis out of range");
    if (k == 0) throw ArgumentError("repeat_interleave: k must be positive");
    std::size_t outer = 1, inner = 1;
    const std::size_t n = x.dim(axis);
    for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
    for (std::size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
    Shape out_shape = x.shape();
    out_shape[axis] = n * k;
    std::vector<S> v(numel(out_shape));
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t r = 0; r < k; ++r)
                std::copy(x.data() + (o * n + t) * inner,
                          x.data() + (o * n + t + 1) * inner,
                          v.begin() + (o * n * k + t * k + r) * inner);
    return detail::make_op<S>(
        "repeat_interleave", std::move(out_shape), std::move(v), {x},
        [outer, inner, n, k](detail::Node<S>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            auto& g = detail::ensure_grad(p);
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t t = 0; t < n; ++t)
                    for (std::size_t r = 0; r < k; ++r)
                        for (std::size_t j = 0; j < inner; ++j)
                            g[(o * n + t) * inner + j] +=
                                self.grad[(o * n * k + t * k + r) * inner + j];
        });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> sum_all(const Tensor<S>& x) {
    S acc = S(0);
    for (std::size_t i = 0; i < x.size(); ++i) acc += x.data()[i];
    return detail::make_op<S>("sum_all", {}, {acc}, {x}, [](detail::Node<S>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = detail::ensure_grad(p);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0];
    });
}

template <class S>
Tensor<S> mean_all(const Tensor<S>& x) {
    S acc = S(0);
    for (std::size_t i = 0; i < x.size(); ++i) acc += x.data()[i];
    const S inv = S(1) / static_cast<S>(x.size());
    return detail::make_op<S>("mean_all", {}, {acc * inv}, {x},
                              [inv](detail::Node<S>& self) {
                                  auto& p = *self.parents[0];
                                  if (!p.requires_grad) return;
                                  auto& g = detail::ensure_grad(p);
                                  for (std::size_t i = 0; i < g.size(); ++i)
                                      g[i] += self.grad[0] * inv;
                              });
}

// (N,T,D) -> (N,D), mean over the sequence axis.
template <class S>
Tensor<S> mean_seq(const Tensor<S>& x) {
    if (x.ndim() != 3) throw DimensionError("mean_seq: expected (N,T,D)");
    const std::size_t n = x.dim(0), t = x.dim(1), d = x.dim(2);
    std::vector<S> v(n * d, S(0));
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t s = 0; s < t; ++s)
            for (std::size_t f = 0; f < d; ++f)
                v[b * d + f] += x.data()[(b * t + s) * d + f];
    const S inv = S(1) / static_cast<S>(t);
    for (auto& e : v) e *= inv;
    return detail::make_op<S>("mean_seq", {n, d}, std::move(v), {x},
                              [n, t, d, inv](detail::Node<S>& self) {
                                  auto& p = *self.parents[0];
                                  if (!p.requires_grad) return;
                                  auto& g = detail::ensure_grad(p);
                                  for (std::size_t b = 0; b < n; ++b)
                                      for (std::size_t s = 0; s < t; ++s)
                                          for (std::size_t f = 0; f < d; ++f)
                                              g[(b * t + s) * d + f] +=
                                                  self.grad[b * d + f] * inv;
                              });
}

// Non-overlapping window average along the sequence axis; the tail window
// of width T mod s is averaged over its own length.
template <class S>
Tensor<S> avgpool_seq(const Tensor<S>& x, std::size_t s) {
    if (x.ndim() != 3) throw DimensionError("avgpool_seq: expected (N,T,D)");
    if (s == 0) throw ArgumentError("avgpool_seq: scale must be positive");
    const std::size_t n = x.dim(0), t = x.dim(1), d = x.dim(2);
    const std::size_t to = (t + s - 1) / s;
    std::vector<S> v(n * to * d, S(0));
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t u = 0; u < to; ++u) {
            const std::size_t w0 = u * s;
            const std::size_t w1 = std::min(t, w0 + s);
            const S inv = S(1) / static_cast<S>(w1 - w0);
            for (std::size_t k = w0; k < w1; ++k)
                for (std::size_t f = 0; f < d; ++f)
                    v[(b * to + u) * d + f] += x.data()[(b * t + k) * d + f] * inv;
        }
    return detail::make_op<S>(
        "avgpool_seq", {n, to, d}, std::move(v), {x},
        [n, t, d, to, s](detail::Node<S>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            auto& g = detail::ensure_grad(p);
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t u = 0; u < to; ++u) {
                    const std::size_t w0 = u * s;
                    const std::size_t w1 = std::min(t, w0 + s);
                    const S inv = S(1) / static_cast<S>(w1 - w0);
                    for (std::size_t k = w0; k < w1; ++k)
                        for (std::size_t f = 0; f < d; ++f)
                            g[(b * t + k) * d + f] += self.grad[(b * to + u) * d + f] * inv;
                }
        });
}

// (N,C,H,W) -> (N,C)
template <class S>
Tensor<S> global_avg_pool(const Tensor<S>& x) {
    if (x.ndim() != 4) throw DimensionError("global_avg_pool: expected (N,C,H,W)");
    const std::size_t nc = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
    std::vector<S> v(nc, S(0));
    const S inv = S(1) / static_cast<S>(hw);
    for (std::size_t p = 0; p < nc; ++p) {
        S acc = S(0);
        for (std::size_t i = 0; i < hw; ++i) acc += x.data()[p * hw + i];
        v[p] = acc * inv;
    }
    return detail::make_op<S>("global_avg_pool", {x.dim(0), x.dim(1)}, std::move(v), {x},
                              [nc, hw, inv](detail::Node<S>& self) {
                                  auto& p = *self.parents[0];
                                  if (!p.requires_grad) return;
                                  auto& g = detail::ensure_grad(p);
                                  for (std::size_t q = 0; q < nc; ++q)
                                      for (std::size_t i = 0; i < hw; ++i)
                                          g[q * hw + i] += self.grad[q] * inv;
                              });
}

template <class S>
Tensor<S> global_max_pool(const Tensor<S>& x) {
    if (x.ndim() != 4) throw DimensionError("global_max_pool: expected (N,C,H,W)");
    const std::size_t nc = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
    std::vector<S> v(nc);
    std::vector<std::size_t> arg(nc);
    for (std::size_t p = 0; p < nc; ++p) {
        std::size_t best = 0;
        S bv = x.data()[p * hw];
        for (std::size_t i = 1; i < hw; ++i)
            if (x.data()[p * hw + i] > bv) {
                bv = x.data()[p * hw + i];
                best = i;
            }
        v[p] = bv;
        arg[p] = best;
    }
    return detail::make_op<S>("global_max_pool", {x.dim(0), x.dim(1)}, std::move(v), {x},
                              [nc, hw, arg](detail::Node<S>& self) {
                                  auto& p = *self.parents[0];
                                  if (!p.requires_grad) return;
                                  auto& g = detail::ensure_grad(p);
                                  for (std::size_t q = 0; q < nc; ++q)
                                      g[q * hw + arg[q]] += self.grad[q];
                              });
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

// a (..., M, K) x b (K, N) -> (..., M, N); b is shared across leading dims.
template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.ndim() < 2 || b.ndim() != 2) throw DimensionError("matmul: need (...,M,K) x (K,N)");
    const std::size_t k = a.shape().back();
    if (k != b.dim(0))
        throw DimensionError("matmul: inner dims " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    const std::size_t n = b.dim(1);
    const std::size_t rows = a.size() / k;
    Shape out_shape = a.shape();
    out_shape.back() = n;
    std::vector<S> v(rows * n);
    gemm(false, false, static_cast<int>(rows), static_cast<int>(n), static_cast<int>(k),
         S(1), a.data(), static_cast<int>(k), b.data(), static_cast<int>(n), S(0),
         v.data(), static_cast<int>(n));
    return detail::make_op<S>(
        "matmul", std::move(out_shape), std::move(v), {a, b},
        [rows, n, k](detail::Node<S>& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                auto& g = detail::ensure_grad(pa);
                // dA = dY . B^T
                gemm(false, true, static_cast<int>(rows), static_cast<int>(k),
                     static_cast<int>(n), S(1), self.grad.data(), static_cast<int>(n),
                     pb.value.data(), static_cast<int>(n), S(1), g.data(),
                     static_cast<int>(k));
            }
            if (pb.requires_grad) {
                auto& g = detail::ensure_grad(pb);
                // dB = A^T . dY
                gemm(true, false, static_cast<int>(k), static_cast<int>(n),
                     static_cast<int>(rows), S(1), pa.value.data(), static_cast<int>(k),
                     self.grad.data(), static_cast<int>(n), S(1), g.data(),
                     static_cast<int>(n));
            }
        });
}

// Batched product over matching leading batch dim:
//   a (B, p, q), b (B, r, s); effective A = trans_a ? a^T : a, same for b.
template <class S>
Tensor<S> bmm(const Tensor<S>& a, const Tensor<S>& b, bool trans_a = false,
              bool trans_b = false) {
    if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0))
        throw DimensionError("bmm: need (B,p,q) x (B,r,s)");
    const std::size_t batch = a.dim(0);
    const std::size_t m = trans_a ? a.dim(2) : a.dim(1);
    const std::size_t ka = trans_a ? a.dim(1) : a.dim(2);
    const std::size_t kb = trans_b ? b.dim(2) : b.dim(1);
    const std::size_t n = trans_b ? b.dim(1) : b.dim(2);
    if (ka != kb) throw DimensionError("bmm: inner dimension mismatch");
    if (n == 0 || ka == 0) throw ArgumentError("bmm: empty operand axis");
    const std::size_t a_sz = a.dim(1) * a.dim(2), b_sz = b.dim(1) * b.dim(2);
    const int lda = static_cast<int>(a.dim(2)), ldb = static_cast<int>(b.dim(2));
    std::vector<S> v(batch * m * n);
    for (std::size_t i = 0; i < batch; ++i)
        gemm(trans_a, trans_b, static_cast<int>(m), static_cast<int>(n),
             static_cast<int>(ka), S(1), a.data() + i * a_sz, lda, b.data() + i * b_sz,
             ldb, S(0), v.data() + i * m * n, static_cast<int>(n));
    return detail::make_op<S>(
        "bmm", {batch, m, n}, std::move(v), {a, b},
        [batch, m, n, ka, a_sz, b_sz, lda, ldb, trans_a, trans_b](detail::Node<S>& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            for (std::size_t i = 0; i < batch; ++i) {
                const S* gy = self.grad.data() + i * m * n;
                if (pa.requires_grad) {
                    auto& g = detail::ensure_grad(pa);
                    S* ga = g.data() + i * a_sz;
                    if (!trans_a)  // dA = dY . B'^T
                        gemm(false, !trans_b, static_cast<int>(m), static_cast<int>(ka),
                             static_cast<int>(n), S(1), gy, static_cast<int>(n),
                             pb.value.data() + i * b_sz, ldb, S(1), ga, lda);
                    else  // dA^T = B' . dY^T  ->  dA(raw) = B' . dY^T with raw layout
                        gemm(trans_b, true, static_cast<int>(ka), static_cast<int>(m),
                             static_cast<int>(n), S(1), pb.value.data() + i * b_sz, ldb,
                             gy, static_cast<int>(n), S(1), ga, lda);
                }
                if (pb.requires_grad) {
                    auto& g = detail::ensure_grad(pb);
                    S* gb = g.data() + i * b_sz;
                    if (!trans_b)  // dB = A'^T . dY
                        gemm(!trans_a, false, static_cast<int>(ka), static_cast<int>(n),
                             static_cast<int>(m), S(1), pa.value.data() + i * a_sz, lda,
                             gy, static_cast<int>(n), S(1), gb, ldb);
                    else  // dB(raw) = dY^T . A'
                        gemm(true, trans_a, static_cast<int>(n), static_cast<int>(ka),
                             static_cast<int>(m), S(1), gy, static_cast<int>(n),
                             pa.value.data() + i * a_sz, lda, S(1), gb, ldb);
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Softmax over the last axis
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> softmax_lastdim(const Tensor<S>& x) {
    if (x.ndim() == 0) throw DimensionError("softmax: scalar input");
    const std::size_t d = x.shape().back();
    if (d == 0) throw ArgumentError("softmax: empty last axis");
    const std::size_t rows = x.size() / d;
    std::vector<S> v(x.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const S* in = x.data() + r * d;
        S* out = v.data() + r * d;
        S mx = in[0];
        for (std::size_t i = 1; i < d; ++i) mx = std::max(mx, in[i]);
        S denom = S(0);
        for (std::size_t i = 0; i < d; ++i) {
            out[i] = static_cast<S>(std::exp(static_cast<double>(in[i] - mx)));
            denom += out[i];
        }
        const S inv = S(1) / denom;
        for (std::size_t i = 0; i < d; ++i) out[i] *= inv;
    }
    return detail::make_op<S>("softmax", x.shape(), std::move(v), {x},
                              [rows, d](detail::Node<S>& self) {
                                  auto& p = *self.parents[0];
                                  if (!p.requires_grad) return;
                                  auto& g = detail::ensure_grad(p);
                                  for (std::size_t r = 0; r < rows; ++r) {
                                      const S* y = self.value.data() + r * d;
                                      const S* gy = self.grad.data() + r * d;
                                      S dot = S(0);
                                      for (std::size_t i = 0; i < d; ++i)
                                          dot += gy[i] * y[i];
                                      for (std::size_t i = 0; i < d; ++i)
                                          g[r * d + i] += (gy[i] - dot) * y[i];
                                  }
                              });
}

// ---------------------------------------------------------------------------
// Random init helpers
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> uniform_tensor(Shape shape, double lo, double hi, Rng& rng,
                         bool requires_grad = false) {
    Tensor<S> t = Tensor<S>::zeros(std::move(shape), requires_grad);
    for (auto& v : t.values()) v = static_cast<S>(rng.uniform(lo, hi));
    return t;
}

template <class S>
Tensor<S> gaussian_tensor(Shape shape, double mean, double stddev, Rng& rng,
                          bool requires_grad = false) {
    Tensor<S> t = Tensor<S>::zeros(std::move(shape), requires_grad);
    for (auto& v : t.values()) v = static_cast<S>(mean + stddev * rng.gaussian());
    return t;
}

}  // namespace clares
