#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "clares/tensor.hpp"

namespace clares {

// ---------------------------------------------------------------------------
// Layer normalization over the last (feature) axis.
// y = gain * (x - mean) / sqrt(popvar + eps) + bias
// ---------------------------------------------------------------------------
template <class S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias,
                     double eps = 1e-5) {
    const std::size_t d = x.shape().back();
    if (gain.size() != d || bias.size() != d)
        throw DimensionError("layer_norm: gain/bias must match the feature axis");
    const std::size_t rows = x.size() / d;
    std::vector<S> v(x.size());
    std::vector<S> xhat(x.size());
    std::vector<S> inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const S* in = x.data() + r * d;
        double mean = 0;
        for (std::size_t i = 0; i < d; ++i) mean += static_cast<double>(in[i]);
        mean /= static_cast<double>(d);
        double var = 0;
        for (std::size_t i = 0; i < d; ++i) {
            const double c = static_cast<double>(in[i]) - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double istd = 1.0 / std::sqrt(var + eps);
        inv_std[r] = static_cast<S>(istd);
        for (std::size_t i = 0; i < d; ++i) {
            const S xh = static_cast<S>((static_cast<double>(in[i]) - mean) * istd);
            xhat[r * d + i] = xh;
            v[r * d + i] = gain.data()[i] * xh + bias.data()[i];
        }
    }
    return detail::make_op<S>(
        "layer_norm", x.shape(), std::move(v), {x, gain, bias},
        [rows, d, xhat, inv_std](detail::Node<S>& self) {
            auto& px = *self.parents[0];
            auto& pg = *self.parents[1];
            auto& pb = *self.parents[2];
            for (std::size_t r = 0; r < rows; ++r) {
                const S* gy = self.grad.data() + r * d;
                const S* xh = xhat.data() + r * d;
                if (pg.requires_grad) {
                    auto& g = detail::ensure_grad(pg);
                    for (std::size_t i = 0; i < d; ++i) g[i] += gy[i] * xh[i];
                }
                if (pb.requires_grad) {
                    auto& g = detail::ensure_grad(pb);
                    for (std::size_t i = 0; i < d; ++i) g[i] += gy[i];
                }
                if (px.requires_grad) {
                    auto& g = detail::ensure_grad(px);
                    // dxhat = gy * gain; dx = istd/d * (d*dxhat - sum(dxhat)
                    //                                   - xhat * sum(dxhat*xhat))
                    S sum_dxh = S(0), sum_dxh_xh = S(0);
                    for (std::size_t i = 0; i < d; ++i) {
                        const S dxh = gy[i] * pg.value[i];
                        sum_dxh += dxh;
                        sum_dxh_xh += dxh * xh[i];
                    }
                    const S istd = inv_std[r];
                    const S invd = S(1) / static_cast<S>(d);
                    for (std::size_t i = 0; i < d; ++i) {
                        const S dxh = gy[i] * pg.value[i];
                        g[r * d + i] += istd * (dxh - invd * sum_dxh - xh[i] * invd * sum_dxh_xh);
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Batch normalization over (N,H,W) per channel. Population variance is used
// for both the normalization and the running statistics.
// ---------------------------------------------------------------------------
template <class S>
Tensor<S> batch_norm_train(const Tensor<S>& x, const Tensor<S>& gamma,
                           const Tensor<S>& beta, std::vector<S>& running_mean,
                           std::vector<S>& running_var, double momentum = 0.1,
                           double eps = 1e-5) {
    if (x.ndim() != 4) throw DimensionError("batch_norm: expected (N,C,H,W)");
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    if (gamma.size() != c || beta.size() != c || running_mean.size() != c ||
        running_var.size() != c)
        throw DimensionError("batch_norm: channel mismatch");
    const std::size_t cnt = n * hw;
    std::vector<S> mean(c, S(0)), inv_std(c);
    std::vector<S> v(x.size()), xhat(x.size());
    for (std::size_t ch = 0; ch < c; ++ch) {
        double m = 0;
        for (std::size_t b = 0; b < n; ++b) {
            const S* in = x.data() + (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) m += static_cast<double>(in[i]);
        }
        m /= static_cast<double>(cnt);
        double var = 0;
        for (std::size_t b = 0; b < n; ++b) {
            const S* in = x.data() + (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                const double d = static_cast<double>(in[i]) - m;
                var += d * d;
            }
        }
        var /= static_cast<double>(cnt);
        mean[ch] = static_cast<S>(m);
        const double istd = 1.0 / std::sqrt(var + eps);
        inv_std[ch] = static_cast<S>(istd);
        running_mean[ch] =
            static_cast<S>((1.0 - momentum) * running_mean[ch] + momentum * m);
        running_var[ch] =
            static_cast<S>((1.0 - momentum) * running_var[ch] + momentum * var);
        const S gm = gamma.data()[ch], bt = beta.data()[ch];
        for (std::size_t b = 0; b < n; ++b) {
            const S* in = x.data() + (b * c + ch) * hw;
            S* xh = xhat.data() + (b * c + ch) * hw;
            S* out = v.data() + (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                xh[i] = static_cast<S>((in[i] - mean[ch]) * inv_std[ch]);
                out[i] = gm * xh[i] + bt;
            }
        }
    }
    return detail::make_op<S>(
        "batch_norm", x.shape(), std::move(v), {x, gamma, beta},
        [n, c, hw, cnt, xhat, inv_std](detail::Node<S>& self) {
            auto& px = *self.parents[0];
            auto& pg = *self.parents[1];
            auto& pb = *self.parents[2];
            for (std::size_t ch = 0; ch < c; ++ch) {
                S sum_gy = S(0), sum_gy_xh = S(0);
                for (std::size_t b = 0; b < n; ++b) {
                    const std::size_t base = (b * c + ch) * hw;
                    for (std::size_t i = 0; i < hw; ++i) {
                        sum_gy += self.grad[base + i];
                        sum_gy_xh += self.grad[base + i] * xhat[base + i];
                    }
                }
                if (pg.requires_grad) detail::ensure_grad(pg)[ch] += sum_gy_xh;
                if (pb.requires_grad) detail::ensure_grad(pb)[ch] += sum_gy;
                if (px.requires_grad) {
                    auto& g = detail::ensure_grad(px);
                    const S gm = pg.value[ch];
                    const S istd = inv_std[ch];
                    const S invc = S(1) / static_cast<S>(cnt);
                    for (std::size_t b = 0; b < n; ++b) {
                        const std::size_t base = (b * c + ch) * hw;
                        for (std::size_t i = 0; i < hw; ++i) {
                            const S gy = self.grad[base + i];
                            g[base + i] += gm * istd *
                                           (gy - invc * sum_gy -
                                            xhat[base + i] * invc * sum_gy_xh);
                        }
                    }
                }
            }
        });
}

template <class S>
Tensor<S> batch_norm_eval(const Tensor<S>& x, const Tensor<S>& gamma,
                          const Tensor<S>& beta, const std::vector<S>& running_mean,
                          const std::vector<S>& running_var, double eps = 1e-5) {
    if (x.ndim() != 4) throw DimensionError("batch_norm: expected (N,C,H,W)");
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    std::vector<S> scale(c), shift(c), istd(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
        istd[ch] = static_cast<S>(1.0 / std::sqrt(static_cast<double>(running_var[ch]) + eps));
        scale[ch] = gamma.data()[ch] * istd[ch];
        shift[ch] = beta.data()[ch] - scale[ch] * running_mean[ch];
    }
    std::vector<S> v(x.size());
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t base = (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i)
                v[base + i] = x.data()[base + i] * scale[ch] + shift[ch];
        }
    return detail::make_op<S>(
        "batch_norm_eval", x.shape(), std::move(v), {x, gamma, beta},
        [n, c, hw, istd, running_mean](detail::Node<S>& self) {
            auto& px = *self.parents[0];
            auto& pg = *self.parents[1];
            auto& pb = *self.parents[2];
            for (std::size_t ch = 0; ch < c; ++ch) {
                S sum_gy = S(0), sum_gy_xh = S(0);
                for (std::size_t b = 0; b < n; ++b) {
                    const std::size_t base = (b * c + ch) * hw;
                    for (std::size_t i = 0; i < hw; ++i) {
                        const S gy = self.grad[base + i];
                        sum_gy += gy;
                        sum_gy_xh += gy * (px.value[base + i] - running_mean[ch]) * istd[ch];
                    }
                }
                if (pg.requires_grad) detail::ensure_grad(pg)[ch] += sum_gy_xh;
                if (pb.requires_grad) detail::ensure_grad(pb)[ch] += sum_gy;
                if (px.requires_grad) {
                    auto& g = detail::ensure_grad(px);
                    const S k = pg.value[ch] * istd[ch];
                    for (std::size_t b = 0; b < n; ++b) {
                        const std::size_t base = (b * c + ch) * hw;
                        for (std::size_t i = 0; i < hw; ++i)
                            g[base + i] += self.grad[base + i] * k;
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Inverted dropout. Eval mode and p == 0 return the input tensor unchanged
// (bit-exact identity, no rng draws).
// ---------------------------------------------------------------------------
template <class S>
Tensor<S> dropout(const Tensor<S>& x, double p, bool training, Rng* rng) {
    if (p < 0.0 || p >= 1.0) throw ArgumentError("dropout: p must be in [0,1)");
    if (!training || p == 0.0) return x;
    if (rng == nullptr) throw ArgumentError("dropout: rng required in training mode");
    const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
    std::vector<S> mask(x.size());
    for (auto& m : mask) m = (rng->next_double() >= p) ? keep_scale : S(0);
    std::vector<S> v(x.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = x.data()[i] * mask[i];
    return detail::make_op<S>("dropout", x.shape(), std::move(v), {x},
                              [mask](detail::Node<S>& self) {
                                  auto& p0 = *self.parents[0];
                                  if (!p0.requires_grad) return;
                                  auto& g = detail::ensure_grad(p0);
                                  for (std::size_t i = 0; i < g.size(); ++i)
                                      g[i] += self.grad[i] * mask[i];
                              });
}

// ---------------------------------------------------------------------------
// 2-D cross-correlation, stride 1, symmetric zero padding, optional dilation.
// x (N,Cin,H,W), w (Cout,Cin,k,k) -> (N,Cout,H',W'),
// H' = H + 2*padding - dilation*(k-1).
// Implemented as batched im2col + one GEMM; the column matrix is rebuilt in
// the backward pass instead of being stored.
// ---------------------------------------------------------------------------
namespace detail {

template <class S>
void im2col(const S* x, std::size_t n, std::size_t cin, std::size_t h, std::size_t w,
            std::size_t k, std::size_t dil, std::size_t pad, std::size_t ho,
            std::size_t wo, S* col) {
    // col layout: (cin*k*k) rows x (n*ho*wo) cols, col index = b*ho*wo + pixel
    const std::size_t cols = n * ho * wo;
    for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
                S* row = col + ((ci * k + ky) * k + kx) * cols;
                for (std::size_t b = 0; b < n; ++b) {
                    const S* img = x + (b * cin + ci) * h * w;
                    for (std::size_t oy = 0; oy < ho; ++oy) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(oy + ky * dil) -
                            static_cast<std::ptrdiff_t>(pad);
                        S* dst = row + (b * ho + oy) * wo;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                            for (std::size_t ox = 0; ox < wo; ++ox) dst[ox] = S(0);
                            continue;
                        }
                        for (std::size_t ox = 0; ox < wo; ++ox) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox + kx * dil) -
                                static_cast<std::ptrdiff_t>(pad);
                            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w))
                                          ? S(0)
                                          : img[iy * w + ix];
                        }
                    }
                }
            }
}

template <class S>
void col2im_add(const S* col, std::size_t n, std::size_t cin, std::size_t h,
                std::size_t w, std::size_t k, std::size_t dil, std::size_t pad,
                std::size_t ho, std::size_t wo, S* gx) {
    const std::size_t cols = n * ho * wo;
    for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
                const S* row = col + ((ci * k + ky) * k + kx) * cols;
                for (std::size_t b = 0; b < n; ++b) {
                    S* img = gx + (b * cin + ci) * h * w;
                    for (std::size_t oy = 0; oy < ho; ++oy) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(oy + ky * dil) -
                            static_cast<std::ptrdiff_t>(pad);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        const S* src = row + (b * ho + oy) * wo;
                        for (std::size_t ox = 0; ox < wo; ++ox) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox + kx * dil) -
                                static_cast<std::ptrdiff_t>(pad);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                            img[iy * w + ix] += src[ox];
                        }
                    }
                }
            }
}

}  // namespace detail

template <class S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias,
                 std::size_t dilation = 1, std::size_t padding = 0) {
    if (x.ndim() != 4 || w.ndim() != 4)
        throw DimensionError("conv2d: expected x (N,Cin,H,W), w (Cout,Cin,k,k)");
    const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::size_t cout = w.dim(0), k = w.dim(2);
    if (w.dim(1) != cin)
        throw DimensionError("conv2d: channel mismatch, input has " + std::to_string(cin) +
                             ", kernel expects " + std::to_string(w.dim(1)));
    if (w.dim(3) != k) throw DimensionError("conv2d: kernel must be square");
    if (bias.size() != cout) throw DimensionError("conv2d: bias/Cout mismatch");
    const std::size_t span = dilation * (k - 1);
    if (h + 2 * padding < span + 1 || wd + 2 * padding < span + 1)
        throw ArgumentError("conv2d: kernel span exceeds padded input");
    const std::size_t ho = h + 2 * padding - span;
    const std::size_t wo = wd + 2 * padding - span;
    const std::size_t kk = cin * k * k;
    const std::size_t cols = n * ho * wo;

    std::vector<S> col(kk * cols);
    detail::im2col(x.data(), n, cin, h, wd, k, dilation, padding, ho, wo, col.data());
    // y_mat (cout x cols) then reorder to (N,Cout,H',W')
    std::vector<S> y_mat(cout * cols);
    gemm(false, false, static_cast<int>(cout), static_cast<int>(cols),
         static_cast<int>(kk), S(1), w.data(), static_cast<int>(kk), col.data(),
         static_cast<int>(cols), S(0), y_mat.data(), static_cast<int>(cols));
    col.clear();
    col.shrink_to_fit();
    std::vector<S> v(n * cout * ho * wo);
    const std::size_t hw = ho * wo;
    for (std::size_t co = 0; co < cout; ++co) {
        const S b = bias.data()[co];
        for (std::size_t bi = 0; bi < n; ++bi) {
            const S* src = y_mat.data() + co * cols + bi * hw;
            S* dst = v.data() + (bi * cout + co) * hw;
            for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] + b;
        }
    }
    return detail::make_op<S>(
        "conv2d", {n, cout, ho, wo}, std::move(v), {x, w, bias},
        [n, cin, h, wd, cout, k, dilation, padding, ho, wo, kk,
         cols](detail::Node<S>& self) {
            auto& px = *self.parents[0];
            auto& pw = *self.parents[1];
            auto& pb = *self.parents[2];
            const std::size_t hw = ho * wo;
            // reorder dY to (cout x cols)
            std::vector<S> gy_mat(cout * cols);
            for (std::size_t co = 0; co < cout; ++co)
                for (std::size_t bi = 0; bi < n; ++bi) {
                    const S* src = self.grad.data() + (bi * cout + co) * hw;
                    S* dst = gy_mat.data() + co * cols + bi * hw;
                    for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i];
                }
            if (pb.requires_grad) {
                auto& g = detail::ensure_grad(pb);
                for (std::size_t co = 0; co < cout; ++co) {
                    S acc = S(0);
                    const S* row = gy_mat.data() + co * cols;
                    for (std::size_t i = 0; i < cols; ++i) acc += row[i];
                    g[co] += acc;
                }
            }
            if (pw.requires_grad) {
                std::vector<S> col(kk * cols);
                detail::im2col(px.value.data(), n, cin, h, wd, k, dilation, padding, ho,
                               wo, col.data());
                auto& g = detail::ensure_grad(pw);
                // dW = dY_mat . col^T
                gemm(false, true, static_cast<int>(cout), static_cast<int>(kk),
                     static_cast<int>(cols), S(1), gy_mat.data(),
                     static_cast<int>(cols), col.data(), static_cast<int>(cols), S(1),
                     g.data(), static_cast<int>(kk));
            }
            if (px.requires_grad) {
                // dcol = W^T . dY_mat, then scatter back
                std::vector<S> dcol(kk * cols);
                gemm(true, false, static_cast<int>(kk), static_cast<int>(cols),
                     static_cast<int>(cout), S(1), pw.value.data(),
                     static_cast<int>(kk), gy_mat.data(), static_cast<int>(cols), S(0),
                     dcol.data(), static_cast<int>(cols));
                auto& g = detail::ensure_grad(px);
                detail::col2im_add(dcol.data(), n, cin, h, wd, k, dilation, padding, ho,
                                   wo, g.data());
            }
        });
}

// ---------------------------------------------------------------------------
// Symmetric (border-excluding) reflection padding on the two spatial axes:
// (N,C,H,W) -> (N,C,H+2p,W+2p). Index -1 maps to 1, H maps to H-2.
// ---------------------------------------------------------------------------
namespace detail {

inline std::size_t reflect_coord(std::ptrdiff_t i, std::size_t n) {
    if (n == 1) return 0;
    const std::ptrdiff_t period = 2 * (static_cast<std::ptrdiff_t>(n) - 1);
    std::ptrdiff_t m = i % period;
    if (m < 0) m += period;
    if (m >= static_cast<std::ptrdiff_t>(n)) m = period - m;
    return static_cast<std::size_t>(m);
}

}  // namespace detail

template <class S>
Tensor<S> reflect_pad2d(const Tensor<S>& x, std::size_t pad) {
    if (x.ndim() != 4) throw DimensionError("reflect_pad2d: expected (N,C,H,W)");
    if (pad == 0) return x;
    const std::size_t nc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t ho = h + 2 * pad, wo = w + 2 * pad;
    std::vector<S> v(nc * ho * wo);
    std::vector<std::uint32_t> src_y(ho), src_x(wo);
    for (std::size_t i = 0; i < ho; ++i)
        src_y[i] = static_cast<std::uint32_t>(detail::reflect_coord(
            static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(pad), h));
    for (std::size_t i = 0; i < wo; ++i)
        src_x[i] = static_cast<std::uint32_t>(detail::reflect_coord(
            static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(pad), w));
    for (std::size_t p = 0; p < nc; ++p)
        for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox)
                v[(p * ho + oy) * wo + ox] = x.data()[(p * h + src_y[oy]) * w + src_x[ox]];
    return detail::make_op<S>(
        "reflect_pad2d", {x.dim(0), x.dim(1), ho, wo}, std::move(v), {x},
        [nc, h, w, ho, wo, src_y, src_x](detail::Node<S>& self) {
            auto& p0 = *self.parents[0];
            if (!p0.requires_grad) return;
            auto& g = detail::ensure_grad(p0);
            for (std::size_t p = 0; p < nc; ++p)
                for (std::size_t oy = 0; oy < ho; ++oy)
                    for (std::size_t ox = 0; ox < wo; ++ox)
                        g[(p * h + src_y[oy]) * w + src_x[ox]] +=
                            self.grad[(p * ho + oy) * wo + ox];
        });
}

// ---------------------------------------------------------------------------
// Per-pixel channel statistics (mean, max, std, min) -> (N,4,H,W).
// std uses the population variance with eps inside the square root.
// ---------------------------------------------------------------------------
template <class S>
Tensor<S> channel_stats(const Tensor<S>& x, double eps = 1e-8) {
    if (x.ndim() != 4) throw DimensionError("channel_stats: expected (N,C,H,W)");
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    std::vector<S> v(n * 4 * hw);
    std::vector<std::uint32_t> argmax(n * hw), argmin(n * hw);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < hw; ++i) {
            double mean = 0;
            S mx = x.data()[(b * c) * hw + i], mn = mx;
            std::size_t amx = 0, amn = 0;
            for (std::size_t ch = 0; ch < c; ++ch) {
                const S val = x.data()[(b * c + ch) * hw + i];
                mean += static_cast<double>(val);
                if (val > mx) {
                    mx = val;
                    amx = ch;
                }
                if (val < mn) {
                    mn = val;
                    amn = ch;
                }
            }
            mean /= static_cast<double>(c);
            double var = 0;
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double d = static_cast<double>(x.data()[(b * c + ch) * hw + i]) - mean;
                var += d * d;
            }
            var /= static_cast<double>(c);
            const std::size_t base = b * 4 * hw;
            v[base + 0 * hw + i] = static_cast<S>(mean);
            v[base + 1 * hw + i] = mx;
            v[base + 2 * hw + i] = static_cast<S>(std::sqrt(var + eps));
            v[base + 3 * hw + i] = mn;
            argmax[b * hw + i] = static_cast<std::uint32_t>(amx);
            argmin[b * hw + i] = static_cast<std::uint32_t>(amn);
        }
    return detail::make_op<S>(
        "channel_stats", {n, 4, x.dim(2), x.dim(3)}, std::move(v), {x},
        [n, c, hw, argmax, argmin](detail::Node<S>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            auto& g = detail::ensure_grad(p);
            const S invc = S(1) / static_cast<S>(c);
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t i = 0; i < hw; ++i) {
                    const std::size_t base = b * 4 * hw;
                    const S g_mean = self.grad[base + 0 * hw + i];
                    const S g_max = self.grad[base + 1 * hw + i];
                    const S g_std = self.grad[base + 2 * hw + i];
                    const S g_min = self.grad[base + 3 * hw + i];
                    const S mean = self.value[base + 0 * hw + i];
                    const S sd = self.value[base + 2 * hw + i];
                    // d std / d x_ch = (x_ch - mean) / (C * std)
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        const std::size_t xi = (b * c + ch) * hw + i;
                        S acc = g_mean * invc;
                        acc += g_std * (p.value[xi] - mean) * invc / sd;
                        if (ch == argmax[b * hw + i]) acc += g_max;
                        if (ch == argmin[b * hw + i]) acc += g_min;
                        g[xi] += acc;
                    }
                }
        });
}

// ---------------------------------------------------------------------------
// Mean cross-entropy over the batch from raw logits, via stable log-sum-exp.
// Labels are 0-based here; the 1..C surface translation happens upstream.
// ---------------------------------------------------------------------------
template <class S>
Tensor<S> cross_entropy(const Tensor<S>& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2) throw DimensionError("cross_entropy: expected (N,C) logits");
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    if (labels.size() != n)
        throw ArgumentError("cross_entropy: batch size mismatch between logits and labels");
    std::vector<S> probs(n * c);
    double loss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= static_cast<int>(c))
            throw ArgumentError("cross_entropy: label " + std::to_string(labels[i]) +
                                " out of range for " + std::to_string(c) + " classes");
        const S* row = logits.data() + i * c;
        double mx = static_cast<double>(row[0]);
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, static_cast<double>(row[j]));
        double denom = 0;
        for (std::size_t j = 0; j < c; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
        const double log_denom = std::log(denom) + mx;
        for (std::size_t j = 0; j < c; ++j)
            probs[i * c + j] = static_cast<S>(std::exp(static_cast<double>(row[j]) - log_denom));
        loss += log_denom - static_cast<double>(row[labels[i]]);
    }
    loss /= static_cast<double>(n);
    return detail::make_op<S>(
        "cross_entropy", {}, {static_cast<S>(loss)}, {logits},
        [n, c, probs, labels](detail::Node<S>& self) {
            auto& p = *self.parents[0];
            if (!p.requires_grad) return;
            auto& g = detail::ensure_grad(p);
            const S scale = self.grad[0] / static_cast<S>(n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < c; ++j) {
                    S d = probs[i * c + j];
                    if (static_cast<int>(j) == labels[i]) d -= S(1);
                    g[i * c + j] += scale * d;
                }
        });
}

}  // namespace clares
