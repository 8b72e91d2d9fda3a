#pragma once

// Independent reference implementations used to pin expected values. These
// deliberately avoid the library's compute paths: plain loops, O(n^2) pair
// counting, exhaustive threshold sweeps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

namespace oracle {

// --- dense cross-correlation with dilation + zero padding ------------------
inline std::vector<double> conv2d(const std::vector<double>& x, std::size_t n,
                                  std::size_t cin, std::size_t h, std::size_t w,
                                  const std::vector<double>& weight, std::size_t cout,
                                  std::size_t k, const std::vector<double>& bias,
                                  std::size_t dil, std::size_t pad, std::size_t& ho,
                                  std::size_t& wo) {
    ho = h + 2 * pad - dil * (k - 1);
    wo = w + 2 * pad - dil * (k - 1);
    std::vector<double> y(n * cout * ho * wo, 0.0);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t oy = 0; oy < ho; ++oy)
                for (std::size_t ox = 0; ox < wo; ++ox) {
                    double acc = bias[co];
                    for (std::size_t ci = 0; ci < cin; ++ci)
                        for (std::size_t ky = 0; ky < k; ++ky)
                            for (std::size_t kx = 0; kx < k; ++kx) {
                                const std::ptrdiff_t iy =
                                    static_cast<std::ptrdiff_t>(oy + ky * dil) -
                                    static_cast<std::ptrdiff_t>(pad);
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox + kx * dil) -
                                    static_cast<std::ptrdiff_t>(pad);
                                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h) ||
                                    ix < 0 || ix >= static_cast<std::ptrdiff_t>(w))
                                    continue;
                                acc += x[((b * cin + ci) * h + iy) * w + ix] *
                                       weight[((co * cin + ci) * k + ky) * k + kx];
                            }
                    y[((b * cout + co) * ho + oy) * wo + ox] = acc;
                }
    return y;
}

// --- metrics over raw label/prediction lists (1..C) ------------------------
inline double accuracy(const std::vector<int>& t, const std::vector<int>& p) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < t.size(); ++i) ok += (t[i] == p[i]);
    return static_cast<double>(ok) / static_cast<double>(t.size());
}

inline double balanced_accuracy(const std::vector<int>& t, const std::vector<int>& p,
                                int classes) {
    double sum = 0.0;
    int counted = 0;
    for (int c = 1; c <= classes; ++c) {
        std::size_t total = 0, ok = 0;
        for (std::size_t i = 0; i < t.size(); ++i)
            if (t[i] == c) {
                ++total;
                ok += (p[i] == c);
            }
        if (total == 0) continue;
        sum += static_cast<double>(ok) / static_cast<double>(total);
        ++counted;
    }
    return sum / counted;
}

inline double kappa(const std::vector<int>& t, const std::vector<int>& p, int classes) {
    const double n = static_cast<double>(t.size());
    double po = accuracy(t, p);
    double pe = 0.0;
    for (int c = 1; c <= classes; ++c) {
        double nt = 0, np = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            nt += (t[i] == c);
            np += (p[i] == c);
        }
        pe += (nt / n) * (np / n);
    }
    return (po - pe) / (1.0 - pe);
}

inline double mcc(const std::vector<int>& t, const std::vector<int>& p, int classes) {
    const double s = static_cast<double>(t.size());
    double c = 0;
    for (std::size_t i = 0; i < t.size(); ++i) c += (t[i] == p[i]);
    double pt = 0, pp = 0, tt = 0;
    for (int k = 1; k <= classes; ++k) {
        double nt = 0, np = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            nt += (t[i] == k);
            np += (p[i] == k);
        }
        pt += np * nt;
        pp += np * np;
        tt += nt * nt;
    }
    const double denom = std::sqrt((s * s - pp) * (s * s - tt));
    if (denom == 0.0) return 0.0;
    return (c * s - pt) / denom;
}

// ARI by O(n^2) pair counting: agreement over all unordered sample pairs.
inline double ari_pairs(const std::vector<int>& a, const std::vector<int>& b) {
    const std::size_t n = a.size();
    double n11 = 0, n00 = 0, n10 = 0, n01 = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool sa = a[i] == a[j], sb = b[i] == b[j];
            if (sa && sb)
                ++n11;
            else if (!sa && !sb)
                ++n00;
            else if (sa)
                ++n10;
            else
                ++n01;
        }
    const double total = n11 + n00 + n10 + n01;
    const double expected = (n11 + n10) * (n11 + n01) / total;
    const double maximum = 0.5 * ((n11 + n10) + (n11 + n01));
    if (std::abs(maximum - expected) < 1e-12) return 1.0;
    return (n11 - expected) / (maximum - expected);
}

// Average precision by exhaustive threshold enumeration: one point per rank
// in stable descending-score order, AP = sum (R_k - R_{k-1}) P_k.
inline double average_precision(const std::vector<double>& scores,
                                const std::vector<char>& positive) {
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return scores[x] > scores[y]; });
    double total_pos = 0;
    for (char c : positive) total_pos += (c != 0);
    double tp = 0, ap = 0, prev_r = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        tp += (positive[order[k]] != 0);
        const double prec = tp / static_cast<double>(k + 1);
        const double rec = tp / total_pos;
        ap += (rec - prev_r) * prec;
        prev_r = rec;
    }
    return ap;
}

// Scalar LSTM/GRU cells for single-unit numeric checks.
struct ScalarLstm {
    double wi, wf, wg, wo;      // input weights
    double ui, uf, ug, uo;      // recurrent weights
    double bi, bf, bg, bo;      // combined biases
    static double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }
    std::pair<double, double> step(double x, double h, double c) const {
        const double i = sig(wi * x + ui * h + bi);
        const double f = sig(wf * x + uf * h + bf);
        const double g = std::tanh(wg * x + ug * h + bg);
        const double o = sig(wo * x + uo * h + bo);
        const double cn = f * c + i * g;
        return {o * std::tanh(cn), cn};
    }
};

struct ScalarGru {
    double wr, wz, wn, ur, uz, un;
    double bir, biz, bin, bhr, bhz, bhn;
    static double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }
    double step(double x, double h) const {
        const double r = sig(wr * x + bir + ur * h + bhr);
        const double z = sig(wz * x + biz + uz * h + bhz);
        const double n = std::tanh(wn * x + bin + r * (un * h + bhn));
        return (1.0 - z) * n + z * h;
    }
};

}  // namespace oracle
