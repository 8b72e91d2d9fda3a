#include "clares/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "clares/error.hpp"

namespace clares {

std::int64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::row_sum(std::size_t t) const {
    std::int64_t s = 0;
    for (std::size_t p = 0; p < classes; ++p) s += at(t, p);
    return s;
}

std::int64_t ConfusionMatrix::col_sum(std::size_t p) const {
    std::int64_t s = 0;
    for (std::size_t t = 0; t < classes; ++t) s += at(t, p);
    return s;
}

ConfusionMatrix confusion(const std::vector<int>& labels, const std::vector<int>& preds,
                          std::size_t classes) {
    if (labels.size() != preds.size())
        throw ArgumentError("confusion: labels and predictions differ in length");
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int t = labels[i], p = preds[i];
        if (t < 1 || t > static_cast<int>(classes) || p < 1 || p > static_cast<int>(classes))
            throw ArgumentError("confusion: class id outside 1.." + std::to_string(classes));
        ++cm.at(static_cast<std::size_t>(t - 1), static_cast<std::size_t>(p - 1));
    }
    return cm;
}

double overall_accuracy(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) throw ArgumentError("overall_accuracy: empty confusion matrix");
    std::int64_t diag = 0;
    for (std::size_t c = 0; c < cm.classes; ++c) diag += cm.at(c, c);
    return static_cast<double>(diag) / static_cast<double>(total);
}

double balanced_accuracy(const ConfusionMatrix& cm, bool skip_empty) {
    if (cm.total() == 0) throw ArgumentError("balanced_accuracy: empty confusion matrix");
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t c = 0; c < cm.classes; ++c) {
        const auto row = cm.row_sum(c);
        if (row == 0) {
            if (skip_empty) continue;
            throw ArgumentError("balanced_accuracy: class " + std::to_string(c + 1) +
                                " has no samples");
        }
        sum += static_cast<double>(cm.at(c, c)) / static_cast<double>(row);
        ++counted;
    }
    if (counted == 0) throw ArgumentError("balanced_accuracy: all classes empty");
    return sum / static_cast<double>(counted);
}

double cohen_kappa(const ConfusionMatrix& cm) {
    const double total = static_cast<double>(cm.total());
    if (total == 0) throw ArgumentError("cohen_kappa: empty confusion matrix");
    const double po = overall_accuracy(cm);
    double pe = 0.0;
    for (std::size_t c = 0; c < cm.classes; ++c)
        pe += static_cast<double>(cm.row_sum(c)) * static_cast<double>(cm.col_sum(c));
    pe /= total * total;
    if (std::abs(1.0 - pe) < 1e-15)
        throw NumericError("cohen_kappa: expected agreement is 1, kappa undefined");
    return (po - pe) / (1.0 - pe);
}

MccResult mcc(const ConfusionMatrix& cm) {
    // covariance form: (c*s - sum_k p_k t_k) /
    //                  sqrt((s^2 - sum p_k^2)(s^2 - sum t_k^2))
    const double s = static_cast<double>(cm.total());
    if (s == 0.0) throw ArgumentError("mcc: empty confusion matrix");
    double c = 0.0;
    for (std::size_t k = 0; k < cm.classes; ++k) c += static_cast<double>(cm.at(k, k));
    double pt = 0.0, pp = 0.0, tt = 0.0;
    for (std::size_t k = 0; k < cm.classes; ++k) {
        const double p = static_cast<double>(cm.col_sum(k));
        const double t = static_cast<double>(cm.row_sum(k));
        pt += p * t;
        pp += p * p;
        tt += t * t;
    }
    const double denom = std::sqrt((s * s - pp) * (s * s - tt));
    if (denom == 0.0) return {0.0, true};
    return {(c * s - pt) / denom, false};
}

double ari(const std::vector<int>& labels, const std::vector<int>& preds) {
    if (labels.size() != preds.size())
        throw ArgumentError("ari: labels and predictions differ in length");
    if (labels.empty()) throw ArgumentError("ari: empty input");
    auto compact = [](const std::vector<int>& v, std::vector<std::size_t>& idx) {
        std::map<int, std::size_t> ids;
        idx.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            auto [it, _] = ids.try_emplace(v[i], ids.size());
            idx[i] = it->second;
        }
        return ids.size();
    };
    std::vector<std::size_t> li, pi;
    const std::size_t cl = compact(labels, li);
    const std::size_t cp = compact(preds, pi);
    std::vector<std::int64_t> table(cl * cp, 0), rows(cl, 0), cols(cp, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ++table[li[i] * cp + pi[i]];
        ++rows[li[i]];
        ++cols[pi[i]];
    }
    auto comb2 = [](std::int64_t n) -> double {
        return 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    };
    double sum_ij = 0.0, sum_i = 0.0, sum_j = 0.0;
    for (auto v : table) sum_ij += comb2(v);
    for (auto v : rows) sum_i += comb2(v);
    for (auto v : cols) sum_j += comb2(v);
    const double all = comb2(static_cast<std::int64_t>(labels.size()));
    const double expected = sum_i * sum_j / all;
    const double max_index = 0.5 * (sum_i + sum_j);
    if (std::abs(max_index - expected) < 1e-12) return 1.0;
    return (sum_ij - expected) / (max_index - expected);
}

CentroidDistances centroid_distances(const std::vector<float>& embeddings, std::size_t n,
                                     std::size_t dim, const std::vector<int>& labels,
                                     std::size_t classes) {
    if (labels.size() != n || embeddings.size() != n * dim)
        throw ArgumentError("centroid_distances: inconsistent input sizes");
    std::vector<double> centroids(classes * dim, 0.0);
    std::vector<std::int64_t> counts(classes, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const int c = labels[i];
        if (c < 1 || c > static_cast<int>(classes))
            throw ArgumentError("centroid_distances: class id outside 1.." +
                                std::to_string(classes));
        ++counts[static_cast<std::size_t>(c - 1)];
        for (std::size_t k = 0; k < dim; ++k)
            centroids[static_cast<std::size_t>(c - 1) * dim + k] +=
                static_cast<double>(embeddings[i * dim + k]);
    }
    for (std::size_t c = 0; c < classes; ++c) {
        if (counts[c] == 0)
            throw ArgumentError("centroid_distances: class " + std::to_string(c + 1) +
                                " has no embeddings");
        for (std::size_t k = 0; k < dim; ++k)
            centroids[c * dim + k] /= static_cast<double>(counts[c]);
    }
    CentroidDistances out;
    out.classes = classes;
    out.matrix.assign(classes * classes, 0.0);
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < classes; ++a)
        for (std::size_t b = a + 1; b < classes; ++b) {
            double d2 = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double d = centroids[a * dim + k] - centroids[b * dim + k];
                d2 += d * d;
            }
            const double d = std::sqrt(d2);
            out.matrix[a * classes + b] = d;
            out.matrix[b * classes + a] = d;
            sum += d;
            ++pairs;
        }
    out.mean_off_diagonal = pairs > 0 ? sum / static_cast<double>(pairs) : 0.0;
    return out;
}

std::vector<double> entropy_rows(const std::vector<float>& probs, std::size_t n,
                                 std::size_t classes) {
    if (probs.size() != n * classes) throw ArgumentError("entropy: inconsistent sizes");
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0, h = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            const double p = static_cast<double>(probs[i * classes + c]);
            if (p < 0.0) throw ArgumentError("entropy: negative probability");
            sum += p;
            if (p > 0.0) h -= p * std::log(p);
        }
        if (std::abs(sum - 1.0) > 1e-5)
            throw ArgumentError("entropy: probability row does not sum to 1");
        out[i] = h;
    }
    return out;
}

PrCurve pr_curve(const std::vector<double>& scores, const std::vector<char>& positive) {
    if (scores.size() != positive.size())
        throw ArgumentError("pr_curve: scores and labels differ in length");
    PrCurve curve;
    const std::int64_t total_pos =
        std::count_if(positive.begin(), positive.end(), [](char c) { return c != 0; });
    if (total_pos == 0) {
        curve.defined = false;
        return curve;
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::int64_t tp = 0;
    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (positive[order[k]]) ++tp;
        const double precision = static_cast<double>(tp) / static_cast<double>(k + 1);
        const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        curve.points.push_back({scores[order[k]], precision, recall});
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    curve.average_precision = ap;
    return curve;
}

PerClassStats per_class_stats(const ConfusionMatrix& cm, std::size_t cls) {
    PerClassStats s;
    const std::int64_t tp = cm.at(cls, cls);
    const std::int64_t row = cm.row_sum(cls), col = cm.col_sum(cls);
    s.support = row;
    s.precision = col > 0 ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    s.recall = row > 0 ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    s.f1 = (s.precision + s.recall) > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    return s;
}

}  // namespace clares
