#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace clares {

// rows = true class, cols = predicted class; class ids on the surface are
// 1..C, stored 0-based.
struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<std::int64_t> counts;  // C x C

    explicit ConfusionMatrix(std::size_t c = 0) : classes(c), counts(c * c, 0) {}
    std::int64_t& at(std::size_t t, std::size_t p) { return counts[t * classes + p]; }
    std::int64_t at(std::size_t t, std::size_t p) const { return counts[t * classes + p]; }
    std::int64_t total() const;
    std::int64_t row_sum(std::size_t t) const;
    std::int64_t col_sum(std::size_t p) const;
};

ConfusionMatrix confusion(const std::vector<int>& labels, const std::vector<int>& preds,
                          std::size_t classes);

double overall_accuracy(const ConfusionMatrix& cm);

// Mean per-class recall. Empty classes (zero row sum) raise an error unless
// skip_empty is set, in which case they are excluded from the mean.
double balanced_accuracy(const ConfusionMatrix& cm, bool skip_empty = false);

double cohen_kappa(const ConfusionMatrix& cm);

// Multiclass Matthews correlation (covariance form). A zero denominator is
// reported via `degenerate` with value 0 instead of throwing, so sweeping
// many evaluations never aborts.
struct MccResult {
    double value = 0.0;
    bool degenerate = false;
};
MccResult mcc(const ConfusionMatrix& cm);

// Pair-counting adjusted Rand index; a zero denominator (e.g. one cluster on
// both sides) returns 1 by convention.
double ari(const std::vector<int>& labels, const std::vector<int>& preds);

struct CentroidDistances {
    std::size_t classes = 0;
    std::vector<double> matrix;  // C x C Euclidean distances
    double mean_off_diagonal = 0.0;
};
CentroidDistances centroid_distances(const std::vector<float>& embeddings, std::size_t n,
                                     std::size_t dim, const std::vector<int>& labels,
                                     std::size_t classes);

// Natural-log entropy per probability row (0*ln 0 = 0). Rows must be
// nonnegative and sum to 1 within 1e-5.
std::vector<double> entropy_rows(const std::vector<float>& probs, std::size_t n,
                                 std::size_t classes);

// One-vs-rest precision/recall sweep in descending score order (stable sort,
// so ties keep input order) and the step-wise average precision
// AP = sum_k (R_k - R_{k-1}) * P_k.
struct PrPoint {
    double threshold = 0.0, precision = 0.0, recall = 0.0;
};
struct PrCurve {
    std::vector<PrPoint> points;
    double average_precision = 0.0;
    bool defined = true;  // false when the class never occurs in the labels
};
PrCurve pr_curve(const std::vector<double>& scores, const std::vector<char>& positive);

struct PerClassStats {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    std::int64_t support = 0;
};
PerClassStats per_class_stats(const ConfusionMatrix& cm, std::size_t cls);

}  // namespace clares
