#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clares/rng.hpp"
#include "clares/tensor.hpp"

namespace clares {

// Dense (rows, cols, bands) raster, row-major with bands fastest.
struct HsiCube {
    std::size_t rows = 0, cols = 0, bands = 0;
    std::vector<float> data;

    float& at(std::size_t r, std::size_t c, std::size_t b) {
        return data[(r * cols + c) * bands + b];
    }
    float at(std::size_t r, std::size_t c, std::size_t b) const {
        return data[(r * cols + c) * bands + b];
    }
    std::size_t pixels() const { return rows * cols; }
};

// Class ids 0..C, 0 = unlabeled.
struct LabelMap {
    std::size_t rows = 0, cols = 0;
    std::vector<std::int32_t> labels;

    std::int32_t at(std::size_t r, std::size_t c) const { return labels[r * cols + c]; }
    std::int32_t max_label() const;
};

using PixelCoord = std::pair<std::uint32_t, std::uint32_t>;

struct SplitSpec {
    std::uint64_t seed = 0;
    std::vector<PixelCoord> train, val, test;
};

struct PcaModel {
    std::size_t bands = 0, components = 0;
    std::vector<double> band_means, band_stds;     // (B)
    std::vector<double> comps;                     // (B, T) row-major
    std::vector<double> explained_variance;        // (T), non-increasing
};

struct Patch {
    std::size_t bands = 0, patch = 0;
    std::vector<float> values;  // (T, P, P)
    std::int32_t label = 0;
    PixelCoord origin{0, 0};
};

struct AugmentConfig {
    double noise_std = 0.05;
    double noise_prob = 0.5;
    double rot_prob = 0.5;
    double flip_prob = 0.5;
};

// ---------------------------------------------------------------------------

struct StandardizeResult {
    HsiCube cube;
    std::vector<double> band_means, band_stds;  // population std, clamped at 1e-8
};

StandardizeResult standardize(const HsiCube& cube);

// HSZ-backed cube and label IO.
HsiCube load_cube(const std::string& path);
void save_cube(const std::string& path, const HsiCube& cube);
LabelMap load_labels(const std::string& path);
void save_labels(const std::string& path, const LabelMap& labels);

// PCA over all pixels of a (typically raw) cube; the model records per-band
// mean/std and projects standardized pixels onto the top eigenvectors of the
// band correlation matrix. `coords`, when given, restricts the fit population
// (the inductive variant).
PcaModel fit_pca(const HsiCube& cube, std::size_t n_components,
                 const std::vector<PixelCoord>* coords = nullptr);
HsiCube apply_pca(const HsiCube& cube, const PcaModel& model);
void save_pca_json(const std::string& path, const PcaModel& model);
PcaModel load_pca_json(const std::string& path);

// Per-class shuffle with a child stream per class, then cuts at rounded
// cumulative boundaries round(0.72 n), round(0.80 n); every class keeps at
// least one sample per split (topped up from train).
SplitSpec stratified_split(const LabelMap& labels, double train_ratio, double val_ratio,
                           double test_ratio, std::uint64_t seed);
void save_split_json(const std::string& path, const SplitSpec& split);
SplitSpec load_split_json(const std::string& path);

// Symmetric (border-excluding) reflection: index -1 maps to 1, -k to k, and
// indices past the edge mirror back likewise.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n);

// P x P window centered at (row, col) across all bands, axes (T, P, P).
Patch extract_patch(const HsiCube& cube, std::size_t row, std::size_t col,
                    std::size_t patch_size);

// Independently: Gaussian noise (noise_prob), rotation by 90/180/270
// (rot_prob, uniform choice), horizontal-or-vertical flip (flip_prob, uniform
// choice), applied in that order. Label and shape are untouched.
Patch augment(const Patch& patch, const AugmentConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Mini-batch iteration over a coordinate list. The visit order is fixed up
// front (optionally shuffled with the caller's stream); each sample is seen
// exactly once per pass, the last batch may be short.
// ---------------------------------------------------------------------------
struct Batch {
    Tensor<float> x;  // (N, T, P, P)
    std::vector<int> labels;  // 1..C, 0 where unlabeled
    std::vector<PixelCoord> coords;
};

class BatchIter {
public:
    BatchIter(const HsiCube& cube, const LabelMap* labels,
              std::vector<PixelCoord> order, std::size_t batch_size,
              std::size_t patch_size, const AugmentConfig* augment_cfg, Rng* rng,
              bool shuffle);

    std::optional<Batch> next();
    std::size_t total() const { return order_.size(); }

private:
    const HsiCube& cube_;
    const LabelMap* labels_;
    std::vector<PixelCoord> order_;
    std::size_t batch_size_, patch_size_, pos_ = 0;
    const AugmentConfig* augment_cfg_;
    Rng* rng_;
};

}  // namespace clares
