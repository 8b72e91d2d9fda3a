#include "clares/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "clares/error.hpp"
#include "clares/hsz.hpp"

namespace clares {

std::int32_t LabelMap::max_label() const {
    std::int32_t mx = 0;
    for (auto v : labels) mx = std::max(mx, v);
    return mx;
}

HsiCube load_cube(const std::string& path) {
    auto raw = hsz::read(path);
    if (raw.dtype != hsz::kDtypeF32 || raw.dims.size() != 3)
        throw FormatError(path + ": cube must be float32 with 3 dims");
    HsiCube cube;
    cube.rows = raw.dims[0];
    cube.cols = raw.dims[1];
    cube.bands = raw.dims[2];
    if (cube.bands == 0) throw FormatError(path + ": cube needs at least one band");
    cube.data = std::move(raw.f32);
    return cube;
}

void save_cube(const std::string& path, const HsiCube& cube) {
    hsz::write_f32(path,
                   {static_cast<std::uint32_t>(cube.rows),
                    static_cast<std::uint32_t>(cube.cols),
                    static_cast<std::uint32_t>(cube.bands)},
                   cube.data.data());
}

LabelMap load_labels(const std::string& path) {
    auto raw = hsz::read(path);
    if (raw.dtype != hsz::kDtypeI32 || raw.dims.size() != 2)
        throw FormatError(path + ": label map must be int32 with 2 dims");
    LabelMap lm;
    lm.rows = raw.dims[0];
    lm.cols = raw.dims[1];
    lm.labels = std::move(raw.i32);
    for (auto v : lm.labels)
        if (v < 0) throw FormatError(path + ": negative class id in label map");
    return lm;
}

void save_labels(const std::string& path, const LabelMap& labels) {
    hsz::write_i32(path,
                   {static_cast<std::uint32_t>(labels.rows),
                    static_cast<std::uint32_t>(labels.cols)},
                   labels.labels.data());
}

StandardizeResult standardize(const HsiCube& cube) {
    if (cube.pixels() == 0 || cube.bands == 0)
        throw DimensionError("standardize: empty cube");
    const std::size_t n = cube.pixels(), b = cube.bands;
    StandardizeResult res;
    res.band_means.assign(b, 0.0);
    res.band_stds.assign(b, 0.0);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t k = 0; k < b; ++k)
            res.band_means[k] += static_cast<double>(cube.data[p * b + k]);
    for (auto& m : res.band_means) m /= static_cast<double>(n);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t k = 0; k < b; ++k) {
            const double d = static_cast<double>(cube.data[p * b + k]) - res.band_means[k];
            res.band_stds[k] += d * d;
        }
    for (auto& s : res.band_stds) s = std::max(std::sqrt(s / static_cast<double>(n)), 1e-8);
    res.cube.rows = cube.rows;
    res.cube.cols = cube.cols;
    res.cube.bands = b;
    res.cube.data.resize(cube.data.size());
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t k = 0; k < b; ++k)
            res.cube.data[p * b + k] = static_cast<float>(
                (static_cast<double>(cube.data[p * b + k]) - res.band_means[k]) /
                res.band_stds[k]);
    return res;
}

// ---------------------------------------------------------------------------
// Stratified split
// ---------------------------------------------------------------------------

SplitSpec stratified_split(const LabelMap& labels, double train_ratio, double val_ratio,
                           double test_ratio, std::uint64_t seed) {
    if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
        throw ArgumentError("stratified_split: ratios must sum to 1");
    const std::int32_t c = labels.max_label();
    if (c < 1) throw DataError("stratified_split: no labeled pixels");
    std::vector<std::vector<PixelCoord>> per_class(static_cast<std::size_t>(c) + 1);
    for (std::size_t r = 0; r < labels.rows; ++r)
        for (std::size_t col = 0; col < labels.cols; ++col) {
            const std::int32_t v = labels.at(r, col);
            if (v > 0)
                per_class[static_cast<std::size_t>(v)].push_back(
                    {static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(col)});
        }
    SplitSpec spec;
    spec.seed = seed;
    Rng master(seed);
    for (std::int32_t cls = 1; cls <= c; ++cls) {
        auto& coords = per_class[static_cast<std::size_t>(cls)];
        Rng class_rng = master.split();  // one child stream per class, in class order
        if (coords.empty()) continue;
        if (coords.size() < 3)
            throw DataError("stratified_split: class " + std::to_string(cls) + " has " +
                            std::to_string(coords.size()) + " labeled pixels, need >= 3");
        class_rng.shuffle(coords);
        const auto n = coords.size();
        auto bound = [n](double ratio) {
            return static_cast<std::size_t>(
                std::floor(ratio * static_cast<double>(n) + 0.5));
        };
        std::size_t b1 = bound(train_ratio);
        std::size_t b2 = bound(train_ratio + val_ratio);
        b2 = std::min(b2, n);
        b1 = std::min(b1, b2);
        // keep at least one sample per split, topping up from train
        if (b2 == n) b2 = n - 1;                 // empty test
        if (b1 == b2 && b1 > 0) b1 -= 1;         // empty val
        if (b1 == 0) {                           // empty train
            b1 = 1;
            if (b2 <= b1) b2 = b1 + 1;
        }
        for (std::size_t i = 0; i < b1; ++i) spec.train.push_back(coords[i]);
        for (std::size_t i = b1; i < b2; ++i) spec.val.push_back(coords[i]);
        for (std::size_t i = b2; i < n; ++i) spec.test.push_back(coords[i]);
    }
    return spec;
}

namespace {

nlohmann::json coords_to_json(const std::vector<PixelCoord>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [r, c] : v) arr.push_back({r, c});
    return arr;
}

std::vector<PixelCoord> coords_from_json(const nlohmann::json& arr) {
    std::vector<PixelCoord> v;
    v.reserve(arr.size());
    for (const auto& e : arr) v.push_back({e.at(0).get<std::uint32_t>(),
                                           e.at(1).get<std::uint32_t>()});
    return v;
}

}  // namespace

void save_split_json(const std::string& path, const SplitSpec& split) {
    nlohmann::json j;
    j["seed"] = split.seed;
    j["train"] = coords_to_json(split.train);
    j["val"] = coords_to_json(split.val);
    j["test"] = coords_to_json(split.test);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump() << "\n";
}

SplitSpec load_split_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
        SplitSpec s;
        s.seed = j.at("seed").get<std::uint64_t>();
        s.train = coords_from_json(j.at("train"));
        s.val = coords_from_json(j.at("val"));
        s.test = coords_from_json(j.at("test"));
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": bad split file: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Patches and augmentation
// ---------------------------------------------------------------------------

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
    if (n == 1) return 0;
    const std::ptrdiff_t period = 2 * (static_cast<std::ptrdiff_t>(n) - 1);
    std::ptrdiff_t m = i % period;
    if (m < 0) m += period;
    if (m >= static_cast<std::ptrdiff_t>(n)) m = period - m;
    return static_cast<std::size_t>(m);
}

Patch extract_patch(const HsiCube& cube, std::size_t row, std::size_t col,
                    std::size_t patch_size) {
    if (patch_size % 2 == 0) throw ArgumentError("extract_patch: patch size must be odd");
    // a 1-pixel extent reflects everything onto the single sample, so the
    // size bound only applies to non-degenerate axes
    const std::size_t min_extent = std::min(cube.rows, cube.cols);
    if (min_extent > 1 && patch_size > 2 * min_extent)
        throw ArgumentError("extract_patch: patch size exceeds twice the raster extent");
    if (row >= cube.rows || col >= cube.cols)
        throw ArgumentError("extract_patch: center outside the cube");
    const std::size_t p = patch_size, t = cube.bands;
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(p / 2);
    Patch out;
    out.bands = t;
    out.patch = p;
    out.origin = {static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(col)};
    out.values.resize(t * p * p);
    for (std::size_t dy = 0; dy < p; ++dy) {
        const std::size_t sr = reflect_index(
            static_cast<std::ptrdiff_t>(row) - half + static_cast<std::ptrdiff_t>(dy),
            cube.rows);
        for (std::size_t dx = 0; dx < p; ++dx) {
            const std::size_t sc = reflect_index(
                static_cast<std::ptrdiff_t>(col) - half + static_cast<std::ptrdiff_t>(dx),
                cube.cols);
            const float* px = &cube.data[(sr * cube.cols + sc) * t];
            for (std::size_t b = 0; b < t; ++b)
                out.values[(b * p + dy) * p + dx] = px[b];
        }
    }
    return out;
}

namespace {

// out(r, c) = in(c, P-1-r): 90 degrees counter-clockwise in array coords.
void rotate90(std::vector<float>& v, std::size_t bands, std::size_t p) {
    std::vector<float> tmp(p * p);
    for (std::size_t b = 0; b < bands; ++b) {
        float* plane = v.data() + b * p * p;
        for (std::size_t r = 0; r < p; ++r)
            for (std::size_t c = 0; c < p; ++c) tmp[r * p + c] = plane[c * p + (p - 1 - r)];
        std::copy(tmp.begin(), tmp.end(), plane);
    }
}

void flip_horizontal(std::vector<float>& v, std::size_t bands, std::size_t p) {
    for (std::size_t b = 0; b < bands; ++b) {
        float* plane = v.data() + b * p * p;
        for (std::size_t r = 0; r < p; ++r)
            for (std::size_t c = 0; c < p / 2; ++c)
                std::swap(plane[r * p + c], plane[r * p + (p - 1 - c)]);
    }
}

void flip_vertical(std::vector<float>& v, std::size_t bands, std::size_t p) {
    for (std::size_t b = 0; b < bands; ++b) {
        float* plane = v.data() + b * p * p;
        for (std::size_t r = 0; r < p / 2; ++r)
            for (std::size_t c = 0; c < p; ++c)
                std::swap(plane[r * p + c], plane[(p - 1 - r) * p + c]);
    }
}

}  // namespace

Patch augment(const Patch& patch, const AugmentConfig& cfg, Rng& rng) {
    Patch out = patch;
    if (rng.next_double() < cfg.noise_prob) {
        for (auto& v : out.values)
            v += static_cast<float>(cfg.noise_std * rng.gaussian());
    }
    if (rng.next_double() < cfg.rot_prob) {
        const auto quarter_turns = 1 + rng.below(3);  // 90, 180 or 270 degrees
        for (std::uint64_t k = 0; k < quarter_turns; ++k)
            rotate90(out.values, out.bands, out.patch);
    }
    if (rng.next_double() < cfg.flip_prob) {
        if (rng.below(2) == 0)
            flip_horizontal(out.values, out.bands, out.patch);
        else
            flip_vertical(out.values, out.bands, out.patch);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batch iteration
// ---------------------------------------------------------------------------

BatchIter::BatchIter(const HsiCube& cube, const LabelMap* labels,
                     std::vector<PixelCoord> order, std::size_t batch_size,
                     std::size_t patch_size, const AugmentConfig* augment_cfg, Rng* rng,
                     bool shuffle)
    : cube_(cube),
      labels_(labels),
      order_(std::move(order)),
      batch_size_(batch_size),
      patch_size_(patch_size),
      augment_cfg_(augment_cfg),
      rng_(rng) {
    if (batch_size_ == 0) throw ArgumentError("batch_iter: batch size must be positive");
    if (shuffle) {
        if (rng_ == nullptr) throw ArgumentError("batch_iter: shuffle requires an rng");
        rng_->shuffle(order_);
    }
}

std::optional<Batch> BatchIter::next() {
    if (pos_ >= order_.size()) return std::nullopt;
    const std::size_t count = std::min(batch_size_, order_.size() - pos_);
    const std::size_t t = cube_.bands, p = patch_size_;
    Batch batch;
    batch.x = Tensor<float>::zeros({count, t, p, p});
    batch.labels.resize(count, 0);
    batch.coords.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto [r, c] = order_[pos_ + i];
        Patch patch = extract_patch(cube_, r, c, p);
        if (labels_ != nullptr) patch.label = labels_->at(r, c);
        if (augment_cfg_ != nullptr) {
            if (rng_ == nullptr)
                throw ArgumentError("batch_iter: augmentation requires an rng");
            patch = augment(patch, *augment_cfg_, *rng_);
        }
        std::copy(patch.values.begin(), patch.values.end(),
                  batch.x.values().begin() + i * t * p * p);
        batch.labels[i] = patch.label;
        batch.coords[i] = {r, c};
    }
    pos_ += count;
    return batch;
}

}  // namespace clares
