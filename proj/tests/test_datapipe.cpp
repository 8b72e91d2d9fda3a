#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "clares/data.hpp"
#include "clares/error.hpp"
#include "clares/hsz.hpp"
#include "clares/synth.hpp"

using namespace clares;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
    static const fs::path dir = [] {
        auto p = fs::temp_directory_path() / "clares_datapipe_tests";
        fs::create_directories(p);
        return p;
    }();
    return (dir / name).string();
}

HsiCube random_cube(std::size_t rows, std::size_t cols, std::size_t bands,
                    std::uint64_t seed, double scale = 1.0, double offset = 0.0) {
    HsiCube cube;
    cube.rows = rows;
    cube.cols = cols;
    cube.bands = bands;
    cube.data.resize(rows * cols * bands);
    Rng rng(seed);
    for (auto& v : cube.data)
        v = static_cast<float>(offset + scale * rng.gaussian());
    return cube;
}

}  // namespace

TEST_CASE("hsz: byte-exact round trip and format errors") {
    HsiCube cube;
    cube.rows = 2;
    cube.cols = 2;
    cube.bands = 3;
    cube.data = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    const auto path = temp_path("roundtrip.hsz");
    save_cube(path, cube);
    auto loaded = load_cube(path);
    CHECK(loaded.rows == 2);
    CHECK(loaded.cols == 2);
    CHECK(loaded.bands == 3);
    CHECK(loaded.data == cube.data);

    // file-level byte identity on rewrite
    save_cube(temp_path("roundtrip2.hsz"), loaded);
    std::ifstream a(path, std::ios::binary), b(temp_path("roundtrip2.hsz"), std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);

    // bad magic
    {
        std::ofstream out(temp_path("bad_magic.hsz"), std::ios::binary);
        out << "NOPE" << std::string(16, '\0');
    }
    CHECK_THROWS_AS(load_cube(temp_path("bad_magic.hsz")), FormatError);

    // truncated payload: header promises more floats than present
    {
        std::string good;
        std::ifstream in(path, std::ios::binary);
        good.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(temp_path("truncated.hsz"), std::ios::binary);
        out.write(good.data(), static_cast<std::streamsize>(good.size() - 8));
    }
    CHECK_THROWS_AS(load_cube(temp_path("truncated.hsz")), FormatError);

    CHECK_THROWS_AS(load_cube(temp_path("does_not_exist.hsz")), DataError);
}

TEST_CASE("hsz: benchmark-scale shapes survive the container") {
    // converted-scene shapes: 145x145x200 and 512x217x204
    auto ip = random_cube(145, 145, 200, 1);
    const auto path = temp_path("ip_shape.hsz");
    save_cube(path, ip);
    auto back = load_cube(path);
    CHECK(back.rows == 145);
    CHECK(back.cols == 145);
    CHECK(back.bands == 200);
    LabelMap lm;
    lm.rows = 512;
    lm.cols = 217;
    lm.labels.assign(512 * 217, 3);
    save_labels(temp_path("sa_labels.hsz"), lm);
    auto lm2 = load_labels(temp_path("sa_labels.hsz"));
    CHECK(lm2.rows == 512);
    CHECK(lm2.cols == 217);
}

TEST_CASE("standardize: hand case, constant band, idempotence") {
    HsiCube cube;
    cube.rows = 1;
    cube.cols = 4;
    cube.bands = 2;
    // band 0: {1,2,3,4}; band 1 constant 5
    cube.data = {1, 5, 2, 5, 3, 5, 4, 5};
    auto res = standardize(cube);
    CHECK(res.band_means[0] == doctest::Approx(2.5));
    CHECK(res.band_stds[0] == doctest::Approx(std::sqrt(1.25)));  // population std
    double mean = 0, var = 0;
    for (int i = 0; i < 4; ++i) mean += res.cube.at(0, i, 0);
    mean /= 4;
    for (int i = 0; i < 4; ++i) {
        const double d = res.cube.at(0, i, 0) - mean;
        var += d * d;
    }
    var /= 4;
    CHECK(std::abs(mean) <= 1e-6);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
    // constant band -> zeros under the clamped std
    for (int i = 0; i < 4; ++i) CHECK(res.cube.at(0, i, 1) == doctest::Approx(0.0));

    auto twice = standardize(res.cube);
    for (std::size_t i = 0; i < twice.cube.data.size(); ++i)
        CHECK(twice.cube.data[i] ==
              doctest::Approx(res.cube.data[i]).epsilon(1e-6));

    HsiCube empty;
    CHECK_THROWS_AS(standardize(empty), DimensionError);
}

TEST_CASE("pca: 2-band toy data on the line y=x") {
    // points on y = x: after standardization the correlation matrix is
    // [[1,1],[1,1]] with eigenpairs (2, (1,1)/sqrt 2) and (0, ..)
    HsiCube cube;
    cube.rows = 1;
    cube.cols = 50;
    cube.bands = 2;
    cube.data.resize(100);
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        const float v = static_cast<float>(rng.gaussian());
        cube.data[2 * i] = v;
        cube.data[2 * i + 1] = 2.0f * v - 1.0f;  // same direction, different scale
    }
    auto model = fit_pca(cube, 2);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(model.comps[0] == doctest::Approx(inv_sqrt2).epsilon(1e-6));
    CHECK(model.comps[2] == doctest::Approx(inv_sqrt2).epsilon(1e-6));
    CHECK(model.explained_variance[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(model.explained_variance[1] == doctest::Approx(0.0).epsilon(1e-6));

    // data equal to its mean everywhere -> all projected coordinates 0
    HsiCube flat;
    flat.rows = 2;
    flat.cols = 2;
    flat.bands = 3;
    flat.data.assign(12, 4.5f);
    auto fm = fit_pca(flat, 2);
    auto proj = apply_pca(flat, fm);
    for (float v : proj.data) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("pca: orthonormal components, ordered variance, variance budget") {
    auto cube = random_cube(12, 11, 8, 3, 2.0, 1.0);
    // correlate some bands so the spectrum is interesting
    for (std::size_t p = 0; p < cube.pixels(); ++p) {
        cube.data[p * 8 + 1] = 0.7f * cube.data[p * 8 + 0] + 0.1f * cube.data[p * 8 + 1];
        cube.data[p * 8 + 5] = -0.9f * cube.data[p * 8 + 2] + 0.05f * cube.data[p * 8 + 5];
    }
    for (std::size_t n : {3ul, 8ul}) {
        auto m = fit_pca(cube, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double dot = 0;
                for (std::size_t b = 0; b < 8; ++b)
                    dot += m.comps[b * n + i] * m.comps[b * n + j];
                CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) <= 1e-8);
            }
        for (std::size_t i = 1; i < n; ++i)
            CHECK(m.explained_variance[i] <= m.explained_variance[i - 1] + 1e-12);
        double total = 0;
        for (double v : m.explained_variance) total += v;
        CHECK(total <= 8.0 + 1e-6);  // standardized bands have unit variance each
    }
    CHECK_THROWS_AS(fit_pca(cube, 9), ArgumentError);
}

TEST_CASE("pca: projecting component directions and reconstruct-then-project") {
    auto cube = random_cube(9, 9, 6, 4);
    auto m = fit_pca(cube, 4);
    // x = mean + std * comp_i  ->  coordinates e_i
    for (std::size_t i = 0; i < 4; ++i) {
        HsiCube probe;
        probe.rows = 1;
        probe.cols = 1;
        probe.bands = 6;
        probe.data.resize(6);
        for (std::size_t b = 0; b < 6; ++b)
            probe.data[b] = static_cast<float>(m.band_means[b] +
                                               m.band_stds[b] * m.comps[b * 4 + i]);
        auto out = apply_pca(probe, m);
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(out.data[j] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-5));
    }
    // reconstruct from random coordinates, project back
    Rng rng(5);
    std::vector<double> z(4);
    for (auto& v : z) v = rng.gaussian();
    HsiCube rec;
    rec.rows = 1;
    rec.cols = 1;
    rec.bands = 6;
    rec.data.resize(6);
    for (std::size_t b = 0; b < 6; ++b) {
        double acc = 0;
        for (std::size_t j = 0; j < 4; ++j) acc += m.comps[b * 4 + j] * z[j];
        rec.data[b] = static_cast<float>(m.band_means[b] + m.band_stds[b] * acc);
    }
    auto out = apply_pca(rec, m);
    for (std::size_t j = 0; j < 4; ++j)
        CHECK(out.data[j] == doctest::Approx(z[j]).epsilon(1e-5));

    HsiCube wrong = random_cube(2, 2, 5, 6);
    CHECK_THROWS_AS(apply_pca(wrong, m), DimensionError);
}

TEST_CASE("pca: benchmark band counts reduce to 30 components") {
    auto cube = random_cube(40, 40, 200, 7);  // IP-like band count, small extent
    auto m = fit_pca(cube, 30);
    auto out = apply_pca(cube, m);
    CHECK(out.rows == 40);
    CHECK(out.cols == 40);
    CHECK(out.bands == 30);
}

namespace {

LabelMap indian_pines_like_labels() {
    // Table-derived class sizes; laid out row-major into a synthetic raster.
    const std::vector<int> sizes = {46,  1428, 830, 237,  483, 730, 28,  478,
                                    20,  972,  2455, 593, 205, 1265, 386, 93};
    std::size_t total = 0;
    for (int s : sizes) total += static_cast<std::size_t>(s);
    LabelMap lm;
    lm.rows = 103;
    lm.cols = 100;
    lm.labels.assign(lm.rows * lm.cols, 0);
    std::size_t pos = 0;
    for (std::size_t c = 0; c < sizes.size(); ++c)
        for (int i = 0; i < sizes[c]; ++i) lm.labels[pos++] = static_cast<int>(c + 1);
    REQUIRE(total == 10249);
    return lm;
}

}  // namespace

TEST_CASE("stratified_split: totals, Oats rule, determinism, partition") {
    auto lm = indian_pines_like_labels();
    auto split = stratified_split(lm, 0.72, 0.08, 0.20, 99);
    const std::size_t total = split.train.size() + split.val.size() + split.test.size();
    CHECK(total == 10249);
    CHECK(std::abs(static_cast<long>(split.train.size()) - 7379L) <= 16);
    CHECK(std::abs(static_cast<long>(split.val.size()) - 819L) <= 16);
    CHECK(std::abs(static_cast<long>(split.test.size()) - 2051L) <= 16);

    // Oats (class 9, 20 samples) -> 14/2/4 under rounded boundaries
    auto count_class = [&](const std::vector<PixelCoord>& coords) {
        std::size_t n = 0;
        for (const auto& [r, c] : coords)
            if (lm.at(r, c) == 9) ++n;
        return n;
    };
    CHECK(count_class(split.train) == 14);
    CHECK(count_class(split.val) == 2);
    CHECK(count_class(split.test) == 4);

    auto split2 = stratified_split(lm, 0.72, 0.08, 0.20, 99);
    CHECK(split2.train == split.train);
    CHECK(split2.val == split.val);
    CHECK(split2.test == split.test);

    // per-class proportions within one sample of the ratio cut
    for (int cls = 1; cls <= 16; ++cls) {
        std::size_t n = 0;
        for (auto v : lm.labels) n += (v == cls);
        std::size_t tr = 0;
        for (const auto& [r, c] : split.train) tr += (lm.at(r, c) == cls);
        CHECK(std::abs(static_cast<double>(tr) - 0.72 * static_cast<double>(n)) <= 1.0);
    }
}

TEST_CASE("stratified_split: partition property across 100 seeds") {
    SynthConfig cfg;
    cfg.rows = 20;
    cfg.cols = 20;
    cfg.classes = 3;
    cfg.seed = 11;
    auto scene = make_synth(cfg);
    std::vector<PixelCoord> labeled;
    for (std::size_t r = 0; r < 20; ++r)
        for (std::size_t c = 0; c < 20; ++c)
            if (scene.labels.at(r, c) > 0)
                labeled.push_back({static_cast<std::uint32_t>(r),
                                   static_cast<std::uint32_t>(c)});
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto s = stratified_split(scene.labels, 0.72, 0.08, 0.20, seed);
        std::set<PixelCoord> seen;
        for (const auto* part : {&s.train, &s.val, &s.test})
            for (const auto& coord : *part) CHECK(seen.insert(coord).second);
        CHECK(seen.size() == labeled.size());
        CHECK(!s.train.empty());
        CHECK(!s.val.empty());
        CHECK(!s.test.empty());
    }
}

TEST_CASE("stratified_split: every class lands in every split; tiny class errors") {
    LabelMap lm;
    lm.rows = 3;
    lm.cols = 4;
    lm.labels = {1, 1, 1, 2, 2, 2, 0, 0, 1, 2, 1, 2};  // class 1 x5, class 2 x5
    auto s = stratified_split(lm, 0.72, 0.08, 0.20, 7);
    for (int cls : {1, 2}) {
        for (const auto* part : {&s.train, &s.val, &s.test}) {
            std::size_t n = 0;
            for (const auto& [r, c] : *part) n += (lm.at(r, c) == cls);
            CHECK(n >= 1);
        }
    }
    LabelMap bad = lm;
    bad.labels = {1, 1, 1, 2, 2, 0, 0, 0, 1, 1, 1, 0};  // class 2 has 2 samples
    try {
        stratified_split(bad, 0.72, 0.08, 0.20, 7);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("class 2") != std::string::npos);
    }
}

TEST_CASE("split json round trip") {
    LabelMap lm;
    lm.rows = 2;
    lm.cols = 3;
    lm.labels = {1, 1, 1, 2, 2, 2};
    auto s = stratified_split(lm, 0.72, 0.08, 0.20, 42);
    const auto path = temp_path("split.json");
    save_split_json(path, s);
    auto back = load_split_json(path);
    CHECK(back.seed == 42);
    CHECK(back.train == s.train);
    CHECK(back.val == s.val);
    CHECK(back.test == s.test);
}

TEST_CASE("extract_patch: interior crop, corner reflection, 1x1 cube") {
    auto cube = random_cube(12, 13, 2, 8);
    auto patch = extract_patch(cube, 6, 6, 5);
    CHECK(patch.values[(0 * 5 + 2) * 5 + 2] == cube.at(6, 6, 0));
    for (std::size_t dy = 0; dy < 5; ++dy)
        for (std::size_t dx = 0; dx < 5; ++dx)
            CHECK(patch.values[(1 * 5 + dy) * 5 + dx] ==
                  cube.at(6 - 2 + dy, 6 - 2 + dx, 1));

    // pixel (0,0), P=11 -> patch (0,0) holds cube pixel (5,5)
    auto corner = extract_patch(cube, 0, 0, 11);
    CHECK(corner.values[0] == cube.at(5, 5, 0));
}

TEST_CASE("extract_patch: 1x1 cube gives a constant patch; argument errors") {
    HsiCube tiny;
    tiny.rows = 1;
    tiny.cols = 1;
    tiny.bands = 1;
    tiny.data = {3.25f};
    auto full = extract_patch(tiny, 0, 0, 3);
    CHECK(full.values.size() == 9);
    for (float v : full.values) CHECK(v == 3.25f);
    CHECK(reflect_index(-1, 1) == 0);
    CHECK(reflect_index(2, 1) == 0);

    HsiCube two;
    two.rows = 2;
    two.cols = 2;
    two.bands = 1;
    two.data = {1.0f, 2.0f, 3.0f, 4.0f};
    auto p = extract_patch(two, 0, 0, 3);
    // reflected row/col order: indices -1,0,1 -> 1,0,1
    const float expect[9] = {4, 3, 4, 2, 1, 2, 4, 3, 4};
    for (int i = 0; i < 9; ++i) CHECK(p.values[i] == expect[i]);

    auto cube = random_cube(6, 6, 1, 9);
    CHECK_THROWS_AS(extract_patch(cube, 0, 0, 4), ArgumentError);   // even
    CHECK_THROWS_AS(extract_patch(cube, 0, 0, 13), ArgumentError);  // too large
    CHECK_THROWS_AS(extract_patch(cube, 7, 0, 3), ArgumentError);   // off-raster
}

TEST_CASE("extract_patch: equals brute-force mirrored crop on random edge pixels") {
    auto cube = random_cube(9, 7, 3, 10);
    Rng rng(11);
    auto mirror = [](std::ptrdiff_t i, std::size_t n) {
        while (i < 0 || i >= static_cast<std::ptrdiff_t>(n)) {
            if (i < 0) i = -i;
            if (i >= static_cast<std::ptrdiff_t>(n))
                i = 2 * (static_cast<std::ptrdiff_t>(n) - 1) - i;
        }
        return static_cast<std::size_t>(i);
    };
    for (int trial = 0; trial < 50; ++trial) {
        // bias the draw toward the border
        std::size_t r = rng.below(2) ? rng.below(9) : (rng.below(2) ? 0 : 8);
        std::size_t c = rng.below(2) ? rng.below(7) : (rng.below(2) ? 0 : 6);
        auto p = extract_patch(cube, r, c, 7);
        for (std::size_t b = 0; b < 3; ++b)
            for (std::size_t dy = 0; dy < 7; ++dy)
                for (std::size_t dx = 0; dx < 7; ++dx) {
                    const auto sr = mirror(static_cast<std::ptrdiff_t>(r) - 3 +
                                               static_cast<std::ptrdiff_t>(dy),
                                           9);
                    const auto sc = mirror(static_cast<std::ptrdiff_t>(c) - 3 +
                                               static_cast<std::ptrdiff_t>(dx),
                                           7);
                    CHECK(p.values[(b * 7 + dy) * 7 + dx] == cube.at(sr, sc, b));
                }
    }
}

TEST_CASE("augment: identity at zero probs, involutions, label/shape kept") {
    auto cube = random_cube(8, 8, 4, 12);
    auto patch = extract_patch(cube, 4, 4, 5);
    patch.label = 3;
    Rng rng(13);
    AugmentConfig off;
    off.noise_prob = 0;
    off.rot_prob = 0;
    off.flip_prob = 0;
    auto same = augment(patch, off, rng);
    CHECK(same.values == patch.values);
    CHECK(same.label == 3);

    AugmentConfig always;
    always.noise_prob = 1;
    always.noise_std = 0.5;
    always.rot_prob = 1;
    always.flip_prob = 1;
    for (int i = 0; i < 20; ++i) {
        auto aug = augment(patch, always, rng);
        CHECK(aug.values.size() == patch.values.size());
        CHECK(aug.label == patch.label);
        CHECK(aug.bands == patch.bands);
        CHECK(aug.patch == patch.patch);
    }
}

TEST_CASE("augment: rotation by 180 twice is the identity") {
    auto cube = random_cube(8, 8, 2, 14);
    auto patch = extract_patch(cube, 4, 4, 5);
    // Drive the 180-degree branch twice using a crafted rng sequence: find a
    // seed whose draws select rotation with 2 quarter turns both times.
    AugmentConfig rot_only;
    rot_only.noise_prob = 0;
    rot_only.flip_prob = 0;
    rot_only.rot_prob = 1;
    for (std::uint64_t seed = 0; seed < 4000; ++seed) {
        // draw order per augment call: noise check, rot check, quarter turns,
        // flip check
        Rng probe(seed);
        probe.next_double();
        probe.next_double();
        const bool is180_first = probe.below(3) == 1;
        probe.next_double();
        probe.next_double();
        probe.next_double();
        const bool is180_second = probe.below(3) == 1;
        if (is180_first && is180_second) {
            Rng rng(seed);
            auto once = augment(patch, rot_only, rng);
            auto twice = augment(once, rot_only, rng);
            CHECK(twice.values == patch.values);
            return;
        }
    }
    FAIL("no seed found that draws 180-degree rotation twice");
}

TEST_CASE("augment: empirical noise std in [0.045, 0.055]") {
    HsiCube zero;
    zero.rows = 3;
    zero.cols = 3;
    zero.bands = 4;
    zero.data.assign(36, 0.0f);
    auto patch = extract_patch(zero, 1, 1, 3);
    AugmentConfig noise_only;
    noise_only.noise_prob = 1;
    noise_only.rot_prob = 0;
    noise_only.flip_prob = 0;
    Rng rng(15);
    double sq = 0;
    std::size_t n = 0;
    while (n < 10000) {
        auto aug = augment(patch, noise_only, rng);
        for (float v : aug.values) {
            sq += static_cast<double>(v) * static_cast<double>(v);
            ++n;
        }
    }
    const double std_hat = std::sqrt(sq / static_cast<double>(n));
    CHECK(std_hat >= 0.045);
    CHECK(std_hat <= 0.055);
}

TEST_CASE("batch_iter: sizes 16/16/1, order, exact coverage, shuffle determinism") {
    auto cube = random_cube(8, 8, 3, 16);
    LabelMap lm;
    lm.rows = 8;
    lm.cols = 8;
    lm.labels.assign(64, 1);
    std::vector<PixelCoord> coords;
    for (std::uint32_t i = 0; i < 33; ++i) coords.push_back({i / 8, i % 8});

    BatchIter iter(cube, &lm, coords, 16, 5, nullptr, nullptr, false);
    std::vector<std::size_t> sizes;
    std::vector<PixelCoord> visited;
    while (auto b = iter.next()) {
        sizes.push_back(b->x.dim(0));
        CHECK(b->x.dim(1) == 3);
        CHECK(b->x.dim(2) == 5);
        for (auto& c : b->coords) visited.push_back(c);
    }
    CHECK(sizes == std::vector<std::size_t>{16, 16, 1});
    CHECK(visited == coords);  // no shuffle -> split order

    Rng r1(17), r2(17);
    BatchIter s1(cube, &lm, coords, 16, 5, nullptr, &r1, true);
    BatchIter s2(cube, &lm, coords, 16, 5, nullptr, &r2, true);
    std::vector<PixelCoord> v1, v2;
    while (auto b = s1.next())
        for (auto& c : b->coords) v1.push_back(c);
    while (auto b = s2.next())
        for (auto& c : b->coords) v2.push_back(c);
    CHECK(v1 == v2);
    std::set<PixelCoord> unique(v1.begin(), v1.end());
    CHECK(unique.size() == coords.size());  // each sample exactly once
}

TEST_CASE("synth: deterministic, coherent labels, separable signatures") {
    SynthConfig cfg;
    cfg.seed = 21;
    auto a = make_synth(cfg);
    auto b = make_synth(cfg);
    CHECK(a.cube.data == b.cube.data);
    CHECK(a.labels.labels == b.labels.labels);
    CHECK(a.cube.rows == 48);
    CHECK(a.cube.bands == 20);
    CHECK(a.labels.max_label() == 4);

    // all classes present with a few hundred pixels each
    std::vector<std::size_t> counts(5, 0);
    for (auto v : a.labels.labels) ++counts[static_cast<std::size_t>(v)];
    for (int c = 1; c <= 4; ++c) CHECK(counts[static_cast<std::size_t>(c)] > 100);

    // default snr: per-class mean spectra are far apart relative to noise
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j) {
            auto mi = synth_signature(cfg, i);
            auto mj = synth_signature(cfg, j);
            double d2 = 0;
            for (std::size_t k = 0; k < mi.size(); ++k) {
                const double d = cfg.snr * (mi[k] - mj[k]);
                d2 += d * d;
            }
            CHECK(std::sqrt(d2) > 1.0);
        }
}
