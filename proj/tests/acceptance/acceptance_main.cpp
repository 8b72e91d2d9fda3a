// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exit code = number of failed criteria.
// An optional argv[1] restricts the run to one criterion id.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "clares/gradcheck.hpp"
#include "clares/metrics.hpp"
#include "clares/ops.hpp"
#include "clares/pipeline.hpp"
#include "clares/synth.hpp"
#include "clares/train.hpp"
#include "../oracles.hpp"

using namespace clares;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path work_dir() {
    static const fs::path p = [] {
        auto dir = fs::temp_directory_path() / "clares_acceptance";
        fs::remove_all(dir);
        fs::create_directories(dir);
        return dir;
    }();
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return {};
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------
// 1. latent-count table against a high-precision oracle
// ---------------------------------------------------------------------------
Outcome criterion_latent_table() {
    const std::vector<std::size_t> table = {1, 8, 16, 30, 64, 200, 204, 512, 1024, 4096};
    const std::vector<std::pair<std::size_t, std::size_t>> spot = {
        {16, 8}, {30, 14}, {200, 58}, {1024, 64}};
    for (auto [t, expect] : spot)
        if (latent_count(t) != expect)
            return {false, "spot value mismatch at T=" + std::to_string(t)};
    for (std::size_t t : table) {
        const long double ratio =
            static_cast<long double>(std::max<std::size_t>(t, 16)) / 16.0L;
        long double raw = std::floor(16.0L * std::log2(ratio));
        auto expect = std::min<std::size_t>(
            std::max<std::size_t>(static_cast<std::size_t>(raw), 8), 64);
        if (latent_count(t) != expect)
            return {false, "oracle mismatch at T=" + std::to_string(t)};
    }
    return {true, "10/10 exact integer matches"};
}

// ---------------------------------------------------------------------------
// 2. end-to-end gradient integrity at the tiny configuration
// ---------------------------------------------------------------------------
Outcome criterion_grad_integrity() {
    ModelConfig cfg;
    cfg.classes = 3;
    cfg.embed_dim = 16;
    cfg.base_channels = 8;
    cfg.encoder_layers = 2;
    cfg.heads = 2;
    cfg.patch = 7;
    cfg.pe_t_max = 8;
    cfg.head_hidden = 16;
    Rng init(2024);
    ClaresNet<double> model(cfg, init);
    Rng drng(7);
    auto x = gaussian_tensor<double>({2, 8, 7, 7}, 0, 1, drng);
    const std::vector<int> labels = {0, 2};
    Ctx ctx;  // eval mode: deterministic differentiable function

    auto sd = model.state_dict();
    std::vector<Tensor<double>> inputs;
    inputs.push_back(x);
    for (auto& p : sd.params) inputs.push_back(p.tensor);
    auto f = [&]() { return cross_entropy(model.forward(x, ctx).logits, labels); };
    // every parameter tensor is checked; tensors larger than the cap check a
    // fixed-seed random subset of coordinates. eps 1e-3 keeps the central
    // difference roundoff (~ulp(f)/2eps) below the tolerance for the deep
    // graph; a wrong gradient would surface as O(1) error at any eps.
    const double err = grad_check<double>(f, inputs, 1e-3, 24);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "max relative error %.3e over %zu tensors (tol 1e-4)",
                  err, inputs.size());
    return {err <= 1e-4, buf};
}

// ---------------------------------------------------------------------------
// 3. complexity scaling: MSLA vs dense self-attention
// ---------------------------------------------------------------------------
double fit_loglog_slope(const std::vector<double>& t, const std::vector<double>& y) {
    const std::size_t n = t.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lx = std::log(t[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Outcome criterion_complexity() {
    NoGradGuard no_grad;
    const std::size_t dim = 16, heads = 2, batch = 8;
    Rng rng(5);
    MslaBlock<float> msla(dim, heads, {1, 2, 4}, LatentBounds{}, 0.0, 0.0, 2, rng);
    MultiHeadAttention<float> dense(dim, heads, 0.0, rng);
    Ctx ctx;
    const std::vector<double> lengths = {64, 128, 256, 512, 1024};
    std::vector<double> msla_time, dense_time;
    for (double tl : lengths) {
        const auto t = static_cast<std::size_t>(tl);
        auto x = gaussian_tensor<float>({batch, t, dim}, 0, 1, rng);
        // inner iteration count scaled so each timed sample is well above
        // clock resolution at every T
        const int iters = std::clamp(
            static_cast<int>((1 << 16) / std::max<std::size_t>(1, (t * t) / 16)), 2, 256);
        auto time_median = [&](const std::function<void()>& fn) {
            std::vector<double> reps;
            for (int r = 0; r < 3; ++r) {
                const auto t0 = Clock::now();
                for (int i = 0; i < iters; ++i) fn();
                reps.push_back(seconds_since(t0) / iters);
            }
            std::sort(reps.begin(), reps.end());
            return reps[1];
        };
        msla_time.push_back(time_median([&]() { msla.forward(x, ctx); }));
        dense_time.push_back(time_median([&]() { dense.forward(x, x, x, ctx); }));
    }
    const double msla_slope = fit_loglog_slope(lengths, msla_time);
    const double dense_slope = fit_loglog_slope(lengths, dense_time);
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "msla slope %.2f (need <= 1.5), dense self-attention slope %.2f "
                  "(need >= 1.8)",
                  msla_slope, dense_slope);
    return {msla_slope <= 1.5 && dense_slope >= 1.8, buf};
}

// ---------------------------------------------------------------------------
// 4. synthetic learnability at the reduced configuration
// ---------------------------------------------------------------------------
Outcome criterion_learnability() {
    const fs::path dir = work_dir() / "learnability";
    pipeline::SynthArgs synth_args;  // generator defaults: C=4, 48x48x20
    synth_args.out_dir = (dir / "scene").string();
    pipeline::synth(synth_args);

    pipeline::PreprocessArgs pre;
    pre.cube_path = (dir / "scene" / "cube.hsz").string();
    pre.labels_path = (dir / "scene" / "labels.hsz").string();
    pre.out_dir = (dir / "data").string();
    pre.components = 6;
    pre.seed = 13;
    pipeline::preprocess(pre);

    HsiCube cube = load_cube((dir / "data" / "reduced.hsz").string());
    LabelMap labels = load_labels((dir / "data" / "labels.hsz").string());
    SplitSpec split = load_split_json((dir / "data" / "split.json").string());

    ModelConfig mc;
    mc.classes = 4;
    mc.embed_dim = 64;
    mc.base_channels = 32;
    mc.encoder_layers = 2;
    mc.heads = 8;
    mc.patch = 7;
    mc.pe_t_max = 8;
    TrainConfig tc;
    tc.lr = 1e-3;
    tc.epochs = 30;
    tc.batch_train = 32;
    tc.early_stop_patience = 30;
    tc.seed = 21;
    tc.target_train_acc = 0.995;

    Rng init = stream_rng(tc.seed, 0);
    ClaresNet<float> model(mc, init);
    auto opt = make_optimizer(model, tc);
    auto result = train_model(model, opt, cube, labels, split, tc,
                              (dir / "best.ckpt").string());

    // eval-mode accuracy of the best checkpoint on train and test splits
    auto best = load_checkpoint((dir / "best.ckpt").string());
    auto train_eval = evaluate(best.model, cube, &labels, split.train, 32);
    auto test_eval = evaluate(best.model, cube, &labels, split.test, 32);
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "epochs run %zu, train acc %.4f (need >= 0.99), test OA %.4f "
                  "(need >= 0.90)",
                  result.history.size(), train_eval.accuracy, test_eval.accuracy);
    return {train_eval.accuracy >= 0.99 && test_eval.accuracy >= 0.90, buf};
}

// ---------------------------------------------------------------------------
// 5. metrics oracle equivalence + hand anchors
// ---------------------------------------------------------------------------
Outcome criterion_metrics_oracles() {
    // hand anchors from the 2x2 matrix [[50,10],[5,35]]
    ConfusionMatrix cm(2);
    cm.at(0, 0) = 50;
    cm.at(0, 1) = 10;
    cm.at(1, 0) = 5;
    cm.at(1, 1) = 35;
    if (std::abs(overall_accuracy(cm) - 0.85) > 1e-12) return {false, "OA anchor"};
    if (std::abs(balanced_accuracy(cm) - 0.854166666666667) > 1e-12)
        return {false, "BA anchor"};
    if (std::abs(cohen_kappa(cm) - 0.34 / 0.49) > 1e-12) return {false, "kappa anchor"};
    if (std::abs(mcc(cm).value - 1700.0 / std::sqrt(60.0 * 55.0 * 45.0 * 40.0)) > 1e-12)
        return {false, "MCC anchor"};

    Rng rng(99);
    int checked = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const int classes = 2 + static_cast<int>(rng.below(5));
        const std::size_t n = 25 + rng.below(50);
        std::vector<int> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = 1 + static_cast<int>(rng.below(classes));
            p[i] = rng.next_double() < 0.55 ? t[i]
                                            : 1 + static_cast<int>(rng.below(classes));
        }
        bool all = true;
        for (int c = 1; c <= classes; ++c) {
            bool found = false;
            for (int v : t) found = found || v == c;
            all = all && found;
        }
        if (!all) continue;
        auto m = confusion(t, p, classes);
        if (std::abs(overall_accuracy(m) - oracle::accuracy(t, p)) > 1e-10)
            return {false, "OA oracle mismatch"};
        if (std::abs(balanced_accuracy(m) - oracle::balanced_accuracy(t, p, classes)) >
            1e-10)
            return {false, "BA oracle mismatch"};
        if (std::abs(cohen_kappa(m) - oracle::kappa(t, p, classes)) > 1e-10)
            return {false, "kappa oracle mismatch"};
        if (!mcc(m).degenerate &&
            std::abs(mcc(m).value - oracle::mcc(t, p, classes)) > 1e-10)
            return {false, "MCC oracle mismatch"};
        if (std::abs(ari(t, p) - oracle::ari_pairs(t, p)) > 1e-10)
            return {false, "ARI oracle mismatch"};

        std::vector<double> scores(n);
        std::vector<char> positive(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = rng.next_double();
            positive[i] = t[i] == 1 ? 1 : 0;
        }
        if (std::abs(pr_curve(scores, positive).average_precision -
                     oracle::average_precision(scores, positive)) > 1e-10)
            return {false, "AP oracle mismatch"};
        ++checked;
    }
    return {true, std::to_string(checked) + " random cases within 1e-10 + hand anchors"};
}

// ---------------------------------------------------------------------------
// 6. determinism of cmd_train through the CLI
// ---------------------------------------------------------------------------
Outcome criterion_determinism() {
    const fs::path dir = work_dir() / "determinism";
    fs::create_directories(dir);
    const std::string cli = CLARES_CLI_PATH;
    auto run = [&](const std::string& args) {
        const std::string cmd =
            cli + " " + args + " >> " + (dir / "log.txt").string() + " 2>&1";
        return std::system(cmd.c_str()) == 0;
    };
    if (!run("synth --out " + (dir / "scene").string() +
             " --rows 24 --cols 24 --bands 10 --seed 4"))
        return {false, "synth failed"};
    if (!run("preprocess --cube " + (dir / "scene" / "cube.hsz").string() +
             " --labels " + (dir / "scene" / "labels.hsz").string() + " --out " +
             (dir / "data").string() + " --components 5 --seed 8"))
        return {false, "preprocess failed"};
    const fs::path cfg_path = dir / "config.json";
    {
        std::ofstream out(cfg_path);
        out << R"({"model": {"classes": 4, "embed_dim": 16, "base_channels": 8,
                  "encoder_layers": 1, "heads": 2, "patch": 7, "pe_t_max": 8,
                  "head_hidden": 16},
                  "train": {"lr": 0.001, "epochs": 2, "batch_train": 32, "seed": 6,
                  "early_stop_patience": 10}})";
    }
    for (const char* tag : {"a", "b"})
        if (!run("train --data " + (dir / "data").string() + " --out " +
                 (dir / tag).string() + " --config " + cfg_path.string()))
            return {false, std::string("train run ") + tag + " failed"};
    const bool history_same =
        slurp(dir / "a" / "history.csv") == slurp(dir / "b" / "history.csv");
    const bool ckpt_same =
        slurp(dir / "a" / "best.ckpt") == slurp(dir / "b" / "best.ckpt");
    if (slurp(dir / "a" / "best.ckpt").empty()) return {false, "checkpoint missing"};
    std::string detail = std::string("history ") + (history_same ? "identical" : "differs") +
                         ", checkpoint " + (ckpt_same ? "identical" : "differs");
    return {history_same && ckpt_same, detail};
}

// ---------------------------------------------------------------------------
// 7. pipeline conservation: split partition + reflection-padding oracle
// ---------------------------------------------------------------------------
Outcome criterion_conservation() {
    SynthConfig scfg;
    scfg.rows = 40;
    scfg.cols = 40;
    scfg.bands = 8;
    scfg.seed = 17;
    auto scene = make_synth(scfg);
    std::size_t labeled = 0;
    for (auto v : scene.labels.labels) labeled += (v > 0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto split = stratified_split(scene.labels, 0.72, 0.08, 0.20, seed);
        std::vector<PixelCoord> all;
        all.insert(all.end(), split.train.begin(), split.train.end());
        all.insert(all.end(), split.val.begin(), split.val.end());
        all.insert(all.end(), split.test.begin(), split.test.end());
        std::sort(all.begin(), all.end());
        if (std::adjacent_find(all.begin(), all.end()) != all.end())
            return {false, "split overlap at seed " + std::to_string(seed)};
        if (all.size() != labeled)
            return {false, "split union misses pixels at seed " + std::to_string(seed)};
        for (const auto& [r, c] : all)
            if (scene.labels.at(r, c) == 0) return {false, "unlabeled pixel in a split"};
    }

    // brute-force mirrored-crop oracle on 50 random edge pixels
    auto mirror = [](std::ptrdiff_t i, std::size_t n) {
        while (i < 0 || i >= static_cast<std::ptrdiff_t>(n)) {
            if (i < 0) i = -i;
            if (i >= static_cast<std::ptrdiff_t>(n))
                i = 2 * (static_cast<std::ptrdiff_t>(n) - 1) - i;
        }
        return static_cast<std::size_t>(i);
    };
    Rng rng(23);
    const std::size_t p = 11, half = 5;
    for (int trial = 0; trial < 50; ++trial) {
        // an edge pixel: at least one coordinate within half of the border
        std::size_t r, c;
        do {
            r = rng.below(scene.cube.rows);
            c = rng.below(scene.cube.cols);
        } while (r >= half && r < scene.cube.rows - half && c >= half &&
                 c < scene.cube.cols - half);
        auto patch = extract_patch(scene.cube, r, c, p);
        for (std::size_t b = 0; b < scene.cube.bands; ++b)
            for (std::size_t dy = 0; dy < p; ++dy)
                for (std::size_t dx = 0; dx < p; ++dx) {
                    const auto sr = mirror(static_cast<std::ptrdiff_t>(r) -
                                               static_cast<std::ptrdiff_t>(half) +
                                               static_cast<std::ptrdiff_t>(dy),
                                           scene.cube.rows);
                    const auto sc = mirror(static_cast<std::ptrdiff_t>(c) -
                                               static_cast<std::ptrdiff_t>(half) +
                                               static_cast<std::ptrdiff_t>(dx),
                                           scene.cube.cols);
                    if (patch.values[(b * p + dy) * p + dx] != scene.cube.at(sr, sc, b))
                        return {false, "patch mismatch at edge pixel"};
                }
    }
    return {true, "20 seeds partition exactly; 50 edge patches match the oracle"};
}

// ---------------------------------------------------------------------------
// 8. paper-scale reproduction is documentation, not CI
// ---------------------------------------------------------------------------
Outcome criterion_docs() {
    // the repo documents the optional full-scale path; CI asserts nothing
    // about benchmark accuracy
    const fs::path readme = fs::path(CLARES_SOURCE_DIR) / "README.md";
    const std::string text = slurp(readme);
    if (text.empty()) return {false, "README.md missing"};
    const bool documents_path = text.find("full-scale") != std::string::npos ||
                                text.find("Full-scale") != std::string::npos;
    const bool documents_epochs = text.find("40 epochs") != std::string::npos;
    if (!documents_path || !documents_epochs)
        return {false, "README lacks the full-scale reproduction section"};
    return {true, "full-scale path documented as non-CI; no benchmark assertion here"};
}

// ---------------------------------------------------------------------------
// 9. parameter count at the full configuration
// ---------------------------------------------------------------------------
Outcome criterion_param_count() {
    ModelConfig cfg;  // defaults are the full configuration
    cfg.classes = 16;
    Rng init(1);
    ClaresNet<float> model(cfg, init);
    const double params = static_cast<double>(model.param_count());
    const double reference = 17.3e6;
    const double rel = params / reference - 1.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "trainable parameters %.2fM vs reference 17.3M (%+.1f%%, informational "
                  "target +-20%%)",
                  params / 1e6, rel * 100.0);
    return {std::abs(rel) <= 0.20, buf};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {1, "latent-count table", criterion_latent_table},
        {2, "gradient integrity", criterion_grad_integrity},
        {3, "complexity scaling", criterion_complexity},
        {4, "synthetic learnability", criterion_learnability},
        {5, "metrics oracle equivalence", criterion_metrics_oracles},
        {6, "training determinism", criterion_determinism},
        {7, "pipeline conservation", criterion_conservation},
        {8, "paper-scale documentation", criterion_docs},
        {9, "parameter-count report", criterion_param_count},
    };
    int only = 0;
    if (argc > 1) only = std::atoi(argv[1]);
    int failures = 0;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only) continue;
        const auto t0 = Clock::now();
        Outcome outcome;
        try {
            outcome = c.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        std::printf("[%s] criterion %d (%s): %s (%.1f s)\n",
                    outcome.pass ? "PASS" : "FAIL", c.id, c.name,
                    outcome.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
        if (!outcome.pass) ++failures;
    }
    return failures;
}
