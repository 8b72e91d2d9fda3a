#include "clares/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "clares/config_io.hpp"
#include "clares/hsz.hpp"
#include "clares/imageio.hpp"
#include "clares/metrics.hpp"
#include "clares/sha1.hpp"

namespace clares::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump(2) << "\n";
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(path + ": invalid JSON: " + e.what());
    }
    return j;
}

std::string hash_or_absent(const std::string& path) {
    return path.empty() ? std::string("-") : git_blob_hash(path);
}

}  // namespace

void preprocess(const PreprocessArgs& args) {
    if (!fs::exists(args.cube_path)) throw DataError("missing cube file " + args.cube_path);
    if (!fs::exists(args.labels_path))
        throw DataError("missing label file " + args.labels_path);
    HsiCube cube = load_cube(args.cube_path);
    LabelMap labels = load_labels(args.labels_path);
    if (labels.rows != cube.rows || labels.cols != cube.cols)
        throw DimensionError("preprocess: cube and label raster disagree in extent");
    if (args.components > cube.bands)
        throw ArgumentError("preprocess: --components " + std::to_string(args.components) +
                            " exceeds " + std::to_string(cube.bands) + " bands");

    SplitSpec split = stratified_split(labels, args.train_ratio, args.val_ratio,
                                       args.test_ratio, args.seed);

    PcaModel pca = args.inductive ? fit_pca(cube, args.components, &split.train)
                                  : fit_pca(cube, args.components, nullptr);
    HsiCube reduced = apply_pca(cube, pca);
    // standardize the component planes so augmentation noise is scaled to
    // unit-variance inputs
    auto standardized = standardize(reduced);

    ensure_dir(args.out_dir);
    const fs::path out(args.out_dir);
    save_cube((out / "reduced.hsz").string(), standardized.cube);
    save_labels((out / "labels.hsz").string(), labels);
    save_pca_json((out / "pca.json").string(), pca);
    save_split_json((out / "split.json").string(), split);

    json meta;
    meta["rows"] = cube.rows;
    meta["cols"] = cube.cols;
    meta["source_bands"] = cube.bands;
    meta["components"] = args.components;
    meta["classes"] = labels.max_label();
    meta["seed"] = args.seed;
    meta["inductive_pca"] = args.inductive;
    meta["source_cube"] = args.cube_path;
    meta["source_labels"] = args.labels_path;
    meta["source_cube_hash"] = git_blob_hash(args.cube_path);
    meta["source_labels_hash"] = git_blob_hash(args.labels_path);
    meta["post_pca_band_means"] = standardized.band_means;
    meta["post_pca_band_stds"] = standardized.band_stds;
    write_json((out / "meta.json").string(), meta);
}

double train(const TrainArgs& args) {
    const fs::path data(args.data_dir);
    for (const char* f : {"reduced.hsz", "labels.hsz", "split.json", "meta.json"})
        if (!fs::exists(data / f))
            throw DataError("preprocessed input missing: " + (data / f).string());

    RunConfig cfg;
    if (!args.config_path.empty()) cfg = load_run_config(args.config_path);
    json meta = read_json((data / "meta.json").string());
    cfg.model.classes = meta.at("classes").get<std::size_t>();

    HsiCube cube = load_cube((data / "reduced.hsz").string());
    LabelMap labels = load_labels((data / "labels.hsz").string());
    SplitSpec split = load_split_json((data / "split.json").string());
    if (cfg.model.pe_t_max < cube.bands)
        throw ConfigError("model.pe_t_max: smaller than the reduced band count " +
                          std::to_string(cube.bands));

    ensure_dir(args.out_dir);
    const fs::path out(args.out_dir);
    const std::string ckpt_path = (out / "best.ckpt").string();

    ClaresNet<float> model;
    AdamW<float> opt;
    std::size_t start_epoch = 0;
    double best_val_acc = -1.0;
    if (!args.resume_path.empty()) {
        LoadedCheckpoint loaded = load_checkpoint(args.resume_path);
        model = std::move(loaded.model);
        opt = make_optimizer(model, cfg.train);
        restore_optimizer(opt, loaded);
        start_epoch = loaded.meta.epoch;
        best_val_acc = loaded.meta.best_val_acc;
    } else {
        Rng init = stream_rng(cfg.train.seed, 0);
        model = ClaresNet<float>(cfg.model, init);
        opt = make_optimizer(model, cfg.train);
    }
    std::printf("model parameters: %zu\n", model.param_count());

    json manifest;
    manifest["config"] = run_config_to_json(cfg);
    manifest["data_dir"] = args.data_dir;
    manifest["seed"] = cfg.train.seed;
    manifest["inputs"] = {
        {"reduced.hsz", git_blob_hash((data / "reduced.hsz").string())},
        {"labels.hsz", git_blob_hash((data / "labels.hsz").string())},
        {"split.json", git_blob_hash((data / "split.json").string())}};
    manifest["outputs"] = {{"checkpoint", ckpt_path},
                           {"history", (out / "history.csv").string()}};
    manifest["resume_from"] = args.resume_path;
    manifest["param_count"] = model.param_count();
    write_json((out / "run_manifest.json").string(), manifest);

    TrainResult result = train_model(model, opt, cube, labels, split, cfg.train,
                                     ckpt_path, start_epoch, best_val_acc, args.verbose);
    write_history_csv((out / "history.csv").string(), result.history);
    if (result.best_epoch == 0 && args.resume_path.empty()) {
        // no epoch improved on -1 means training never ran; keep contract of
        // always producing a checkpoint for downstream commands
        CheckpointMeta meta2;
        meta2.model_cfg = model.cfg;
        meta2.epoch = 0;
        meta2.best_val_acc = result.best_val_acc;
        meta2.seed = cfg.train.seed;
        meta2.opt_step = opt.step_count();
        save_checkpoint(ckpt_path, model, &opt, meta2);
    }
    return result.best_val_acc;
}

void eval(const EvalArgs& args) {
    const fs::path data(args.data_dir);
    LoadedCheckpoint loaded = load_checkpoint(args.checkpoint_path);
    HsiCube cube = load_cube((data / "reduced.hsz").string());
    LabelMap labels = load_labels((data / "labels.hsz").string());
    SplitSpec split = load_split_json((data / "split.json").string());
    if (cube.bands > loaded.meta.model_cfg.pe_t_max)
        throw FormatError("checkpoint architecture cannot encode " +
                          std::to_string(cube.bands) + " bands");

    const std::vector<PixelCoord>* coords = nullptr;
    if (args.split == "train")
        coords = &split.train;
    else if (args.split == "val")
        coords = &split.val;
    else if (args.split == "test")
        coords = &split.test;
    else
        throw ArgumentError("eval: unknown split '" + args.split + "'");

    EvalResult res = evaluate(loaded.model, cube, &labels, *coords, 32);

    const std::size_t classes = loaded.model.cfg.classes;
    std::vector<int> preds(res.n);
    for (std::size_t i = 0; i < res.n; ++i) {
        const float* row = res.probs.data() + i * classes;
        std::size_t best = 0;
        for (std::size_t j = 1; j < classes; ++j)
            if (row[j] > row[best]) best = j;
        preds[i] = static_cast<int>(best + 1);
    }
    ConfusionMatrix cm = confusion(res.labels, preds, classes);
    ensure_dir(args.out_dir);
    const fs::path out(args.out_dir);

    json report;
    report["oa"] = overall_accuracy(cm);
    report["ba"] = balanced_accuracy(cm, true);
    report["kappa"] = cohen_kappa(cm);
    const MccResult m = mcc(cm);
    report["mcc"] = m.value;
    if (m.degenerate) report["mcc_degenerate"] = true;
    report["ari"] = ari(res.labels, preds);
    bool all_present = true;
    for (std::size_t c = 0; c < classes; ++c)
        if (cm.row_sum(c) == 0) all_present = false;
    if (all_present) {
        auto cd = centroid_distances(res.features, res.n, res.dim, res.labels, classes);
        report["avg_centroid_distance"] = cd.mean_off_diagonal;
    } else {
        report["avg_centroid_distance"] = nullptr;
    }
    json per_class = json::object();
    for (std::size_t c = 0; c < classes; ++c) {
        auto stats = per_class_stats(cm, c);
        std::vector<double> scores(res.n);
        std::vector<char> positive(res.n);
        for (std::size_t i = 0; i < res.n; ++i) {
            scores[i] = static_cast<double>(res.probs[i * classes + c]);
            positive[i] = res.labels[i] == static_cast<int>(c + 1) ? 1 : 0;
        }
        PrCurve curve = pr_curve(scores, positive);
        json entry;
        entry["precision"] = stats.precision;
        entry["recall"] = stats.recall;
        entry["f1"] = stats.f1;
        entry["support"] = stats.support;
        if (curve.defined)
            entry["ap"] = curve.average_precision;
        else
            entry["ap"] = nullptr;
        per_class[std::to_string(c + 1)] = entry;
        if (curve.defined) {
            std::ofstream pr(out / ("pr_class_" + std::to_string(c + 1) + ".csv"),
                             std::ios::trunc);
            pr << "threshold,precision,recall\n";
            char line[128];
            for (const auto& pt : curve.points) {
                std::snprintf(line, sizeof(line), "%.8f,%.8f,%.8f\n", pt.threshold,
                              pt.precision, pt.recall);
                pr << line;
            }
        }
    }
    report["per_class"] = per_class;
    report["split"] = args.split;
    report["samples"] = res.n;
    write_json((out / "metrics.json").string(), report);

    hsz::write_f32((out / "embeddings.hsz").string(),
                   {static_cast<std::uint32_t>(res.n), static_cast<std::uint32_t>(res.dim)},
                   res.features.data());
}

void map_scene(const MapArgs& args) {
    LoadedCheckpoint loaded = load_checkpoint(args.checkpoint_path);
    HsiCube cube = load_cube(args.cube_path);
    if (cube.bands > loaded.meta.model_cfg.pe_t_max)
        throw FormatError("checkpoint architecture cannot encode " +
                          std::to_string(cube.bands) + " bands");
    const std::size_t classes = loaded.model.cfg.classes;

    std::vector<PixelCoord> coords;
    coords.reserve(cube.pixels());
    for (std::size_t r = 0; r < cube.rows; ++r)
        for (std::size_t c = 0; c < cube.cols; ++c)
            coords.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)});

    EvalResult res = evaluate(loaded.model, cube, nullptr, coords, args.batch);
    auto entropies = entropy_rows(res.probs, res.n, classes);
    const double log_c = std::log(static_cast<double>(classes));

    ensure_dir(args.out_dir);
    const fs::path out(args.out_dir);
    std::vector<Rgb> rgb(res.n);
    std::vector<std::int32_t> class_idx(res.n);
    std::vector<std::uint16_t> uncertainty(res.n);
    const auto& palette = class_palette();
    for (std::size_t i = 0; i < res.n; ++i) {
        const float* row = res.probs.data() + i * classes;
        std::size_t best = 0;
        for (std::size_t j = 1; j < classes; ++j)
            if (row[j] > row[best]) best = j;
        class_idx[i] = static_cast<std::int32_t>(best + 1);
        rgb[i] = palette[best % palette.size()];
        const double norm = std::min(std::max(entropies[i] / log_c, 0.0), 1.0);
        uncertainty[i] = static_cast<std::uint16_t>(std::lround(norm * 65535.0));
    }
    write_ppm((out / "classification.ppm").string(), cube.rows, cube.cols, rgb);
    write_pgm16((out / "uncertainty.pgm").string(), cube.rows, cube.cols, uncertainty);
    hsz::write_i32((out / "classification.hsz").string(),
                   {static_cast<std::uint32_t>(cube.rows),
                    static_cast<std::uint32_t>(cube.cols)},
                   class_idx.data());

    json manifest;
    manifest["checkpoint"] = args.checkpoint_path;
    manifest["cube"] = args.cube_path;
    manifest["cube_hash"] = git_blob_hash(args.cube_path);
    manifest["labels"] = args.labels_path;
    manifest["labels_hash"] = hash_or_absent(args.labels_path);
    write_json((out / "map_manifest.json").string(), manifest);
}

void synth(const SynthArgs& args) {
    SynthScene scene = make_synth(args.cfg);
    ensure_dir(args.out_dir);
    const fs::path out(args.out_dir);
    save_cube((out / "cube.hsz").string(), scene.cube);
    save_labels((out / "labels.hsz").string(), scene.labels);
    json meta;
    meta["classes"] = args.cfg.classes;
    meta["rows"] = args.cfg.rows;
    meta["cols"] = args.cfg.cols;
    meta["bands"] = args.cfg.bands;
    meta["snr"] = args.cfg.snr;
    meta["unlabeled_frac"] = args.cfg.unlabeled_frac;
    meta["sites_per_class"] = args.cfg.sites_per_class;
    meta["seed"] = args.cfg.seed;
    write_json((out / "synth_meta.json").string(), meta);
}

}  // namespace clares::pipeline
