// claresnet: synth / preprocess / train / eval / map over HSZ scenes.
//
// Exit codes: 0 success, 2 config or argument error, 3 data error,
// 4 numeric failure.

#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "clares/pipeline.hpp"

namespace {

int run(int argc, char** argv) {
    CLI::App app{"CLAReSNet hyperspectral classification pipeline"};
    app.require_subcommand(1);

    clares::pipeline::SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled scene");
    synth->add_option("--out", synth_args.out_dir, "output directory")->required();
    synth->add_option("--classes", synth_args.cfg.classes, "number of classes");
    synth->add_option("--rows", synth_args.cfg.rows, "scene rows");
    synth->add_option("--cols", synth_args.cfg.cols, "scene cols");
    synth->add_option("--bands", synth_args.cfg.bands, "spectral bands");
    synth->add_option("--snr", synth_args.cfg.snr, "class signal amplitude over unit noise");
    synth->add_option("--unlabeled-frac", synth_args.cfg.unlabeled_frac,
                      "fraction of pixels left unlabeled");
    synth->add_option("--seed", synth_args.cfg.seed, "generator seed");

    clares::pipeline::PreprocessArgs pre_args;
    auto* pre = app.add_subcommand("preprocess",
                                   "standardize, PCA-reduce and split a scene");
    pre->add_option("--cube", pre_args.cube_path, "input HSZ cube")->required();
    pre->add_option("--labels", pre_args.labels_path, "input HSZ label map")->required();
    pre->add_option("--out", pre_args.out_dir, "output directory")->required();
    pre->add_option("--components", pre_args.components, "PCA components");
    pre->add_option("--seed", pre_args.seed, "split seed");
    pre->add_flag("--inductive", pre_args.inductive, "fit PCA on train pixels only");

    clares::pipeline::TrainArgs train_args;
    auto* train = app.add_subcommand("train", "train a model on preprocessed data");
    train->add_option("--data", train_args.data_dir, "preprocessed data directory")
        ->required();
    train->add_option("--out", train_args.out_dir, "output directory")->required();
    train->add_option("--config", train_args.config_path, "JSON config file");
    train->add_option("--resume", train_args.resume_path, "checkpoint to resume from");
    train->add_flag("--verbose", train_args.verbose, "log per-epoch stats");

    clares::pipeline::EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    eval->add_option("--checkpoint", eval_args.checkpoint_path, "checkpoint file")
        ->required();
    eval->add_option("--data", eval_args.data_dir, "preprocessed data directory")
        ->required();
    eval->add_option("--out", eval_args.out_dir, "output directory")->required();
    eval->add_option("--split", eval_args.split, "train | val | test");

    clares::pipeline::MapArgs map_args;
    auto* map = app.add_subcommand("map", "render full-scene classification maps");
    map->add_option("--checkpoint", map_args.checkpoint_path, "checkpoint file")
        ->required();
    map->add_option("--cube", map_args.cube_path, "reduced HSZ cube")->required();
    map->add_option("--labels", map_args.labels_path, "label map (manifest only)");
    map->add_option("--out", map_args.out_dir, "output directory")->required();
    map->add_option("--batch", map_args.batch, "evaluation batch size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    if (synth->parsed()) clares::pipeline::synth(synth_args);
    if (pre->parsed()) clares::pipeline::preprocess(pre_args);
    if (train->parsed()) clares::pipeline::train(train_args);
    if (eval->parsed()) clares::pipeline::eval(eval_args);
    if (map->parsed()) clares::pipeline::map_scene(map_args);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const clares::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const clares::ArgumentError& e) {
        std::fprintf(stderr, "argument error: %s\n", e.what());
        return 2;
    } catch (const clares::NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 4;
    } catch (const clares::Error& e) {  // data / format / dimension
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
