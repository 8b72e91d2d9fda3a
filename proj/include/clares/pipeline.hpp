#pragma once

#include <cstdint>
#include <string>

#include "clares/synth.hpp"
#include "clares/train.hpp"

namespace clares::pipeline {

// Shared command implementations; the CLI binary is a thin flag parser over
// these, and the integration tests call them directly.

struct PreprocessArgs {
    std::string cube_path, labels_path, out_dir;
    std::size_t components = 30;
    std::uint64_t seed = 1;
    bool inductive = false;  // fit PCA on train pixels only
    double train_ratio = 0.72, val_ratio = 0.08, test_ratio = 0.20;
};
void preprocess(const PreprocessArgs& args);

struct TrainArgs {
    std::string data_dir, out_dir;
    std::string config_path;  // optional; defaults when empty
    std::string resume_path;  // optional checkpoint to continue from
    bool verbose = false;
};
// Returns the best validation accuracy.
double train(const TrainArgs& args);

struct EvalArgs {
    std::string checkpoint_path, data_dir, out_dir;
    std::string split = "test";  // train | val | test
};
void eval(const EvalArgs& args);

struct MapArgs {
    std::string checkpoint_path, cube_path, out_dir;
    std::string labels_path;  // optional, only echoed into the manifest
    std::size_t batch = 32;
};
void map_scene(const MapArgs& args);

struct SynthArgs {
    SynthConfig cfg;
    std::string out_dir;
};
void synth(const SynthArgs& args);

}  // namespace clares::pipeline
