#pragma once

#include <string>

#include <json.hpp>

#include "clares/model.hpp"
#include "clares/train.hpp"

namespace clares {

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Config file layout: {"model": {...}, "train": {...}}; absent fields keep
// their defaults, unknown fields are rejected with the offending name.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
};
RunConfig load_run_config(const std::string& path);
nlohmann::json run_config_to_json(const RunConfig& cfg);

}  // namespace clares
