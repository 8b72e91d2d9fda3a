#include "clares/config_io.hpp"

#include <fstream>

namespace clares {

namespace {

using nlohmann::json;

// Pulls a field if present, rejects unknown keys so config typos surface as
// exit-code-2 errors with the field name.
class FieldReader {
public:
    FieldReader(const json& j, std::string scope) : j_(j), scope_(std::move(scope)) {
        if (!j_.is_object()) throw ConfigError(scope_ + ": expected a JSON object");
    }

    template <class T>
    void get(const char* name, T& out) {
        seen_.push_back(name);
        if (!j_.contains(name)) return;
        try {
            out = j_.at(name).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(scope_ + "." + name + ": wrong type");
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            bool known = false;
            for (const auto& s : seen_)
                if (it.key() == s) known = true;
            if (!known) throw ConfigError(scope_ + "." + it.key() + ": unknown field");
        }
    }

private:
    const json& j_;
    std::string scope_;
    std::vector<std::string> seen_;
};

}  // namespace

json model_config_to_json(const ModelConfig& cfg) {
    json j;
    j["classes"] = cfg.classes;
    j["embed_dim"] = cfg.embed_dim;
    j["base_channels"] = cfg.base_channels;
    j["encoder_layers"] = cfg.encoder_layers;
    j["heads"] = cfg.heads;
    j["patch"] = cfg.patch;
    j["head_hidden"] = cfg.head_hidden;
    j["pe_t_max"] = cfg.pe_t_max;
    j["se_reduction"] = cfg.se_reduction;
    j["cbam_kernel"] = cfg.cbam_kernel;
    j["scales"] = cfg.scales;
    j["latent_base"] = cfg.latents.l_base;
    j["latent_t_base"] = cfg.latents.t_base;
    j["latent_min"] = cfg.latents.l_min;
    j["latent_max"] = cfg.latents.l_max;
    j["attn_dropout"] = cfg.attn_dropout;
    j["internal_dropout"] = cfg.internal_dropout;
    j["head_dropout1"] = cfg.head_dropout1;
    j["head_dropout2"] = cfg.head_dropout2;
    return j;
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig cfg;
    FieldReader r(j, "model");
    r.get("classes", cfg.classes);
    r.get("embed_dim", cfg.embed_dim);
    r.get("base_channels", cfg.base_channels);
    r.get("encoder_layers", cfg.encoder_layers);
    r.get("heads", cfg.heads);
    r.get("patch", cfg.patch);
    r.get("head_hidden", cfg.head_hidden);
    r.get("pe_t_max", cfg.pe_t_max);
    r.get("se_reduction", cfg.se_reduction);
    r.get("cbam_kernel", cfg.cbam_kernel);
    r.get("scales", cfg.scales);
    r.get("latent_base", cfg.latents.l_base);
    r.get("latent_t_base", cfg.latents.t_base);
    r.get("latent_min", cfg.latents.l_min);
    r.get("latent_max", cfg.latents.l_max);
    r.get("attn_dropout", cfg.attn_dropout);
    r.get("internal_dropout", cfg.internal_dropout);
    r.get("head_dropout1", cfg.head_dropout1);
    r.get("head_dropout2", cfg.head_dropout2);
    r.finish();
    cfg.validate();
    return cfg;
}

json train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["lr"] = cfg.lr;
    j["weight_decay"] = cfg.weight_decay;
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["eps"] = cfg.eps;
    j["epochs"] = cfg.epochs;
    j["batch_train"] = cfg.batch_train;
    j["batch_eval"] = cfg.batch_eval;
    j["early_stop_patience"] = cfg.early_stop_patience;
    j["seed"] = cfg.seed;
    j["target_train_acc"] = cfg.target_train_acc;
    j["noise_std"] = cfg.augment.noise_std;
    j["noise_prob"] = cfg.augment.noise_prob;
    j["rot_prob"] = cfg.augment.rot_prob;
    j["flip_prob"] = cfg.augment.flip_prob;
    return j;
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig cfg;
    FieldReader r(j, "train");
    r.get("lr", cfg.lr);
    r.get("weight_decay", cfg.weight_decay);
    r.get("beta1", cfg.beta1);
    r.get("beta2", cfg.beta2);
    r.get("eps", cfg.eps);
    r.get("epochs", cfg.epochs);
    r.get("batch_train", cfg.batch_train);
    r.get("batch_eval", cfg.batch_eval);
    r.get("early_stop_patience", cfg.early_stop_patience);
    r.get("seed", cfg.seed);
    r.get("target_train_acc", cfg.target_train_acc);
    r.get("noise_std", cfg.augment.noise_std);
    r.get("noise_prob", cfg.augment.noise_prob);
    r.get("rot_prob", cfg.augment.rot_prob);
    r.get("flip_prob", cfg.augment.flip_prob);
    r.finish();
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    RunConfig cfg;
    if (j.contains("model")) cfg.model = model_config_from_json(j.at("model"));
    if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "model" && it.key() != "train")
            throw ConfigError(path + ": unknown top-level field '" + it.key() + "'");
    return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
    json j;
    j["model"] = model_config_to_json(cfg.model);
    j["train"] = train_config_to_json(cfg.train);
    return j;
}

}  // namespace clares
