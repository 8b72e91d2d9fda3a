#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "clares/data.hpp"
#include "clares/model.hpp"
#include "clares/nn.hpp"

namespace clares {

struct TrainConfig {
    double lr = 1e-4;
    double weight_decay = 1e-2;
    double beta1 = 0.9, beta2 = 0.999;
    double eps = 1e-8;
    std::size_t epochs = 40;
    std::size_t batch_train = 16;
    std::size_t batch_eval = 32;
    std::size_t early_stop_patience = 10;
    std::uint64_t seed = 1;
    AugmentConfig augment;
    // optional convergence stop for desk-scale runs: quit once the running
    // train accuracy reaches this level (disabled when <= 0)
    double target_train_acc = -1.0;

    void validate() const {
        if (lr <= 0.0) throw ConfigError("train.lr: must be positive");
        if (weight_decay < 0.0) throw ConfigError("train.weight_decay: must be >= 0");
        if (beta1 < 0.0 || beta1 >= 1.0) throw ConfigError("train.beta1: must be in [0,1)");
        if (beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("train.beta2: must be in [0,1)");
        if (eps <= 0.0) throw ConfigError("train.eps: must be positive");
        if (epochs == 0) throw ConfigError("train.epochs: must be positive");
        if (batch_train == 0) throw ConfigError("train.batch_train: must be positive");
        if (batch_eval == 0) throw ConfigError("train.batch_eval: must be positive");
        if (early_stop_patience == 0)
            throw ConfigError("train.early_stop_patience: must be >= 1");
        if (augment.noise_std < 0.0)
            throw ConfigError("train.augment.noise_std: must be >= 0");
        for (double p : {augment.noise_prob, augment.rot_prob, augment.flip_prob})
            if (p < 0.0 || p > 1.0)
                throw ConfigError("train.augment: probabilities must be in [0,1]");
    }
};

// Decoupled-weight-decay Adam:
//   m <- b1 m + (1-b1) g          v <- b2 v + (1-b2) g^2
//   w <- w - lr * m^ / (sqrt(v^) + eps) - lr * wd * w
// Decay touches only entries registered with decay=true (weight matrices);
// every parameter is stepped every call, so decay applies even when a
// gradient never arrived (missing grads count as zero).
template <class S>
class AdamW {
public:
    struct Hyper {
        double lr = 1e-4, weight_decay = 1e-2;
        double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    };

    AdamW() = default;
    AdamW(std::vector<ParamEntry<S>> params, Hyper hp) : hp_(hp), params_(std::move(params)) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(params_[i].tensor.size(), S(0));
            v_[i].assign(params_[i].tensor.size(), S(0));
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

    void step() {
        ++step_count_;
        const double bc1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(step_count_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& t = params_[i].tensor;
            const bool decay = params_[i].decay && hp_.weight_decay > 0.0;
            const std::vector<S>* g = t.has_grad() ? &t.grad() : nullptr;
            auto& m = m_[i];
            auto& v = v_[i];
            S* w = t.data();
            for (std::size_t k = 0; k < m.size(); ++k) {
                const double gk = g ? static_cast<double>((*g)[k]) : 0.0;
                if (!std::isfinite(gk))
                    throw NumericError("adamw: non-finite gradient in parameter " +
                                       params_[i].name);
                const double mk = hp_.beta1 * static_cast<double>(m[k]) + (1.0 - hp_.beta1) * gk;
                const double vk =
                    hp_.beta2 * static_cast<double>(v[k]) + (1.0 - hp_.beta2) * gk * gk;
                m[k] = static_cast<S>(mk);
                v[k] = static_cast<S>(vk);
                double upd = hp_.lr * (mk / bc1) / (std::sqrt(vk / bc2) + hp_.eps);
                if (decay) upd += hp_.lr * hp_.weight_decay * static_cast<double>(w[k]);
                w[k] = static_cast<S>(static_cast<double>(w[k]) - upd);
            }
        }
    }

    std::int64_t step_count() const { return step_count_; }
    void set_step_count(std::int64_t s) { step_count_ = s; }
    const std::vector<ParamEntry<S>>& params() const { return params_; }
    std::vector<S>& moment1(std::size_t i) { return m_[i]; }
    std::vector<S>& moment2(std::size_t i) { return v_[i]; }
    const Hyper& hyper() const { return hp_; }

private:
    Hyper hp_;
    std::vector<ParamEntry<S>> params_;
    std::vector<std::vector<S>> m_, v_;
    std::int64_t step_count_ = 0;
};

// ---------------------------------------------------------------------------
// float-precision training loop and evaluation (src/train.cpp)
// ---------------------------------------------------------------------------

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0, train_acc = 0.0;
    double val_loss = 0.0, val_acc = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    std::size_t best_epoch = 0;     // 1-based; 0 = never improved
    double best_val_acc = -1.0;
    std::int64_t final_step_count = 0;
};

// Deterministic stream derivation: stream k of a seed is the k-th output of
// SplitMix64(seed), so any epoch's stream can be rebuilt without replaying
// earlier epochs (resume support). Stream 0 = model init, stream 1 = reserved,
// stream 2+e = epoch e (shuffle, augmentation and dropout draws, in batch
// order).
Rng stream_rng(std::uint64_t seed, std::uint64_t stream);

struct CheckpointMeta {
    ModelConfig model_cfg;
    std::size_t epoch = 0;
    double best_val_acc = -1.0;
    std::uint64_t seed = 0;
    std::int64_t opt_step = 0;
};

void save_checkpoint(const std::string& path, ClaresNet<float>& model,
                     AdamW<float>* opt, const CheckpointMeta& meta);

struct LoadedCheckpoint {
    CheckpointMeta meta;
    ClaresNet<float> model;
    // raw optimizer moments keyed like the parameters; empty when the
    // checkpoint carried no optimizer state
    std::vector<std::vector<float>> opt_m, opt_v;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

// Restores optimizer moments captured by load_checkpoint into a freshly
// built AdamW bound to the loaded model's parameters.
AdamW<float> make_optimizer(ClaresNet<float>& model, const TrainConfig& cfg);
void restore_optimizer(AdamW<float>& opt, const LoadedCheckpoint& ckpt);

struct EvalResult {
    std::size_t n = 0, classes = 0, dim = 0;
    std::vector<float> probs;     // (n, classes), rows sum to 1
    std::vector<float> features;  // (n, dim)
    std::vector<int> labels;      // 1..C, 0 where unlabeled
    double loss = 0.0;            // mean cross entropy over labeled samples
    double accuracy = 0.0;        // over labeled samples
};

EvalResult evaluate(ClaresNet<float>& model, const HsiCube& cube, const LabelMap* labels,
                    const std::vector<PixelCoord>& coords, std::size_t batch_eval);

// Runs the epoch loop: train pass with augmentation, eval pass on val, best
// checkpoint written to `checkpoint_path` whenever val accuracy strictly
// improves, early stop after `early_stop_patience` epochs without
// improvement. `start_epoch` > 0 resumes counting from a loaded state.
TrainResult train_model(ClaresNet<float>& model, AdamW<float>& opt, const HsiCube& cube,
                        const LabelMap& labels, const SplitSpec& split,
                        const TrainConfig& cfg, const std::string& checkpoint_path,
                        std::size_t start_epoch = 0, double best_val_acc = -1.0,
                        bool verbose = false);

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);

}  // namespace clares
