#include "clares/train.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "clares/ops.hpp"

namespace clares {

Rng stream_rng(std::uint64_t seed, std::uint64_t stream) {
    Rng base(seed);
    std::uint64_t s = 0;
    for (std::uint64_t i = 0; i <= stream; ++i) s = base.next_u64();
    return Rng(s);
}

namespace {

std::size_t argmax_row(const float* row, std::size_t c) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j)
        if (row[j] > row[best]) best = j;
    return best;
}

}  // namespace

EvalResult evaluate(ClaresNet<float>& model, const HsiCube& cube, const LabelMap* labels,
                    const std::vector<PixelCoord>& coords, std::size_t batch_eval) {
    NoGradGuard no_grad;
    Ctx ctx;  // eval mode
    EvalResult res;
    res.n = coords.size();
    res.classes = model.cfg.classes;
    res.dim = model.cfg.embed_dim;
    res.probs.resize(res.n * res.classes);
    res.features.resize(res.n * res.dim);
    res.labels.assign(res.n, 0);
    BatchIter iter(cube, labels, coords, batch_eval, model.cfg.patch, nullptr, nullptr,
                   false);
    std::size_t offset = 0;
    double loss_sum = 0.0;
    std::size_t labeled = 0, correct = 0;
    while (auto batch = iter.next()) {
        auto out = model.forward(batch->x, ctx);
        auto probs = softmax_lastdim(out.logits);
        const std::size_t bn = batch->x.dim(0);
        std::copy(probs.data(), probs.data() + bn * res.classes,
                  res.probs.begin() + offset * res.classes);
        std::copy(out.features.data(), out.features.data() + bn * res.dim,
                  res.features.begin() + offset * res.dim);
        for (std::size_t i = 0; i < bn; ++i) {
            const int lab = batch->labels[i];
            res.labels[offset + i] = lab;
            if (lab > 0) {
                ++labeled;
                const float* row = probs.data() + i * res.classes;
                if (argmax_row(row, res.classes) == static_cast<std::size_t>(lab - 1))
                    ++correct;
                const double p = std::max(
                    static_cast<double>(row[static_cast<std::size_t>(lab - 1)]), 1e-30);
                loss_sum -= std::log(p);
            }
        }
        offset += bn;
    }
    if (labeled > 0) {
        res.loss = loss_sum / static_cast<double>(labeled);
        res.accuracy = static_cast<double>(correct) / static_cast<double>(labeled);
    }
    return res;
}

AdamW<float> make_optimizer(ClaresNet<float>& model, const TrainConfig& cfg) {
    AdamW<float>::Hyper hp;
    hp.lr = cfg.lr;
    hp.weight_decay = cfg.weight_decay;
    hp.beta1 = cfg.beta1;
    hp.beta2 = cfg.beta2;
    hp.eps = cfg.eps;
    return AdamW<float>(model.state_dict().params, hp);
}

TrainResult train_model(ClaresNet<float>& model, AdamW<float>& opt, const HsiCube& cube,
                        const LabelMap& labels, const SplitSpec& split,
                        const TrainConfig& cfg, const std::string& checkpoint_path,
                        std::size_t start_epoch, double best_val_acc, bool verbose) {
    cfg.validate();
    if (split.train.empty()) throw ArgumentError("train: empty train split");
    TrainResult result;
    result.best_val_acc = best_val_acc;
    std::size_t since_best = 0;
    for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        Rng epoch_rng = stream_rng(cfg.seed, 2 + epoch);
        Ctx ctx{true, &epoch_rng};
        BatchIter iter(cube, &labels, split.train, cfg.batch_train, model.cfg.patch,
                       &cfg.augment, &epoch_rng, true);
        double loss_sum = 0.0;
        std::size_t seen = 0, correct = 0;
        while (auto batch = iter.next()) {
            std::vector<int> zero_based(batch->labels.size());
            for (std::size_t i = 0; i < zero_based.size(); ++i) {
                if (batch->labels[i] < 1)
                    throw ArgumentError("train: unlabeled pixel in train split");
                zero_based[i] = batch->labels[i] - 1;
            }
            auto out = model.forward(batch->x, ctx);
            auto loss = cross_entropy(out.logits, zero_based);
            opt.zero_grad();
            loss.backward();
            opt.step();
            const std::size_t bn = batch->x.dim(0);
            loss_sum += static_cast<double>(loss.item()) * static_cast<double>(bn);
            for (std::size_t i = 0; i < bn; ++i)
                if (argmax_row(out.logits.data() + i * model.cfg.classes,
                               model.cfg.classes) ==
                    static_cast<std::size_t>(zero_based[i]))
                    ++correct;
            seen += bn;
        }
        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.train_loss = loss_sum / static_cast<double>(seen);
        stats.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
        auto val = evaluate(model, cube, &labels, split.val, cfg.batch_eval);
        stats.val_loss = val.loss;
        stats.val_acc = val.accuracy;
        result.history.push_back(stats);
        if (verbose)
            std::printf("epoch %3zu  train %.4f/%.4f  val %.4f/%.4f\n", stats.epoch,
                        stats.train_loss, stats.train_acc, stats.val_loss, stats.val_acc);
        if (stats.val_acc > result.best_val_acc) {
            result.best_val_acc = stats.val_acc;
            result.best_epoch = stats.epoch;
            since_best = 0;
            if (!checkpoint_path.empty()) {
                CheckpointMeta meta;
                meta.model_cfg = model.cfg;
                meta.epoch = stats.epoch;
                meta.best_val_acc = result.best_val_acc;
                meta.seed = cfg.seed;
                meta.opt_step = opt.step_count();
                save_checkpoint(checkpoint_path, model, &opt, meta);
            }
        } else {
            ++since_best;
            if (since_best >= cfg.early_stop_patience) break;
        }
        if (cfg.target_train_acc > 0.0 && stats.train_acc >= cfg.target_train_acc) break;
    }
    result.final_step_count = opt.step_count();
    return result;
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    char line[256];
    for (const auto& h : history) {
        std::snprintf(line, sizeof(line), "%zu,%.8f,%.8f,%.8f,%.8f\n", h.epoch,
                      h.train_loss, h.train_acc, h.val_loss, h.val_acc);
        out << line;
    }
}

}  // namespace clares
