// SPDX-License-Identifier: Apache-2.0
#include "wardseq/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <utility>

#include "seeding.hpp"
#include "wardseq/errors.hpp"

namespace wardseq {

namespace {

using detail::derive_seed;

void check_width(const ModelParams& m, const BatchSet& set, const char* which) {
    for (const auto& b : set.batches) {
        if (b.features.feature() != m.config.input_width) {
            throw ShapeError(std::string(which) + " batches: feature width mismatch: model expects " +
                             std::to_string(m.config.input_width) + ", batch has " +
                             std::to_string(b.features.feature()));
        }
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
    if (plateau_patience < 1) throw ConfigError("plateau_patience must be >= 1");
    if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw ConfigError("plateau_factor must be in (0, 1)");
    if (!(min_lr >= 0.0)) throw ConfigError("min_lr must be >= 0");
    if (!(hyper.lr > 0.0)) throw ConfigError("learning rate must be > 0");
    if (!(hyper.epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (!(hyper.rho >= 0.0 && hyper.rho < 1.0)) throw ConfigError("rho must be in [0, 1)");
    if (!(hyper.beta1 >= 0.0 && hyper.beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
    if (!(hyper.beta2 >= 0.0 && hyper.beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
    if (!(loss.weights.w0 > 0.0 && loss.weights.w1 > 0.0)) throw ConfigError("class weights must be > 0");
    if (!(loss.gamma >= 0.0)) throw ConfigError("focal gamma must be >= 0");
}

nlohmann::json to_json(const TrainConfig& cfg) {
    return {
        {"epochs", cfg.epochs},
        {"seed", cfg.seed},
        {"loss",
         {{"kind", to_string(cfg.loss.kind)},
          {"w0", cfg.loss.weights.w0},
          {"w1", cfg.loss.weights.w1},
          {"gamma", cfg.loss.gamma}}},
        {"optimizer",
         {{"kind", to_string(cfg.optimizer)},
          {"lr", cfg.hyper.lr},
          {"rho", cfg.hyper.rho},
          {"beta1", cfg.hyper.beta1},
          {"beta2", cfg.hyper.beta2},
          {"epsilon", cfg.hyper.epsilon}}},
        {"early_stop_patience", cfg.early_stop_patience},
        {"plateau_patience", cfg.plateau_patience},
        {"plateau_factor", cfg.plateau_factor},
        {"min_lr", cfg.min_lr},
    };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.epochs = j.value("epochs", c.epochs);
        c.seed = j.value("seed", c.seed);
        if (j.contains("loss")) {
            const auto& l = j.at("loss");
            c.loss.kind = loss_kind_from_string(l.value("kind", to_string(c.loss.kind)));
            c.loss.weights.w0 = l.value("w0", c.loss.weights.w0);
            c.loss.weights.w1 = l.value("w1", c.loss.weights.w1);
            c.loss.gamma = l.value("gamma", c.loss.gamma);
        }
        if (j.contains("optimizer")) {
            const auto& o = j.at("optimizer");
            c.optimizer = optimizer_kind_from_string(o.value("kind", to_string(c.optimizer)));
            c.hyper.lr = o.value("lr", c.hyper.lr);
            c.hyper.rho = o.value("rho", c.hyper.rho);
            c.hyper.beta1 = o.value("beta1", c.hyper.beta1);
            c.hyper.beta2 = o.value("beta2", c.hyper.beta2);
            c.hyper.epsilon = o.value("epsilon", c.hyper.epsilon);
        }
        c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
        c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
        c.plateau_factor = j.value("plateau_factor", c.plateau_factor);
        c.min_lr = j.value("min_lr", c.min_lr);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("training config: ") + e.what());
    }
    c.validate();
    return c;
}

bool TrainHistory::same_trajectory(const TrainHistory& other) const {
    if (best_epoch != other.best_epoch || stopped_early != other.stopped_early) return false;
    if (epochs.size() != other.epochs.size()) return false;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        const auto& a = epochs[i];
        const auto& b = other.epochs[i];
        if (a.epoch != b.epoch || a.train_loss != b.train_loss || a.val_loss != b.val_loss || a.lr != b.lr)
            return false;
    }
    return true;
}

void write_jsonl(std::ostream& out, const TrainHistory& history) {
    for (const auto& e : history.epochs) {
        nlohmann::json j = {{"epoch", e.epoch},
                            {"train_loss", e.train_loss},
                            {"val_loss", e.val_loss},
                            {"lr", e.lr},
                            {"wall_seconds", e.wall_seconds},
                            {"best", e.epoch == history.best_epoch}};
        out << j.dump() << '\n';
    }
}

double evaluate_loss(const ModelParams& model, const BatchSet& set, const LossConfig& loss) {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& b : set.batches) {
        if (b.size() == 0) continue;
        const auto p = model_forward(model, b.features, b.mask, false, nullptr);
        total += evaluate_loss(loss, p, b.labels).loss * static_cast<double>(b.size());
        n += b.size();
    }
    return n == 0 ? 0.0 : total / static_cast<double>(n);
}

TrainResult train(const ModelParams& initial, const BatchSet& train_set, const BatchSet& val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    check_width(initial, train_set, "training");
    check_width(initial, val_set, "validation");

    TrainResult result{initial, {}};
    if (cfg.epochs == 0) return result;
    if (train_set.sample_count() == 0) throw ConfigError("training set is empty");

    ModelParams model = initial;
    OptimizerState opt;
    opt.kind = cfg.optimizer;
    opt.hyper = cfg.hyper;
    EarlyStopping stopper(cfg.early_stop_patience);
    PlateauScheduler plateau(cfg.plateau_patience, cfg.plateau_factor, cfg.min_lr);

    std::vector<std::size_t> order(train_set.batches.size());
    ForwardCache cache;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double total = 0.0;
        std::size_t seen = 0;
        for (std::size_t k = 0; k < order.size(); ++k) {
            const Batch& b = train_set.batches[order[k]];
            if (b.size() == 0) continue;
            std::mt19937_64 rng(derive_seed(cfg.seed, epoch, k + 1));
            const auto p = model_forward(model, b.features, b.mask, true, &rng, &cache);
            const LossValue lv = evaluate_loss(cfg.loss, p, b.labels);
            if (!std::isfinite(lv.loss)) {
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(k));
            }
            ModelParams grads = model_backward(model, cache, lv.grad);

            auto pv = parameters(model);
            auto gv = parameters(std::as_const(grads));
            std::vector<Matrix*> ps;
            std::vector<const Matrix*> gs;
            ps.reserve(pv.size());
            gs.reserve(gv.size());
            for (auto& v : pv) ps.push_back(v.value);
            for (auto& v : gv) gs.push_back(v.value);
            optimizer_step(opt, ps, gs);

            total += lv.loss * static_cast<double>(b.size());
            seen += b.size();
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = total / static_cast<double>(seen);
        rec.val_loss = val_set.sample_count() == 0 ? rec.train_loss : evaluate_loss(model, val_set, cfg.loss);
        rec.lr = opt.hyper.lr;
        if (!std::isfinite(rec.val_loss)) {
            throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
        }
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.history.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);

        const auto u = stopper.update(rec.val_loss);
        if (u.improved) {
            result.params = model;
            result.history.best_epoch = epoch;
        }
        if (u.stop) {
            result.history.stopped_early = true;
            break;
        }
        opt.hyper.lr = plateau.update(rec.val_loss, opt.hyper.lr);
    }
    return result;
}

}  // namespace wardseq
