// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "wardseq/errors.hpp"
#include "wardseq/training.hpp"

using namespace wardseq;

namespace {

// Encounters whose per-step target is 1 exactly when feature 0 is positive.
std::vector<EncounterSequence> separable(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> len(2, 8);
    std::vector<EncounterSequence> out;
    for (std::size_t e = 0; e < n; ++e) {
        const std::size_t t = len(rng);
        Matrix x(t, 3);
        std::vector<int> y(t);
        for (std::size_t r = 0; r < t; ++r) {
            for (std::size_t c = 0; c < 3; ++c) x(r, c) = normal(rng);
            y[r] = x(r, 0) > 0.0 ? 1 : 0;
        }
        out.push_back(make_sequence("E" + std::to_string(1000 + e), std::move(x), std::move(y)));
    }
    return out;
}

BatchSet batches(std::uint64_t seed, std::size_t n) {
    const auto encs = separable(seed, n);
    return minibatches(dense_sliding_window(encs, 3), 16, seed);
}

ModelParams small_lstm(std::uint64_t seed) {
    ModelConfig cfg = ModelConfig::lstm(3, {{6, true, 0.1}});
    cfg.init_seed = seed;
    return init_model(cfg);
}

TrainConfig quick_config(std::size_t epochs) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.seed = 5;
    cfg.hyper.lr = 0.01;
    return cfg;
}

}  // namespace

TEST(Train, ZeroEpochsReturnsInitial) {
    const ModelParams m = small_lstm(1);
    const TrainResult r = train(m, batches(1, 10), batches(2, 5), quick_config(0));
    EXPECT_EQ(fingerprint(r.params), fingerprint(m));
    EXPECT_TRUE(r.history.epochs.empty());
}

TEST(Train, SeparableProblemLossFalls) {
    const BatchSet tr = batches(3, 60), va = batches(4, 20);
    const ModelParams m = small_lstm(2);
    const double before = evaluate_loss(m, tr, {});
    const TrainResult r = train(m, tr, va, quick_config(30));
    ASSERT_FALSE(r.history.epochs.empty());
    EXPECT_LT(r.history.epochs.back().train_loss, r.history.epochs.front().train_loss);
    EXPECT_LT(evaluate_loss(r.params, tr, {}), 0.5 * before);
}

TEST(Train, SameSeedSameHistory) {
    const BatchSet tr = batches(5, 30), va = batches(6, 10);
    const ModelParams m = small_lstm(3);
    const TrainResult a = train(m, tr, va, quick_config(6));
    const TrainResult b = train(m, tr, va, quick_config(6));
    EXPECT_TRUE(a.history.same_trajectory(b.history));
    EXPECT_EQ(fingerprint(a.params), fingerprint(b.params));
    TrainConfig other = quick_config(6);
    other.seed = 6;
    EXPECT_FALSE(train(m, tr, va, other).history.same_trajectory(a.history));
}

TEST(Train, ReturnsBestValidationWeights) {
    const BatchSet tr = batches(7, 30), va = batches(8, 10);
    TrainConfig cfg = quick_config(15);
    cfg.hyper.lr = 0.2;  // large enough for the validation loss to wander
    const TrainResult r = train(small_lstm(4), tr, va, cfg);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    for (const auto& e : r.history.epochs)
        if (e.val_loss < best) {
            best = e.val_loss;
            best_epoch = e.epoch;
        }
    EXPECT_EQ(r.history.best_epoch, best_epoch);
    EXPECT_DOUBLE_EQ(evaluate_loss(r.params, va, cfg.loss), best);
}

TEST(Train, EarlyStoppingEndsRun) {
    const BatchSet tr = batches(9, 20), va = batches(10, 10);
    TrainConfig cfg = quick_config(200);
    cfg.early_stop_patience = 2;
    cfg.hyper.lr = 0.5;
    const TrainResult r = train(small_lstm(5), tr, va, cfg);
    EXPECT_TRUE(r.history.stopped_early);
    EXPECT_LT(r.history.epochs.size(), 200u);
    EXPECT_EQ(r.history.epochs.size(), r.history.best_epoch + 1 + 2);
}

TEST(Train, NonFiniteLossNamesEpochAndBatch) {
    BatchSet tr = batches(11, 10);
    tr.batches[0].features(0, 2, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
        train(small_lstm(6), tr, batches(12, 5), quick_config(2));
        FAIL();
    } catch (const NumericError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("epoch 0"), std::string::npos) << msg;
        EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
    }
}

TEST(Train, WidthMismatchNamesBothWidths) {
    ModelConfig cfg = ModelConfig::lstm(5, {{4, false, 0.0}});
    try {
        train(init_model(cfg), batches(13, 5), batches(14, 5), quick_config(1));
        FAIL();
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("5"), std::string::npos) << msg;
        EXPECT_NE(msg.find("3"), std::string::npos) << msg;
    }
}

TEST(Train, PlateauLowersRateInHistory) {
    const BatchSet tr = batches(15, 20), va = batches(16, 10);
    TrainConfig cfg = quick_config(40);
    cfg.hyper.lr = 0.5;
    cfg.plateau_patience = 1;
    cfg.early_stop_patience = 40;
    const TrainResult r = train(small_lstm(7), tr, va, cfg);
    double prev = cfg.hyper.lr;
    bool reduced = false;
    for (const auto& e : r.history.epochs) {
        EXPECT_LE(e.lr, prev);
        reduced |= e.lr < prev;
        prev = e.lr;
    }
    EXPECT_TRUE(reduced);
}

TEST(Train, HistoryJsonLines) {
    const TrainResult r = train(small_lstm(8), batches(17, 10), batches(18, 5), quick_config(3));
    std::ostringstream out;
    write_jsonl(out, r.history);
    std::istringstream in(out.str());
    std::string line;
    std::size_t n = 0, best = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_EQ(j.at("epoch").get<std::size_t>(), n);
        best += j.at("best").get<bool>();
        ++n;
    }
    EXPECT_EQ(n, 3u);
    EXPECT_EQ(best, 1u);
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
    TrainConfig c;
    c.epochs = 7;
    c.loss = {LossKind::focal, {0.5, 62.71}, 1.5};
    c.optimizer = OptimizerKind::rmsprop;
    c.hyper.rho = 0.8;
    const TrainConfig back = train_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    nlohmann::json bad = to_json(c);
    bad["plateau_factor"] = 1.5;
    EXPECT_THROW(train_config_from_json(bad), ConfigError);
    bad = to_json(c);
    bad["optimizer"]["lr"] = -1.0;
    EXPECT_THROW(train_config_from_json(bad), ConfigError);
}
