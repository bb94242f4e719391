// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "testing.hpp"
#include "wardseq/errors.hpp"
#include "wardseq/metrics.hpp"

using namespace wardseq;
using wardseq::testing::brute_auroc;
using wardseq::testing::brute_average_precision;

namespace {

struct Instance {
    std::vector<double> s;
    std::vector<int> y;
};

// Scores drawn from a small grid so ties are common; both classes present.
Instance random_instance(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> size(2, 200);
    std::uniform_int_distribution<int> grid_size(2, 40);
    std::uniform_real_distribution<double> prevalence(0.02, 0.9);
    Instance in;
    const std::size_t n = size(rng);
    const int g = grid_size(rng);
    std::uniform_int_distribution<int> level(0, g);
    std::bernoulli_distribution pos(prevalence(rng));
    for (std::size_t i = 0; i < n; ++i) {
        in.s.push_back(static_cast<double>(level(rng)) / g);
        in.y.push_back(pos(rng) ? 1 : 0);
    }
    in.y[0] = 1;
    in.y[1] = 0;
    std::shuffle(in.y.begin(), in.y.end(), rng);
    return in;
}

}  // namespace

TEST(Auroc, HandCase) {
    const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
    const std::vector<int> y{0, 0, 1, 1};
    EXPECT_EQ(auroc(s, y), 0.75);
    EXPECT_NEAR(auprc(s, y), 0.5 + (2.0 / 3.0) * 0.5, 1e-10);
    EXPECT_NEAR(auprc(s, y), 0.8333333333, 1e-10);
}

TEST(Auroc, SeparatedAndTied) {
    const std::vector<double> s{0.1, 0.2, 0.8, 0.9}, flat(4, 0.3);
    const std::vector<int> y{0, 0, 1, 1};
    EXPECT_EQ(auroc(s, y), 1.0);
    EXPECT_EQ(auprc(s, y), 1.0);
    EXPECT_EQ(auroc(flat, y), 0.5);
    EXPECT_EQ(auprc(flat, y), 0.5);
}

TEST(Auroc, UndefinedInputsRejected) {
    const std::vector<double> s{0.1, 0.2};
    EXPECT_THROW(auroc(s, std::vector<int>{1, 1}), MetricError);
    EXPECT_THROW(auprc(s, std::vector<int>{0, 0}), MetricError);
    const std::vector<double> nan{0.1, std::nan("")};
    EXPECT_THROW(auroc(nan, std::vector<int>{0, 1}), MetricError);
}

TEST(MetricOracles, MatchBruteForceWithTies) {
    std::mt19937_64 rng(500);
    for (int trial = 0; trial < 500; ++trial) {
        const Instance in = random_instance(rng);
        EXPECT_EQ(auroc(in.s, in.y), brute_auroc(in.s, in.y)) << "trial " << trial;
        EXPECT_NEAR(auprc(in.s, in.y), brute_average_precision(in.s, in.y), 1e-12) << "trial " << trial;
    }
}

TEST(MetricProperties, MonotoneTransformAndLabelFlip) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const Instance in = random_instance(rng);
        std::vector<double> squashed, flipped_scores = in.s;
        for (double v : in.s) squashed.push_back(1.0 / (1.0 + std::exp(-7.0 * v + 2.0)));
        std::vector<int> flipped;
        for (int v : in.y) flipped.push_back(1 - v);
        EXPECT_NEAR(auroc(in.s, in.y), auroc(squashed, in.y), 1e-12);
        EXPECT_NEAR(auprc(in.s, in.y), auprc(squashed, in.y), 1e-12);
        EXPECT_NEAR(auroc(in.s, in.y) + auroc(in.s, flipped), 1.0, 1e-12);
    }
}

TEST(MetricProperties, RandomScoresAtLowPrevalence) {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> u(0, 1);
    std::bernoulli_distribution pos(0.05);
    std::vector<double> s(100000);
    std::vector<int> y(100000);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = u(rng);
        y[i] = pos(rng);
    }
    EXPECT_NEAR(auroc(s, y), 0.5, 0.01);
    EXPECT_NEAR(auprc(s, y), 0.05, 0.01);
}

TEST(Aggregate, MaxRule) {
    const std::vector<ScoredObservation> obs{{"E1", 0, 0.2, 0}, {"E1", 1, 0.9, 1}, {"E1", 2, 0.4, 0}};
    const auto enc = encounter_aggregate(obs);
    ASSERT_EQ(enc.size(), 1u);
    EXPECT_EQ(enc[0].score, 0.9);
    EXPECT_EQ(enc[0].label, 1);
    EXPECT_EQ(encounter_aggregate(obs, Aggregation::last)[0].score, 0.4);
    EXPECT_NEAR(encounter_aggregate(obs, Aggregation::mean)[0].score, 0.5, 1e-15);
}

TEST(Aggregate, GroupsById) {
    const std::vector<ScoredObservation> obs{{"E2", 0, 0.3, 0}, {"E1", 0, 0.7, 1}, {"E2", 1, 0.1, 0}};
    const auto enc = encounter_aggregate(obs);
    ASSERT_EQ(enc.size(), 2u);
    EXPECT_EQ(enc[0].encounter_id, "E1");
    EXPECT_EQ(enc[0].score, 0.7);
    EXPECT_EQ(enc[1].encounter_id, "E2");
    EXPECT_EQ(enc[1].score, 0.3);
    const std::vector<ScoredObservation> one{{"E9", 3, 0.25, 1}};
    EXPECT_EQ(encounter_aggregate(one)[0].score, 0.25);
}

TEST(Report, OracleScoresArePerfect) {
    std::vector<ScoredObservation> obs;
    for (int e = 0; e < 10; ++e)
        for (int t = 0; t < 4; ++t) {
            const int label = (e % 3 == 0 && t == 3) ? 1 : 0;
            obs.push_back({"E" + std::to_string(e), static_cast<std::size_t>(t), static_cast<double>(label), label});
        }
    const MetricsReport r = metrics_from_scores(obs);
    EXPECT_EQ(r.observation.auroc, 1.0);
    EXPECT_EQ(r.encounter.auroc, 1.0);
    EXPECT_EQ(r.observation.n, 40u);
    EXPECT_EQ(r.encounter.n, 10u);
    EXPECT_EQ(r.encounter.n_pos, 4u);
    EXPECT_DOUBLE_EQ(r.observation.event_rate, 4.0 / 40.0);
    EXPECT_GE(r.encounter.event_rate, r.observation.event_rate);
    const auto j = to_json(r);
    EXPECT_EQ(j.at("encounter").at("n_pos").get<std::size_t>(), 4u);
}

TEST(Report, SingleObservationEncountersMatchObservationLevel) {
    std::mt19937_64 rng(3);
    const Instance in = random_instance(rng);
    std::vector<ScoredObservation> obs;
    for (std::size_t i = 0; i < in.s.size(); ++i) obs.push_back({"E" + std::to_string(1000 + i), 0, in.s[i], in.y[i]});
    const MetricsReport r = metrics_from_scores(obs);
    EXPECT_EQ(r.observation.auroc, r.encounter.auroc);
    EXPECT_EQ(r.observation.auprc, r.encounter.auprc);
    EXPECT_EQ(r.observation.event_rate, r.encounter.event_rate);
}

TEST(Report, EvaluateScoresEverySampleInOrder) {
    std::mt19937_64 rng(4);
    std::vector<EncounterSequence> encs;
    for (int e = 0; e < 6; ++e) {
        auto seq = wardseq::testing::random_sequence(rng, "E" + std::to_string(e), 3 + e, 2);
        encs.push_back(seq);
    }
    encs[0].targets.assign(encs[0].length(), 0);
    encs[0].targets.back() = 1;
    encs[0].encounter_label = 1;
    encs[1].targets.assign(encs[1].length(), 0);
    encs[1].encounter_label = 0;
    ModelConfig cfg = ModelConfig::lstm(2, {{3, false, 0.0}});
    cfg.init_seed = 1;
    const ModelParams m = init_model(cfg);
    const BatchSet set = dense_sliding_window(encs, 4);
    const auto scored = score(m, set);
    ASSERT_EQ(scored.size(), set.sample_count());
    for (std::size_t i = 1; i < scored.size(); ++i) {
        const auto& a = scored[i - 1];
        const auto& b = scored[i];
        EXPECT_TRUE(a.encounter_id < b.encounter_id || (a.encounter_id == b.encounter_id && a.step < b.step));
    }
    const MetricsReport r = evaluate(m, set);
    EXPECT_EQ(r.encounter.n, 6u);
    EXPECT_EQ(to_json(r).dump(), to_json(evaluate(m, set)).dump());
}

TEST(Aggregation, Names) {
    for (Aggregation a : {Aggregation::max, Aggregation::mean, Aggregation::last})
        EXPECT_EQ(aggregation_from_string(to_string(a)), a);
    EXPECT_THROW(aggregation_from_string("median"), ConfigError);
}
