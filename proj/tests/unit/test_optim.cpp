// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "wardseq/errors.hpp"
#include "wardseq/optim.hpp"

using namespace wardseq;

namespace {

struct Step {
    OptimizerState state;
    Matrix param;

    explicit Step(OptimizerKind kind, Matrix init) : param(std::move(init)) { state.kind = kind; }

    void apply(const Matrix& grad) {
        Matrix* p[] = {&param};
        const Matrix* g[] = {&grad};
        optimizer_step(state, p, g);
    }
};

}  // namespace

TEST(RmsProp, FirstStepClosedForm) {
    Step s(OptimizerKind::rmsprop, Matrix{{0.0, 0.0}});
    s.apply(Matrix{{0.3, -2.0}});
    const double lr = 1e-3, rho = 0.9, eps = 1e-8;
    EXPECT_NEAR(s.param(0, 0), -lr * 0.3 / (std::sqrt((1 - rho) * 0.09) + eps), 1e-15);
    EXPECT_NEAR(s.param(0, 0), -lr / std::sqrt(1 - rho), 1e-9);
    EXPECT_NEAR(s.param(0, 1), lr / std::sqrt(1 - rho), 1e-9);
}

TEST(RmsProp, ZeroGradientLeavesParameter) {
    Step s(OptimizerKind::rmsprop, Matrix{{1.5}});
    for (int i = 0; i < 5; ++i) s.apply(Matrix{{0.0}});
    EXPECT_EQ(s.param(0, 0), 1.5);
}

TEST(RmsProp, AdaptsPerWeight) {
    Step s(OptimizerKind::rmsprop, Matrix{{0.0, 0.0}});
    double last0 = 0, last1 = 0;
    for (int i = 0; i < 200; ++i) {
        const double before0 = s.param(0, 0), before1 = s.param(0, 1);
        s.apply(Matrix{{0.01, 0.02}});
        last0 = s.param(0, 0) - before0;
        last1 = s.param(0, 1) - before1;
    }
    EXPECT_NEAR(last0 / last1, 1.0, 1e-6);
    EXPECT_NEAR(last0, -1e-3, 1e-8);
}

TEST(Adam, FirstStepIsLearningRate) {
    Step s(OptimizerKind::adam, Matrix{{0.0, 0.0, 0.0}});
    s.apply(Matrix{{0.5, -7.0, 1e-3}});
    EXPECT_NEAR(s.param(0, 0), -1e-3, 1e-10);
    EXPECT_NEAR(s.param(0, 1), 1e-3, 1e-10);
    EXPECT_NEAR(s.param(0, 2), -1e-3, 1e-8);
}

TEST(Adam, ZeroGradientLeavesParameter) {
    Step s(OptimizerKind::adam, Matrix{{-2.0}});
    for (int i = 0; i < 5; ++i) s.apply(Matrix{{0.0}});
    EXPECT_EQ(s.param(0, 0), -2.0);
}

TEST(Adam, FirstStepScaleInvariant) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
        Matrix g(1, 5);
        for (double& v : g.values()) v = n(rng);
        Matrix g10 = g;
        for (double& v : g10.values()) v *= 10;
        Step a(OptimizerKind::adam, Matrix(1, 5)), b(OptimizerKind::adam, Matrix(1, 5));
        a.apply(g);
        b.apply(g10);
        for (std::size_t k = 0; k < 5; ++k) {
            // Only epsilon separates the two updates.
            const double bound = 1e-3 * 1e-8 / std::abs(g(0, k));
            EXPECT_NEAR(a.param(0, k), b.param(0, k), bound + 1e-18);
            EXPECT_NEAR(std::abs(a.param(0, k)), 1e-3, 1e-3 * 1e-8 / std::abs(g(0, k)) + 1e-15);
        }
    }
}

TEST(Adam, MatchesHandRecurrence) {
    Step s(OptimizerKind::adam, Matrix{{1.0}});
    s.state.hyper.lr = 0.1;
    double theta = 1.0, m = 0, v = 0;
    const double grads[] = {0.5, -0.2, 0.7, 0.1};
    for (int t = 1; t <= 4; ++t) {
        const double g = grads[t - 1];
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        theta -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
        s.apply(Matrix{{g}});
        EXPECT_NEAR(s.param(0, 0), theta, 1e-14);
    }
    EXPECT_EQ(s.state.steps, 4u);
}

TEST(Optimizer, ShapeMismatchRejected) {
    Step s(OptimizerKind::adam, Matrix(2, 2));
    EXPECT_THROW(s.apply(Matrix(2, 3)), ShapeError);
    OptimizerState st;
    Matrix a(1, 1);
    Matrix* p[] = {&a};
    const Matrix* g[] = {&a, &a};
    EXPECT_THROW(optimizer_step(st, p, g), ShapeError);
}

TEST(Optimizer, KindNames) {
    EXPECT_EQ(optimizer_kind_from_string("rmsprop"), OptimizerKind::rmsprop);
    EXPECT_EQ(to_string(OptimizerKind::adam), "adam");
    EXPECT_THROW(optimizer_kind_from_string("sgd"), ConfigError);
}

TEST(EarlyStopping, StopsAfterPatienceAndRemembersBest) {
    EarlyStopping es(10);
    EXPECT_TRUE(es.update(1.0).improved);
    EXPECT_TRUE(es.update(0.9).improved);
    for (int i = 1; i <= 10; ++i) {
        const auto u = es.update(i % 2 ? 0.9 : 1.3);
        EXPECT_FALSE(u.improved);
        EXPECT_EQ(u.stop, i == 10) << i;
    }
    EXPECT_EQ(es.best_epoch(), 1u);
    EXPECT_EQ(es.best(), 0.9);
}

TEST(EarlyStopping, DecreasingNeverStops) {
    EarlyStopping es(2);
    for (int i = 0; i < 100; ++i) EXPECT_FALSE(es.update(1.0 / (i + 1)).stop);
}

TEST(EarlyStopping, LateImprovementResetsCounter) {
    EarlyStopping es(10);
    es.update(1.0);
    for (int i = 0; i < 9; ++i) EXPECT_FALSE(es.update(2.0).stop);
    EXPECT_TRUE(es.update(0.5).improved);
    for (int i = 0; i < 9; ++i) EXPECT_FALSE(es.update(2.0).stop);
    EXPECT_TRUE(es.update(2.0).stop);
    EXPECT_EQ(es.best_epoch(), 10u);
}

TEST(EarlyStopping, RandomSimulationMatchesCounter) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t patience = 1 + static_cast<std::size_t>(trial % 7);
        EarlyStopping es(patience);
        double best = INFINITY;
        std::size_t best_epoch = 0, wait = 0;
        for (std::size_t e = 0; e < 60; ++e) {
            const double v = u(rng);
            const auto r = es.update(v);
            if (v < best) {
                best = v;
                best_epoch = e;
                wait = 0;
            } else {
                ++wait;
            }
            EXPECT_EQ(r.stop, wait >= patience);
            EXPECT_EQ(es.best_epoch(), best_epoch);
            if (r.stop) break;
        }
        EXPECT_LE(es.best(), best);
    }
}

TEST(Plateau, ReducesAfterSixFlatEpochs) {
    PlateauScheduler p(6, 0.1, 1e-6);
    double lr = 1e-3;
    lr = p.update(1.0, lr);
    for (int i = 1; i <= 5; ++i) {
        lr = p.update(1.0, lr);
        EXPECT_EQ(lr, 1e-3);
    }
    lr = p.update(1.0, lr);
    EXPECT_NEAR(lr, 1e-4, 1e-18);
    // The counter restarts after a reduction.
    for (int i = 1; i <= 5; ++i) lr = p.update(1.0, lr);
    EXPECT_NEAR(lr, 1e-4, 1e-18);
}

TEST(Plateau, FloorsAtMinimum) {
    PlateauScheduler p(1, 0.1, 1e-6);
    double lr = 1e-6;
    p.update(1.0, lr);
    EXPECT_EQ(p.update(1.0, lr), 1e-6);
}

TEST(Plateau, ImprovementAtFifthEpochPreventsReduction) {
    PlateauScheduler p(6, 0.1, 1e-6);
    double lr = 1e-3;
    lr = p.update(1.0, lr);
    for (int i = 1; i <= 4; ++i) lr = p.update(1.0, lr);
    lr = p.update(0.8, lr);
    for (int i = 1; i <= 5; ++i) lr = p.update(1.0, lr);
    EXPECT_EQ(lr, 1e-3);
}

TEST(Schedules, RejectBadSettings) {
    EXPECT_THROW(EarlyStopping(0), ConfigError);
    EXPECT_THROW(PlateauScheduler(6, 1.0, 0.0), ConfigError);
    EXPECT_THROW(PlateauScheduler(0, 0.5, 0.0), ConfigError);
}
