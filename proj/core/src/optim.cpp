// SPDX-License-Identifier: Apache-2.0
#include "wardseq/optim.hpp"

#include <algorithm>
#include <cmath>

#include "wardseq/errors.hpp"

namespace wardseq {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::rmsprop ? "rmsprop" : "adam"; }

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "rmsprop") return OptimizerKind::rmsprop;
    if (s == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + s + "' (expected rmsprop or adam)");
}

namespace {

void prepare(OptimizerState& state, std::span<Matrix* const> params, std::span<const Matrix* const> grads,
             bool need_second) {
    if (params.size() != grads.size()) {
        throw ShapeError("optimizer: " + std::to_string(params.size()) + " parameters vs " +
                         std::to_string(grads.size()) + " gradients");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->rows() != grads[i]->rows() || params[i]->cols() != grads[i]->cols()) {
            throw ShapeError("optimizer: parameter " + params[i]->shape_string() + " vs gradient " +
                             grads[i]->shape_string());
        }
    }
    if (state.first.empty()) {
        for (const Matrix* p : params) state.first.emplace_back(p->rows(), p->cols());
        if (need_second)
            for (const Matrix* p : params) state.second.emplace_back(p->rows(), p->cols());
    }
    if (state.first.size() != params.size()) throw ShapeError("optimizer state does not match parameter list");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (state.first[i].size() != params[i]->size()) throw ShapeError("optimizer state shape mismatch");
    }
}

}  // namespace

void rmsprop_step(OptimizerState& state, std::span<Matrix* const> params, std::span<const Matrix* const> grads) {
    prepare(state, params, grads, false);
    const auto& h = state.hyper;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto theta = params[i]->values();
        const auto g = grads[i]->values();
        auto s = state.first[i].values();
        for (std::size_t k = 0; k < theta.size(); ++k) {
            s[k] = h.rho * s[k] + (1.0 - h.rho) * g[k] * g[k];
            theta[k] -= h.lr * g[k] / (std::sqrt(s[k]) + h.epsilon);
        }
    }
    ++state.steps;
}

void adam_step(OptimizerState& state, std::span<Matrix* const> params, std::span<const Matrix* const> grads) {
    prepare(state, params, grads, true);
    const auto& h = state.hyper;
    ++state.steps;
    const double t = static_cast<double>(state.steps);
    const double c1 = 1.0 - std::pow(h.beta1, t);
    const double c2 = 1.0 - std::pow(h.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto theta = params[i]->values();
        const auto g = grads[i]->values();
        auto m = state.first[i].values();
        auto v = state.second[i].values();
        for (std::size_t k = 0; k < theta.size(); ++k) {
            m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * g[k];
            v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * g[k] * g[k];
            const double m_hat = m[k] / c1;
            const double v_hat = v[k] / c2;
            theta[k] -= h.lr * m_hat / (std::sqrt(v_hat) + h.epsilon);
        }
    }
}

void optimizer_step(OptimizerState& state, std::span<Matrix* const> params, std::span<const Matrix* const> grads) {
    if (state.kind == OptimizerKind::rmsprop) rmsprop_step(state, params, grads);
    else adam_step(state, params, grads);
}

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience) {
    if (patience < 1) throw ConfigError("early-stopping patience must be >= 1");
}

EarlyStopping::Update EarlyStopping::update(double val_loss) {
    Update u;
    if (val_loss < best_) {
        best_ = val_loss;
        best_epoch_ = seen_;
        wait_ = 0;
        u.improved = true;
    } else {
        ++wait_;
        u.stop = wait_ >= patience_;
    }
    ++seen_;
    return u;
}

PlateauScheduler::PlateauScheduler(std::size_t patience, double factor, double min_lr)
    : patience_(patience), factor_(factor), min_lr_(min_lr) {
    if (patience < 1) throw ConfigError("plateau patience must be >= 1");
    if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("plateau factor must be in (0, 1)");
    if (!(min_lr >= 0.0)) throw ConfigError("min_lr must be >= 0");
}

double PlateauScheduler::update(double val_loss, double lr) {
    if (val_loss < best_) {
        best_ = val_loss;
        wait_ = 0;
        return lr;
    }
    if (++wait_ >= patience_) {
        wait_ = 0;
        return std::max(lr * factor_, min_lr_);
    }
    return lr;
}

}  // namespace wardseq
