// SPDX-License-Identifier: Apache-2.0
//
// Adaptive first-order optimizers plus the two validation-driven schedules
// (early stopping and learning-rate reduction on plateau).
#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wardseq/tensor.hpp"

namespace wardseq {

enum class OptimizerKind { rmsprop, adam };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string& s);

struct OptimizerHyper {
    double lr = 1e-3;
    double rho = 0.9;  // rmsprop decay
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Per-parameter accumulators. `first` is the RMSProp squared-gradient
/// average or the Adam first moment; `second` is the Adam second moment.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    OptimizerHyper hyper;
    std::vector<Matrix> first;
    std::vector<Matrix> second;
    std::size_t steps = 0;
};

/// s <- rho s + (1 - rho) g^2;  theta <- theta - lr g / (sqrt(s) + eps)
void rmsprop_step(OptimizerState& state, std::span<Matrix* const> params, std::span<const Matrix* const> grads);

/// Bias-corrected Adam.
void adam_step(OptimizerState& state, std::span<Matrix* const> params, std::span<const Matrix* const> grads);

void optimizer_step(OptimizerState& state, std::span<Matrix* const> params, std::span<const Matrix* const> grads);

/// Stops after `patience` consecutive epochs without a strict improvement of
/// the best validation loss.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience = 10);

    struct Update {
        bool improved = false;
        bool stop = false;
    };

    Update update(double val_loss);

    double best() const noexcept { return best_; }
    /// 0-based index of the epoch that produced best().
    std::size_t best_epoch() const noexcept { return best_epoch_; }
    std::size_t epochs_seen() const noexcept { return seen_; }

private:
    std::size_t patience_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t best_epoch_ = 0;
    std::size_t wait_ = 0;
    std::size_t seen_ = 0;
};

/// After `patience` consecutive non-improving epochs: lr <- max(lr * factor, min_lr).
/// The counter resets on a reduction or an improvement.
class PlateauScheduler {
public:
    PlateauScheduler(std::size_t patience = 6, double factor = 0.1, double min_lr = 1e-6);

    /// Returns the learning rate to use from the next epoch on.
    double update(double val_loss, double lr);

private:
    std::size_t patience_;
    double factor_;
    double min_lr_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t wait_ = 0;
};

}  // namespace wardseq
