// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace wardseq {

/// Inverse-frequency weights: w_c = n_total / (2 * n_c).
struct ClassWeights {
    double w0 = 1.0;
    double w1 = 1.0;
};

ClassWeights class_weights_from_counts(std::uint64_t n0, std::uint64_t n1);
/// Same formulas expressed through the positive fraction q = n1 / n_total.
ClassWeights class_weights_from_fraction(double positive_fraction);
/// Throws ConfigError when either class is absent.
ClassWeights compute_class_weights(std::span<const int> labels);

/// Probabilities are clamped to [kProbabilityClamp, 1 - kProbabilityClamp]
/// before taking logs, which bounds the per-sample loss by ~27.6 * weight.
inline constexpr double kProbabilityClamp = 1e-12;

struct LossValue {
    double loss = 0.0;
    std::vector<double> grad;  // d(mean loss)/dp_i
};

/// mean_i -[w1 y log p + w0 (1 - y) log(1 - p)]
LossValue weighted_bce(std::span<const double> p, std::span<const int> y, ClassWeights w = {});

struct FocalConfig {
    double gamma = 2.0;
    bool weighted = false;
    ClassWeights weights;
};

/// mean_i -[(1 - p)^g y log p + p^g (1 - y) log(1 - p)], each class term
/// optionally multiplied by its weight.
LossValue focal_loss(std::span<const double> p, std::span<const int> y, const FocalConfig& cfg);

enum class LossKind { bce, focal };

std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

struct LossConfig {
    LossKind kind = LossKind::bce;
    ClassWeights weights;  // {1, 1} = unweighted
    double gamma = 2.0;    // focal only
};

LossValue evaluate_loss(const LossConfig& cfg, std::span<const double> p, std::span<const int> y);

}  // namespace wardseq
