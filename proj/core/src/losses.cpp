// SPDX-License-Identifier: Apache-2.0
#include "wardseq/losses.hpp"

#include <algorithm>
#include <cmath>

#include "wardseq/errors.hpp"

namespace wardseq {

namespace {

void require_lengths(std::span<const double> p, std::span<const int> y) {
    if (p.size() != y.size()) {
        throw ShapeError("loss: " + std::to_string(p.size()) + " probabilities vs " + std::to_string(y.size()) +
                         " labels");
    }
}

double clamp_probability(double p) noexcept {
    return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

/// d clamp(p)/dp: 1 inside the clamp range, 0 where it saturates.
double clamp_slope(double p) noexcept {
    return (p > kProbabilityClamp && p < 1.0 - kProbabilityClamp) ? 1.0 : 0.0;
}

}  // namespace

ClassWeights class_weights_from_counts(std::uint64_t n0, std::uint64_t n1) {
    if (n0 == 0 || n1 == 0) {
        throw ConfigError("class weights are undefined with a single class (n0=" + std::to_string(n0) +
                          ", n1=" + std::to_string(n1) + ")");
    }
    const double total = static_cast<double>(n0 + n1);
    return {total / (static_cast<double>(n0) * 2.0), total / (static_cast<double>(n1) * 2.0)};
}

ClassWeights class_weights_from_fraction(double positive_fraction) {
    if (!(positive_fraction > 0.0 && positive_fraction < 1.0)) {
        throw ConfigError("positive fraction must be in (0, 1)");
    }
    return {1.0 / ((1.0 - positive_fraction) * 2.0), 1.0 / (positive_fraction * 2.0)};
}

ClassWeights compute_class_weights(std::span<const int> labels) {
    const auto n1 = static_cast<std::uint64_t>(std::count(labels.begin(), labels.end(), 1));
    return class_weights_from_counts(labels.size() - n1, n1);
}

LossValue weighted_bce(std::span<const double> p, std::span<const int> y, ClassWeights w) {
    require_lengths(p, y);
    LossValue out;
    out.grad.assign(p.size(), 0.0);
    if (p.empty()) return out;
    const double inv_n = 1.0 / static_cast<double>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = clamp_probability(p[i]);
        if (y[i] == 1) {
            out.loss -= w.w1 * std::log(q);
            out.grad[i] = -w.w1 / q * clamp_slope(p[i]) * inv_n;
        } else {
            out.loss -= w.w0 * std::log(1.0 - q);
            out.grad[i] = w.w0 / (1.0 - q) * clamp_slope(p[i]) * inv_n;
        }
    }
    out.loss *= inv_n;
    return out;
}

LossValue focal_loss(std::span<const double> p, std::span<const int> y, const FocalConfig& cfg) {
    require_lengths(p, y);
    if (!(cfg.gamma >= 0.0)) throw ConfigError("focal gamma must be >= 0");
    const double w0 = cfg.weighted ? cfg.weights.w0 : 1.0;
    const double w1 = cfg.weighted ? cfg.weights.w1 : 1.0;
    const double g = cfg.gamma;

    LossValue out;
    out.grad.assign(p.size(), 0.0);
    if (p.empty()) return out;
    const double inv_n = 1.0 / static_cast<double>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = clamp_probability(p[i]);
        double loss, dloss;
        if (y[i] == 1) {
            // -(1-q)^g log q
            const double mod = std::pow(1.0 - q, g);
            const double lg = std::log(q);
            loss = -mod * lg;
            const double dmod = g == 0.0 ? 0.0 : -g * std::pow(1.0 - q, g - 1.0);
            dloss = -(dmod * lg + mod / q);
            loss *= w1;
            dloss *= w1;
        } else {
            // -q^g log(1-q)
            const double mod = std::pow(q, g);
            const double lg = std::log(1.0 - q);
            loss = -mod * lg;
            const double dmod = g == 0.0 ? 0.0 : g * std::pow(q, g - 1.0);
            dloss = -(dmod * lg - mod / (1.0 - q));
            loss *= w0;
            dloss *= w0;
        }
        out.loss += loss;
        out.grad[i] = dloss * clamp_slope(p[i]) * inv_n;
    }
    out.loss *= inv_n;
    return out;
}

std::string to_string(LossKind k) { return k == LossKind::bce ? "bce" : "focal"; }

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "bce") return LossKind::bce;
    if (s == "focal") return LossKind::focal;
    throw ConfigError("unknown loss '" + s + "' (expected bce or focal)");
}

LossValue evaluate_loss(const LossConfig& cfg, std::span<const double> p, std::span<const int> y) {
    if (cfg.kind == LossKind::bce) return weighted_bce(p, y, cfg.weights);
    return focal_loss(p, y, FocalConfig{cfg.gamma, true, cfg.weights});
}

}  // namespace wardseq
