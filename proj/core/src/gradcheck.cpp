// SPDX-License-Identifier: Apache-2.0
#include "wardseq/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "wardseq/errors.hpp"

namespace wardseq {

double relative_error(double analytic, double numeric, double floor) noexcept {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const ModelParams& model, const Tensor3& x, const MaskMatrix& mask,
                           const std::vector<int>& labels, const LossConfig& loss, const GradCheckOptions& opts) {
    if (labels.size() != x.batch()) throw ShapeError("grad_check: labels do not match batch");
    if (!(opts.step > 0.0)) throw ConfigError("grad_check: step must be > 0");

    ForwardCache cache;
    const auto p = model_forward(model, x, mask, false, nullptr, &cache);
    const LossValue lv = evaluate_loss(loss, p, labels);
    const ModelParams grads = model_backward(model, cache, lv.grad);

    ModelParams probe = model;
    auto probe_params = parameters(probe);
    const auto grad_params = parameters(grads);
    auto loss_at = [&]() {
        const auto q = model_forward(probe, x, mask, false, nullptr);
        return evaluate_loss(loss, q, labels).loss;
    };

    GradCheckResult r;
    for (std::size_t k = 0; k < probe_params.size(); ++k) {
        auto values = probe_params[k].value->values();
        const auto analytic = grad_params[k].value->values();
        std::size_t stride = 1;
        if (opts.max_entries_per_tensor > 0 && values.size() > opts.max_entries_per_tensor)
            stride = (values.size() + opts.max_entries_per_tensor - 1) / opts.max_entries_per_tensor;
        for (std::size_t i = 0; i < values.size(); i += stride) {
            const double saved = values[i];
            values[i] = saved + opts.step;
            const double up = loss_at();
            values[i] = saved - opts.step;
            const double down = loss_at();
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * opts.step);
            const double err = relative_error(analytic[i], numeric, opts.floor);
            ++r.entries_checked;
            if (err > r.max_relative_error || r.worst_parameter.empty()) {
                r.max_relative_error = err;
                r.worst_parameter = probe_params[k].name;
                r.worst_index = i;
                r.worst_analytic = analytic[i];
                r.worst_numeric = numeric;
            }
        }
    }
    return r;
}

GradCheckCase make_gradcheck_case(Architecture arch, std::uint64_t seed) {
    constexpr std::size_t B = 4, T = 6, F = 5;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    GradCheckCase c;
    ModelConfig cfg;
    if (arch == Architecture::lstm_stack) {
        cfg = ModelConfig::lstm(F, {LstmBlockConfig{8, true, 0.0}, LstmBlockConfig{8, true, 0.0}});
    } else {
        cfg = ModelConfig::transformer(F, 1, 2, 3, 7, 0.0);
    }
    cfg.init_seed = seed;
    c.model = init_model(cfg);
    // Move every parameter away from its structured initial value (unit
    // gains, zero biases) so each path carries a non-trivial gradient.
    for (auto& pv : parameters(c.model))
        for (double& v : pv.value->values()) v += 0.1 * normal(rng);

    c.x = Tensor3(B, T, F);
    c.mask = MaskMatrix(B, T);
    const std::size_t lengths[B] = {T, 3, 1, 5};
    for (std::size_t b = 0; b < B; ++b) {
        c.mask.set_valid_suffix(b, lengths[b]);
        for (std::size_t t = T - lengths[b]; t < T; ++t)
            for (std::size_t f = 0; f < F; ++f) c.x(b, t, f) = normal(rng);
    }
    c.labels = {1, 0, 0, 1};
    c.loss.kind = LossKind::bce;
    c.loss.weights = {0.7, 2.5};
    return c;
}

}  // namespace wardseq
