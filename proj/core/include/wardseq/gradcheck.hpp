// SPDX-License-Identifier: Apache-2.0
//
// Central-difference verification of model_backward.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wardseq/losses.hpp"
#include "wardseq/seqnet.hpp"

namespace wardseq {

struct GradCheckOptions {
    double step = 1e-5;
    /// Denominator floor of the relative error, so entries whose true
    /// gradient is ~0 are judged on their absolute error instead. Central
    /// differences of an O(1) loss carry ~1e-11 of rounding noise at step 1e-5,
    /// so structurally zero gradients (e.g. key biases) need a floor well above that.
    double floor = 1e-6;
    /// 0 checks every entry; otherwise at most this many per tensor (evenly spaced).
    std::size_t max_entries_per_tensor = 0;
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t entries_checked = 0;
};

/// |analytic - numeric| / max(|analytic|, |numeric|, floor)
double relative_error(double analytic, double numeric, double floor) noexcept;

/// Compares model_backward against (L(theta + h) - L(theta - h)) / 2h for every
/// parameter entry, with the model in evaluation mode.
GradCheckResult grad_check(const ModelParams& model, const Tensor3& x, const MaskMatrix& mask,
                           const std::vector<int>& labels, const LossConfig& loss,
                           const GradCheckOptions& opts = {});

/// The standard small problems: a 2-block LSTM stack with H = 8, or a 1-block
/// encoder with 2 heads, on a random left-padded batch with both classes.
struct GradCheckCase {
    ModelParams model;
    Tensor3 x;
    MaskMatrix mask;
    std::vector<int> labels;
    LossConfig loss;
};

GradCheckCase make_gradcheck_case(Architecture arch, std::uint64_t seed);

}  // namespace wardseq
