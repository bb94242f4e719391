// SPDX-License-Identifier: Apache-2.0
//
// Seeded generator of long-format ward records with a learnable
// deterioration signal, plus a quantile comparison against target summaries.
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wardseq/dataset.hpp"

namespace wardseq {

/// Signed drift direction of a feature as the event approaches.
enum class Drift { none = 0, up = 1, down = -1 };

/// Marginal target of one continuous feature: drawn from a two-piece normal
/// whose median and quartiles equal the given values, then clamped below at
/// `lower`.
struct SynthFeature {
    std::string name;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    double lower = std::numeric_limits<double>::lowest();
    bool per_patient = false;  // drawn once per patient (age, weight)
    Drift drift = Drift::none;
};

struct SynthConfig {
    std::size_t n_patients = 10000;
    double extra_encounters_mean = 0.7;  // encounters per patient = 1 + Poisson
    double length_log_mean = 2.89;       // observations per encounter ~ lognormal
    double length_log_sd = 1.0;
    double interval_mean_hours = 4.0;    // exponential gaps between observations
    double event_rate = 0.047;           // fraction of encounters with an event
    double risk_window_hours = 24.0;
    double missing_rate = 0.1;           // per time-varying value
    double female_fraction = 0.5;
    double signal_strength = 1.0;        // drift at the event, in robust SD units
    std::vector<SynthFeature> features = default_features();
    std::uint64_t seed = 0;

    /// Throws ConfigError on an event rate outside (0, 1), non-positive
    /// scales, an empty feature list or a feature with q25 > median > q75.
    void validate() const;
    FeatureSchema schema() const;

    static std::vector<SynthFeature> default_features();
};

nlohmann::json to_json(const SynthConfig& cfg);
/// Missing keys keep their defaults.
SynthConfig synth_config_from_json(const nlohmann::json& j);

/// Deterministic in `cfg` (including the seed). Patient p's records depend only
/// on (seed, p), so adding patients does not change earlier ones.
GranularTable generate(const SynthConfig& cfg);

struct QuantileSpec {
    std::string name;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
};

std::vector<QuantileSpec> quantile_specs(const std::vector<SynthFeature>& features);

struct QuantileRow {
    std::string name;
    double median = 0.0, q25 = 0.0, q75 = 0.0;                      // empirical
    double target_median = 0.0, target_q25 = 0.0, target_q75 = 0.0;
    std::size_t n = 0;
    bool pass = false;
};

/// Empirical median and quartiles (linear interpolation between order
/// statistics) of each named continuous column, over present values. A
/// feature passes when all three statistics lie within `tolerance` x (target
/// q75 - q25) of their targets. Unknown names and empty columns fail.
std::vector<QuantileRow> quantile_check(const Table& table, const std::vector<QuantileSpec>& specs,
                                        double tolerance = 0.1);

nlohmann::json to_json(const std::vector<QuantileRow>& report);

/// Quantile at probability q of sorted data, linear between order statistics.
double sorted_quantile(const std::vector<double>& sorted, double q);

}  // namespace wardseq
