// SPDX-License-Identifier: Apache-2.0
#include "wardseq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "seeding.hpp"
#include "wardseq/errors.hpp"

namespace wardseq {

namespace {

// Half-width of the central 50% of a standard normal.
constexpr double kQuartileZ = 0.6744897501960817;

std::string drift_name(Drift d) {
    switch (d) {
        case Drift::up: return "up";
        case Drift::down: return "down";
        case Drift::none: return "none";
    }
    return "none";
}

Drift drift_from_name(const std::string& s) {
    if (s == "up") return Drift::up;
    if (s == "down") return Drift::down;
    if (s == "none") return Drift::none;
    throw ConfigError("unknown drift '" + s + "' (expected up, down or none)");
}

double two_piece_normal(const SynthFeature& f, std::mt19937_64& rng) {
    const double z = std::normal_distribution<double>(0.0, 1.0)(rng);
    const double scale = z < 0.0 ? (f.median - f.q25) / kQuartileZ : (f.q75 - f.median) / kQuartileZ;
    return f.median + scale * z;
}

/// Values are stored at charting precision (two decimals).
double recorded(double v) { return std::round(v * 100.0) / 100.0; }

std::string padded(const char* prefix, std::size_t v, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, v);
    return buf;
}

}  // namespace

std::vector<SynthFeature> SynthConfig::default_features() {
    return {
        {"age", 61.0, 47.0, 71.0, 18.0, true, Drift::none},
        {"diastolic_pressure", 67.0, 59.0, 76.0, 0.0, false, Drift::down},
        {"mean_arterial_pressure", 87.0, 77.67, 97.0, 0.0, false, Drift::down},
        {"pulse_pressure", 57.0, 47.0, 70.0, 0.0, false, Drift::up},
        {"urine", 279.0, 150.0, 400.0, 0.0, false, Drift::down},
        {"weight", 177.91, 146.61, 214.29, 0.0, true, Drift::none},
        {"max_oxygen_supplementation_24h", 1.0, 0.0, 2.0, 0.0, false, Drift::up},
        {"systolic_pressure", 125.0, 111.0, 140.0, 0.0, false, Drift::down},
    };
}

void SynthConfig::validate() const {
    if (n_patients == 0) throw ConfigError("n_patients must be >= 1");
    if (!(extra_encounters_mean >= 0.0)) throw ConfigError("extra_encounters_mean must be >= 0");
    if (!std::isfinite(length_log_mean)) throw ConfigError("length_log_mean must be finite");
    if (!(length_log_sd >= 0.0)) throw ConfigError("length_log_sd must be >= 0");
    if (!(interval_mean_hours > 0.0)) throw ConfigError("interval_mean_hours must be > 0");
    if (!(event_rate > 0.0 && event_rate < 1.0)) throw ConfigError("event_rate must be in (0, 1)");
    if (!(risk_window_hours > 0.0)) throw ConfigError("risk_window_hours must be > 0");
    if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw ConfigError("missing_rate must be in [0, 1)");
    if (!(female_fraction >= 0.0 && female_fraction <= 1.0)) throw ConfigError("female_fraction must be in [0, 1]");
    if (!(signal_strength >= 0.0)) throw ConfigError("signal_strength must be >= 0");
    if (features.empty()) throw ConfigError("synthetic config needs at least one feature");
    for (const auto& f : features) {
        if (f.name.empty()) throw ConfigError("synthetic feature with empty name");
        if (!(f.q25 <= f.median && f.median <= f.q75 && f.q25 < f.q75)) {
            throw ConfigError("feature '" + f.name + "': need q25 <= median <= q75 and q25 < q75");
        }
    }
    schema().validate();
}

FeatureSchema SynthConfig::schema() const {
    FeatureSchema s;
    for (const auto& f : features) s.features.push_back({f.name, FeatureKind::continuous, {}});
    s.features.push_back({"gender", FeatureKind::categorical, {"F", "M"}});
    return s;
}

nlohmann::json to_json(const SynthConfig& cfg) {
    nlohmann::json feats = nlohmann::json::array();
    for (const auto& f : cfg.features) {
        feats.push_back({{"name", f.name},
                         {"median", f.median},
                         {"q25", f.q25},
                         {"q75", f.q75},
                         {"lower", f.lower},
                         {"per_patient", f.per_patient},
                         {"drift", drift_name(f.drift)}});
    }
    return {
        {"n_patients", cfg.n_patients},
        {"extra_encounters_mean", cfg.extra_encounters_mean},
        {"length_log_mean", cfg.length_log_mean},
        {"length_log_sd", cfg.length_log_sd},
        {"interval_mean_hours", cfg.interval_mean_hours},
        {"event_rate", cfg.event_rate},
        {"risk_window_hours", cfg.risk_window_hours},
        {"missing_rate", cfg.missing_rate},
        {"female_fraction", cfg.female_fraction},
        {"signal_strength", cfg.signal_strength},
        {"features", feats},
        {"seed", cfg.seed},
    };
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
    SynthConfig c;
    try {
        c.n_patients = j.value("n_patients", c.n_patients);
        c.extra_encounters_mean = j.value("extra_encounters_mean", c.extra_encounters_mean);
        c.length_log_mean = j.value("length_log_mean", c.length_log_mean);
        c.length_log_sd = j.value("length_log_sd", c.length_log_sd);
        c.interval_mean_hours = j.value("interval_mean_hours", c.interval_mean_hours);
        c.event_rate = j.value("event_rate", c.event_rate);
        c.risk_window_hours = j.value("risk_window_hours", c.risk_window_hours);
        c.missing_rate = j.value("missing_rate", c.missing_rate);
        c.female_fraction = j.value("female_fraction", c.female_fraction);
        c.signal_strength = j.value("signal_strength", c.signal_strength);
        c.seed = j.value("seed", c.seed);
        if (j.contains("features")) {
            c.features.clear();
            for (const auto& f : j.at("features")) {
                SynthFeature s;
                s.name = f.at("name").get<std::string>();
                s.median = f.at("median").get<double>();
                s.q25 = f.at("q25").get<double>();
                s.q75 = f.at("q75").get<double>();
                s.lower = f.value("lower", std::numeric_limits<double>::lowest());
                s.per_patient = f.value("per_patient", false);
                s.drift = drift_from_name(f.value("drift", std::string("none")));
                c.features.push_back(std::move(s));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synthetic config: ") + e.what());
    }
    c.validate();
    return c;
}

GranularTable generate(const SynthConfig& cfg) {
    cfg.validate();
    GranularTable table;
    table.schema = cfg.schema();
    const std::size_t F = cfg.features.size();

    std::vector<double> robust_sd(F);
    for (std::size_t k = 0; k < F; ++k) robust_sd[k] = (cfg.features[k].q75 - cfg.features[k].q25) / (2.0 * kQuartileZ);

    for (std::size_t p = 0; p < cfg.n_patients; ++p) {
        std::mt19937_64 rng(detail::derive_seed(cfg.seed, p));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const std::string patient_id = padded("P", p, 7);
        const std::string gender = unit(rng) < cfg.female_fraction ? "F" : "M";

        std::vector<double> fixed(F, 0.0);
        for (std::size_t k = 0; k < F; ++k)
            if (cfg.features[k].per_patient)
                fixed[k] = recorded(std::max(two_piece_normal(cfg.features[k], rng), cfg.features[k].lower));

        const std::size_t n_enc = 1 + std::poisson_distribution<std::size_t>(cfg.extra_encounters_mean)(rng);
        for (std::size_t e = 0; e < n_enc; ++e) {
            Encounter enc;
            enc.patient_id = patient_id;
            enc.encounter_id = patient_id + padded("-E", e + 1, 2);

            const double raw_len = std::lognormal_distribution<double>(cfg.length_log_mean, cfg.length_log_sd)(rng);
            const auto length = static_cast<std::size_t>(std::clamp(std::round(raw_len), 1.0, 1000.0));
            std::vector<double> times(length, 0.0);
            std::exponential_distribution<double> gap(1.0 / cfg.interval_mean_hours);
            for (std::size_t i = 1; i < length; ++i) times[i] = times[i - 1] + gap(rng);
            for (double& t : times) t = recorded(t);

            const bool positive = unit(rng) < cfg.event_rate;
            double event_time = std::numeric_limits<double>::infinity();
            if (positive) {
                const double stay = times.back();
                event_time = stay / 2.0 + unit(rng) * stay / 2.0;
            }

            for (std::size_t i = 0; i < length; ++i) {
                if (times[i] > event_time) break;  // nothing is recorded after the event
                const double lead = event_time - times[i];
                const bool at_risk = lead <= cfg.risk_window_hours;
                const double ramp = at_risk ? 0.5 + 0.5 * (1.0 - lead / cfg.risk_window_hours) : 0.0;

                Observation obs;
                obs.time = times[i];
                obs.target = at_risk ? 1 : 0;
                obs.continuous.assign(F, 0.0);
                for (std::size_t k = 0; k < F; ++k) {
                    const auto& f = cfg.features[k];
                    if (f.per_patient) {
                        obs.continuous[k] = fixed[k];
                        continue;
                    }
                    double v = two_piece_normal(f, rng);
                    const bool missing = unit(rng) < cfg.missing_rate;
                    v += cfg.signal_strength * static_cast<double>(static_cast<int>(f.drift)) * ramp * robust_sd[k];
                    obs.continuous[k] = missing ? std::numeric_limits<double>::quiet_NaN() : recorded(std::max(v, f.lower));
                }
                obs.categorical = {gender};
                enc.rows.push_back(std::move(obs));
            }
            table.encounters.push_back(std::move(enc));
        }
    }
    return table;
}

std::vector<QuantileSpec> quantile_specs(const std::vector<SynthFeature>& features) {
    std::vector<QuantileSpec> out;
    for (const auto& f : features) out.push_back({f.name, f.median, f.q25, f.q75});
    return out;
}

double sorted_quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<QuantileRow> quantile_check(const Table& table, const std::vector<QuantileSpec>& specs, double tolerance) {
    const auto names = table.schema.continuous_names();
    std::vector<QuantileRow> report;
    for (const auto& spec : specs) {
        QuantileRow row;
        row.name = spec.name;
        row.target_median = spec.median;
        row.target_q25 = spec.q25;
        row.target_q75 = spec.q75;
        const auto it = std::find(names.begin(), names.end(), spec.name);
        if (it == names.end()) {
            report.push_back(row);
            continue;
        }
        const auto col = static_cast<std::size_t>(it - names.begin());
        std::vector<double> values;
        for (const auto& enc : table.encounters)
            for (const auto& obs : enc.rows)
                if (!std::isnan(obs.continuous[col])) values.push_back(obs.continuous[col]);
        row.n = values.size();
        if (!values.empty()) {
            std::sort(values.begin(), values.end());
            row.median = sorted_quantile(values, 0.5);
            row.q25 = sorted_quantile(values, 0.25);
            row.q75 = sorted_quantile(values, 0.75);
            const double slack = tolerance * (spec.q75 - spec.q25);
            row.pass = std::abs(row.median - spec.median) <= slack && std::abs(row.q25 - spec.q25) <= slack &&
                       std::abs(row.q75 - spec.q75) <= slack;
        }
        report.push_back(row);
    }
    return report;
}

nlohmann::json to_json(const std::vector<QuantileRow>& report) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : report) {
        out.push_back({{"name", r.name},
                       {"n", r.n},
                       {"median", r.median},
                       {"q25", r.q25},
                       {"q75", r.q75},
                       {"target", {{"median", r.target_median}, {"q25", r.target_q25}, {"q75", r.target_q75}}},
                       {"pass", r.pass}});
    }
    return out;
}

}  // namespace wardseq
