// SPDX-License-Identifier: Apache-2.0
#include "wardseq/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <string_view>
#include <unordered_map>

#include "wardseq/errors.hpp"
#include "format.hpp"

namespace wardseq {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

// ---------------------------------------------------------------------------
// Schema

std::size_t FeatureSchema::continuous_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(features.begin(), features.end(), [](const auto& f) {
        return f.kind == FeatureKind::continuous;
    }));
}

std::size_t FeatureSchema::categorical_count() const noexcept {
    return features.size() - continuous_count();
}

std::size_t FeatureSchema::encoded_width() const noexcept {
    std::size_t w = 0;
    for (const auto& f : features) w += f.kind == FeatureKind::continuous ? 1 : f.categories.size();
    return w;
}

std::vector<std::string> FeatureSchema::continuous_names() const {
    std::vector<std::string> names;
    for (const auto& f : features)
        if (f.kind == FeatureKind::continuous) names.push_back(f.name);
    return names;
}

std::vector<std::string> FeatureSchema::encoded_names() const {
    std::vector<std::string> names = continuous_names();
    for (const auto& f : features) {
        if (f.kind != FeatureKind::categorical) continue;
        for (const auto& c : f.categories) names.push_back(f.name + "=" + c);
    }
    return names;
}

void FeatureSchema::validate() const {
    std::set<std::string> seen{"patient_id", "encounter_id", "time_hours", target};
    if (target.empty()) throw ConfigError("schema target column name is empty");
    for (const auto& f : features) {
        if (f.name.empty()) throw ConfigError("schema feature with empty name");
        if (!seen.insert(f.name).second) throw ConfigError("duplicate schema column '" + f.name + "'");
        if (f.kind == FeatureKind::categorical) {
            std::set<std::string> cats(f.categories.begin(), f.categories.end());
            if (cats.size() != f.categories.size())
                throw ConfigError("duplicate category in feature '" + f.name + "'");
        }
    }
}

FeatureSchema FeatureSchema::default_schema() {
    FeatureSchema s;
    for (const char* name : {"age", "diastolic_pressure", "mean_arterial_pressure", "pulse_pressure", "urine",
                             "weight", "max_oxygen_supplementation_24h", "systolic_pressure"}) {
        s.features.push_back({name, FeatureKind::continuous, {}});
    }
    s.features.push_back({"gender", FeatureKind::categorical, {"F", "M"}});
    return s;
}

FeatureSchema FeatureSchema::encoded(const std::vector<std::string>& names) {
    FeatureSchema s;
    for (const auto& n : names) s.features.push_back({n, FeatureKind::continuous, {}});
    return s;
}

// ---------------------------------------------------------------------------
// Table

std::size_t Table::row_count() const noexcept {
    std::size_t n = 0;
    for (const auto& e : encounters) n += e.rows.size();
    return n;
}

std::size_t Table::patient_count() const {
    std::set<std::string_view> ids;
    for (const auto& e : encounters) ids.insert(e.patient_id);
    return ids.size();
}

Table parse_csv(std::istream& in, const FeatureSchema& schema) {
    schema.validate();
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty input: header row missing");

    const auto header = split_fields(line);
    std::unordered_map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header.size(); ++i) column.emplace(std::string(header[i]), i);

    auto require = [&](const std::string& name) {
        const auto it = column.find(name);
        if (it == column.end()) throw SchemaError("missing column '" + name + "'");
        return it->second;
    };
    const std::size_t patient_col = require("patient_id");
    const std::size_t encounter_col = require("encounter_id");
    const std::size_t time_col = require("time_hours");
    std::vector<std::size_t> cont_cols;
    std::vector<std::size_t> cat_cols;
    for (const auto& f : schema.features) {
        (f.kind == FeatureKind::continuous ? cont_cols : cat_cols).push_back(require(f.name));
    }
    const std::size_t target_col = require(schema.target);

    std::map<std::string, Encounter> grouped;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() < header.size()) {
            throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                          std::to_string(fields.size()));
        }
        Observation obs;
        if (!parse_double(fields[time_col], obs.time) || !std::isfinite(obs.time) || obs.time < 0.0) {
            throw ParseError(line_no, "bad time_hours '" + std::string(fields[time_col]) + "'");
        }
        obs.continuous.reserve(cont_cols.size());
        for (std::size_t c : cont_cols) {
            double v = kMissing;
            if (!fields[c].empty() && !parse_double(fields[c], v)) {
                throw ParseError(line_no, "unparseable number '" + std::string(fields[c]) + "' in column '" +
                                              std::string(header[c]) + "'");
            }
            obs.continuous.push_back(v);
        }
        for (std::size_t c : cat_cols) obs.categorical.emplace_back(fields[c]);
        double target = 0.0;
        if (!parse_double(fields[target_col], target) || (target != 0.0 && target != 1.0)) {
            throw ParseError(line_no, "target must be 0 or 1, found '" + std::string(fields[target_col]) + "'");
        }
        obs.target = static_cast<int>(target);

        const std::string patient(fields[patient_col]);
        const std::string encounter(fields[encounter_col]);
        if (patient.empty() || encounter.empty()) throw ParseError(line_no, "empty patient_id or encounter_id");
        auto [it, inserted] = grouped.try_emplace(encounter);
        if (inserted) {
            it->second.patient_id = patient;
            it->second.encounter_id = encounter;
        } else if (it->second.patient_id != patient) {
            throw ParseError(line_no, "encounter '" + encounter + "' belongs to patients '" +
                                          it->second.patient_id + "' and '" + patient + "'");
        }
        it->second.rows.push_back(std::move(obs));
    }

    Table table;
    table.schema = schema;
    table.encounters.reserve(grouped.size());
    for (auto& [id, enc] : grouped) {
        std::stable_sort(enc.rows.begin(), enc.rows.end(),
                         [](const Observation& a, const Observation& b) { return a.time < b.time; });
        table.encounters.push_back(std::move(enc));
    }
    return table;
}

void write_csv(std::ostream& out, const Table& table) {
    out << "patient_id,encounter_id,time_hours";
    for (const auto& f : table.schema.features) out << ',' << f.name;
    out << ',' << table.schema.target << '\n';

    std::string buf;
    for (const auto& enc : table.encounters) {
        for (const auto& row : enc.rows) {
            buf.clear();
            buf += enc.patient_id;
            buf += ',';
            buf += enc.encounter_id;
            buf += ',';
            append_number(buf, row.time);
            std::size_t ci = 0;
            std::size_t ki = 0;
            for (const auto& f : table.schema.features) {
                buf += ',';
                if (f.kind == FeatureKind::continuous) {
                    const double v = row.continuous[ci++];
                    if (!std::isnan(v)) append_number(buf, v);
                } else {
                    buf += row.categorical[ki++];
                }
            }
            buf += ',';
            buf += row.target ? '1' : '0';
            buf += '\n';
            out << buf;
        }
    }
}

WindowedTable windowize(const GranularTable& table, double window_hours) {
    if (!(window_hours > 0.0)) throw ConfigError("window_hours must be > 0");
    const std::size_t n_cont = table.schema.continuous_count();
    const std::size_t n_cat = table.schema.categorical_count();

    WindowedTable out;
    out.schema = table.schema;
    out.encounters.reserve(table.encounters.size());
    for (const auto& enc : table.encounters) {
        if (enc.rows.empty()) continue;
        const auto n_windows = static_cast<std::size_t>(std::floor(enc.rows.back().time / window_hours)) + 1;

        std::vector<Observation> windows(n_windows);
        std::vector<double> sums(n_windows * n_cont, 0.0);
        std::vector<std::size_t> counts(n_windows * n_cont, 0);
        for (std::size_t k = 0; k < n_windows; ++k) {
            windows[k].time = static_cast<double>(k) * window_hours;
            windows[k].categorical.assign(n_cat, std::string());
        }
        for (const auto& row : enc.rows) {
            const auto k = std::min(n_windows - 1, static_cast<std::size_t>(std::floor(row.time / window_hours)));
            for (std::size_t c = 0; c < n_cont; ++c) {
                if (std::isnan(row.continuous[c])) continue;
                sums[k * n_cont + c] += row.continuous[c];
                ++counts[k * n_cont + c];
            }
            for (std::size_t c = 0; c < n_cat; ++c) {
                if (!row.categorical[c].empty()) windows[k].categorical[c] = row.categorical[c];
            }
            windows[k].target = std::max(windows[k].target, row.target);
        }
        for (std::size_t k = 0; k < n_windows; ++k) {
            windows[k].continuous.resize(n_cont);
            for (std::size_t c = 0; c < n_cont; ++c) {
                const std::size_t n = counts[k * n_cont + c];
                windows[k].continuous[c] = n == 0 ? kMissing : sums[k * n_cont + c] / static_cast<double>(n);
            }
        }
        out.encounters.push_back({enc.patient_id, enc.encounter_id, std::move(windows)});
    }
    return out;
}

GranularTable add_time_diff(const GranularTable& table) {
    GranularTable out = table;
    out.schema.features.push_back({"time_diff", FeatureKind::continuous, {}});
    out.schema.validate();
    for (auto& enc : out.encounters) {
        double prev = enc.rows.empty() ? 0.0 : enc.rows.front().time;
        for (auto& row : enc.rows) {
            row.continuous.push_back(row.time - prev);
            prev = row.time;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Standardization

std::vector<std::string> StandardizationParams::flagged_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < names.size(); ++i)
        if (flagged[i]) out.push_back(names[i]);
    return out;
}

double StandardizationParams::standardize(std::size_t i, double x) const noexcept {
    if (std::isnan(x)) return 0.0;
    if (flagged[i]) return std::isnan(mean[i]) ? 0.0 : x - mean[i];
    return (x - mean[i]) / stddev[i];
}

double StandardizationParams::destandardize(std::size_t i, double z) const noexcept {
    if (flagged[i]) return std::isnan(mean[i]) ? z : z + mean[i];
    return z * stddev[i] + mean[i];
}

StandardizationParams fit_standardizer(const Table& train) {
    if (train.row_count() == 0) throw Error("cannot fit standardizer on an empty table");
    const std::size_t n_cont = train.schema.continuous_count();
    StandardizationParams p;
    p.names = train.schema.continuous_names();
    p.mean.assign(n_cont, 0.0);
    p.stddev.assign(n_cont, 0.0);
    p.flagged.assign(n_cont, false);

    std::vector<std::size_t> counts(n_cont, 0);
    for (const auto& enc : train.encounters)
        for (const auto& row : enc.rows)
            for (std::size_t c = 0; c < n_cont; ++c) {
                if (std::isnan(row.continuous[c])) continue;
                p.mean[c] += row.continuous[c];
                ++counts[c];
            }
    for (std::size_t c = 0; c < n_cont; ++c) {
        p.mean[c] = counts[c] == 0 ? kMissing : p.mean[c] / static_cast<double>(counts[c]);
    }
    std::vector<double> sq(n_cont, 0.0);
    for (const auto& enc : train.encounters)
        for (const auto& row : enc.rows)
            for (std::size_t c = 0; c < n_cont; ++c) {
                if (std::isnan(row.continuous[c])) continue;
                const double d = row.continuous[c] - p.mean[c];
                sq[c] += d * d;
            }
    for (std::size_t c = 0; c < n_cont; ++c) {
        p.stddev[c] = counts[c] == 0 ? 0.0 : std::sqrt(sq[c] / static_cast<double>(counts[c]));
        p.flagged[c] = !(p.stddev[c] > 0.0);
    }
    return p;
}

Table apply_standardizer(const Table& table, const StandardizationParams& params) {
    if (params.names != table.schema.continuous_names()) {
        throw SchemaError("standardization parameters do not match the table's continuous features");
    }
    Table out = table;
    for (auto& enc : out.encounters)
        for (auto& row : enc.rows)
            for (std::size_t c = 0; c < row.continuous.size(); ++c)
                row.continuous[c] = params.standardize(c, row.continuous[c]);
    return out;
}

// ---------------------------------------------------------------------------
// Encoding

FeatureSchema fit_categories(const Table& train) {
    FeatureSchema schema = train.schema;
    std::size_t ki = 0;
    for (auto& f : schema.features) {
        if (f.kind != FeatureKind::categorical) continue;
        if (f.categories.empty()) {
            std::set<std::string> seen;
            for (const auto& enc : train.encounters)
                for (const auto& row : enc.rows)
                    if (!row.categorical[ki].empty()) seen.insert(row.categorical[ki]);
            f.categories.assign(seen.begin(), seen.end());
        }
        ++ki;
    }
    return schema;
}

std::vector<EncounterSequence> one_hot(const Table& table, const FeatureSchema& schema) {
    if (table.schema.continuous_names() != schema.continuous_names() ||
        table.schema.categorical_count() != schema.categorical_count()) {
        throw SchemaError("one_hot schema does not match the table's columns");
    }
    const std::size_t n_cont = schema.continuous_count();
    const std::size_t width = schema.encoded_width();

    std::vector<std::unordered_map<std::string, std::size_t>> lookup;
    std::vector<std::size_t> offset;
    std::size_t next = n_cont;
    for (const auto& f : schema.features) {
        if (f.kind != FeatureKind::categorical) continue;
        auto& m = lookup.emplace_back();
        for (std::size_t i = 0; i < f.categories.size(); ++i) m.emplace(f.categories[i], i);
        offset.push_back(next);
        next += f.categories.size();
    }

    std::vector<EncounterSequence> out;
    out.reserve(table.encounters.size());
    for (const auto& enc : table.encounters) {
        if (enc.rows.empty()) continue;
        Matrix x(enc.rows.size(), width);
        std::vector<int> targets;
        std::vector<double> times;
        for (std::size_t r = 0; r < enc.rows.size(); ++r) {
            const auto& row = enc.rows[r];
            for (std::size_t c = 0; c < n_cont; ++c) {
                x(r, c) = std::isnan(row.continuous[c]) ? 0.0 : row.continuous[c];
            }
            for (std::size_t k = 0; k < lookup.size(); ++k) {
                const auto it = lookup[k].find(row.categorical[k]);
                if (it != lookup[k].end()) x(r, offset[k] + it->second) = 1.0;
            }
            targets.push_back(row.target);
            times.push_back(row.time);
        }
        out.push_back(make_sequence(enc.encounter_id, std::move(x), std::move(targets), enc.patient_id,
                                    std::move(times)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Splits

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    return "?";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "validation") return Split::validation;
    if (s == "test") return Split::test;
    throw ConfigError("unknown split '" + s + "' (expected train, validation or test)");
}

std::size_t SplitAssignment::count(Split s) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(patients.begin(), patients.end(), [s](const auto& kv) { return kv.second == s; }));
}

SplitAssignment split_patientwise(const Table& table, SplitFractions fractions, std::uint64_t seed) {
    const double fr[3] = {fractions.train, fractions.validation, fractions.test};
    for (double f : fr) {
        if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
    }
    if (std::abs(fr[0] + fr[1] + fr[2] - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");

    std::set<std::string> ids;
    for (const auto& e : table.encounters) ids.insert(e.patient_id);
    const std::size_t n = ids.size();
    if (n < 3) throw ConfigError("patient-wise split needs at least 3 patients, found " + std::to_string(n));

    // Largest-remainder apportionment, then guarantee every split is non-empty.
    std::size_t counts[3];
    double rem[3];
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double exact = fr[i] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        rem[i] = exact - std::floor(exact);
        assigned += counts[i];
    }
    while (assigned < n) {
        const int best = static_cast<int>(std::max_element(rem, rem + 3) - rem);
        ++counts[best];
        rem[best] = -1.0;
        ++assigned;
    }
    for (int i = 0; i < 3; ++i) {
        if (counts[i] == 0) {
            --counts[std::max_element(counts, counts + 3) - counts];
            counts[i] = 1;
        }
    }

    std::vector<std::string> order(ids.begin(), ids.end());
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    SplitAssignment out;
    std::size_t i = 0;
    for (; i < counts[0]; ++i) out.patients.emplace(order[i], Split::train);
    for (; i < counts[0] + counts[1]; ++i) out.patients.emplace(order[i], Split::validation);
    for (; i < n; ++i) out.patients.emplace(order[i], Split::test);
    return out;
}

Table select_split(const Table& table, const SplitAssignment& assignment, Split which) {
    Table out;
    out.schema = table.schema;
    for (const auto& e : table.encounters) {
        const auto it = assignment.patients.find(e.patient_id);
        if (it != assignment.patients.end() && it->second == which) out.encounters.push_back(e);
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON sidecars

nlohmann::json to_json(const FeatureSchema& schema) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& f : schema.features) {
        nlohmann::json jf{{"name", f.name},
                          {"kind", f.kind == FeatureKind::continuous ? "continuous" : "categorical"}};
        if (f.kind == FeatureKind::categorical) jf["categories"] = f.categories;
        features.push_back(std::move(jf));
    }
    return {{"features", std::move(features)}, {"target", schema.target}};
}

FeatureSchema schema_from_json(const nlohmann::json& j) {
    FeatureSchema s;
    s.target = j.value("target", std::string("target"));
    for (const auto& jf : j.at("features")) {
        FeatureSpec f;
        f.name = jf.at("name").get<std::string>();
        const std::string kind = jf.value("kind", std::string("continuous"));
        if (kind == "continuous") {
            f.kind = FeatureKind::continuous;
        } else if (kind == "categorical") {
            f.kind = FeatureKind::categorical;
            f.categories = jf.value("categories", std::vector<std::string>{});
        } else {
            throw ConfigError("feature '" + f.name + "' has unknown kind '" + kind + "'");
        }
        s.features.push_back(std::move(f));
    }
    s.validate();
    return s;
}

nlohmann::json to_json(const StandardizationParams& params) {
    nlohmann::json features = nlohmann::json::array();
    for (std::size_t i = 0; i < params.names.size(); ++i) {
        nlohmann::json f{{"name", params.names[i]}, {"flagged", static_cast<bool>(params.flagged[i])}};
        f["mean"] = std::isnan(params.mean[i]) ? nlohmann::json(nullptr) : nlohmann::json(params.mean[i]);
        f["std"] = params.stddev[i];
        features.push_back(std::move(f));
    }
    return {{"features", std::move(features)}};
}

StandardizationParams standardization_from_json(const nlohmann::json& j) {
    StandardizationParams p;
    for (const auto& f : j.at("features")) {
        p.names.push_back(f.at("name").get<std::string>());
        p.mean.push_back(f.at("mean").is_null() ? kMissing : f.at("mean").get<double>());
        p.stddev.push_back(f.at("std").get<double>());
        p.flagged.push_back(f.at("flagged").get<bool>());
    }
    return p;
}

nlohmann::json to_json(const SplitAssignment& split) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [id, s] : split.patients) j[id] = to_string(s);
    return j;
}

SplitAssignment split_from_json(const nlohmann::json& j) {
    SplitAssignment s;
    for (const auto& [id, v] : j.items()) s.patients.emplace(id, split_from_string(v.get<std::string>()));
    return s;
}

}  // namespace wardseq
