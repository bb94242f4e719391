// SPDX-License-Identifier: Apache-2.0
//
// Long-format record ingestion: CSV parsing, encounter grouping, fixed-width
// time windowing, standardization, one-hot encoding and patient-wise splits.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wardseq/sequence.hpp"

namespace wardseq {

enum class FeatureKind { continuous, categorical };

struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::continuous;
    std::vector<std::string> categories;  // categorical only; fixed from the training split
};

struct FeatureSchema {
    std::vector<FeatureSpec> features;
    std::string target = "target";

    std::size_t continuous_count() const noexcept;
    std::size_t categorical_count() const noexcept;
    /// #continuous + sum of category counts.
    std::size_t encoded_width() const noexcept;
    /// Continuous names in schema order, then "<name>=<category>" per indicator.
    std::vector<std::string> encoded_names() const;
    std::vector<std::string> continuous_names() const;

    /// Throws ConfigError on duplicate/empty names or a categorical feature without categories.
    void validate() const;

    /// Eight wide-variance vitals/labs/demographics plus a categorical gender.
    static FeatureSchema default_schema();
    /// All-continuous schema over already encoded columns.
    static FeatureSchema encoded(const std::vector<std::string>& names);
};

/// One measurement row. `continuous` follows the schema's continuous features in
/// order (NaN = missing); `categorical` likewise ("" = missing).
struct Observation {
    double time = 0.0;
    std::vector<double> continuous;
    std::vector<std::string> categorical;
    int target = 0;
};

struct Encounter {
    std::string patient_id;
    std::string encounter_id;
    std::vector<Observation> rows;  // ascending time
};

/// Long-format table grouped by encounter. Used for both the granular and the
/// windowed representation (windowed rows carry time = window_index * width).
struct Table {
    FeatureSchema schema;
    std::vector<Encounter> encounters;  // ascending encounter_id

    std::size_t row_count() const noexcept;
    std::size_t patient_count() const;
};

using GranularTable = Table;
using WindowedTable = Table;

/// Parses `patient_id,encounter_id,time_hours,<feature...>,target`. Extra
/// columns are ignored. Rows are grouped by encounter and stable-sorted by time.
Table parse_csv(std::istream& in, const FeatureSchema& schema);

/// Inverse of parse_csv; numbers use the shortest round-trip representation.
void write_csv(std::ostream& out, const Table& table);

/// Aggregates rows into windows [k*w, (k+1)*w): mean for continuous values,
/// last present value for categories, max for the target. Gaps are emitted
/// as all-missing rows with target 0.
WindowedTable windowize(const GranularTable& table, double window_hours = 8.0);

/// Appends a continuous "time_diff" feature: hours since the previous row of
/// the same encounter, 0 for the first row.
GranularTable add_time_diff(const GranularTable& table);

struct StandardizationParams {
    std::vector<std::string> names;
    std::vector<double> mean;
    std::vector<double> stddev;   // population convention
    std::vector<bool> flagged;    // constant or all-missing: centred, not scaled

    std::vector<std::string> flagged_names() const;
    double standardize(std::size_t i, double x) const noexcept;
    double destandardize(std::size_t i, double z) const noexcept;
};

StandardizationParams fit_standardizer(const Table& train);

/// Standardizes every continuous value; missing values become 0 (the training mean).
Table apply_standardizer(const Table& table, const StandardizationParams& params);

/// Fills each categorical feature's category list from the values seen in `train`
/// (sorted), leaving lists that are already populated untouched.
FeatureSchema fit_categories(const Table& train);

/// Expands categorical columns into indicator blocks (unseen or missing category
/// -> all zeros) and emits one EncounterSequence per encounter. Remaining
/// missing continuous values are written as 0.
std::vector<EncounterSequence> one_hot(const Table& table, const FeatureSchema& schema);

enum class Split : std::uint8_t { train, validation, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct SplitFractions {
    double train = 0.6;
    double validation = 0.2;
    double test = 0.2;
};

struct SplitAssignment {
    std::map<std::string, Split> patients;

    std::size_t count(Split s) const noexcept;
};

/// Deterministic patient-wise partition; every split receives at least one patient.
SplitAssignment split_patientwise(const Table& table, SplitFractions fractions, std::uint64_t seed);

/// Encounters whose patient belongs to `which`.
Table select_split(const Table& table, const SplitAssignment& assignment, Split which);

nlohmann::json to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StandardizationParams& params);
StandardizationParams standardization_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SplitAssignment& split);
SplitAssignment split_from_json(const nlohmann::json& j);

}  // namespace wardseq
