// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "wardseq/tensor.hpp"

namespace wardseq {

/// One encounter after encoding: T time-ordered rows of F model-ready features.
struct EncounterSequence {
    std::string encounter_id;
    std::string patient_id;
    std::vector<double> times;  // hours since encounter start, one per row
    Matrix features;            // T x F
    std::vector<int> targets;   // T values in {0, 1}
    int encounter_label = 0;    // max of targets

    std::size_t length() const noexcept { return features.rows(); }
};

/// Checks T >= 1, row/target/time counts agree and encounter_label = max(targets).
void validate(const EncounterSequence& seq);

/// Builds a sequence from rows and targets, deriving encounter_label.
EncounterSequence make_sequence(std::string encounter_id, Matrix features, std::vector<int> targets,
                                std::string patient_id = {}, std::vector<double> times = {});

}  // namespace wardseq
