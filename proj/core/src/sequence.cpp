// SPDX-License-Identifier: Apache-2.0
#include "wardseq/sequence.hpp"

#include <algorithm>

#include "wardseq/errors.hpp"

namespace wardseq {

void validate(const EncounterSequence& seq) {
    const std::size_t t = seq.features.rows();
    if (t == 0) throw ShapeError("encounter '" + seq.encounter_id + "' has no rows");
    if (seq.targets.size() != t) throw ShapeError("encounter '" + seq.encounter_id + "': target count mismatch");
    if (!seq.times.empty() && seq.times.size() != t)
        throw ShapeError("encounter '" + seq.encounter_id + "': time count mismatch");
    const int mx = *std::max_element(seq.targets.begin(), seq.targets.end());
    if (mx != seq.encounter_label) throw ShapeError("encounter '" + seq.encounter_id + "': label is not max(targets)");
}

EncounterSequence make_sequence(std::string encounter_id, Matrix features, std::vector<int> targets,
                                std::string patient_id, std::vector<double> times) {
    EncounterSequence s;
    s.encounter_id = std::move(encounter_id);
    s.patient_id = std::move(patient_id);
    s.features = std::move(features);
    s.targets = std::move(targets);
    s.times = std::move(times);
    s.encounter_label = s.targets.empty() ? 0 : *std::max_element(s.targets.begin(), s.targets.end());
    validate(s);
    return s;
}

}  // namespace wardseq
