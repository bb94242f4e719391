// SPDX-License-Identifier: Apache-2.0
//
// Threshold-free ranking metrics at the observation and encounter level.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wardseq/batching.hpp"
#include "wardseq/seqnet.hpp"

namespace wardseq {

struct ScoredObservation {
    std::string encounter_id;
    std::size_t step = 0;
    double score = 0.0;
    int label = 0;
};

/// P(score of a random positive > score of a random negative), ties worth 1/2.
/// One sort, O(n log n). Throws MetricError unless both classes are present.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Average precision: sum over descending score blocks of
/// (recall gained in the block) x (precision after the block). Tied scores
/// enter together. Throws MetricError without positives.
double auprc(std::span<const double> scores, std::span<const int> labels);

enum class Aggregation { max, mean, last };

std::string to_string(Aggregation a);
Aggregation aggregation_from_string(const std::string& s);

struct EncounterScore {
    std::string encounter_id;
    double score = 0.0;
    int label = 0;  // max over the encounter's observations
};

/// Groups by encounter id (ascending) and reduces scores with `how`; `last`
/// takes the observation with the highest step.
std::vector<EncounterScore> encounter_aggregate(std::span<const ScoredObservation> obs,
                                                Aggregation how = Aggregation::max);

struct LevelMetrics {
    double auroc = 0.0;
    double auprc = 0.0;
    double event_rate = 0.0;
    std::size_t n = 0;
    std::size_t n_pos = 0;
};

LevelMetrics level_metrics(std::span<const double> scores, std::span<const int> labels);

struct MetricsReport {
    LevelMetrics observation;
    LevelMetrics encounter;
};

/// Evaluation-mode probabilities for every sample, ordered by (encounter, step).
std::vector<ScoredObservation> score(const ModelParams& model, const BatchSet& set);

MetricsReport metrics_from_scores(std::span<const ScoredObservation> obs, Aggregation how = Aggregation::max);
MetricsReport evaluate(const ModelParams& model, const BatchSet& set, Aggregation how = Aggregation::max);

nlohmann::json to_json(const LevelMetrics& m);
/// {"observation": {...}, "encounter": {...}}
nlohmann::json to_json(const MetricsReport& r);

}  // namespace wardseq
