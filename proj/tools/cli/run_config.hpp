// SPDX-License-Identifier: Apache-2.0
//
// Effective configuration of one pipeline run, assembled from a named preset,
// an optional JSON override file and command-line flags, in that order.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wardseq/batching.hpp"
#include "wardseq/dataset.hpp"
#include "wardseq/metrics.hpp"
#include "wardseq/seqnet.hpp"
#include "wardseq/training.hpp"

namespace wardseq::cli {

enum class DatasetKind { windowed, granular };

std::string to_string(DatasetKind k);
DatasetKind dataset_kind_from_string(const std::string& s);

struct DataConfig {
    DatasetKind dataset = DatasetKind::windowed;
    double window_hours = 8.0;
    bool time_diff = false;  // granular only
    SplitFractions split;
};

struct BatchingConfig {
    BatchMethod method = BatchMethod::sliding;
    std::size_t window = 21;
    std::size_t batch_size = 64;
};

struct RunConfig {
    std::string preset;
    std::uint64_t seed = 0;
    DataConfig data;
    BatchingConfig batching;
    ModelConfig model;  // input_width 0 = take it from the data
    TrainConfig train;
    bool auto_class_weights = false;  // recompute w0/w1 from the training labels
    Aggregation aggregation = Aggregation::max;

    /// Copies `seed` into the model initialisation and training seeds.
    void propagate_seed();
};

nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);

std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown name.
RunConfig preset(const std::string& name);

/// preset(name) as JSON, merge-patched with `overrides`, then parsed.
RunConfig resolve(const std::string& preset_name, const nlohmann::json& overrides);

}  // namespace wardseq::cli
