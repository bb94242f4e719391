// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wardseq/batching.hpp"
#include "wardseq/losses.hpp"
#include "wardseq/optim.hpp"
#include "wardseq/seqnet.hpp"

namespace wardseq {

struct TrainConfig {
    std::size_t epochs = 50;
    std::uint64_t seed = 0;  // batch order and dropout
    LossConfig loss;
    OptimizerKind optimizer = OptimizerKind::adam;
    OptimizerHyper hyper;
    std::size_t early_stop_patience = 10;
    std::size_t plateau_patience = 6;
    double plateau_factor = 0.1;
    double min_lr = 1e-6;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;  // rate used during this epoch
    double wall_seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    bool stopped_early = false;

    /// Compares everything except wall time.
    bool same_trajectory(const TrainHistory& other) const;
};

/// One JSON object per line, one line per epoch.
void write_jsonl(std::ostream& out, const TrainHistory& history);

struct TrainResult {
    ModelParams params;  // best-validation-loss weights
    TrainHistory history;
};

/// Mean loss of `set` in evaluation mode, weighted by batch size.
double evaluate_loss(const ModelParams& model, const BatchSet& set, const LossConfig& loss);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Per epoch: shuffle the batch order (seeded by seed and epoch), then
/// forward, loss, backward and one optimizer step per batch; then the
/// validation loss drives early stopping and the plateau schedule. The
/// returned parameters are those of the best validation epoch.
/// Throws NumericError naming the epoch and batch on a non-finite loss, and
/// ShapeError when a batch's width does not match the model.
TrainResult train(const ModelParams& initial, const BatchSet& train_set, const BatchSet& val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace wardseq
