// SPDX-License-Identifier: Apache-2.0
//
// Turns encoded encounters into model-ready [batch, time, feature] blocks.
//
// All three strategies left-pad: masked steps come first, hold the value 0,
// and the last step of every sample is real data.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wardseq/sequence.hpp"
#include "wardseq/tensor.hpp"

namespace wardseq {

/// Which observation a sample predicts: the encounter and its 0-based step.
struct SampleRef {
    std::string encounter_id;
    std::size_t step = 0;

    friend bool operator==(const SampleRef&, const SampleRef&) = default;
};

struct Batch {
    Tensor3 features;
    MaskMatrix mask;
    std::vector<int> labels;
    std::vector<SampleRef> refs;

    std::size_t size() const noexcept { return labels.size(); }
    /// Throws ShapeError unless features/mask/labels/refs agree and masked cells are 0.
    void validate() const;

    friend bool operator==(const Batch&, const Batch&) = default;
};

struct BatchSet {
    std::vector<Batch> batches;

    std::size_t sample_count() const noexcept;
    std::size_t padded_steps() const noexcept;

    friend bool operator==(const BatchSet&, const BatchSet&) = default;
};

enum class BatchMethod { sliding, dense, smart };

std::string to_string(BatchMethod m);
BatchMethod batch_method_from_string(const std::string& s);

/// One entry per encounter. N < W: one sample, left-padded, labelled with the
/// last target. N >= W: N - W + 1 consecutive slices, each labelled with the
/// target of its final step.
BatchSet sliding_window(std::span<const EncounterSequence> encs, std::size_t window);

/// One entry per encounter holding N samples; sample i holds the trailing
/// (at most W) rows ending at step i, left-padded, labelled with target i.
BatchSet dense_sliding_window(std::span<const EncounterSequence> encs, std::size_t window);

/// Sorts encounters by length, groups consecutive runs of `batch_size`, pads
/// each group to its own maximum and labels each encounter with max(targets).
/// Only the order of the batches is shuffled by `seed`.
BatchSet smart_batch(std::span<const EncounterSequence> encs, std::size_t batch_size, std::uint64_t seed);

/// Concatenates equal-length samples of a window-based BatchSet and cuts them
/// into minibatches of `batch_size` (sample order shuffled by `seed` when
/// `shuffle` is set). Smart batches are already training-sized and are returned as is.
BatchSet minibatches(const BatchSet& set, std::size_t batch_size, std::uint64_t seed, bool shuffle = true);

BatchSet make_batches(BatchMethod method, std::span<const EncounterSequence> encs, std::size_t window,
                      std::size_t batch_size, std::uint64_t seed);

/// Inspection dump: shapes, labels, refs, base64 mask bytes and (optionally)
/// base64 little-endian float64 features.
nlohmann::json inspect_json(const BatchSet& set, bool include_features);
BatchSet batchset_from_json(const nlohmann::json& j);

}  // namespace wardseq
