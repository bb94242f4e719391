// SPDX-License-Identifier: Apache-2.0
#include "wardseq/batching.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "format.hpp"
#include "wardseq/errors.hpp"

namespace wardseq {

namespace {

void require_window(std::size_t window) {
    if (window < 1) throw ConfigError("timestamp window must be >= 1");
}

/// Copies rows [first, last] of `seq` into sample b, right-aligned in a block of `time` steps.
void place_rows(const EncounterSequence& seq, std::size_t first, std::size_t last, Batch& batch, std::size_t b) {
    const std::size_t count = last - first + 1;
    const std::size_t time = batch.features.time();
    const std::size_t pad = time - count;
    batch.mask.set_valid_suffix(b, count);
    for (std::size_t k = 0; k < count; ++k) {
        const auto src = seq.features.row(first + k);
        std::copy(src.begin(), src.end(), batch.features.step(b, pad + k).begin());
    }
}

Batch empty_batch(std::size_t samples, std::size_t time, std::size_t width) {
    Batch b;
    b.features = Tensor3(samples, time, width);
    b.mask = MaskMatrix(samples, time, false);
    b.labels.reserve(samples);
    b.refs.reserve(samples);
    return b;
}

std::size_t common_width(std::span<const EncounterSequence> encs) {
    if (encs.empty()) return 0;
    const std::size_t w = encs.front().features.cols();
    for (const auto& e : encs) {
        if (e.features.cols() != w) {
            throw ShapeError("encounters have different feature widths (" + std::to_string(w) + " vs " +
                             std::to_string(e.features.cols()) + ")");
        }
        if (e.length() == 0) throw ShapeError("encounter '" + e.encounter_id + "' is empty");
    }
    return w;
}

}  // namespace

void Batch::validate() const {
    const std::size_t n = features.batch();
    if (mask.batch() != n || mask.time() != features.time() || labels.size() != n || refs.size() != n) {
        throw ShapeError("batch components disagree: features " + features.shape_string() + ", mask [" +
                         std::to_string(mask.batch()) + ", " + std::to_string(mask.time()) + "], " +
                         std::to_string(labels.size()) + " labels, " + std::to_string(refs.size()) + " refs");
    }
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t t = 0; t < features.time(); ++t) {
            if (mask.valid(b, t)) continue;
            for (double v : features.step(b, t))
                if (v != 0.0) throw ShapeError("masked position holds a non-zero value");
        }
}

std::size_t BatchSet::sample_count() const noexcept {
    std::size_t n = 0;
    for (const auto& b : batches) n += b.size();
    return n;
}

std::size_t BatchSet::padded_steps() const noexcept {
    std::size_t n = 0;
    for (const auto& b : batches)
        for (std::size_t i = 0; i < b.mask.batch(); ++i) n += b.mask.time() - b.mask.valid_count(i);
    return n;
}

std::string to_string(BatchMethod m) {
    switch (m) {
        case BatchMethod::sliding: return "sliding";
        case BatchMethod::dense: return "dense";
        case BatchMethod::smart: return "smart";
    }
    return "?";
}

BatchMethod batch_method_from_string(const std::string& s) {
    if (s == "sliding") return BatchMethod::sliding;
    if (s == "dense") return BatchMethod::dense;
    if (s == "smart") return BatchMethod::smart;
    throw ConfigError("unknown batching method '" + s + "' (expected sliding, dense or smart)");
}

BatchSet sliding_window(std::span<const EncounterSequence> encs, std::size_t window) {
    require_window(window);
    const std::size_t width = common_width(encs);
    BatchSet out;
    out.batches.reserve(encs.size());
    for (const auto& enc : encs) {
        const std::size_t n = enc.length();
        if (n < window) {
            Batch b = empty_batch(1, window, width);
            place_rows(enc, 0, n - 1, b, 0);
            b.labels.push_back(enc.targets.back());
            b.refs.push_back({enc.encounter_id, n - 1});
            out.batches.push_back(std::move(b));
            continue;
        }
        const std::size_t samples = n - window + 1;
        Batch b = empty_batch(samples, window, width);
        for (std::size_t i = 0; i < samples; ++i) {
            const std::size_t end = i + window - 1;
            place_rows(enc, i, end, b, i);
            b.labels.push_back(enc.targets[end]);
            b.refs.push_back({enc.encounter_id, end});
        }
        out.batches.push_back(std::move(b));
    }
    return out;
}

BatchSet dense_sliding_window(std::span<const EncounterSequence> encs, std::size_t window) {
    require_window(window);
    const std::size_t width = common_width(encs);
    BatchSet out;
    out.batches.reserve(encs.size());
    for (const auto& enc : encs) {
        const std::size_t n = enc.length();
        Batch b = empty_batch(n, window, width);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t first = i + 1 >= window ? i + 1 - window : 0;
            place_rows(enc, first, i, b, i);
            b.labels.push_back(enc.targets[i]);
            b.refs.push_back({enc.encounter_id, i});
        }
        out.batches.push_back(std::move(b));
    }
    return out;
}

BatchSet smart_batch(std::span<const EncounterSequence> encs, std::size_t batch_size, std::uint64_t seed) {
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    BatchSet out;
    if (encs.empty()) return out;
    const std::size_t width = common_width(encs);

    std::vector<std::size_t> order(encs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return encs[a].length() < encs[b].length(); });

    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t stop = std::min(order.size(), start + batch_size);
        std::size_t longest = 0;
        for (std::size_t k = start; k < stop; ++k) longest = std::max(longest, encs[order[k]].length());
        Batch b = empty_batch(stop - start, longest, width);
        for (std::size_t k = start; k < stop; ++k) {
            const auto& enc = encs[order[k]];
            place_rows(enc, 0, enc.length() - 1, b, k - start);
            b.labels.push_back(enc.encounter_label);
            b.refs.push_back({enc.encounter_id, enc.length() - 1});
        }
        out.batches.push_back(std::move(b));
    }

    std::mt19937_64 rng(seed);
    std::shuffle(out.batches.begin(), out.batches.end(), rng);
    return out;
}

BatchSet minibatches(const BatchSet& set, std::size_t batch_size, std::uint64_t seed, bool shuffle) {
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (set.batches.empty()) return {};
    const std::size_t time = set.batches.front().features.time();
    const std::size_t width = set.batches.front().features.feature();
    const bool uniform = std::all_of(set.batches.begin(), set.batches.end(), [&](const Batch& b) {
        return b.features.time() == time && b.features.feature() == width;
    });
    if (!uniform) return set;

    struct Where {
        std::size_t batch, sample;
    };
    std::vector<Where> samples;
    samples.reserve(set.sample_count());
    for (std::size_t i = 0; i < set.batches.size(); ++i)
        for (std::size_t s = 0; s < set.batches[i].size(); ++s) samples.push_back({i, s});
    if (shuffle) {
        std::mt19937_64 rng(seed);
        std::shuffle(samples.begin(), samples.end(), rng);
    }

    BatchSet out;
    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        const std::size_t stop = std::min(samples.size(), start + batch_size);
        Batch b = empty_batch(stop - start, time, width);
        for (std::size_t k = start; k < stop; ++k) {
            const Batch& src = set.batches[samples[k].batch];
            const std::size_t s = samples[k].sample;
            const std::size_t dst = k - start;
            for (std::size_t t = 0; t < time; ++t) {
                const auto from = src.features.step(s, t);
                std::copy(from.begin(), from.end(), b.features.step(dst, t).begin());
                b.mask.set(dst, t, src.mask.valid(s, t));
            }
            b.labels.push_back(src.labels[s]);
            b.refs.push_back(src.refs[s]);
        }
        out.batches.push_back(std::move(b));
    }
    return out;
}

BatchSet make_batches(BatchMethod method, std::span<const EncounterSequence> encs, std::size_t window,
                      std::size_t batch_size, std::uint64_t seed) {
    switch (method) {
        case BatchMethod::sliding: return sliding_window(encs, window);
        case BatchMethod::dense: return dense_sliding_window(encs, window);
        case BatchMethod::smart: return smart_batch(encs, batch_size, seed);
    }
    throw ConfigError("unknown batching method");
}

nlohmann::json inspect_json(const BatchSet& set, bool include_features) {
    nlohmann::json batches = nlohmann::json::array();
    for (const auto& b : set.batches) {
        nlohmann::json refs = nlohmann::json::array();
        for (const auto& r : b.refs) refs.push_back({r.encounter_id, r.step});
        std::vector<std::size_t> pads;
        for (std::size_t i = 0; i < b.mask.batch(); ++i) pads.push_back(b.mask.time() - b.mask.valid_count(i));
        nlohmann::json jb{{"shape", {b.features.batch(), b.features.time(), b.features.feature()}},
                          {"labels", b.labels},
                          {"refs", std::move(refs)},
                          {"pad_counts", std::move(pads)},
                          {"mask", detail::base64_encode(b.mask.flags())}};
        if (include_features) jb["features"] = detail::encode_doubles(b.features.values());
        batches.push_back(std::move(jb));
    }
    return {{"format", "wardseq-batchset"},
            {"version", 1},
            {"samples", set.sample_count()},
            {"padded_steps", set.padded_steps()},
            {"batches", std::move(batches)}};
}

BatchSet batchset_from_json(const nlohmann::json& j) {
    if (j.value("format", std::string()) != "wardseq-batchset") throw Error("not a wardseq batch-set document");
    BatchSet set;
    for (const auto& jb : j.at("batches")) {
        const auto shape = jb.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 3) throw ShapeError("batch shape must have three dimensions");
        Batch b = empty_batch(shape[0], shape[1], shape[2]);
        const auto flags = detail::base64_decode(jb.at("mask").get<std::string>());
        if (flags.size() != shape[0] * shape[1]) throw ShapeError("mask payload size does not match shape");
        for (std::size_t i = 0; i < shape[0]; ++i)
            for (std::size_t t = 0; t < shape[1]; ++t) b.mask.set(i, t, flags[i * shape[1] + t] != 0);
        if (jb.contains("features")) {
            const auto values = detail::decode_doubles(jb.at("features").get<std::string>());
            if (values.size() != b.features.size()) throw ShapeError("feature payload size does not match shape");
            std::copy(values.begin(), values.end(), b.features.values().begin());
        }
        b.labels = jb.at("labels").get<std::vector<int>>();
        for (const auto& r : jb.at("refs")) b.refs.push_back({r.at(0).get<std::string>(), r.at(1).get<std::size_t>()});
        b.validate();
        set.batches.push_back(std::move(b));
    }
    return set;
}

}  // namespace wardseq
