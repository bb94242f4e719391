// SPDX-License-Identifier: Apache-2.0
#include "wardseq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include "wardseq/errors.hpp"

namespace wardseq {

namespace {

void require_lengths(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw ShapeError("metric: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
    }
    for (double s : scores)
        if (!std::isfinite(s)) throw MetricError("metric: non-finite score");
}

/// Indices sorted by descending score.
std::vector<std::size_t> descending(std::span<const double> scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
    require_lengths(scores, labels);
    const auto idx = descending(scores);

    // Walk from the highest score down. Each positive beats every negative that
    // scores strictly lower and ties with negatives in its block. Counting in
    // halves keeps the numerator an integer.
    std::uint64_t pos_total = 0, neg_total = 0;
    for (int y : labels) (y == 1 ? pos_total : neg_total) += 1;
    if (pos_total == 0 || neg_total == 0) {
        throw MetricError("AUROC is undefined with a single class (n_pos=" + std::to_string(pos_total) +
                          ", n_neg=" + std::to_string(neg_total) + ")");
    }

    std::uint64_t twice_wins = 0;
    std::uint64_t neg_above = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        std::uint64_t pos = 0, neg = 0;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            (labels[idx[j]] == 1 ? pos : neg) += 1;
            ++j;
        }
        const std::uint64_t neg_below = neg_total - neg_above - neg;
        twice_wins += 2 * pos * neg_below + pos * neg;
        neg_above += neg;
        i = j;
    }
    return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(pos_total) * static_cast<double>(neg_total));
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
    require_lengths(scores, labels);
    const auto pos_total = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    if (pos_total == 0) throw MetricError("AUPRC is undefined without positive labels");
    const auto idx = descending(scores);

    double ap = 0.0;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        std::size_t pos = 0;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            (labels[idx[j]] == 1 ? tp : fp) += 1;
            pos += labels[idx[j]] == 1 ? 1 : 0;
            ++j;
        }
        if (pos > 0) {
            const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
            ap += static_cast<double>(pos) / static_cast<double>(pos_total) * precision;
        }
        i = j;
    }
    return ap;
}

std::string to_string(Aggregation a) {
    switch (a) {
        case Aggregation::max: return "max";
        case Aggregation::mean: return "mean";
        case Aggregation::last: return "last";
    }
    return "max";
}

Aggregation aggregation_from_string(const std::string& s) {
    if (s == "max") return Aggregation::max;
    if (s == "mean") return Aggregation::mean;
    if (s == "last") return Aggregation::last;
    throw ConfigError("unknown aggregation '" + s + "' (expected max, mean or last)");
}

std::vector<EncounterScore> encounter_aggregate(std::span<const ScoredObservation> obs, Aggregation how) {
    struct Acc {
        double max = 0.0, sum = 0.0, last = 0.0;
        std::size_t n = 0, last_step = 0;
        int label = 0;
    };
    std::map<std::string, Acc> groups;
    for (const auto& o : obs) {
        auto& a = groups[o.encounter_id];
        if (a.n == 0 || o.score > a.max) a.max = o.score;
        if (a.n == 0 || o.step >= a.last_step) {
            a.last = o.score;
            a.last_step = o.step;
        }
        a.sum += o.score;
        a.label = std::max(a.label, o.label);
        ++a.n;
    }
    std::vector<EncounterScore> out;
    out.reserve(groups.size());
    for (const auto& [id, a] : groups) {
        double s = a.max;
        if (how == Aggregation::mean) s = a.sum / static_cast<double>(a.n);
        else if (how == Aggregation::last) s = a.last;
        out.push_back({id, s, a.label});
    }
    return out;
}

LevelMetrics level_metrics(std::span<const double> scores, std::span<const int> labels) {
    LevelMetrics m;
    m.n = scores.size();
    m.n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    m.event_rate = m.n == 0 ? 0.0 : static_cast<double>(m.n_pos) / static_cast<double>(m.n);
    m.auroc = auroc(scores, labels);
    m.auprc = auprc(scores, labels);
    return m;
}

std::vector<ScoredObservation> score(const ModelParams& model, const BatchSet& set) {
    std::vector<ScoredObservation> out;
    out.reserve(set.sample_count());
    for (const auto& b : set.batches) {
        if (b.size() == 0) continue;
        const auto p = model_forward(model, b.features, b.mask, false, nullptr);
        for (std::size_t i = 0; i < b.size(); ++i) out.push_back({b.refs[i].encounter_id, b.refs[i].step, p[i], b.labels[i]});
    }
    std::stable_sort(out.begin(), out.end(), [](const ScoredObservation& a, const ScoredObservation& b) {
        return std::tie(a.encounter_id, a.step) < std::tie(b.encounter_id, b.step);
    });
    return out;
}

MetricsReport metrics_from_scores(std::span<const ScoredObservation> obs, Aggregation how) {
    std::vector<double> s;
    std::vector<int> y;
    s.reserve(obs.size());
    y.reserve(obs.size());
    for (const auto& o : obs) {
        s.push_back(o.score);
        y.push_back(o.label);
    }
    MetricsReport r;
    r.observation = level_metrics(s, y);

    const auto enc = encounter_aggregate(obs, how);
    s.clear();
    y.clear();
    for (const auto& e : enc) {
        s.push_back(e.score);
        y.push_back(e.label);
    }
    r.encounter = level_metrics(s, y);
    return r;
}

MetricsReport evaluate(const ModelParams& model, const BatchSet& set, Aggregation how) {
    const auto obs = score(model, set);
    return metrics_from_scores(obs, how);
}

nlohmann::json to_json(const LevelMetrics& m) {
    return {{"auroc", m.auroc}, {"auprc", m.auprc}, {"event_rate", m.event_rate}, {"n", m.n}, {"n_pos", m.n_pos}};
}

nlohmann::json to_json(const MetricsReport& r) {
    return {{"observation", to_json(r.observation)}, {"encounter", to_json(r.encounter)}};
}

}  // namespace wardseq
