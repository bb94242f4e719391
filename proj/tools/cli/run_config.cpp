// SPDX-License-Identifier: Apache-2.0
#include "run_config.hpp"

#include "wardseq/errors.hpp"

namespace wardseq::cli {

std::string to_string(DatasetKind k) { return k == DatasetKind::windowed ? "windowed" : "granular"; }

DatasetKind dataset_kind_from_string(const std::string& s) {
    if (s == "windowed") return DatasetKind::windowed;
    if (s == "granular") return DatasetKind::granular;
    throw ConfigError("unknown dataset '" + s + "' (expected windowed or granular)");
}

void RunConfig::propagate_seed() {
    model.init_seed = seed;
    train.seed = seed;
}

nlohmann::json to_json(const RunConfig& c) {
    return {
        {"preset", c.preset},
        {"seed", c.seed},
        {"data",
         {{"dataset", to_string(c.data.dataset)},
          {"window_hours", c.data.window_hours},
          {"time_diff", c.data.time_diff},
          {"split", {{"train", c.data.split.train}, {"validation", c.data.split.validation}, {"test", c.data.split.test}}}}},
        {"batching",
         {{"method", to_string(c.batching.method)}, {"window", c.batching.window}, {"batch_size", c.batching.batch_size}}},
        {"model", to_json(c.model)},
        {"train", to_json(c.train)},
        {"auto_class_weights", c.auto_class_weights},
        {"eval", {{"aggregation", to_string(c.aggregation)}}},
    };
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        c.preset = j.value("preset", std::string());
        c.seed = j.value("seed", c.seed);
        if (j.contains("data")) {
            const auto& d = j.at("data");
            c.data.dataset = dataset_kind_from_string(d.value("dataset", to_string(c.data.dataset)));
            c.data.window_hours = d.value("window_hours", c.data.window_hours);
            c.data.time_diff = d.value("time_diff", c.data.time_diff);
            if (d.contains("split")) {
                const auto& s = d.at("split");
                c.data.split.train = s.value("train", c.data.split.train);
                c.data.split.validation = s.value("validation", c.data.split.validation);
                c.data.split.test = s.value("test", c.data.split.test);
            }
        }
        if (j.contains("batching")) {
            const auto& b = j.at("batching");
            c.batching.method = batch_method_from_string(b.value("method", to_string(c.batching.method)));
            c.batching.window = b.value("window", c.batching.window);
            c.batching.batch_size = b.value("batch_size", c.batching.batch_size);
        }
        if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
        if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
        c.auto_class_weights = j.value("auto_class_weights", c.auto_class_weights);
        if (j.contains("eval")) c.aggregation = aggregation_from_string(j.at("eval").value("aggregation", std::string("max")));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
    if (!(c.data.window_hours > 0.0)) throw ConfigError("data.window_hours must be > 0");
    if (c.batching.window == 0) throw ConfigError("batching.window must be >= 1");
    if (c.batching.batch_size == 0) throw ConfigError("batching.batch_size must be >= 1");
    c.propagate_seed();
    return c;
}

std::vector<std::string> preset_names() { return {"exp1.1", "exp1.2", "exp1.3", "exp2.1", "exp2.2"}; }

RunConfig preset(const std::string& name) {
    RunConfig c;
    c.preset = name;
    c.train.epochs = 40;
    c.train.optimizer = OptimizerKind::adam;
    c.train.loss.kind = LossKind::bce;

    const ModelConfig lstm = ModelConfig::lstm(0, {LstmBlockConfig{16, true, 0.2}, LstmBlockConfig{16, true, 0.2}});
    ModelConfig transformer = ModelConfig::transformer(0, 2, 6, 128, 64, 0.2);
    transformer.head_dropout = 0.2;
    const ClassWeights windowed_weights{0.50, 62.71};
    const ClassWeights granular_weights{0.51, 42.67};

    if (name == "exp1.1") {
        c.data.dataset = DatasetKind::windowed;
        c.batching = {BatchMethod::sliding, 21, 64};
        c.model = lstm;
        c.train.loss.weights = windowed_weights;
    } else if (name == "exp1.2") {
        c.data.dataset = DatasetKind::windowed;
        c.batching = {BatchMethod::dense, 21, 64};
        c.model = lstm;
        c.train.loss.weights = windowed_weights;
    } else if (name == "exp1.3") {
        c.data.dataset = DatasetKind::granular;
        c.data.time_diff = true;
        c.batching = {BatchMethod::smart, 21, 32};
        c.model = lstm;
        c.train.loss.weights = granular_weights;
    } else if (name == "exp2.1") {
        c.data.dataset = DatasetKind::windowed;
        c.batching = {BatchMethod::dense, 21, 64};
        c.model = transformer;
        c.train.loss.weights = windowed_weights;
    } else if (name == "exp2.2") {
        c.data.dataset = DatasetKind::granular;
        c.data.time_diff = true;
        c.batching = {BatchMethod::smart, 21, 32};
        c.model = transformer;
        c.train.loss.weights = granular_weights;
    } else {
        std::string known;
        for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
        throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
    }
    c.propagate_seed();
    return c;
}

RunConfig resolve(const std::string& preset_name, const nlohmann::json& overrides) {
    nlohmann::json base = to_json(preset(preset_name));
    if (!overrides.is_null()) {
        if (!overrides.is_object()) throw ConfigError("config file must hold a JSON object");
        base.merge_patch(overrides);
    }
    base["preset"] = preset_name;
    return run_config_from_json(base);
}

}  // namespace wardseq::cli
