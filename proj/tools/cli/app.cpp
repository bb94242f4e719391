// SPDX-License-Identifier: Apache-2.0
#include "app.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "run_config.hpp"
#include "wardseq/batching.hpp"
#include "wardseq/dataset.hpp"
#include "wardseq/errors.hpp"
#include "wardseq/gradcheck.hpp"
#include "wardseq/losses.hpp"
#include "wardseq/metrics.hpp"
#include "wardseq/seqnet.hpp"
#include "wardseq/synth.hpp"
#include "wardseq/training.hpp"

namespace fs = std::filesystem;

namespace wardseq::cli {

namespace {

class IoError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// File helpers

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

Table read_table(const fs::path& path, const FeatureSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return parse_csv(in, schema);
}

void write_table(const fs::path& path, const Table& table) {
    std::ostringstream s;
    write_csv(s, table);
    write_text(path, s.str());
}

/// Encoded sequences back to a long table over an all-continuous schema.
Table sequences_to_table(const std::vector<EncounterSequence>& seqs, const std::vector<std::string>& names) {
    Table t;
    t.schema = FeatureSchema::encoded(names);
    for (const auto& s : seqs) {
        Encounter e;
        e.patient_id = s.patient_id;
        e.encounter_id = s.encounter_id;
        for (std::size_t i = 0; i < s.length(); ++i) {
            Observation o;
            o.time = s.times.empty() ? static_cast<double>(i) : s.times[i];
            const auto row = s.features.row(i);
            o.continuous.assign(row.begin(), row.end());
            o.target = s.targets[i];
            e.rows.push_back(std::move(o));
        }
        t.encounters.push_back(std::move(e));
    }
    return t;
}

struct PreparedData {
    std::vector<std::string> names;
    std::vector<EncounterSequence> sequences;
};

PreparedData load_split(const fs::path& data_dir, const std::string& split) {
    (void)split_from_string(split);
    const auto meta = read_json(data_dir / "preprocess.json");
    PreparedData d;
    try {
        d.names = meta.at("encoded_names").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("preprocess.json: " + std::string(e.what()));
    }
    const auto schema = FeatureSchema::encoded(d.names);
    d.sequences = one_hot(read_table(data_dir / (split + ".csv"), schema), schema);
    return d;
}

std::uint64_t batch_seed(const RunConfig& cfg) { return cfg.seed ^ 0x5bd1e995ULL; }

/// Window methods yield one entry per encounter; cut them into minibatches.
BatchSet training_batches(const RunConfig& cfg, const std::vector<EncounterSequence>& seqs, bool shuffle) {
    BatchSet set = make_batches(cfg.batching.method, seqs, cfg.batching.window, cfg.batching.batch_size, batch_seed(cfg));
    if (cfg.batching.method == BatchMethod::smart) return set;
    return minibatches(set, cfg.batching.batch_size, batch_seed(cfg), shuffle);
}

std::string quoted(const std::string& s) {
    std::ostringstream o;
    o << std::quoted(s);
    std::string q = o.str();
    for (auto& c : q)
        if (c == '\n' || c == '\r') c = ' ';
    return q;
}

std::string format_number(double v) {
    std::ostringstream o;
    o << std::setprecision(6) << v;
    return o.str();
}

// ---------------------------------------------------------------------------
// Options shared by every subcommand

struct Common {
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string config;

    void attach(CLI::App* app, bool out_required) {
        app->add_option("--seed", seed, "Seed for every random choice of the run");
        auto* o = app->add_option("--out", out, "Output path");
        if (out_required) o->required();
        app->add_option("--config", config, "JSON config file");
    }

    nlohmann::json config_json() const { return config.empty() ? nlohmann::json() : read_json(config); }
};

RunConfig resolve_run(const Common& common, const std::string& preset_flag) {
    nlohmann::json overrides = common.config_json();
    std::string name = preset_flag;
    if (name.empty() && overrides.is_object() && overrides.contains("preset") && overrides["preset"].is_string())
        name = overrides["preset"].get<std::string>();
    if (name.empty()) name = "exp1.1";
    if (common.seed) {
        if (overrides.is_null()) overrides = nlohmann::json::object();
        overrides["seed"] = *common.seed;
    }
    return resolve(name, overrides);
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_synth(const Common& common, std::optional<std::size_t> patients, std::optional<double> signal,
              std::ostream& out) {
    const nlohmann::json j = common.config_json();
    SynthConfig cfg = j.is_null() ? SynthConfig{} : synth_config_from_json(j);
    if (common.seed) cfg.seed = *common.seed;
    if (patients) cfg.n_patients = *patients;
    if (signal) cfg.signal_strength = *signal;
    cfg.validate();

    fs::path csv = common.out;
    fs::path echo;
    if (csv.extension() == ".csv") {
        echo = fs::path(csv).replace_extension(".config.json");
    } else {
        ensure_dir(csv);
        echo = csv / "config.json";
        csv = csv / "records.csv";
    }
    const Table table = generate(cfg);
    write_table(csv, table);
    write_json(echo, {{"command", "synth"}, {"synth", to_json(cfg)}});
    out << "wrote " << table.row_count() << " rows, " << table.encounters.size() << " encounters, "
        << table.patient_count() << " patients to " << csv.string() << "\n";
    return kOk;
}

int cmd_preprocess(const Common& common, const std::string& input, const std::string& preset_flag,
                   const std::string& dataset_flag, bool time_diff_flag, std::optional<double> window_hours,
                   std::ostream& out) {
    RunConfig cfg = resolve_run(common, preset_flag);
    if (!dataset_flag.empty()) cfg.data.dataset = dataset_kind_from_string(dataset_flag);
    if (time_diff_flag) cfg.data.time_diff = true;
    if (window_hours) cfg.data.window_hours = *window_hours;

    const fs::path dir = common.out;
    ensure_dir(dir);
    Table raw = read_table(input, FeatureSchema::default_schema());
    const SplitAssignment split = split_patientwise(raw, cfg.data.split, cfg.seed);

    Table shaped = cfg.data.dataset == DatasetKind::windowed ? windowize(raw, cfg.data.window_hours) : raw;
    if (cfg.data.dataset == DatasetKind::granular && cfg.data.time_diff) shaped = add_time_diff(shaped);

    const Table train_raw = select_split(shaped, split, Split::train);
    const StandardizationParams params = fit_standardizer(train_raw);
    const FeatureSchema fitted = fit_categories(train_raw);

    std::vector<std::string> names;
    for (Split s : {Split::train, Split::validation, Split::test}) {
        const Table part = apply_standardizer(select_split(shaped, split, s), params);
        const auto seqs = one_hot(part, fitted);
        names = fitted.encoded_names();
        write_table(dir / (to_string(s) + ".csv"), sequences_to_table(seqs, names));
        std::size_t rows = 0, pos = 0;
        for (const auto& q : seqs) {
            rows += q.length();
            for (int y : q.targets) pos += y == 1 ? 1 : 0;
        }
        out << to_string(s) << ": " << seqs.size() << " encounters, " << rows << " observations, " << pos
            << " positive\n";
    }

    write_json(dir / "preprocess.json", {{"format", "wardseq-preprocess"},
                                         {"version", 1},
                                         {"dataset", to_string(cfg.data.dataset)},
                                         {"window_hours", cfg.data.window_hours},
                                         {"time_diff", cfg.data.time_diff},
                                         {"schema", to_json(fitted)},
                                         {"standardization", to_json(params)},
                                         {"split", to_json(split)},
                                         {"encoded_names", names}});
    write_json(dir / "config.json", {{"command", "preprocess"}, {"input", input}, {"run", to_json(cfg)}});
    if (!params.flagged_names().empty()) {
        out << "note: constant or empty features left unscaled:";
        for (const auto& n : params.flagged_names()) out << " " << n;
        out << "\n";
    }
    return kOk;
}

int cmd_batch(const Common& common, const std::string& data, const std::string& split, const std::string& preset_flag,
              const std::string& method, std::optional<std::size_t> window, std::optional<std::size_t> batch_size,
              bool inspect, bool features, std::ostream& out) {
    RunConfig cfg = resolve_run(common, preset_flag);
    if (!method.empty()) cfg.batching.method = batch_method_from_string(method);
    if (window) cfg.batching.window = *window;
    if (batch_size) cfg.batching.batch_size = *batch_size;

    const auto d = load_split(data, split);
    const BatchSet set =
        make_batches(cfg.batching.method, d.sequences, cfg.batching.window, cfg.batching.batch_size, batch_seed(cfg));
    const nlohmann::json dump = inspect_json(set, features);

    if (!common.out.empty()) {
        const fs::path dir = common.out;
        ensure_dir(dir);
        write_json(dir / "batches.json", dump);
        write_json(dir / "config.json",
                   {{"command", "batch"}, {"data", data}, {"split", split}, {"run", to_json(cfg)}});
    }
    if (inspect && common.out.empty()) {
        out << dump.dump() << "\n";
    } else {
        out << to_string(cfg.batching.method) << ": " << set.batches.size() << " batches, " << set.sample_count()
            << " samples, " << set.padded_steps() << " padded steps\n";
    }
    return kOk;
}

int cmd_train(const Common& common, const std::string& data, const std::string& preset_flag,
              std::optional<std::size_t> epochs, bool quiet, std::ostream& out) {
    RunConfig cfg = resolve_run(common, preset_flag);
    if (epochs) cfg.train.epochs = *epochs;

    const auto train_data = load_split(data, "train");
    const auto val_data = load_split(data, "validation");
    if (cfg.model.input_width == 0) cfg.model.input_width = train_data.names.size();
    cfg.model.validate();

    const BatchSet train_set = training_batches(cfg, train_data.sequences, true);
    const BatchSet val_set = training_batches(cfg, val_data.sequences, false);
    if (cfg.auto_class_weights) {
        std::vector<int> labels;
        for (const auto& b : train_set.batches) labels.insert(labels.end(), b.labels.begin(), b.labels.end());
        cfg.train.loss.weights = compute_class_weights(labels);
    }

    const fs::path dir = common.out;
    ensure_dir(dir);
    write_json(dir / "config.json", {{"command", "train"}, {"data", data}, {"run", to_json(cfg)}});

    const ModelParams initial = init_model(cfg.model);
    const TrainResult result = train(initial, train_set, val_set, cfg.train, [&](const EpochRecord& e) {
        if (!quiet) {
            out << "epoch " << e.epoch << " train_loss=" << format_number(e.train_loss)
                << " val_loss=" << format_number(e.val_loss) << " lr=" << format_number(e.lr) << "\n";
            out.flush();
        }
    });

    write_json(dir / "checkpoint.json", to_json(result.params));
    std::ostringstream hist;
    write_jsonl(hist, result.history);
    write_text(dir / "history.jsonl", hist.str());
    out << "best epoch " << result.history.best_epoch << " of " << result.history.epochs.size()
        << (result.history.stopped_early ? " (early stop)" : "") << "; checkpoint " << (dir / "checkpoint.json").string()
        << "\n";
    return kOk;
}

int cmd_eval(const Common& common, const std::string& checkpoint, const std::string& data, const std::string& split,
             const std::string& aggregation, std::ostream& out) {
    const fs::path ckpt = checkpoint;
    nlohmann::json run_json;
    if (!common.config.empty()) {
        run_json = common.config_json();
    } else {
        run_json = read_json(ckpt.parent_path() / "config.json");
    }
    if (run_json.contains("run")) run_json = run_json.at("run");
    RunConfig cfg = run_config_from_json(run_json);
    if (common.seed) {
        cfg.seed = *common.seed;
        cfg.propagate_seed();
    }
    if (!aggregation.empty()) cfg.aggregation = aggregation_from_string(aggregation);

    ModelParams model;
    try {
        model = model_from_json(read_json(ckpt));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("checkpoint '" + ckpt.string() + "': " + e.what());
    }
    const auto d = load_split(data, split);
    const BatchSet set = training_batches(cfg, d.sequences, false);
    const MetricsReport report = evaluate(model, set, cfg.aggregation);
    const nlohmann::json metrics = to_json(report);

    if (!common.out.empty()) {
        const fs::path dir = common.out;
        ensure_dir(dir);
        write_json(dir / "metrics.json", metrics);
        write_json(dir / "config.json", {{"command", "eval"},
                                         {"checkpoint", checkpoint},
                                         {"data", data},
                                         {"split", split},
                                         {"run", to_json(cfg)}});
    }
    out << metrics.dump(2) << "\n";
    return kOk;
}

int cmd_gradcheck(const Common& common, const std::string& arch, double tolerance, std::ostream& out) {
    const std::uint64_t seed = common.seed.value_or(0);
    GradCheckOptions opts;
    const nlohmann::json j = common.config_json();
    if (j.is_object()) {
        opts.step = j.value("step", opts.step);
        opts.floor = j.value("floor", opts.floor);
        tolerance = j.value("tolerance", tolerance);
    }
    const GradCheckCase c = make_gradcheck_case(architecture_from_string(arch), seed);
    const GradCheckResult r = grad_check(c.model, c.x, c.mask, c.labels, c.loss, opts);

    std::ostringstream line;
    line << "max_relative_error=" << std::setprecision(3) << r.max_relative_error << " worst=" << r.worst_parameter
         << "[" << r.worst_index << "] entries=" << r.entries_checked;
    out << line.str() << "\n";
    if (!common.out.empty()) {
        const fs::path dir = common.out;
        ensure_dir(dir);
        write_json(dir / "gradcheck.json", {{"max_relative_error", r.max_relative_error},
                                            {"worst_parameter", r.worst_parameter},
                                            {"worst_index", r.worst_index},
                                            {"entries_checked", r.entries_checked},
                                            {"tolerance", tolerance}});
        write_json(dir / "config.json", {{"command", "gradcheck"},
                                         {"arch", to_string(architecture_from_string(arch))},
                                         {"seed", seed},
                                         {"step", opts.step},
                                         {"floor", opts.floor},
                                         {"tolerance", tolerance}});
    }
    if (!(r.max_relative_error < tolerance)) {
        throw NumericError("gradient check failed: max relative error " + format_number(r.max_relative_error) +
                           " >= " + format_number(tolerance));
    }
    return kOk;
}

void report(std::ostream& err, const char* code, int exit_code, const std::string& message) {
    err << "error: code=" << code << " exit=" << exit_code << " message=" << quoted(message) << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sequence models for early warning of ward deterioration", "wardseq"};
    app.require_subcommand(1);

    Common common;
    std::optional<std::size_t> patients, window, batch_size, epochs;
    std::optional<double> signal, window_hours;
    std::string input, data, split = "test", batch_split = "train", preset_name, dataset, method, checkpoint, aggregation, arch = "lstm";
    bool time_diff = false, inspect = false, features = false, quiet = false;
    double tolerance = 1e-4;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic records CSV");
    common.attach(synth, true);
    synth->add_option("--patients", patients, "Number of patients");
    synth->add_option("--signal", signal, "Signal strength (0 = no signal)");

    auto* pre = app.add_subcommand("preprocess", "Window, split, standardize and encode a records CSV");
    common.attach(pre, true);
    pre->add_option("--input", input, "Records CSV")->required();
    pre->add_option("--preset", preset_name, "Preset supplying the data settings");
    pre->add_option("--dataset", dataset, "windowed or granular")->check(CLI::IsMember({"windowed", "granular"}));
    pre->add_flag("--time-diff", time_diff, "Append hours since the previous record (granular)");
    pre->add_option("--window-hours", window_hours, "Width of the aggregation windows");

    auto* batch = app.add_subcommand("batch", "Build batches from a preprocessed split");
    common.attach(batch, false);
    batch->add_option("--data", data, "Preprocessed data directory")->required();
    batch->add_option("--split", batch_split, "train, validation or test");
    batch->add_option("--preset", preset_name, "Preset supplying the batching settings");
    batch->add_option("--method", method, "sliding, dense or smart")->check(CLI::IsMember({"sliding", "dense", "smart"}));
    batch->add_option("--window", window, "Window length W in steps");
    batch->add_option("--batch-size", batch_size, "Batch size B (smart batching)");
    batch->add_flag("--inspect", inspect, "Print the batch dump as JSON");
    batch->add_flag("--features", features, "Include base64 feature payloads in the dump");

    auto* tr = app.add_subcommand("train", "Train a model on a preprocessed directory");
    common.attach(tr, true);
    tr->add_option("--data", data, "Preprocessed data directory")->required();
    tr->add_option("--preset", preset_name, "exp1.1, exp1.2, exp1.3, exp2.1 or exp2.2");
    tr->add_option("--epochs", epochs, "Maximum number of epochs");
    tr->add_flag("--quiet", quiet, "Do not print per-epoch progress");

    auto* ev = app.add_subcommand("eval", "Score a split with a checkpoint");
    common.attach(ev, false);
    ev->add_option("--checkpoint", checkpoint, "checkpoint.json written by train")->required();
    ev->add_option("--data", data, "Preprocessed data directory")->required();
    ev->add_option("--split", split, "train, validation or test");
    ev->add_option("--aggregation", aggregation, "Encounter score: max, mean or last")
        ->check(CLI::IsMember({"max", "mean", "last"}));

    auto* gc = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
    common.attach(gc, false);
    gc->add_option("--arch", arch, "lstm or transformer")->check(CLI::IsMember({"lstm", "transformer"}));
    gc->add_option("--tolerance", tolerance, "Largest accepted relative error");

    std::vector<const char*> argv{"wardseq"};
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        report(err, "usage", kUsage, e.what());
        return kUsage;
    }

    try {
        if (*synth) return cmd_synth(common, patients, signal, out);
        if (*pre) return cmd_preprocess(common, input, preset_name, dataset, time_diff, window_hours, out);
        if (*batch)
            return cmd_batch(common, data, batch_split, preset_name, method, window, batch_size, inspect, features, out);
        if (*tr) return cmd_train(common, data, preset_name, epochs, quiet, out);
        if (*ev) return cmd_eval(common, checkpoint, data, split, aggregation, out);
        if (*gc) return cmd_gradcheck(common, arch, tolerance, out);
    } catch (const IoError& e) {
        report(err, "io", kIo, e.what());
        return kIo;
    } catch (const ParseError& e) {
        report(err, "parse", kInvalidInput, e.what());
        return kInvalidInput;
    } catch (const SchemaError& e) {
        report(err, "schema", kInvalidInput, e.what());
        return kInvalidInput;
    } catch (const ConfigError& e) {
        report(err, "config", kInvalidInput, e.what());
        return kInvalidInput;
    } catch (const ShapeError& e) {
        report(err, "shape", kShape, e.what());
        return kShape;
    } catch (const NumericError& e) {
        report(err, "numeric", kNumeric, e.what());
        return kNumeric;
    } catch (const MetricError& e) {
        report(err, "metric", kMetric, e.what());
        return kMetric;
    } catch (const std::exception& e) {
        report(err, "internal", kFailure, e.what());
        return kFailure;
    }
    return kUsage;
}

}  // namespace wardseq::cli
