// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "growprune/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "growprune/checkpoint.hpp"
#include "growprune/errors.hpp"
#include "growprune/metrics.hpp"
#include "growprune/random.hpp"
#include "growprune/sparsity.hpp"

namespace growprune {

namespace {

using nlohmann::json;

constexpr std::uint64_t kModelStream = 1;
constexpr std::uint64_t kMaskStream = 2;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            throw ConfigError("unknown configuration key '" + (where.empty() ? key : where + "." + key) + "'");
        }
    }
}

json read_json(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw DataError(std::string("cannot open ") + what + " " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed ") + what + " " + path.string() + ": " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

void claim_output_dir(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (fs::exists(dir) && (!fs::is_directory(dir) || !fs::is_empty(dir))) {
        throw ConfigError("output directory " + dir.string() + " already exists and is not empty");
    }
    fs::create_directories(dir);
}

bool is_comparison_scheme(const std::string& s) {
    return s == "pruning_only" || s == "growth_only" || s == "dsd" || s == "alternate";
}

EvalResult evaluate_stream(const ModelState& state, BatchSource& source) {
    EvalResult total;
    double loss = 0.0;
    while (auto b = source.next()) {
        const EvalResult r = evaluate(state, std::span<const MiniBatch>(&*b, 1));
        loss += r.ce * static_cast<double>(r.samples);
        total.samples += r.samples;
        total.correct += r.correct;
        total.positives += r.positives;
    }
    if (total.samples > 0) {
        total.ce = loss / static_cast<double>(total.samples);
        total.accuracy = static_cast<double>(total.correct) / static_cast<double>(total.samples);
    }
    return total;
}

json relative_json(double experimental, double baseline) {
    const RelativeMetric m = relative_metric(experimental, baseline);
    return {{"percent", m.percent}, {"significant", m.significant}};
}

}  // namespace

// --- configuration ---------------------------------------------------------

void RunConfig::validate() const {
    model.validate();
    optimizer.validate();
    if (data.source != "synthetic" && data.source != "criteo") {
        throw ConfigError("data.source must be 'synthetic' or 'criteo'");
    }
    if (data.source == "criteo") {
        if (data.path.empty()) throw ConfigError("data.path is required for criteo input");
        if (model.num_continuous != kCriteoContinuous || model.num_categorical != kCriteoCategorical) {
            throw ConfigError("criteo input needs 13 continuous and 26 categorical features");
        }
    } else {
        if (data.train_samples == 0) throw ConfigError("data.train_samples must be positive");
        data.drift.validate();
    }
    if (!(data.test_fraction >= 0.0 && data.test_fraction < 1.0)) {
        throw ConfigError("data.test_fraction must lie in [0, 1)");
    }
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (score_window_batches == 0) throw ConfigError("sparsity.score_window_batches must be positive");
    const PhasePlan p = plan();
    if (!prunable_layers.empty()) resolve_prunable_layers(model, prunable_layers);
    if (!schedule.sweep.empty()) {
        if (p.scheme != Scheme::InitialCapacity) throw ConfigError("schedule.sweep requires scheme initial_capacity");
        for (double f : schedule.sweep) {
            if (!(f > 0.0 && f <= 1.0)) throw ConfigError("schedule.sweep entries must lie in (0, 1]");
        }
    }
    if (async.staleness < 0) throw ConfigError("async.staleness must be non-negative");
    if (async.workers == 0) throw ConfigError("async.workers must be positive");
    if (async.growth_init != "zero" && async.growth_init != "constant") {
        throw ConfigError("async.growth_init must be 'zero' or 'constant'");
    }
    if (async.enabled && schedule.sweep.empty() && p.growth_boundaries() == 0) {
        throw ConfigError("async runs need a phase plan with at least one growth event");
    }
}

PhasePlan RunConfig::plan() const {
    const Scheme s = parse_scheme(schedule.scheme);
    switch (s) {
        case Scheme::InitialCapacity:
            return make_initial_capacity_plan(schedule.initial_fraction, schedule.warmup);
        case Scheme::Alternate:
            if (!schedule.sparse_intervals.empty()) return make_alternate_plan(schedule.beta, schedule.sparse_intervals);
            return make_plan(s, schedule.beta, schedule.sparse_fraction);
        default:
            return make_plan(s, schedule.beta, schedule.sparse_fraction);
    }
}

TrainOptions RunConfig::train_options(std::uint64_t total_samples) const {
    TrainOptions o;
    o.plan = plan();
    o.optimizer = optimizer;
    if (!prunable_layers.empty()) o.prunable_layers = resolve_prunable_layers(model, prunable_layers);
    o.score_window_batches = score_window_batches;
    o.batch_size = batch_size;
    o.total_samples = total_samples;
    o.window_size = window_size;
    o.mask_seed = derive_seed(seed, kMaskStream);
    o.growth_init = async.growth_init == "constant" ? GrowthInit::Constant : GrowthInit::Zero;
    o.growth_constant = async.growth_constant;
    return o;
}

void to_json(json& j, const RunConfig& c) {
    json intervals = json::array();
    for (const auto& [a, b] : c.schedule.sparse_intervals) intervals.push_back({a, b});
    j = json{{"preset", c.preset},
             {"seed", c.seed},
             {"batch_size", c.batch_size},
             {"window_size", c.window_size},
             {"output_dir", c.output_dir.string()},
             {"baseline", c.baseline.string()},
             {"model", c.model},
             {"optimizer", c.optimizer},
             {"data",
              {{"source", c.data.source},
               {"path", c.data.path.string()},
               {"train_samples", c.data.train_samples},
               {"test_samples", c.data.test_samples},
               {"max_rows", c.data.max_rows},
               {"test_fraction", c.data.test_fraction},
               {"drift", c.data.drift}}},
             {"schedule",
              {{"scheme", c.schedule.scheme},
               {"beta", c.schedule.beta},
               {"sparse_fraction", c.schedule.sparse_fraction},
               {"sparse_intervals", intervals},
               {"initial_fraction", c.schedule.initial_fraction},
               {"warmup", c.schedule.warmup},
               {"sweep", c.schedule.sweep}}},
             {"sparsity", {{"prunable_layers", c.prunable_layers}, {"score_window_batches", c.score_window_batches}}},
             {"async",
              {{"enabled", c.async.enabled},
               {"workers", c.async.workers},
               {"staleness", c.async.staleness},
               {"growth_barrier", c.async.growth_barrier},
               {"growth_init", c.async.growth_init},
               {"growth_constant", c.async.growth_constant}}}};
}

void from_json(const json& j, RunConfig& c) {
    check_keys(j, {"preset", "seed", "batch_size", "window_size", "output_dir", "baseline", "model", "optimizer",
                   "data", "schedule", "sparsity", "async"},
               "");
    const RunConfig d;
    c.preset = j.value("preset", d.preset);
    c.seed = j.value("seed", d.seed);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.window_size = j.value("window_size", d.window_size);
    c.output_dir = j.value("output_dir", d.output_dir.string());
    c.baseline = j.value("baseline", std::string());

    const json model = j.value("model", json::object());
    check_keys(model, {"num_continuous", "num_categorical", "embedding_dim", "table_sizes", "table_size",
                       "bottom_dims", "top_dims"},
               "model");
    c.model = model.get<ModelConfig>();

    const json opt = j.value("optimizer", json::object());
    check_keys(opt, {"kind", "learning_rate", "adagrad_epsilon", "regrow_state", "flush_to_zero"}, "optimizer");
    c.optimizer = opt.get<OptimizerConfig>();

    const json data = j.value("data", json::object());
    check_keys(data, {"source", "path", "train_samples", "test_samples", "max_rows", "test_fraction", "drift"},
               "data");
    c.data.source = data.value("source", d.data.source);
    c.data.path = data.value("path", std::string());
    c.data.train_samples = data.value("train_samples", d.data.train_samples);
    c.data.test_samples = data.value("test_samples", d.data.test_samples);
    c.data.max_rows = data.value("max_rows", d.data.max_rows);
    c.data.test_fraction = data.value("test_fraction", d.data.test_fraction);
    if (data.contains("drift")) {
        const json& drift = data.at("drift");
        check_keys(drift, {"seed", "feature_map", "segments"}, "data.drift");
        if (drift.contains("feature_map")) {
            check_keys(drift.at("feature_map"), {"hidden_units", "code_pairs", "cross_terms", "block_scales"},
                       "data.drift.feature_map");
        }
        for (const json& seg : drift.value("segments", json::array())) {
            check_keys(seg, {"begin", "end", "zipf_exponent", "active_categories", "scale", "bias",
                             "orthogonal_to_previous", "weights"},
                       "data.drift.segments[]");
        }
        c.data.drift = drift.get<DriftSpec>();
    }

    const json sch = j.value("schedule", json::object());
    check_keys(sch, {"scheme", "beta", "sparse_fraction", "sparse_intervals", "initial_fraction", "warmup", "sweep"},
               "schedule");
    c.schedule.scheme = sch.value("scheme", d.schedule.scheme);
    c.schedule.beta = sch.value("beta", d.schedule.beta);
    c.schedule.sparse_fraction = sch.value("sparse_fraction", d.schedule.sparse_fraction);
    c.schedule.sparse_intervals.clear();
    for (const json& iv : sch.value("sparse_intervals", json::array())) {
        if (!iv.is_array() || iv.size() != 2) throw ConfigError("schedule.sparse_intervals entries are [begin, end]");
        c.schedule.sparse_intervals.emplace_back(iv[0].get<double>(), iv[1].get<double>());
    }
    c.schedule.initial_fraction = sch.value("initial_fraction", d.schedule.initial_fraction);
    c.schedule.warmup = sch.value("warmup", d.schedule.warmup);
    c.schedule.sweep = sch.value("sweep", std::vector<double>{});

    const json sp = j.value("sparsity", json::object());
    check_keys(sp, {"prunable_layers", "score_window_batches"}, "sparsity");
    c.prunable_layers = sp.value("prunable_layers", std::vector<std::string>{});
    c.score_window_batches = sp.value("score_window_batches", d.score_window_batches);

    const json as = j.value("async", json::object());
    check_keys(as, {"enabled", "workers", "staleness", "growth_barrier", "growth_init", "growth_constant"}, "async");
    c.async.enabled = as.value("enabled", d.async.enabled);
    c.async.workers = as.value("workers", d.async.workers);
    c.async.staleness = as.value("staleness", d.async.staleness);
    c.async.growth_barrier = as.value("growth_barrier", d.async.growth_barrier);
    c.async.growth_init = as.value("growth_init", d.async.growth_init);
    c.async.growth_constant = as.value("growth_constant", d.async.growth_constant);
}

std::vector<std::string> preset_names() {
    return {"dlrm-kaggle", "alternate-20pct", "dsd-30-40-30", "industrial-splits", "initcap-sweep"};
}

json preset(const std::string& name) {
    const json dlrm = {{"model", ModelConfig{}},
                       {"optimizer", {{"kind", "sgd"}, {"learning_rate", 0.1}}},
                       {"batch_size", 128}};
    json p = dlrm;
    if (name == "dlrm-kaggle") {
        p["schedule"] = {{"scheme", "baseline"}};
    } else if (name == "alternate-20pct") {
        p["schedule"] = {{"scheme", "alternate"}, {"beta", 0.7}, {"sparse_fraction", 0.4}};
    } else if (name == "dsd-30-40-30") {
        p["schedule"] = {{"scheme", "dsd"}, {"beta", 0.7}, {"sparse_fraction", 0.4}};
    } else if (name == "industrial-splits") {
        p["optimizer"] = {{"kind", "adagrad"}, {"learning_rate", 0.1}};
        p["schedule"] = {{"scheme", "alternate"}, {"beta", 0.3}, {"sparse_intervals", {{0.20, 0.35}, {0.50, 0.65}}}};
    } else if (name == "initcap-sweep") {
        p["schedule"] = {{"scheme", "initial_capacity"},
                         {"warmup", 0.1},
                         {"sweep", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}}};
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    p["preset"] = name;
    return p;
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::exception&) {
        value = text;
    }
    json* node = &doc;
    std::size_t pos = 0;
    while (true) {
        const auto dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
        if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        pos = dot + 1;
    }
}

RunConfig resolve_config(const json& file, const std::vector<std::string>& overrides) {
    try {
        if (!file.is_object()) throw ConfigError("configuration must be a JSON object");
        json cli = json::object();
        for (const auto& o : overrides) apply_override(cli, o);
        std::string preset_name = file.value("preset", std::string());
        if (cli.contains("preset")) preset_name = cli.at("preset").get<std::string>();

        json doc = RunConfig{};
        if (!preset_name.empty()) doc.merge_patch(preset(preset_name));
        // Model dimensions given as a scalar replace the defaults' per-feature list.
        auto drop_sizes = [&](const json& layer) {
            if (layer.contains("model") && layer.at("model").contains("table_size")) doc["model"].erase("table_sizes");
        };
        drop_sizes(file);
        doc.merge_patch(file);
        drop_sizes(cli);
        for (const auto& o : overrides) apply_override(doc, o);
        doc["preset"] = preset_name;
        RunConfig c = doc.get<RunConfig>();
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json file;
    try {
        file = json::parse(in, nullptr, true, true);
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return resolve_config(file, overrides);
}

// --- runs ------------------------------------------------------------------

namespace {

struct Streams {
    std::unique_ptr<BatchSource> train;
    std::unique_ptr<BatchSource> test;
    std::uint64_t train_samples = 0;
    std::uint64_t test_samples = 0;
};

Streams open_streams(const RunConfig& c) {
    Streams s;
    if (c.data.source == "criteo") {
        std::uint64_t rows = count_lines(c.data.path);
        if (c.data.max_rows != 0) rows = std::min(rows, c.data.max_rows);
        const auto test = static_cast<std::uint64_t>(std::llround(static_cast<double>(rows) * c.data.test_fraction));
        s.train_samples = rows - test;
        s.test_samples = test;
        if (s.train_samples == 0) throw DataError("criteo file " + c.data.path.string() + " has no training rows");
        s.train = std::make_unique<CriteoReader>(c.data.path, c.model.table_sizes, c.batch_size, 0, s.train_samples);
        s.test = std::make_unique<CriteoReader>(c.data.path, c.model.table_sizes, c.batch_size, s.train_samples, rows);
        return s;
    }
    StreamShape shape;
    shape.num_continuous = c.model.num_continuous;
    shape.table_sizes = c.model.table_sizes;
    auto process = std::make_shared<const SyntheticProcess>(c.data.drift, shape);
    s.train_samples = c.data.train_samples;
    s.test_samples = c.data.test_samples != 0 ? c.data.test_samples : c.data.train_samples / 6;
    s.train = std::make_unique<SyntheticStream>(process, s.train_samples, c.batch_size);
    s.test = std::make_unique<SyntheticStream>(process, s.test_samples, c.batch_size, SyntheticStream::Part::Test);
    return s;
}

json load_summary(const std::filesystem::path& p) {
    const auto file = std::filesystem::is_directory(p) ? p / "summary.json" : p;
    return read_json(file, "run summary");
}

}  // namespace

RunOutcome run(const RunConfig& config) {
    config.validate();
    if (!config.schedule.sweep.empty()) throw ConfigError("sweep configurations are run with run_sweep");
    Streams streams = open_streams(config);
    const TrainOptions options = config.train_options(streams.train_samples);

    claim_output_dir(config.output_dir);
    const auto& dir = config.output_dir;
    write_text(dir / "config.json", json(config).dump(2) + "\n");

    ModelState initial = ModelState::init(config.model, derive_seed(config.seed, kModelStream));
    TrainResult result;
    std::optional<AsyncResult> async;
    if (config.async.enabled) {
        AsyncOptions ao;
        ao.workers = config.async.workers;
        ao.staleness = static_cast<std::size_t>(config.async.staleness);
        ao.growth_barrier = config.async.growth_barrier;
        async = run_async(std::move(initial), *streams.train, options, ao);
        result = std::move(async->train);
        std::ofstream trace(dir / "trace.csv");
        write_trace_csv(trace, *async);
    } else {
        result = train(std::move(initial), *streams.train, options);
    }
    if (result.samples_trained == 0) throw DataError("the training stream delivered no samples");

    const EvalResult test = [&] {
        const DenormalGuard guard(config.optimizer.flush_to_zero);
        return evaluate_stream(result.state, *streams.test);
    }();

    {
        std::ofstream events(dir / "events.jsonl");
        std::vector<std::string> names;
        for (std::size_t l : options.prunable_layers.empty() ? default_prunable_layers(config.model)
                                                             : options.prunable_layers) {
            names.push_back(result.state.layers[l].name);
        }
        events << json{{"plan", options.plan.to_json()},
                       {"total_samples", options.total_samples},
                       {"batch_size", options.batch_size},
                       {"prunable_layers", names}}
                      .dump()
               << '\n';
        for (const auto& e : result.events) events << e.to_json().dump() << '\n';
    }
    {
        std::ofstream metrics(dir / "metrics.csv");
        result.ledger.write_csv(metrics);
    }
    save_checkpoint(dir / "final.ckpt", result.state);

    const std::vector<std::size_t> prunable =
        options.prunable_layers.empty() ? default_prunable_layers(config.model) : options.prunable_layers;
    const ModelState dense_shape = ModelState::zeros(config.model);
    const FlopsBreakdown dense = per_sample_flops(dense_shape, prunable);
    const double dense_total = static_cast<double>(dense.total()) * static_cast<double>(result.samples_trained);
    const std::uint64_t flops = result.ledger.cumulative_flops();

    std::map<std::string, std::size_t> counts;
    for (const auto& e : result.events) ++counts[e.kind];

    json summary;
    summary["scheme"] = to_string(options.plan.scheme);
    summary["preset"] = config.preset;
    summary["seed"] = config.seed;
    summary["plan"] = options.plan.to_json();
    summary["samples"] = {{"train", result.samples_trained}, {"test", test.samples}};
    summary["train"] = {{"accuracy", result.progressive.accuracy}, {"ce", result.progressive.ce}};
    json test_json = {{"accuracy", test.accuracy}, {"ce", test.ce}};
    if (test.samples > 0) {
        const double r = test.positives / static_cast<double>(test.samples);
        if (r > 0.0 && r < 1.0) {
            test_json["nce"] = test.ce / -(r * std::log(r) + (1.0 - r) * std::log(1.0 - r));
        }
        test_json["base_rate"] = r;
    }
    summary["test"] = test_json;
    summary["flops"] = {{"total", flops},
                        {"dense_per_sample", dense.total()},
                        {"dense_fc_per_sample", dense.fc()},
                        {"prunable_fc_per_sample", dense.prunable_fc},
                        {"prunable_share", static_cast<double>(dense.prunable_fc) / static_cast<double>(dense.total())},
                        {"fc_share", static_cast<double>(dense.fc()) / static_cast<double>(dense.total())},
                        {"relative_saving", 1.0 - static_cast<double>(flops) / dense_total}};
    summary["events"] = counts;
    summary["final_dense"] = result.state.dense();
    summary["dense_compliant"] = options.plan.dense_compliant();
    if (!result.state.dense()) summary["flags"] = json::array({"final_model_sparse"});

    if (!config.baseline.empty()) {
        const json base = load_summary(config.baseline);
        summary["relative"] = {
            {"baseline", config.baseline.string()},
            {"train_accuracy", relative_json(result.progressive.accuracy, base.at("train").at("accuracy"))},
            {"test_accuracy", relative_json(test.accuracy, base.at("test").at("accuracy"))},
            {"test_ce", relative_json(test.ce, base.at("test").at("ce"))},
            {"flops", relative_json(static_cast<double>(flops), base.at("flops").at("total").get<double>())}};
    }
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    return {dir, summary};
}

std::vector<RunOutcome> run_sweep(const RunConfig& config) {
    config.validate();
    if (config.schedule.sweep.empty()) throw ConfigError("schedule.sweep is empty");
    claim_output_dir(config.output_dir);
    std::vector<RunOutcome> out;
    std::ostringstream csv;
    csv << std::setprecision(17);
    csv << "initial_fraction,train_accuracy,test_accuracy,test_ce,total_flops\n";
    std::vector<double> caps;
    std::vector<double> test_acc;
    std::vector<double> train_acc;
    for (double f : config.schedule.sweep) {
        RunConfig c = config;
        c.schedule.sweep.clear();
        c.schedule.initial_fraction = f;
        std::ostringstream name;
        name << "cap_" << std::setw(3) << std::setfill('0') << std::llround(f * 100.0);
        c.output_dir = config.output_dir / name.str();
        RunOutcome r = run(c);
        caps.push_back(f);
        train_acc.push_back(r.summary["train"]["accuracy"].get<double>());
        test_acc.push_back(r.summary["test"]["accuracy"].get<double>());
        csv << f << ',' << train_acc.back() << ',' << test_acc.back() << ','
            << r.summary["test"]["ce"].get<double>() << ',' << r.summary["flops"]["total"].get<std::uint64_t>()
            << '\n';
        out.push_back(std::move(r));
    }
    write_text(config.output_dir / "sweep.csv", csv.str());
    json sweep = {{"initial_fractions", caps}, {"train_accuracy", train_acc}, {"test_accuracy", test_acc}};
    if (caps.size() >= 2) {
        sweep["spearman_test_accuracy"] = spearman(caps, test_acc);
        sweep["spearman_train_accuracy"] = spearman(caps, train_acc);
    }
    write_text(config.output_dir / "sweep.json", sweep.dump(2) + "\n");
    return out;
}

std::vector<RunOutcome> execute(const RunConfig& config) {
    if (!config.schedule.sweep.empty()) return run_sweep(config);
    return {run(config)};
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ShapeError("spearman: need two equal-length series of length >= 2");
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

// --- comparison ------------------------------------------------------------

json Comparison::to_json() const {
    json rs = json::array();
    for (const auto& r : rows) {
        rs.push_back({{"run", r.run},
                      {"scheme", r.scheme},
                      {"beta", r.beta},
                      {"sparse_fraction", r.sparse_fraction},
                      {"test_accuracy", r.test_accuracy},
                      {"relative_accuracy_percent", r.relative_accuracy},
                      {"significant", r.significant},
                      {"test_ce", r.test_ce},
                      {"relative_ce_percent", r.relative_ce},
                      {"training_flops", r.flops},
                      {"relative_flops_percent", r.relative_flops}});
    }
    return {{"rows", rs}, {"equal_flops", equal_flops}, {"flops_mismatches", flops_mismatches}};
}

void Comparison::write_csv(std::ostream& out) const {
    out << "run,scheme,beta,sparse_fraction,test_accuracy,relative_accuracy_percent,significant,test_ce,"
           "relative_ce_percent,training_flops,relative_flops_percent\n";
    out << std::setprecision(10);
    for (const auto& r : rows) {
        out << r.run << ',' << r.scheme << ',' << r.beta << ',' << r.sparse_fraction << ',' << r.test_accuracy << ','
            << r.relative_accuracy << ',' << (r.significant ? 1 : 0) << ',' << r.test_ce << ',' << r.relative_ce
            << ',' << r.flops << ',' << r.relative_flops << '\n';
    }
}

Comparison compare(const std::filesystem::path& baseline, const std::vector<std::filesystem::path>& runs) {
    struct Loaded {
        std::string name;
        json config;
        json summary;
    };
    auto load = [](const std::filesystem::path& dir) {
        if (!std::filesystem::is_directory(dir)) throw DataError("run directory " + dir.string() + " not found");
        return Loaded{dir.string(), read_json(dir / "config.json", "run config"),
                      read_json(dir / "summary.json", "run summary")};
    };
    try {
        const Loaded base = load(baseline);
        std::vector<Loaded> all{base};
        for (const auto& r : runs) all.push_back(load(r));

        Comparison cmp;
        const double base_acc = base.summary.at("test").at("accuracy").get<double>();
        const double base_ce = base.summary.at("test").at("ce").get<double>();
        const auto base_flops = base.summary.at("flops").at("total").get<std::uint64_t>();
        std::map<std::pair<double, double>, std::vector<std::size_t>> groups;
        for (const Loaded& l : all) {
            if (l.config.at("data") != base.config.at("data") || l.config.at("seed") != base.config.at("seed") ||
                l.summary.at("samples") != base.summary.at("samples")) {
                throw DataError("run " + l.name + " does not share data, seed and stream length with the baseline " +
                                base.name);
            }
            ComparisonRow row;
            row.run = l.name;
            row.scheme = l.summary.at("scheme").get<std::string>();
            row.beta = l.summary.at("plan").at("beta").get<double>();
            row.sparse_fraction = l.summary.at("plan").at("sparse_fraction").get<double>();
            row.test_accuracy = l.summary.at("test").at("accuracy").get<double>();
            const RelativeMetric ra = relative_metric(row.test_accuracy, base_acc);
            row.relative_accuracy = ra.percent;
            row.significant = ra.significant;
            row.test_ce = l.summary.at("test").at("ce").get<double>();
            row.relative_ce = relative_metric(row.test_ce, base_ce).percent;
            row.flops = l.summary.at("flops").at("total").get<std::uint64_t>();
            row.relative_flops = relative_metric(static_cast<double>(row.flops), static_cast<double>(base_flops)).percent;
            if (is_comparison_scheme(row.scheme)) {
                // Group on rounded values so 0.4 and 0.39999999999999997 coincide.
                const auto key = std::make_pair(std::round(row.beta * 1e9) / 1e9,
                                                std::round(row.sparse_fraction * 1e9) / 1e9);
                groups[key].push_back(cmp.rows.size());
            }
            cmp.rows.push_back(std::move(row));
        }
        for (const auto& [key, members] : groups) {
            for (std::size_t m : members) {
                if (cmp.rows[m].flops != cmp.rows[members.front()].flops) {
                    cmp.equal_flops = false;
                    cmp.flops_mismatches.push_back(cmp.rows[m].run + " vs " + cmp.rows[members.front()].run);
                }
            }
        }
        return cmp;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed run archive: ") + e.what());
    }
}

nlohmann::json inspect_checkpoint(const std::filesystem::path& path) {
    return describe_checkpoint(load_checkpoint(path));
}

}  // namespace growprune
