#include "seqcast/cli.hpp"

#include "seqcast/errors.hpp"
#include "seqcast/rng.hpp"
#include "seqcast/serialization.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace seqcast::cli {

namespace {

using Clock = std::chrono::steady_clock;
using Json = nlohmann::ordered_json;

std::string hexfloat(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_meta_double(const std::map<std::string, std::string>& meta, const std::string& key) {
    const auto it = meta.find(key);
    if (it == meta.end()) throw DataError("model file missing metadata key '" + key + "'");
    char* end = nullptr;
    const double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0' || !std::isfinite(v)) {
        throw DataError("model file metadata '" + key + "' is not a number");
    }
    return v;
}

std::string utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

Json manifest_header(const char* command, const std::vector<Setting>& settings) {
    Json j;
    j["tool"] = "seqcast";
    j["version"] = kToolVersion;
    j["command"] = command;
    j["started_utc"] = utc_now();
    j["config"] = settings_to_json(settings);
    return j;
}

// Loads and cleans a data file the same way for train and evaluate.
struct PreparedData {
    std::string sha256;
    CleanReport clean;
    SeriesSplit split;
};

PreparedData prepare(const std::filesystem::path& path, double train_frac, std::size_t min_part) {
    PreparedData d;
    d.sha256 = file_sha256(path);
    auto [series, report] = clean_zeros(load_csv(path).series);
    d.clean = report;
    d.split = split_series(series, train_frac, min_part);
    return d;
}

Json data_json(const std::filesystem::path& path, const PreparedData& d) {
    Json j;
    j["path"] = path.generic_string();
    j["sha256"] = d.sha256;
    j["original_points"] = d.clean.original_length;
    j["zeros_removed"] = d.clean.removed_count;
    j["train_points"] = d.split.train.size();
    j["test_points"] = d.split.test.size();
    return j;
}

// ---- synth ----

int cmd_synth(SynthConfig& c, std::ostream& out) {
    const TimeSeries series = synth_series(c.kind, c.length, c.params, c.seed);
    const auto path = c.out.empty() ? c.out_dir / "synth.csv" : c.out;
    if (path.has_parent_path()) ensure_dir(path.parent_path());
    write_file_atomic(path, format_csv(series));
    out << "wrote " << series.size() << " points to " << path.generic_string() << '\n';
    return exit_ok;
}

// ---- clean ----

int cmd_clean(CleanConfig& c, std::ostream& out) {
    const auto loaded = load_csv(c.data);
    auto [series, report] = clean_zeros(loaded.series);
    const auto path = c.out.empty() ? c.out_dir / "clean.csv" : c.out;
    if (path.has_parent_path()) ensure_dir(path.parent_path());
    write_file_atomic(path, format_csv(series));
    out << report.to_json() << '\n';
    return exit_ok;
}

// ---- train ----

int cmd_train(ExperimentConfig& c, const std::vector<Setting>& settings, std::ostream& out, std::ostream& err) {
    const auto started = Clock::now();
    Json manifest = manifest_header("train", settings);

    const auto& mc = c.model;
    const PreparedData data = prepare(c.data, c.train_frac, mc.in_len + mc.horizon);
    const Scaler scaler = Scaler::fit(data.split.train.values);
    const auto scaled = scaler.apply(data.split.train.values);
    const WindowedDataset windows = make_windows(scaled, mc.in_len, mc.horizon);

    Rng init = Rng(c.train.seed).fork("init");
    auto model = make_model(mc, init);
    const std::string name = c.name.empty() ? std::string(to_string(mc.kind)) : c.name;

    std::vector<double> epoch_seconds;
    const TrainHistory history =
        train(*model, windows, c.train, [&](const EpochRecord& rec, Forecaster&) {
            err << name << " epoch " << rec.epoch << '/' << c.train.epochs << " train_loss=" << rec.train_loss;
            if (rec.val_loss) err << " val_loss=" << *rec.val_loss;
            err << '\n';
            epoch_seconds.push_back(rec.seconds);
            return true;
        });

    ensure_dir(c.out_dir);
    std::map<std::string, std::string> meta{
        {"name", name},
        {"scaler_min", hexfloat(scaler.min)},
        {"scaler_max", hexfloat(scaler.max)},
        {"train_frac", hexfloat(c.train_frac)},
        {"seed", std::to_string(c.train.seed)},
        {"data_sha256", data.sha256},
    };
    std::ostringstream params;
    write_param_file(params, model_to_param_file(*model, meta));
    const auto model_path = c.out_dir / "model.params";
    const auto history_path = c.out_dir / "history.csv";
    write_file_atomic(model_path, params.str());
    write_file_atomic(history_path, history.to_csv());

    manifest["data"] = data_json(c.data, data);
    manifest["model"] = {{"name", name},
                         {"kind", std::string(to_string(mc.kind))},
                         {"parameter_count", model->parameter_count()},
                         {"training_windows", training_window_count(windows.size(), c.train.validation_split)},
                         {"validation_windows",
                          windows.size() - training_window_count(windows.size(), c.train.validation_split)}};
    if (mc.kind == ModelKind::tcn) manifest["model"]["tcn_dilations"] = mc.tcn.dilations;
    manifest["scaler"] = {{"min", scaler.min}, {"max", scaler.max}};
    manifest["final_train_loss"] = history.epochs.empty() ? 0.0 : history.epochs.back().train_loss;
    manifest["timings"] = {{"epoch_seconds", epoch_seconds}, {"total_seconds", seconds_since(started)}};
    manifest["outputs"] = {model_path.generic_string(), history_path.generic_string()};
    write_file_atomic(c.out_dir / "train_manifest.json", manifest.dump(2) + "\n");

    out << "trained " << name << " (" << model->parameter_count() << " parameters, " << history.epochs.size()
        << " epochs) -> " << model_path.generic_string() << '\n';
    return exit_ok;
}

// ---- evaluate ----

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
    std::vector<double> v(a.begin(), a.end());
    v.insert(v.end(), b.begin(), b.end());
    return v;
}

HorizonReport evaluate_model_file(const EvaluateConfig& c, const std::filesystem::path& model_path,
                                  const std::string& data_sha, Json& models_json, std::ostream& err) {
    const ParamFile file = load_param_file(model_path);
    const auto sha = file.meta.find("data_sha256");
    if (sha == file.meta.end() || sha->second != data_sha) {
        throw DataError("data fingerprint mismatch: " + model_path.string() + " was trained on data " +
                        (sha == file.meta.end() ? std::string("<unknown>") : sha->second) + " but --data has " +
                        data_sha);
    }
    auto model = model_from_param_file(file);
    const auto& mc = model->config();
    const auto name_it = file.meta.find("name");
    const std::string name = name_it != file.meta.end() ? name_it->second : std::string(to_string(mc.kind));
    const Scaler scaler{parse_meta_double(file.meta, "scaler_min"), parse_meta_double(file.meta, "scaler_max")};
    if (!(scaler.max > scaler.min)) throw DataError(model_path.string() + ": degenerate scaler in model file");
    const double train_frac = parse_meta_double(file.meta, "train_frac");

    const PreparedData data = prepare(c.data, train_frac, mc.in_len + mc.horizon);
    const WalkForwardPlan plan{mc.in_len, mc.horizon, c.step ? c.step : mc.horizon, c.retrain_per_fold};

    RetrainHook retrain;
    const auto train_scaled = scaler.apply(data.split.train.values);
    std::uint64_t fold = 0;
    if (c.retrain_per_fold) {
        retrain = [&](std::span<const double> history) {
            const auto series = concat(train_scaled, history);
            TrainConfig tc;
            tc.epochs = c.retrain_epochs;
            tc.validation_split = 0.0;
            tc.seed = splitmix64(c.seed ^ ++fold);
            train(*model, make_windows(series, mc.in_len, mc.horizon), tc);
        };
    }
    const auto started = Clock::now();
    const auto result = walk_forward_evaluate(forecaster_predictor(*model), scaler, data.split.test.values, plan,
                                              name, retrain);
    err << name << ": " << result.folds.size() << " folds\n";
    models_json.push_back({{"path", model_path.generic_string()},
                           {"name", name},
                           {"kind", std::string(to_string(mc.kind))},
                           {"folds", result.folds.size()},
                           {"step", plan.step},
                           {"seconds", seconds_since(started)}});
    return result.report;
}

// Test hook: forecasts the true future, so every error must be zero.
HorizonReport evaluate_oracle(const EvaluateConfig& c, Json& models_json) {
    const PreparedData data = prepare(c.data, c.train_frac, c.in_len + c.out_len);
    const Scaler scaler = Scaler::fit(data.split.train.values);
    const auto truth = scaler.apply(data.split.test.values);
    const Predictor oracle = [&](std::span<const double> history) {
        std::vector<double> f(c.out_len, truth.back());
        for (std::size_t h = 0; h < c.out_len && history.size() + h < truth.size(); ++h) f[h] = truth[history.size() + h];
        return f;
    };
    const WalkForwardPlan plan{c.in_len, c.out_len, c.step ? c.step : c.out_len, false};
    const auto result = walk_forward_evaluate(oracle, scaler, data.split.test.values, plan, "oracle");
    models_json.push_back({{"name", "oracle"}, {"folds", result.folds.size()}, {"step", plan.step}});
    return result.report;
}

int cmd_evaluate(EvaluateConfig& c, const std::vector<Setting>& settings, std::ostream& out, std::ostream& err) {
    const auto started = Clock::now();
    Json manifest = manifest_header("evaluate", settings);
    const std::string data_sha = file_sha256(c.data);
    manifest["data"] = {{"path", c.data.generic_string()}, {"sha256", data_sha}};

    Json models_json = Json::array();
    std::vector<HorizonReport> reports;
    if (c.oracle_stub) reports.push_back(evaluate_oracle(c, models_json));
    for (const auto& path : c.models) {
        reports.push_back(evaluate_model_file(c, path, data_sha, models_json, err));
        for (std::size_t i = 0; i + 1 < reports.size(); ++i) {
            if (reports[i].model == reports.back().model) {
                throw ConfigError("two models share the name '" + reports.back().model +
                                  "'; give them distinct names at training time");
            }
        }
    }

    ensure_dir(c.out_dir);
    Json outputs = Json::array();
    if (c.format == "csv" || c.format == "both") {
        const auto p = c.out_dir / "report.csv";
        write_file_atomic(p, reports_to_csv(reports));
        outputs.push_back(p.generic_string());
    }
    if (c.format == "json" || c.format == "both") {
        const auto p = c.out_dir / "report.json";
        write_file_atomic(p, reports_to_json(reports));
        outputs.push_back(p.generic_string());
    }
    manifest["models"] = models_json;
    manifest["timings"] = {{"total_seconds", seconds_since(started)}};
    manifest["outputs"] = outputs;
    write_file_atomic(c.out_dir / "evaluate_manifest.json", manifest.dump(2) + "\n");

    out << reports_to_csv(reports);
    return exit_ok;
}

// ---- compare ----

int cmd_compare(CompareConfig& c, std::ostream& out) {
    std::vector<HorizonReport> reports;
    for (const auto& path : c.reports) {
        auto r = read_reports(path);
        if (r.empty()) throw DataError("report " + path.string() + " has no rows");
        reports.insert(reports.end(), r.begin(), r.end());
    }
    const Comparison comparison = compare_reports(reports);
    ensure_dir(c.out_dir);
    write_file_atomic(c.out_dir / "comparison.csv", comparison_to_csv(comparison));

    out << "mean across horizon steps\n";
    for (const auto& table : comparison.overall) {
        out << to_string(table.metric) << ":\n";
        for (const auto& e : table.entries) {
            out << "  " << std::setw(2) << e.rank << "  " << std::left << std::setw(12) << e.model << std::right
                << ' ' << std::setprecision(6) << e.value << '\n';
        }
    }
    return exit_ok;
}

// ---- wiring ----

std::string dashed(std::string key) {
    for (auto& ch : key)
        if (ch == '_') ch = '-';
    return key;
}

struct FlagSet {
    std::map<std::string, std::string> values;
    std::vector<std::pair<std::string, CLI::Option*>> options;
    std::string config_path;

    void add(CLI::App& app, const std::vector<Setting>& settings) {
        app.add_option("--config", config_path, "key = value settings file (flags override it)");
        for (const auto& s : settings) {
            options.emplace_back(s.key, app.add_option("--" + dashed(s.key), values[s.key], s.help));
        }
    }

    std::map<std::string, std::string> given() const {
        std::map<std::string, std::string> out;
        for (const auto& [key, opt] : options)
            if (opt->count() > 0) out[key] = values.at(key);
        return out;
    }

    ConfigText file_values() const {
        return config_path.empty() ? ConfigText{} : parse_config_text(read_text(config_path));
    }
};

template <class Fn>
void check(std::vector<std::string>& errors, Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        errors.emplace_back(e.what());
    }
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return exit_usage;
    if (dynamic_cast<const NumericalError*>(&e)) return exit_numerical;
    if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const DimensionError*>(&e)) return exit_data;
    if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return exit_data;
    return exit_internal;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"seqcast: multi-step time-series forecasting with recurrent and convolutional models"};
    app.name("seqcast");
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);
    app.footer(
        "Exit codes: 0 success, 1 internal error, 2 usage or configuration error, 3 data error, 4 numerical "
        "failure.");

    SynthConfig synth;
    auto synth_s = synth_settings(synth);
    FlagSet synth_f;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic series CSV");
    synth_f.add(*synth_cmd, synth_s);

    CleanConfig clean;
    auto clean_s = clean_settings(clean);
    FlagSet clean_f;
    auto* clean_cmd = app.add_subcommand("clean", "remove exact-zero readings; prints a JSON report");
    clean_f.add(*clean_cmd, clean_s);

    ExperimentConfig experiment;
    auto train_s = experiment_settings(experiment);
    FlagSet train_f;
    auto* train_cmd = app.add_subcommand("train", "clean, split, scale, window and train one model");
    train_f.add(*train_cmd, train_s);

    EvaluateConfig evaluate;
    auto eval_s = evaluate_settings(evaluate);
    FlagSet eval_f;
    std::vector<std::string> model_files;
    auto* eval_cmd = app.add_subcommand("evaluate", "walk-forward evaluation of trained models");
    eval_f.add(*eval_cmd, eval_s);
    eval_cmd->add_option("--model", model_files, "trained model file (repeatable)");
    eval_cmd->add_flag("--oracle-stub", evaluate.oracle_stub, "evaluate a perfect-foresight stub")->group("");

    CompareConfig compare;
    auto compare_s = compare_settings(compare);
    FlagSet compare_f;
    std::vector<std::string> report_files;
    auto* compare_cmd = app.add_subcommand("compare", "rank models across report files");
    compare_f.add(*compare_cmd, compare_s);
    compare_cmd->add_option("reports", report_files, "report CSV/JSON files")->required()->expected(2, -1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (synth_cmd->parsed()) {
            resolve_settings(synth_s, synth_f.file_values(), synth_f.given());
            return cmd_synth(synth, out);
        }
        if (clean_cmd->parsed()) {
            resolve_settings(clean_s, clean_f.file_values(), clean_f.given(), [&](std::vector<std::string>& errors) {
                if (clean.data.empty()) errors.emplace_back("data: an input file is required");
            });
            return cmd_clean(clean, out);
        }
        if (train_cmd->parsed()) {
            resolve_settings(train_s, train_f.file_values(), train_f.given(), [&](std::vector<std::string>& errors) {
                check(errors, [&] { experiment.model.validate(); });
                check(errors, [&] { experiment.train.validate(); });
                if (!(experiment.train_frac > 0.0 && experiment.train_frac < 1.0)) {
                    errors.emplace_back("train_frac must be in (0, 1)");
                }
                if (experiment.data.empty()) errors.emplace_back("data: an input file is required");
            });
            return cmd_train(experiment, train_s, out, err);
        }
        if (eval_cmd->parsed()) {
            for (const auto& m : model_files) evaluate.models.emplace_back(m);
            resolve_settings(eval_s, eval_f.file_values(), eval_f.given(), [&](std::vector<std::string>& errors) {
                if (evaluate.models.empty() && !evaluate.oracle_stub) errors.emplace_back("at least one --model is required");
                if (evaluate.data.empty()) errors.emplace_back("data: an input file is required");
                if (evaluate.format != "csv" && evaluate.format != "json" && evaluate.format != "both") {
                    errors.emplace_back("format must be csv, json or both");
                }
                if (evaluate.retrain_epochs == 0) errors.emplace_back("retrain_epochs must be >= 1");
                if (evaluate.in_len == 0 || evaluate.out_len == 0) errors.emplace_back("in_len and out_len must be >= 1");
                if (!(evaluate.train_frac > 0.0 && evaluate.train_frac < 1.0)) {
                    errors.emplace_back("train_frac must be in (0, 1)");
                }
            });
            return cmd_evaluate(evaluate, eval_s, out, err);
        }
        if (compare_cmd->parsed()) {
            for (const auto& r : report_files) compare.reports.emplace_back(r);
            resolve_settings(compare_s, compare_f.file_values(), compare_f.given());
            return cmd_compare(compare, out);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return exit_internal;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.push_back("seqcast");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace seqcast::cli
