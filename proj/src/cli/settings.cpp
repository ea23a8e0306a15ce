#include "seqcast/cli.hpp"

#include "seqcast/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace seqcast::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& text, const char* what) {
    const std::string s = trim(text);
    T value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("'" + text + "' is not " + what);
    }
    return value;
}

std::size_t parse_size(const std::string& s) { return parse_number<std::size_t>(s, "a non-negative integer"); }
std::uint64_t parse_u64(const std::string& s) { return parse_number<std::uint64_t>(s, "an unsigned 64-bit integer"); }

double parse_real(const std::string& s) {
    const double v = parse_number<double>(s, "a number");
    if (!std::isfinite(v)) throw ConfigError("'" + s + "' is not finite");
    return v;
}

bool parse_bool(const std::string& text) {
    std::string s = trim(text);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("'" + text + "' is not a boolean");
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_size(item));
    if (out.empty()) throw ConfigError("empty list");
    return out;
}

Setting size_setting(std::string key, std::string help, std::size_t& field) {
    return {std::move(key), std::move(help), [&field](const std::string& v) { field = parse_size(v); },
            [&field] { return nlohmann::ordered_json(field); }};
}

Setting u64_setting(std::string key, std::string help, std::uint64_t& field) {
    return {std::move(key), std::move(help), [&field](const std::string& v) { field = parse_u64(v); },
            [&field] { return nlohmann::ordered_json(field); }};
}

Setting real_setting(std::string key, std::string help, double& field) {
    return {std::move(key), std::move(help), [&field](const std::string& v) { field = parse_real(v); },
            [&field] { return nlohmann::ordered_json(field); }};
}

Setting bool_setting(std::string key, std::string help, bool& field) {
    return {std::move(key), std::move(help), [&field](const std::string& v) { field = parse_bool(v); },
            [&field] { return nlohmann::ordered_json(field); }};
}

Setting string_setting(std::string key, std::string help, std::string& field) {
    return {std::move(key), std::move(help), [&field](const std::string& v) { field = trim(v); },
            [&field] { return nlohmann::ordered_json(field); }};
}

Setting path_setting(std::string key, std::string help, std::filesystem::path& field) {
    return {std::move(key), std::move(help), [&field](const std::string& v) { field = trim(v); },
            [&field] { return nlohmann::ordered_json(field.generic_string()); }};
}

}  // namespace

std::vector<Setting> experiment_settings(ExperimentConfig& c) {
    auto& m = c.model;
    auto& t = c.train;
    return {
        {"model", "model kind: lstm, gru, bilstm, bigru, cnn, tcn, linear",
         [&m](const std::string& v) { m.kind = parse_model_kind(trim(v)); },
         [&m] { return nlohmann::ordered_json(std::string(to_string(m.kind))); }},
        size_setting("in_len", "input window length", m.in_len),
        size_setting("out_len", "forecast horizon", m.horizon),
        size_setting("units", "recurrent hidden units", m.units),
        size_setting("cnn_filters", "CNN filters", m.cnn.filters),
        size_setting("cnn_kernel", "CNN kernel size", m.cnn.kernel_size),
        size_setting("cnn_pool", "CNN max-pool size", m.cnn.pool_size),
        {"tcn_dilations", "TCN dilations, comma separated",
         [&m](const std::string& v) { m.tcn.dilations = parse_size_list(v); },
         [&m] { return nlohmann::ordered_json(m.tcn.dilations); }},
        size_setting("tcn_kernel", "TCN kernel size", m.tcn.kernel_size),
        size_setting("tcn_filters", "TCN filters", m.tcn.filters),
        real_setting("tcn_dropout", "TCN spatial dropout rate", m.tcn.dropout_rate),
        size_setting("epochs", "training epochs", t.epochs),
        size_setting("batch_size", "mini-batch size", t.batch_size),
        real_setting("validation_split", "fraction of training windows held out", t.validation_split),
        real_setting("lr", "Adam learning rate", t.adam.lr),
        real_setting("beta1", "Adam beta1", t.adam.beta1),
        real_setting("beta2", "Adam beta2", t.adam.beta2),
        real_setting("epsilon", "Adam epsilon", t.adam.epsilon),
        bool_setting("shuffle", "shuffle training windows every epoch", t.shuffle),
        u64_setting("seed", "root random seed", t.seed),
        real_setting("train_frac", "chronological train fraction", c.train_frac),
        string_setting("name", "model identifier in reports", c.name),
        path_setting("data", "input CSV", c.data),
        path_setting("out_dir", "output directory", c.out_dir),
    };
}

std::vector<Setting> evaluate_settings(EvaluateConfig& c) {
    return {
        path_setting("data", "input CSV", c.data),
        path_setting("out_dir", "output directory", c.out_dir),
        size_setting("step", "walk-forward advance per fold (0 = out_len)", c.step),
        bool_setting("retrain_per_fold", "fine-tune the model after every fold", c.retrain_per_fold),
        size_setting("retrain_epochs", "epochs per fold when retraining", c.retrain_epochs),
        string_setting("format", "report format: csv, json or both", c.format),
        size_setting("in_len", "input window length (oracle stub only)", c.in_len),
        size_setting("out_len", "forecast horizon (oracle stub only)", c.out_len),
        real_setting("train_frac", "chronological train fraction (oracle stub only)", c.train_frac),
        u64_setting("seed", "root random seed", c.seed),
    };
}

std::vector<Setting> synth_settings(SynthConfig& c) {
    auto& p = c.params;
    return {
        {"kind", "series kind: sine, ar1, composite", [&c](const std::string& v) { c.kind = parse_synth_kind(trim(v)); },
         [&c] { return nlohmann::ordered_json(to_string(c.kind)); }},
        size_setting("length", "number of points", c.length),
        real_setting("amplitude", "sine amplitude", p.amplitude),
        real_setting("period", "sine period in samples", p.period),
        real_setting("offset", "sine offset", p.offset),
        real_setting("phi", "AR(1) coefficient, |phi| < 1", p.phi),
        real_setting("noise_sd", "AR(1) innovation standard deviation", p.noise_sd),
        size_setting("zeros", "exact zeros injected at random positions", p.zeros),
        real_setting("interval", "sample interval in seconds", p.interval_seconds),
        real_setting("start", "first timestamp, seconds since the epoch", p.start_seconds),
        u64_setting("seed", "random seed", c.seed),
        path_setting("out", "output CSV (default <out_dir>/synth.csv)", c.out),
        path_setting("out_dir", "output directory", c.out_dir),
    };
}

std::vector<Setting> clean_settings(CleanConfig& c) {
    return {
        path_setting("data", "input CSV", c.data),
        path_setting("out", "cleaned CSV (default <out_dir>/clean.csv)", c.out),
        path_setting("out_dir", "output directory", c.out_dir),
    };
}

std::vector<Setting> compare_settings(CompareConfig& c) {
    return {path_setting("out_dir", "output directory", c.out_dir)};
}

ConfigText parse_config_text(const std::string& text) {
    ConfigText parsed;
    auto& values = parsed.values;
    auto& errors = parsed.errors;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back("line " + std::to_string(line_no) + ": expected key = value");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) {
            errors.push_back("line " + std::to_string(line_no) + ": empty key");
            continue;
        }
        if (!values.emplace(key, trim(line.substr(eq + 1))).second) {
            errors.push_back("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
    }
    for (auto& e : errors) e = "config file " + e;
    return parsed;
}

namespace {

const std::set<std::string>& all_known_keys() {
    static const std::set<std::string> keys = [] {
        std::set<std::string> k;
        ExperimentConfig e;
        EvaluateConfig v;
        SynthConfig s;
        for (const auto& x : experiment_settings(e)) k.insert(x.key);
        for (const auto& x : evaluate_settings(v)) k.insert(x.key);
        for (const auto& x : synth_settings(s)) k.insert(x.key);
        return k;
    }();
    return keys;
}

}  // namespace

void resolve_settings(std::vector<Setting>& settings, const ConfigText& file,
                      const std::map<std::string, std::string>& flag_values,
                      const std::function<void(std::vector<std::string>&)>& validate) {
    std::vector<std::string> errors = file.errors;
    auto apply = [&](const std::map<std::string, std::string>& values, const char* origin) {
        for (const auto& [key, value] : values) {
            auto it = std::find_if(settings.begin(), settings.end(), [&](const Setting& s) { return s.key == key; });
            if (it == settings.end()) {
                if (!all_known_keys().contains(key)) errors.push_back(std::string(origin) + ": unknown key '" + key + "'");
                continue;
            }
            try {
                it->apply(value);
            } catch (const Error& e) {
                errors.push_back(std::string(origin) + ": " + key + ": " + e.what());
            }
        }
    };
    apply(file.values, "config file");
    apply(flag_values, "flag");
    if (validate) validate(errors);
    if (!errors.empty()) {
        std::string msg = "invalid configuration (" + std::to_string(errors.size()) + " problem" +
                          (errors.size() == 1 ? "" : "s") + "):";
        for (const auto& e : errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
}

nlohmann::ordered_json settings_to_json(const std::vector<Setting>& settings) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& s : settings) j[s.key] = s.show();
    return j;
}

}  // namespace seqcast::cli
