#pragma once

#include "seqcast/data.hpp"
#include "seqcast/evaluation.hpp"
#include "seqcast/model.hpp"
#include "seqcast/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace seqcast::cli {

inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int {
    exit_ok = 0,
    exit_internal = 1,
    exit_usage = 2,      ///< bad flags, bad config values
    exit_data = 3,       ///< unreadable or mismatched input, IO failures
    exit_numerical = 4,  ///< divergence, degenerate scaling, undefined metrics
};

/// Everything `train` needs. Defaults are the reference experiment's settings.
struct ExperimentConfig {
    ModelConfig model;
    TrainConfig train;
    double train_frac = 0.9;
    std::string name;  ///< report identifier; empty means the model kind
    std::filesystem::path data;
    std::filesystem::path out_dir = ".";
};

struct EvaluateConfig {
    std::vector<std::filesystem::path> models;
    std::filesystem::path data;
    std::filesystem::path out_dir = ".";
    std::size_t step = 0;  ///< 0 means out_len
    bool retrain_per_fold = false;
    std::size_t retrain_epochs = 1;
    std::string format = "both";  ///< csv, json or both
    // Used only by the oracle stub, which has no model file.
    bool oracle_stub = false;
    std::size_t in_len = 10;
    std::size_t out_len = 10;
    double train_frac = 0.9;
    std::uint64_t seed = 42;
};

struct SynthConfig {
    SynthKind kind = SynthKind::composite;
    std::size_t length = 10000;
    SynthParams params;
    std::uint64_t seed = 42;
    std::filesystem::path out;
    std::filesystem::path out_dir = ".";
};

struct CleanConfig {
    std::filesystem::path data;
    std::filesystem::path out;  ///< empty means <out_dir>/clean.csv
    std::filesystem::path out_dir = ".";
};

struct CompareConfig {
    std::vector<std::filesystem::path> reports;
    std::filesystem::path out_dir = ".";
};

/// One configurable key. `apply` throws ConfigError on a bad value.
struct Setting {
    std::string key;
    std::string help;
    std::function<void(const std::string&)> apply;
    std::function<nlohmann::ordered_json()> show;
};

std::vector<Setting> experiment_settings(ExperimentConfig& config);
std::vector<Setting> evaluate_settings(EvaluateConfig& config);
std::vector<Setting> synth_settings(SynthConfig& config);
std::vector<Setting> clean_settings(CleanConfig& config);
std::vector<Setting> compare_settings(CompareConfig& config);

struct ConfigText {
    std::map<std::string, std::string> values;  ///< first occurrence wins
    std::vector<std::string> errors;            ///< malformed or duplicate lines
};

/// `key = value` lines; `#` starts a comment. Never throws; line problems are
/// returned so they can be reported with every other configuration error.
ConfigText parse_config_text(const std::string& text);

/// Applies config-file entries, then flag values (flags win). Keys known to
/// another command are ignored; malformed lines, unknown keys, bad values and
/// failed cross-field checks are all reported together in one ConfigError.
void resolve_settings(std::vector<Setting>& settings, const ConfigText& file,
                      const std::map<std::string, std::string>& flag_values,
                      const std::function<void(std::vector<std::string>&)>& validate = {});

/// Resolved settings as a JSON object (for manifests).
nlohmann::ordered_json settings_to_json(const std::vector<Setting>& settings);

/// SHA-256 of the file contents, lowercase hex.
std::string file_sha256(const std::filesystem::path& path);

/// Writes via a sibling temporary file and a rename, so readers never see a
/// partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace seqcast::cli
