#pragma once

#include "seqcast/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace seqcast {

/// A univariate series. Timestamps are kept verbatim from the source file
/// (for writing back out) and as seconds since the Unix epoch.
struct TimeSeries {
    std::vector<double> values;
    std::vector<std::string> timestamp_text;  ///< empty when the series has no timestamps
    std::vector<double> timestamps;           ///< seconds; same length as timestamp_text
    double sample_interval_seconds = 1800.0;

    std::size_t size() const noexcept { return values.size(); }
    bool has_timestamps() const noexcept { return !timestamps.empty(); }

    /// Throws DataError on non-finite values or non-increasing timestamps.
    void validate() const;
    TimeSeries slice(std::size_t begin, std::size_t end) const;
};

struct CsvOptions {
    /// Zero-based column index of the values; defaults to the last column.
    std::optional<std::size_t> value_column;
    /// Zero-based timestamp column; defaults to column 0 when a row has more
    /// than one column.
    std::optional<std::size_t> timestamp_column;
    /// When true, the first malformed row aborts the load.
    bool strict = true;
};

struct MalformedRow {
    std::size_t line;
    std::string reason;
};

struct CsvLoadResult {
    TimeSeries series;
    bool header_skipped = false;
    std::vector<MalformedRow> skipped;
};

/// Comma-separated, UTF-8, optional single header row (detected as a first
/// line whose value field does not parse as a number).
CsvLoadResult load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
CsvLoadResult parse_csv(const std::string& text, const CsvOptions& options = {});

/// Writes `timestamp,value` (or `value` when the series has no timestamps)
/// with a header row and 17 significant digits.
void write_csv(const std::filesystem::path& path, const TimeSeries& series);
std::string format_csv(const TimeSeries& series);

/// Parses "YYYY-MM-DD[ T]HH:MM[:SS]" or a plain number of seconds.
std::optional<double> parse_timestamp(const std::string& text);
std::string format_timestamp(double seconds);

struct CleanReport {
    std::size_t removed_count = 0;
    double removed_rate = 0.0;
    std::size_t original_length = 0;

    std::string to_json() const;
};

/// Deletes every exact-zero value (and its timestamp), joining the remaining
/// points across the gaps.
std::pair<TimeSeries, CleanReport> clean_zeros(const TimeSeries& series);

struct SeriesSplit {
    TimeSeries train;
    TimeSeries test;
};

/// Chronological split; train holds the first floor(train_frac * N) points.
/// Both parts must hold at least min_part_length points.
SeriesSplit split_series(const TimeSeries& series, double train_frac, std::size_t min_part_length);

/// Input/target window pairs. inputs [num_windows x in_len x 1],
/// targets [num_windows x out_len].
struct WindowedDataset {
    Tensor inputs;
    Tensor targets;
    std::vector<std::size_t> starts;

    std::size_t size() const noexcept { return starts.size(); }
    std::size_t in_len() const { return inputs.dim(1); }
    std::size_t out_len() const { return targets.dim(1); }
    /// Rows [begin, end) as a new dataset.
    WindowedDataset subset(std::size_t begin, std::size_t end) const;
    /// Gathers the given rows in order.
    std::pair<Tensor, Tensor> gather(std::span<const std::size_t> rows) const;
};

std::size_t window_count(std::size_t length, std::size_t in_len, std::size_t out_len, std::size_t stride);
WindowedDataset make_windows(std::span<const double> values, std::size_t in_len, std::size_t out_len,
                             std::size_t stride = 1);

enum class SynthKind { sine, ar1, composite };

SynthKind parse_synth_kind(const std::string& name);
std::string to_string(SynthKind kind);

struct SynthParams {
    double amplitude = 1.0;
    double period = 48.0;  ///< samples per cycle; 48 half-hour samples = one day
    double offset = 8.0;
    double phi = 0.95;       ///< AR(1) coefficient
    double noise_sd = 0.1;   ///< AR(1) innovation standard deviation
    std::size_t zeros = 0;   ///< exact zeros injected at random positions
    double interval_seconds = 1800.0;
    double start_seconds = 1343779200.0;  ///< 2012-08-01 00:00:00 UTC
};

///   sine:      offset + A sin(2 pi t / P)
///   ar1:       x_t = phi x_{t-1} + e_t,  e_t ~ N(0, noise_sd^2)  (no offset)
///   composite: sine + ar1 noise
TimeSeries synth_series(SynthKind kind, std::size_t length, const SynthParams& params, std::uint64_t seed);

}  // namespace seqcast
