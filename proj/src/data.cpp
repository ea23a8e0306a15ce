#include "seqcast/data.hpp"

#include "seqcast/errors.hpp"
#include "seqcast/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace seqcast {

void TimeSeries::validate() const {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) throw DataError("series value " + std::to_string(i) + " is not finite");
    }
    if (!timestamps.empty()) {
        if (timestamps.size() != values.size() || timestamp_text.size() != values.size()) {
            throw DataError("series timestamps and values differ in length");
        }
        for (std::size_t i = 1; i < timestamps.size(); ++i) {
            if (!(timestamps[i] > timestamps[i - 1])) {
                throw DataError("timestamps not strictly increasing at row " + std::to_string(i) + " (" +
                                timestamp_text[i] + ")");
            }
        }
    }
}

TimeSeries TimeSeries::slice(std::size_t begin, std::size_t end) const {
    TimeSeries out;
    out.sample_interval_seconds = sample_interval_seconds;
    out.values.assign(values.begin() + begin, values.begin() + end);
    if (has_timestamps()) {
        out.timestamps.assign(timestamps.begin() + begin, timestamps.begin() + end);
        out.timestamp_text.assign(timestamp_text.begin() + begin, timestamp_text.begin() + end);
    }
    return out;
}

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\"");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\"");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) fields.push_back(trim(item));
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (*begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

bool parse_fixed(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
    return ec == std::errc() && ptr == s.data() + pos + len;
}

}  // namespace

std::optional<double> parse_timestamp(const std::string& text) {
    if (auto n = parse_number(text)) return n;
    // YYYY-MM-DD[ T]HH:MM[:SS]
    const std::string_view s = text;
    int y, mo, d, h = 0, mi = 0, sec = 0;
    if (!parse_fixed(s, 0, 4, y) || s.size() < 10 || s[4] != '-' || !parse_fixed(s, 5, 2, mo) || s[7] != '-' ||
        !parse_fixed(s, 8, 2, d)) {
        return std::nullopt;
    }
    if (s.size() > 10) {
        if ((s[10] != ' ' && s[10] != 'T') || !parse_fixed(s, 11, 2, h) || s.size() < 16 || s[13] != ':' ||
            !parse_fixed(s, 14, 2, mi)) {
            return std::nullopt;
        }
        if (s.size() > 16) {
            if (s[16] != ':' || !parse_fixed(s, 17, 2, sec) || s.size() != 19) return std::nullopt;
        }
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) return std::nullopt;
    const auto days = sys_days(ymd).time_since_epoch().count();
    return static_cast<double>(days) * 86400.0 + h * 3600.0 + mi * 60.0 + sec;
}

std::string format_timestamp(double seconds) {
    using namespace std::chrono;
    const auto total = static_cast<long long>(std::floor(seconds));
    const long long day_count = total >= 0 ? total / 86400 : (total - 86399) / 86400;
    const long long rem = total - day_count * 86400;
    const year_month_day ymd{sys_days{days{day_count}}};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02lld:%02lld:%02lld", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), rem / 3600, (rem % 3600) / 60,
                  rem % 60);
    return buf;
}

CsvLoadResult parse_csv(const std::string& text, const CsvOptions& options) {
    CsvLoadResult result;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool first_content = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;

        const auto fields = split_fields(line);
        const std::size_t value_col = options.value_column.value_or(fields.size() - 1);
        std::optional<std::size_t> ts_col = options.timestamp_column;
        if (!ts_col && !options.value_column && fields.size() > 1) ts_col = 0;

        auto reject = [&](const std::string& reason) {
            if (options.strict) throw DataError("line " + std::to_string(line_no) + ": " + reason);
            result.skipped.push_back({line_no, reason});
        };

        if (value_col >= fields.size()) {
            if (first_content) {
                first_content = false;
                reject("missing value column " + std::to_string(value_col));
                continue;
            }
            reject("missing value column " + std::to_string(value_col));
            continue;
        }
        const auto value = parse_number(fields[value_col]);
        if (first_content) {
            first_content = false;
            if (!value) {
                result.header_skipped = true;
                continue;
            }
        }
        if (!value) {
            reject("non-numeric value '" + fields[value_col] + "'");
            continue;
        }
        if (!std::isfinite(*value)) {
            reject("non-finite value '" + fields[value_col] + "'");
            continue;
        }
        std::optional<double> ts;
        if (ts_col) {
            if (*ts_col >= fields.size()) {
                reject("missing timestamp column");
                continue;
            }
            ts = parse_timestamp(fields[*ts_col]);
            if (!ts) {
                reject("unparseable timestamp '" + fields[*ts_col] + "'");
                continue;
            }
            result.series.timestamp_text.push_back(fields[*ts_col]);
            result.series.timestamps.push_back(*ts);
        }
        result.series.values.push_back(*value);
    }
    if (result.series.values.empty()) throw DataError("no parseable data rows");
    if (result.series.timestamps.size() >= 2) {
        result.series.sample_interval_seconds = result.series.timestamps[1] - result.series.timestamps[0];
    }
    result.series.validate();
    return result;
}

CsvLoadResult load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open data file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_csv(buf.str(), options);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string format_csv(const TimeSeries& series) {
    std::string out = series.has_timestamps() ? "timestamp,value\n" : "value\n";
    char buf[64];
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series.has_timestamps()) {
            out += series.timestamp_text[i];
            out += ',';
        }
        std::snprintf(buf, sizeof buf, "%.17g\n", series.values[i]);
        out += buf;
    }
    return out;
}

void write_csv(const std::filesystem::path& path, const TimeSeries& series) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << format_csv(series);
    if (!out) throw DataError("failed writing " + path.string());
}

std::string CleanReport::to_json() const {
    nlohmann::ordered_json j;
    j["removed_count"] = removed_count;
    j["removed_rate"] = removed_rate;
    j["original_length"] = original_length;
    return j.dump();
}

std::pair<TimeSeries, CleanReport> clean_zeros(const TimeSeries& series) {
    if (series.size() == 0) throw DataError("clean_zeros: empty series");
    TimeSeries out;
    out.sample_interval_seconds = series.sample_interval_seconds;
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series.values[i] == 0.0) continue;
        out.values.push_back(series.values[i]);
        if (series.has_timestamps()) {
            out.timestamps.push_back(series.timestamps[i]);
            out.timestamp_text.push_back(series.timestamp_text[i]);
        }
    }
    CleanReport report;
    report.original_length = series.size();
    report.removed_count = series.size() - out.size();
    report.removed_rate = static_cast<double>(report.removed_count) / static_cast<double>(report.original_length);
    if (out.size() == 0) throw DataError("clean_zeros: every value is zero, nothing left");
    return {std::move(out), report};
}

SeriesSplit split_series(const TimeSeries& series, double train_frac, std::size_t min_part_length) {
    if (!(train_frac > 0.0 && train_frac < 1.0)) {
        throw ConfigError("split: train fraction must be in (0, 1), got " + std::to_string(train_frac));
    }
    const std::size_t n = series.size();
    const auto n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n)));
    if (n_train < min_part_length || n - n_train < min_part_length) {
        throw DataError("split: series of " + std::to_string(n) + " points too short; each part needs at least " +
                        std::to_string(min_part_length) + " points");
    }
    return {series.slice(0, n_train), series.slice(n_train, n)};
}

std::size_t window_count(std::size_t length, std::size_t in_len, std::size_t out_len, std::size_t stride) {
    if (stride == 0) throw ConfigError("window stride must be >= 1");
    if (length < in_len + out_len) return 0;
    return (length - in_len - out_len) / stride + 1;
}

WindowedDataset make_windows(std::span<const double> values, std::size_t in_len, std::size_t out_len,
                             std::size_t stride) {
    if (in_len == 0 || out_len == 0) throw ConfigError("window lengths must be >= 1");
    const std::size_t n = window_count(values.size(), in_len, out_len, stride);
    if (n == 0) {
        throw DataError("series of " + std::to_string(values.size()) + " points too short for windows of " +
                        std::to_string(in_len) + " + " + std::to_string(out_len));
    }
    WindowedDataset ds{Tensor({n, in_len, 1}), Tensor({n, out_len}), {}};
    ds.starts.reserve(n);
    for (std::size_t w = 0; w < n; ++w) {
        const std::size_t start = w * stride;
        ds.starts.push_back(start);
        for (std::size_t i = 0; i < in_len; ++i) ds.inputs.at(w, i, 0) = values[start + i];
        for (std::size_t j = 0; j < out_len; ++j) ds.targets.at(w, j) = values[start + in_len + j];
    }
    return ds;
}

WindowedDataset WindowedDataset::subset(std::size_t begin, std::size_t end) const {
    if (begin >= end || end > size()) throw DimensionError("WindowedDataset::subset: bad range");
    std::vector<std::size_t> rows(end - begin);
    std::iota(rows.begin(), rows.end(), begin);
    auto [x, y] = gather(rows);
    return {std::move(x), std::move(y), std::vector<std::size_t>(starts.begin() + begin, starts.begin() + end)};
}

std::pair<Tensor, Tensor> WindowedDataset::gather(std::span<const std::size_t> rows) const {
    const std::size_t in = in_len(), out = out_len();
    Tensor x({rows.size(), in, 1});
    Tensor y({rows.size(), out});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy_n(inputs.data() + rows[r] * in, in, x.data() + r * in);
        std::copy_n(targets.data() + rows[r] * out, out, y.data() + r * out);
    }
    return {std::move(x), std::move(y)};
}

SynthKind parse_synth_kind(const std::string& name) {
    if (name == "sine") return SynthKind::sine;
    if (name == "ar1") return SynthKind::ar1;
    if (name == "composite") return SynthKind::composite;
    throw ConfigError("unknown synthetic series kind '" + name + "' (expected sine, ar1, composite)");
}

std::string to_string(SynthKind kind) {
    switch (kind) {
        case SynthKind::sine: return "sine";
        case SynthKind::ar1: return "ar1";
        case SynthKind::composite: return "composite";
    }
    return "unknown";
}

TimeSeries synth_series(SynthKind kind, std::size_t length, const SynthParams& p, std::uint64_t seed) {
    if (length == 0) throw ConfigError("synth: length must be positive");
    if (kind != SynthKind::ar1 && !(p.period > 0.0)) throw ConfigError("synth: period must be positive");
    if (kind != SynthKind::sine) {
        if (!(std::abs(p.phi) < 1.0)) throw ConfigError("synth: |phi| must be < 1 for a stationary AR(1)");
        if (!(p.noise_sd >= 0.0)) throw ConfigError("synth: noise_sd must be non-negative");
    }
    if (p.zeros > length) throw ConfigError("synth: more zeros requested than points");
    if (!(p.interval_seconds > 0.0)) throw ConfigError("synth: interval must be positive");

    Rng rng(seed);
    Rng noise = rng.fork("noise");
    TimeSeries s;
    s.sample_interval_seconds = p.interval_seconds;
    s.values.resize(length);
    // Start the AR(1) from its stationary distribution.
    double ar = p.noise_sd / std::sqrt(1.0 - p.phi * p.phi) * noise.normal();
    for (std::size_t t = 0; t < length; ++t) {
        const double seasonal =
            p.offset + p.amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / p.period);
        if (t > 0) ar = p.phi * ar + p.noise_sd * noise.normal();
        switch (kind) {
            case SynthKind::sine: s.values[t] = seasonal; break;
            case SynthKind::ar1: s.values[t] = ar; break;
            case SynthKind::composite: s.values[t] = seasonal + ar; break;
        }
        s.timestamps.push_back(p.start_seconds + static_cast<double>(t) * p.interval_seconds);
        s.timestamp_text.push_back(format_timestamp(s.timestamps.back()));
    }
    if (p.zeros > 0) {
        Rng pick = rng.fork("zeros");
        std::vector<std::size_t> idx(length);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < p.zeros; ++i) {
            const std::size_t j = i + pick.uniform_index(length - i);
            std::swap(idx[i], idx[j]);
            s.values[idx[i]] = 0.0;
        }
    }
    return s;
}

}  // namespace seqcast
