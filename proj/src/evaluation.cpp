#include "seqcast/evaluation.hpp"

#include "seqcast/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace seqcast {

namespace {

void check_pair(std::span<const double> y, std::span<const double> yhat, const char* what) {
    if (y.size() != yhat.size()) {
        throw DimensionError(std::string(what) + ": length mismatch " + std::to_string(y.size()) + " vs " +
                             std::to_string(yhat.size()));
    }
    if (y.empty()) throw DataError(std::string(what) + ": empty input");
}

}  // namespace

double rmse(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y, yhat, "rmse");
    double ss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) ss += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    return std::sqrt(ss / static_cast<double>(y.size()));
}

double mae(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y, yhat, "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
    return s / static_cast<double>(y.size());
}

double r2(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y, yhat, "r2");
    if (y.size() < 2) throw NumericalError("r2: needs at least two observations");
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    if (!(ss_tot > 0.0)) throw NumericalError("r2: undefined for constant actuals");
    return 1.0 - ss_res / ss_tot;
}

void WalkForwardPlan::validate() const {
    if (in_len == 0 || out_len == 0) throw ConfigError("walk-forward in_len and out_len must be >= 1");
    if (step == 0) throw ConfigError("walk-forward step must be >= 1");
}

std::size_t fold_count(std::size_t length, std::size_t in_len, std::size_t step) {
    if (step == 0) throw ConfigError("walk-forward step must be >= 1");
    return length > in_len ? (length - in_len) / step : 0;
}

std::vector<FoldRecord> run_walk_forward(const Predictor& predictor, const Scaler& scaler,
                                         std::span<const double> test_series, const WalkForwardPlan& plan,
                                         const RetrainHook& retrain) {
    plan.validate();
    if (!predictor) throw ConfigError("walk-forward: no model supplied");
    if (test_series.size() < plan.in_len + plan.out_len) {
        throw DataError("walk-forward: test series of " + std::to_string(test_series.size()) +
                        " points shorter than in_len + out_len = " + std::to_string(plan.in_len + plan.out_len));
    }
    const std::vector<double> scaled = scaler.apply(test_series);
    const std::size_t folds = fold_count(test_series.size(), plan.in_len, plan.step);

    std::vector<FoldRecord> records;
    records.reserve(folds);
    std::size_t known = plan.in_len;
    for (std::size_t k = 0; k < folds; ++k) {
        const std::span<const double> history(scaled.data(), known);
        const std::vector<double> forecast = predictor(history);
        if (forecast.size() != plan.out_len) {
            throw DimensionError("walk-forward: model returned " + std::to_string(forecast.size()) +
                                 " values, expected " + std::to_string(plan.out_len));
        }
        FoldRecord rec;
        rec.fold = k;
        rec.history_length = known;
        rec.forecast = scaler.invert(forecast);
        const std::size_t available = std::min(plan.out_len, test_series.size() - known);
        rec.actual.assign(test_series.begin() + known, test_series.begin() + known + available);
        records.push_back(std::move(rec));

        known += plan.step;
        if (plan.retrain_per_fold && retrain && k + 1 < folds) {
            retrain(std::span<const double>(scaled.data(), known));
        }
    }
    return records;
}

HorizonReport aggregate_horizon(std::span<const FoldRecord> records, std::size_t out_len, const std::string& model) {
    if (records.size() < 2) {
        throw DataError("aggregate_horizon: need at least 2 folds, got " + std::to_string(records.size()));
    }
    HorizonReport report{model, {}};
    std::vector<double> actual, forecast;
    for (std::size_t h = 0; h < out_len; ++h) {
        actual.clear();
        forecast.clear();
        for (const auto& r : records) {
            if (r.forecast.size() != out_len) throw DimensionError("aggregate_horizon: fold forecast length mismatch");
            if (h < r.actual.size()) {
                actual.push_back(r.actual[h]);
                forecast.push_back(r.forecast[h]);
            }
        }
        if (actual.size() < 2) {
            throw DataError("aggregate_horizon: horizon step " + std::to_string(h + 1) + " has fewer than 2 folds");
        }
        HorizonMetrics m;
        m.step = h + 1;
        m.rmse = rmse(actual, forecast);
        m.mae = mae(actual, forecast);
        m.r2 = r2(actual, forecast);
        m.fold_count = actual.size();
        report.steps.push_back(m);
    }
    return report;
}

WalkForwardResult walk_forward_evaluate(const Predictor& predictor, const Scaler& scaler,
                                        std::span<const double> test_series, const WalkForwardPlan& plan,
                                        const std::string& model, const RetrainHook& retrain) {
    WalkForwardResult result;
    result.folds = run_walk_forward(predictor, scaler, test_series, plan, retrain);
    result.report = aggregate_horizon(result.folds, plan.out_len, model);
    return result;
}

Predictor forecaster_predictor(const Forecaster& model) {
    return [&model](std::span<const double> history) {
        const std::size_t in_len = model.config().in_len;
        if (history.size() < in_len) throw DataError("forecaster_predictor: history shorter than in_len");
        Tensor x({1, in_len, 1}, std::vector<double>(history.end() - static_cast<std::ptrdiff_t>(in_len),
                                                       history.end()));
        const Tensor y = model.predict(x);
        return std::vector<double>(y.values().begin(), y.values().end());
    };
}

namespace {

struct ReportRow {
    const std::string* model;
    const HorizonMetrics* m;
};

std::vector<ReportRow> sorted_rows(std::span<const HorizonReport> reports) {
    std::vector<ReportRow> rows;
    for (const auto& r : reports)
        for (const auto& m : r.steps) rows.push_back({&r.model, &m});
    std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        if (*a.model != *b.model) return *a.model < *b.model;
        return a.m->step < b.m->step;
    });
    return rows;
}

std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_field(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::logic_error&) {
        throw DataError("report line " + std::to_string(line) + ": bad number '" + s + "'");
    }
}

// Groups rows into reports keyed by model, keeping first-appearance order.
void add_row(std::vector<HorizonReport>& reports, const std::string& model, const HorizonMetrics& m) {
    auto it = std::find_if(reports.begin(), reports.end(), [&](const HorizonReport& r) { return r.model == model; });
    if (it == reports.end()) {
        reports.push_back({model, {}});
        it = reports.end() - 1;
    }
    it->steps.push_back(m);
}

void sort_steps(std::vector<HorizonReport>& reports) {
    for (auto& r : reports) {
        std::sort(r.steps.begin(), r.steps.end(),
                  [](const HorizonMetrics& a, const HorizonMetrics& b) { return a.step < b.step; });
    }
}

}  // namespace

std::string reports_to_csv(std::span<const HorizonReport> reports) {
    std::string out = "model,horizon_step,rmse,mae,r2,fold_count\n";
    for (const auto& row : sorted_rows(reports)) {
        out += *row.model + ',' + std::to_string(row.m->step) + ',' + g17(row.m->rmse) + ',' + g17(row.m->mae) + ',' +
               g17(row.m->r2) + ',' + std::to_string(row.m->fold_count) + '\n';
    }
    return out;
}

std::string reports_to_json(std::span<const HorizonReport> reports) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : sorted_rows(reports)) {
        nlohmann::ordered_json j;
        j["model"] = *row.model;
        j["horizon_step"] = row.m->step;
        j["rmse"] = row.m->rmse;
        j["mae"] = row.m->mae;
        j["r2"] = row.m->r2;
        j["fold_count"] = row.m->fold_count;
        rows.push_back(std::move(j));
    }
    return rows.dump(2) + "\n";
}

std::vector<HorizonReport> reports_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::vector<HorizonReport> reports;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "model,horizon_step,rmse,mae,r2,fold_count") throw DataError("report CSV: unexpected header");
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ',')) f.push_back(item);
        if (f.size() != 6) throw DataError("report line " + std::to_string(line_no) + ": expected 6 fields");
        HorizonMetrics m;
        m.step = static_cast<std::size_t>(parse_field(f[1], line_no));
        m.rmse = parse_field(f[2], line_no);
        m.mae = parse_field(f[3], line_no);
        m.r2 = parse_field(f[4], line_no);
        m.fold_count = static_cast<std::size_t>(parse_field(f[5], line_no));
        add_row(reports, f[0], m);
    }
    sort_steps(reports);
    return reports;
}

std::vector<HorizonReport> reports_from_json(const std::string& text) {
    std::vector<HorizonReport> reports;
    try {
        const auto rows = nlohmann::json::parse(text);
        if (!rows.is_array()) throw DataError("report JSON: expected an array of rows");
        for (const auto& j : rows) {
            HorizonMetrics m;
            m.step = j.at("horizon_step").get<std::size_t>();
            m.rmse = j.at("rmse").get<double>();
            m.mae = j.at("mae").get<double>();
            m.r2 = j.at("r2").get<double>();
            m.fold_count = j.at("fold_count").get<std::size_t>();
            add_row(reports, j.at("model").get<std::string>(), m);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("report JSON: ") + e.what());
    }
    sort_steps(reports);
    return reports;
}

void report_emit(std::span<const HorizonReport> reports, ReportFormat format, const std::filesystem::path& path) {
    if (reports.empty()) throw DataError("report_emit: no reports");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write report " + path.string());
    out << (format == ReportFormat::csv ? reports_to_csv(reports) : reports_to_json(reports));
    if (!out) throw DataError("failed writing report " + path.string());
}

std::vector<HorizonReport> read_reports(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open report " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return path.extension() == ".json" ? reports_from_json(buf.str()) : reports_from_csv(buf.str());
}

std::string to_string(Metric metric) {
    switch (metric) {
        case Metric::rmse: return "rmse";
        case Metric::mae: return "mae";
        case Metric::r2: return "r2";
    }
    return "unknown";
}

namespace {

double metric_value(const HorizonMetrics& m, Metric metric) {
    switch (metric) {
        case Metric::rmse: return m.rmse;
        case Metric::mae: return m.mae;
        case Metric::r2: return m.r2;
    }
    return 0.0;
}

RankingTable rank(Metric metric, std::size_t step, std::vector<RankEntry> entries) {
    const bool higher_better = metric == Metric::r2;
    std::stable_sort(entries.begin(), entries.end(), [&](const RankEntry& a, const RankEntry& b) {
        if (a.value != b.value) return higher_better ? a.value > b.value : a.value < b.value;
        return a.model < b.model;
    });
    for (std::size_t i = 0; i < entries.size(); ++i) {
        entries[i].rank = (i > 0 && entries[i].value == entries[i - 1].value) ? entries[i - 1].rank : i + 1;
    }
    return {metric, step, std::move(entries)};
}

}  // namespace

Comparison compare_reports(std::span<const HorizonReport> reports) {
    if (reports.size() < 2) throw DataError("compare: need at least two model reports");
    const auto& ref = reports.front().steps;
    for (const auto& r : reports) {
        bool same = r.steps.size() == ref.size();
        for (std::size_t i = 0; same && i < ref.size(); ++i) same = r.steps[i].step == ref[i].step;
        if (!same) {
            throw DataError("compare: report for '" + r.model + "' has incompatible horizon steps (" +
                            std::to_string(r.steps.size()) + " vs " + std::to_string(ref.size()) + ")");
        }
    }
    Comparison c;
    for (Metric metric : {Metric::rmse, Metric::mae, Metric::r2}) {
        for (std::size_t i = 0; i < ref.size(); ++i) {
            std::vector<RankEntry> entries;
            for (const auto& r : reports) entries.push_back({r.model, metric_value(r.steps[i], metric), 0});
            c.per_horizon.push_back(rank(metric, ref[i].step, std::move(entries)));
        }
        std::vector<RankEntry> means;
        for (const auto& r : reports) {
            double s = 0.0;
            for (const auto& m : r.steps) s += metric_value(m, metric);
            means.push_back({r.model, s / static_cast<double>(r.steps.size()), 0});
        }
        c.overall.push_back(rank(metric, 0, std::move(means)));
    }
    return c;
}

std::string comparison_to_csv(const Comparison& comparison) {
    std::string out = "scope,metric,horizon_step,rank,model,value\n";
    auto emit = [&](const RankingTable& t, const char* scope) {
        for (const auto& e : t.entries) {
            out += std::string(scope) + ',' + to_string(t.metric) + ',' +
                   (t.horizon_step ? std::to_string(t.horizon_step) : std::string()) + ',' + std::to_string(e.rank) +
                   ',' + e.model + ',' + g17(e.value) + '\n';
        }
    };
    for (const auto& t : comparison.per_horizon) emit(t, "horizon");
    for (const auto& t : comparison.overall) emit(t, "mean");
    return out;
}

}  // namespace seqcast
