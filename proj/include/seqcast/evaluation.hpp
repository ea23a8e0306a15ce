#pragma once

#include "seqcast/model.hpp"
#include "seqcast/training.hpp"

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace seqcast {

double rmse(std::span<const double> y, std::span<const double> yhat);
double mae(std::span<const double> y, std::span<const double> yhat);
/// 1 - SSres/SStot with the mean taken over the actuals. Throws
/// NumericalError when the actuals are constant.
double r2(std::span<const double> y, std::span<const double> yhat);

struct WalkForwardPlan {
    std::size_t in_len = 10;
    std::size_t out_len = 10;
    std::size_t step = 10;
    bool retrain_per_fold = false;

    void validate() const;
};

struct FoldRecord {
    std::size_t fold = 0;
    std::size_t history_length = 0;  ///< known points when the forecast was made
    std::vector<double> forecast;    ///< out_len values, physical units
    /// Observed values following the origin, physical units. Shorter than
    /// out_len only for the trailing folds of a plan with step < out_len.
    std::vector<double> actual;
};

struct HorizonMetrics {
    std::size_t step = 0;  ///< 1-based horizon step
    double rmse = 0.0;
    double mae = 0.0;
    double r2 = 0.0;
    std::size_t fold_count = 0;  ///< pooled (actual, forecast) pairs at this step

    bool operator==(const HorizonMetrics&) const = default;
};

struct HorizonReport {
    std::string model;
    std::vector<HorizonMetrics> steps;

    bool operator==(const HorizonReport&) const = default;
};

/// Maps the known history (scaled units, oldest first) to out_len scaled
/// forecasts.
using Predictor = std::function<std::vector<double>(std::span<const double> history)>;
/// Invoked after each fold with the grown history (scaled units).
using RetrainHook = std::function<void(std::span<const double> history)>;

/// floor((length - in_len) / step).
std::size_t fold_count(std::size_t length, std::size_t in_len, std::size_t step);

/// Expanding-window walk-forward loop. The predictor only ever sees the
/// observed prefix of the test series; after each forecast the actual
/// observations (never forecasts) extend the history by plan.step points.
std::vector<FoldRecord> run_walk_forward(const Predictor& predictor, const Scaler& scaler,
                                         std::span<const double> test_series, const WalkForwardPlan& plan,
                                         const RetrainHook& retrain = {});

/// Pools the step-h pairs of every fold and computes each metric once per step.
HorizonReport aggregate_horizon(std::span<const FoldRecord> records, std::size_t out_len, const std::string& model);

struct WalkForwardResult {
    std::vector<FoldRecord> folds;
    HorizonReport report;
};

WalkForwardResult walk_forward_evaluate(const Predictor& predictor, const Scaler& scaler,
                                        std::span<const double> test_series, const WalkForwardPlan& plan,
                                        const std::string& model, const RetrainHook& retrain = {});

/// Feeds the most recent in_len history points to the model.
Predictor forecaster_predictor(const Forecaster& model);

// ---- report files ----

enum class ReportFormat { csv, json };

/// Rows sorted by (model, horizon_step); header
/// `model,horizon_step,rmse,mae,r2,fold_count`.
std::string reports_to_csv(std::span<const HorizonReport> reports);
/// JSON array of row objects carrying the CSV fields.
std::string reports_to_json(std::span<const HorizonReport> reports);
std::vector<HorizonReport> reports_from_csv(const std::string& text);
std::vector<HorizonReport> reports_from_json(const std::string& text);

void report_emit(std::span<const HorizonReport> reports, ReportFormat format, const std::filesystem::path& path);
/// Format chosen by extension (.json, anything else as CSV).
std::vector<HorizonReport> read_reports(const std::filesystem::path& path);

// ---- model comparison ----

enum class Metric { rmse, mae, r2 };
std::string to_string(Metric metric);

struct RankEntry {
    std::string model;
    double value;
    std::size_t rank;  ///< competition ranking; equal values share a rank
};

struct RankingTable {
    Metric metric;
    std::size_t horizon_step;  ///< 0 for the mean across horizon steps
    std::vector<RankEntry> entries;  ///< ordered by (rank, model)
};

struct Comparison {
    std::vector<RankingTable> per_horizon;
    std::vector<RankingTable> overall;  ///< one table per metric
};

/// Lower is better for rmse/mae, higher for r2. Throws DataError when the
/// reports do not share the same horizon steps.
Comparison compare_reports(std::span<const HorizonReport> reports);
/// Long format: `scope,metric,horizon_step,rank,model,value`.
std::string comparison_to_csv(const Comparison& comparison);

}  // namespace seqcast
