#include "seqcast/data.hpp"
#include "seqcast/errors.hpp"
#include "seqcast/evaluation.hpp"

#include "metric_oracle.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

using namespace seqcast;

namespace {

std::vector<double> uniform_vector(std::size_t n, Rng& rng, double lo = -5.0, double hi = 5.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

// Predictor returning the true next out_len values of the scaled series;
// past the end it repeats the final observation.
Predictor oracle_predictor(const std::vector<double>& scaled, std::size_t out_len) {
    return [&scaled, out_len](std::span<const double> history) {
        std::vector<double> out;
        for (std::size_t j = 0; j < out_len; ++j) out.push_back(scaled[std::min(history.size() + j, scaled.size() - 1)]);
        return out;
    };
}

HorizonReport make_report(const std::string& model, std::vector<double> rmses) {
    HorizonReport r{model, {}};
    for (std::size_t i = 0; i < rmses.size(); ++i) r.steps.push_back({i + 1, rmses[i], rmses[i] / 2, 1.0 - rmses[i], 7});
    return r;
}

}  // namespace

TEST(Metrics, HandExamples) {
    const std::vector<double> zero{0, 0}, target{3, 4};
    EXPECT_EQ(rmse(target, target), 0.0);
    EXPECT_DOUBLE_EQ(rmse(zero, target), std::sqrt(12.5));
    EXPECT_EQ(rmse(std::vector<double>{1}, std::vector<double>{3}), 2.0);
    EXPECT_EQ(mae(target, target), 0.0);
    EXPECT_EQ(mae(std::vector<double>{1, 2}, std::vector<double>{2, 4}), 1.5);
    EXPECT_EQ(r2(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}), 1.0);
    EXPECT_EQ(r2(std::vector<double>{1, 2, 3}, std::vector<double>{2, 2, 2}), 0.0);
    EXPECT_DOUBLE_EQ(r2(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 5}), -1.0);
}

TEST(Metrics, Contracts) {
    const std::vector<double> a{1, 2}, b{1, 2, 3}, empty;
    EXPECT_THROW(rmse(a, b), DimensionError);
    EXPECT_THROW(mae(a, b), DimensionError);
    EXPECT_THROW(rmse(empty, empty), DataError);
    EXPECT_THROW(r2(std::vector<double>{4, 4, 4}, b), NumericalError);
    EXPECT_THROW(r2(std::vector<double>{4}, std::vector<double>{4}), NumericalError);
}

TEST(Metrics, AgreeWithIndependentImplementation) {
    Rng rng(21);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.uniform_index(50);
        const auto y = uniform_vector(n, rng), yhat = uniform_vector(n, rng);
        const double e_rmse = rmse(y, yhat), e_mae = mae(y, yhat);
        EXPECT_NEAR(e_rmse, oracle::ref_rmse(y, yhat), 1e-12 * std::max(1.0, e_rmse));
        EXPECT_NEAR(e_mae, oracle::ref_mae(y, yhat), 1e-12 * std::max(1.0, e_mae));
        EXPECT_NEAR(r2(y, yhat), oracle::ref_r2(y, yhat), 1e-12 * std::max(1.0, std::abs(r2(y, yhat))));
        EXPECT_LE(e_mae, e_rmse * (1 + 1e-15));
    }
}

TEST(Metrics, MeanPredictorScoresZero) {
    Rng rng(22);
    const auto y = uniform_vector(200, rng);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 200.0;
    EXPECT_NEAR(r2(y, std::vector<double>(200, mean)), 0.0, 1e-12);
}

TEST(WalkForward, FoldCountExample) {
    EXPECT_EQ(fold_count(110, 10, 10), 10u);
    EXPECT_EQ(fold_count(10, 10, 10), 0u);
    EXPECT_EQ(fold_count(5, 10, 1), 0u);
}

TEST(WalkForward, FoldCountMatchesSimulatedLoop) {
    for (std::size_t len = 1; len <= 200; ++len) {
        for (std::size_t in = 1; in <= 20; ++in) {
            for (std::size_t step = 1; step <= 20; ++step) {
                // A fold exists while at least one new step-block of actuals follows the known prefix.
                std::size_t simulated = 0;
                for (std::size_t known = in; known + step <= len; known += step) ++simulated;
                ASSERT_EQ(fold_count(len, in, step), simulated) << len << ' ' << in << ' ' << step;
            }
        }
    }
}

TEST(WalkForward, PredictorNeverSeesTheFuture) {
    Rng rng(23);
    const auto series = uniform_vector(137, rng, 1.0, 9.0);
    const Scaler scaler = Scaler::fit(series);
    const auto scaled = scaler.apply(series);
    for (std::size_t step : {std::size_t{1}, std::size_t{4}, std::size_t{10}}) {
        WalkForwardPlan plan;
        plan.step = step;
        std::size_t expected_known = plan.in_len, calls = 0;
        auto instrumented = [&](std::span<const double> history) {
            EXPECT_EQ(history.size(), expected_known);
            for (std::size_t i = 0; i < history.size(); ++i) EXPECT_EQ(history[i], scaled[i]);
            expected_known += step;
            ++calls;
            return std::vector<double>(plan.out_len, 0.5);
        };
        const auto records = run_walk_forward(instrumented, scaler, series, plan);
        EXPECT_EQ(calls, fold_count(series.size(), plan.in_len, step));
        for (const auto& r : records) {
            ASSERT_GE(r.actual.size(), 1u);
            for (std::size_t j = 0; j < r.actual.size(); ++j) EXPECT_EQ(r.actual[j], series[r.history_length + j]);
        }
    }
}

TEST(WalkForward, OracleModelHasZeroErrorEverywhere) {
    const TimeSeries s = synth_series(SynthKind::composite, 500, SynthParams{}, 24);
    const Scaler scaler = Scaler::fit(s.values);
    const auto scaled = scaler.apply(s.values);
    for (std::size_t step : {std::size_t{1}, std::size_t{10}}) {
        WalkForwardPlan plan;
        plan.step = step;
        const auto result = walk_forward_evaluate(oracle_predictor(scaled, 10), scaler, s.values, plan, "oracle");
        ASSERT_EQ(result.report.steps.size(), 10u);
        for (const auto& m : result.report.steps) {
            EXPECT_NEAR(m.rmse, 0.0, 1e-12);
            EXPECT_NEAR(m.mae, 0.0, 1e-12);
            EXPECT_NEAR(m.r2, 1.0, 1e-12);
        }
    }
}

TEST(WalkForward, MeanPredictorOnAr1HasNoSkillAtLongHorizons) {
    SynthParams p;
    p.phi = 0.95;
    const TimeSeries s = synth_series(SynthKind::ar1, 10000, p, 25);
    const Scaler scaler = Scaler::fit(s.values);
    const auto scaled = scaler.apply(s.values);
    const double mean = std::accumulate(scaled.begin(), scaled.end(), 0.0) / static_cast<double>(scaled.size());
    WalkForwardPlan plan;
    plan.step = 1;
    auto constant = [&](std::span<const double>) { return std::vector<double>(10, mean); };
    const auto report = walk_forward_evaluate(constant, scaler, s.values, plan, "mean").report;
    EXPECT_NEAR(report.steps.back().r2, 0.0, 0.01);
}

TEST(WalkForward, Contracts) {
    const std::vector<double> tiny(19, 1.0);
    const Scaler scaler{0.0, 2.0};
    auto any = [](std::span<const double>) { return std::vector<double>(10, 0.0); };
    EXPECT_THROW(run_walk_forward(any, scaler, tiny, {}), DataError);
    EXPECT_THROW(run_walk_forward({}, scaler, std::vector<double>(30, 1.0), {}), ConfigError);
    auto wrong = [](std::span<const double>) { return std::vector<double>(3, 0.0); };
    EXPECT_THROW(run_walk_forward(wrong, scaler, std::vector<double>(30, 1.0), {}), DimensionError);
    WalkForwardPlan bad;
    bad.step = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(WalkForward, RetrainHookSeesOnlyObservedHistory) {
    std::vector<double> series(60);
    std::iota(series.begin(), series.end(), 1.0);
    const Scaler scaler = Scaler::fit(series);
    WalkForwardPlan plan;
    plan.retrain_per_fold = true;
    std::vector<std::size_t> seen;
    auto any = [](std::span<const double>) { return std::vector<double>(10, 0.0); };
    run_walk_forward(any, scaler, series, plan, [&](std::span<const double> h) { seen.push_back(h.size()); });
    EXPECT_EQ(seen, (std::vector<std::size_t>{20, 30, 40, 50}));
}

TEST(Aggregate, EqualsPooledRecollection) {
    Rng rng(26);
    std::vector<FoldRecord> records;
    for (std::size_t k = 0; k < 30; ++k) {
        FoldRecord r{k, 10 + k, uniform_vector(5, rng), uniform_vector(k < 28 ? 5 : 5 - (k - 27), rng)};
        records.push_back(r);
    }
    const auto report = aggregate_horizon(records, 5, "m");
    for (std::size_t h = 1; h <= 5; ++h) {
        const auto [actual, forecast] = oracle::pooled_pairs(records, h);
        const auto& m = report.steps[h - 1];
        EXPECT_EQ(m.step, h);
        EXPECT_EQ(m.fold_count, actual.size());
        EXPECT_NEAR(m.rmse, oracle::ref_rmse(actual, forecast), 1e-12);
        EXPECT_NEAR(m.mae, oracle::ref_mae(actual, forecast), 1e-12);
        EXPECT_NEAR(m.r2, oracle::ref_r2(actual, forecast), 1e-12);
    }
    EXPECT_EQ(report.steps[4].fold_count, 28u);
}

TEST(Aggregate, PermutationInvariantAndNeedsTwoFolds) {
    Rng rng(27);
    std::vector<FoldRecord> records;
    for (std::size_t k = 0; k < 12; ++k) records.push_back({k, 0, uniform_vector(4, rng), uniform_vector(4, rng)});
    const auto a = aggregate_horizon(records, 4, "m");
    std::reverse(records.begin(), records.end());
    std::swap(records[2], records[7]);
    const auto b = aggregate_horizon(records, 4, "m");
    for (std::size_t h = 0; h < 4; ++h) {
        EXPECT_NEAR(a.steps[h].rmse, b.steps[h].rmse, 1e-14);
        EXPECT_NEAR(a.steps[h].r2, b.steps[h].r2, 1e-14);
    }
    EXPECT_THROW(aggregate_horizon(std::span(records.data(), 1), 4, "m"), DataError);
}

TEST(Aggregate, IdenticalFoldsReproducePerFoldMetric) {
    FoldRecord a{0, 10, {1, 2}, {2, 4}}, b{1, 20, {3, 4}, {4, 6}};
    const std::vector<FoldRecord> records{a, b};
    const auto report = aggregate_horizon(records, 2, "m");
    EXPECT_EQ(report.steps[0].rmse, 1.0);
    EXPECT_EQ(report.steps[1].rmse, 2.0);
    EXPECT_EQ(report.steps[1].mae, 2.0);
}

TEST(Reports, CsvShapeAndSorting) {
    std::vector<HorizonReport> reports;
    for (const char* name : {"tcn", "bigru", "lstm", "cnn", "gru", "bilstm"})
        reports.push_back(make_report(name, std::vector<double>(10, 0.25)));
    const std::string csv = reports_to_csv(reports);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 61);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,horizon_step,rmse,mae,r2,fold_count");
    EXPECT_EQ(csv.substr(csv.find('\n') + 1, 9), "bigru,1,0");
    const auto back = reports_from_csv(csv);
    ASSERT_EQ(back.size(), 6u);
    EXPECT_EQ(back[0].model, "bigru");
    EXPECT_EQ(back[5].model, "tcn");
    const std::string one = reports_to_csv(std::span(reports.data(), 1));
    EXPECT_EQ(std::count(one.begin(), one.end(), '\n'), 11);
}

TEST(Reports, CsvAndJsonRoundTripExactly) {
    Rng rng(28);
    std::vector<HorizonReport> reports;
    for (const char* name : {"a", "b"}) {
        HorizonReport r{name, {}};
        for (std::size_t h = 1; h <= 10; ++h)
            r.steps.push_back({h, rng.uniform(0, 3), rng.uniform(0, 2), rng.uniform(-1, 1), 600 + h});
        reports.push_back(r);
    }
    EXPECT_EQ(reports_from_csv(reports_to_csv(reports)), reports);
    EXPECT_EQ(reports_from_json(reports_to_json(reports)), reports);

    const auto dir = std::filesystem::temp_directory_path() / "seqcast_eval_tests";
    std::filesystem::create_directories(dir);
    report_emit(reports, ReportFormat::json, dir / "r.json");
    report_emit(reports, ReportFormat::csv, dir / "r.csv");
    EXPECT_EQ(read_reports(dir / "r.json"), reports);
    EXPECT_EQ(read_reports(dir / "r.csv"), reports);
    EXPECT_THROW(report_emit(reports, ReportFormat::csv, dir / "missing" / "r.csv"), DataError);
    EXPECT_THROW(reports_from_csv("model,horizon_step\nx,1\n"), DataError);
}

TEST(Compare, RankingMatchesManualSort) {
    const std::vector<HorizonReport> reports{make_report("gru", {0.3, 0.5}), make_report("lstm", {0.2, 0.6}),
                                             make_report("cnn", {0.4, 0.4})};
    const auto c = compare_reports(reports);
    ASSERT_EQ(c.per_horizon.size(), 6u);
    ASSERT_EQ(c.overall.size(), 3u);
    const auto& h1 = c.per_horizon[0];
    EXPECT_EQ(h1.metric, Metric::rmse);
    EXPECT_EQ(h1.horizon_step, 1u);
    std::vector<std::string> order;
    for (const auto& e : h1.entries) order.push_back(e.model);
    EXPECT_EQ(order, (std::vector<std::string>{"lstm", "gru", "cnn"}));
    // r2 = 1 - rmse here, so higher-is-better must give the same order.
    const auto& r2_h1 = c.per_horizon[4];
    EXPECT_EQ(r2_h1.metric, Metric::r2);
    EXPECT_EQ(r2_h1.entries.front().model, "lstm");
    // Means: gru 0.4, lstm 0.4, cnn 0.4 -> three-way tie, broken by name.
    const auto& mean = c.overall[0];
    EXPECT_EQ(mean.horizon_step, 0u);
    for (const auto& e : mean.entries) EXPECT_EQ(e.rank, 1u);
    EXPECT_EQ(mean.entries[0].model, "cnn");
    EXPECT_EQ(mean.entries[2].model, "lstm");
}

TEST(Compare, IdenticalReportsTieAndCompetitionRanking) {
    const std::vector<HorizonReport> reports{make_report("zeta", {1.0}), make_report("alpha", {1.0}),
                                             make_report("mid", {2.0})};
    const auto c = compare_reports(reports);
    const auto& t = c.per_horizon[0];
    EXPECT_EQ(t.entries[0].model, "alpha");
    EXPECT_EQ(t.entries[1].model, "zeta");
    EXPECT_EQ(t.entries[0].rank, 1u);
    EXPECT_EQ(t.entries[1].rank, 1u);
    EXPECT_EQ(t.entries[2].rank, 3u);
    const std::string csv = comparison_to_csv(c);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "scope,metric,horizon_step,rank,model,value");
    EXPECT_NE(csv.find("horizon,rmse,1,1,alpha,1\n"), std::string::npos);
    EXPECT_NE(csv.find("mean,rmse,,3,mid,2\n"), std::string::npos);
}

TEST(Compare, RejectsIncompatibleHorizons) {
    const std::vector<HorizonReport> reports{make_report("a", {1, 2}), make_report("b", {1, 2, 3})};
    EXPECT_THROW(compare_reports(reports), DataError);
    EXPECT_THROW(compare_reports(std::span(reports.data(), 1)), DataError);
}

TEST(ForecasterPredictor, UsesTheMostRecentWindow) {
    Rng rng(29);
    ModelConfig c;
    c.kind = ModelKind::linear;
    c.in_len = 4;
    c.horizon = 3;
    auto m = make_model(c, rng);
    const auto history = uniform_vector(9, rng);
    const auto out = forecaster_predictor(*m)(history);
    const Tensor y = m->predict(Tensor({1, 4, 1}, std::vector<double>(history.end() - 4, history.end())));
    EXPECT_EQ(out, std::vector<double>(y.values().begin(), y.values().end()));
    EXPECT_THROW(forecaster_predictor(*m)(std::span(history.data(), 3)), DataError);
}
