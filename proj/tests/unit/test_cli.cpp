#include "seqcast/cli.hpp"
#include "seqcast/data.hpp"
#include "seqcast/evaluation.hpp"
#include "seqcast/serialization.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace seqcast;
using namespace seqcast::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Result {
    int code;
    std::string out, err;
};

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / "seqcast_cli_tests" / info->name();
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }

    Result run(std::vector<std::string> args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return {code, out.str(), err.str()};
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_F(CliTest, SynthIsDeterministicAndSized) {
    ASSERT_EQ(run({"synth", "--kind", "sine", "--length", "1000", "--seed", "7", "--out", path("a.csv")}).code, 0);
    ASSERT_EQ(run({"synth", "--kind", "sine", "--length", "1000", "--seed", "7", "--out", path("b.csv")}).code, 0);
    EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
    ASSERT_EQ(run({"synth", "--kind", "composite", "--length", "64411", "--out-dir", dir_.string()}).code, 0);
    EXPECT_EQ(line_count(slurp(path("synth.csv"))), 64412u);
}

TEST_F(CliTest, SynthRejectsExplosiveAr1) {
    const auto r = run({"synth", "--kind", "ar1", "--phi", "1.5", "--out", path("x.csv")});
    EXPECT_EQ(r.code, exit_usage);
    EXPECT_FALSE(fs::exists(path("x.csv")));
    EXPECT_NE(r.err.find("phi"), std::string::npos) << r.err;
}

TEST_F(CliTest, CleanReportsInjectedZeros) {
    ASSERT_EQ(run({"synth", "--length", "64411", "--zeros", "49", "--out", path("raw.csv")}).code, 0);
    const auto r = run({"clean", "--data", path("raw.csv"), "--out", path("clean.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = nlohmann::json::parse(r.out);
    EXPECT_EQ(report["removed_count"], 49);
    EXPECT_EQ(report["original_length"], 64411);
    EXPECT_EQ(report["removed_rate"].get<double>(), 49.0 / 64411.0);
    EXPECT_EQ(load_csv(path("clean.csv")).series.size(), 64362u);
}

TEST_F(CliTest, CleanWithoutZerosKeepsValues) {
    ASSERT_EQ(run({"synth", "--length", "300", "--out", path("raw.csv")}).code, 0);
    const auto r = run({"clean", "--data", path("raw.csv"), "--out", path("clean.csv")});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(nlohmann::json::parse(r.out)["removed_count"], 0);
    EXPECT_EQ(load_csv(path("clean.csv")).series.values, load_csv(path("raw.csv")).series.values);
}

TEST_F(CliTest, CleanFailsOnAllZeroOrMissingInput) {
    std::ofstream(path("zeros.csv")) << "value\n0\n0\n0\n";
    EXPECT_EQ(run({"clean", "--data", path("zeros.csv"), "--out-dir", dir_.string()}).code,
              exit_data);
    EXPECT_EQ(run({"clean", "--data", path("nope.csv"), "--out-dir", dir_.string()}).code,
              exit_data);
}

TEST_F(CliTest, TrainWithDefaultsWritesLoadableModelAndTwentyEpochs) {
    ASSERT_EQ(run({"synth", "--kind", "sine", "--length", "400", "--out", path("sine.csv")}).code, 0);
    const auto r = run({"train", "--model", "gru", "--data", path("sine.csv"), "--out-dir", path("run")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(line_count(slurp(path("run/history.csv"))), 21u);
    const auto model = model_from_param_file(load_param_file(path("run/model.params")));
    EXPECT_EQ(model->config().kind, ModelKind::gru);
    EXPECT_EQ(model->config().units, 50u);
    const auto manifest = nlohmann::json::parse(slurp(path("run/train_manifest.json")));
    EXPECT_EQ(manifest["config"]["epochs"], 20);
    EXPECT_EQ(manifest["config"]["batch_size"], 128);
    EXPECT_EQ(manifest["data"]["sha256"].get<std::string>().size(), 64u);
}

TEST_F(CliTest, SameSeedGivesBitIdenticalModelFiles) {
    ASSERT_EQ(run({"synth", "--length", "300", "--out", path("d.csv")}).code, 0);
    for (const char* run_dir : {"r1", "r2"}) {
        ASSERT_EQ(run({"train", "--model", "tcn", "--tcn-dilations", "1,2", "--tcn-dropout", "0.2", "--epochs", "2",
                       "--data", path("d.csv"), "--out-dir", path(run_dir)})
                      .code,
                  0);
    }
    EXPECT_EQ(slurp(path("r1/model.params")), slurp(path("r2/model.params")));
}

TEST_F(CliTest, TcnManifestRecordsDefaultDilations) {
    ASSERT_EQ(run({"synth", "--length", "300", "--out", path("d.csv")}).code, 0);
    ASSERT_EQ(run({"train", "--model", "tcn", "--epochs", "1", "--data", path("d.csv"), "--out-dir", path("run")}).code,
              0);
    const auto manifest = nlohmann::json::parse(slurp(path("run/train_manifest.json")));
    EXPECT_EQ(manifest["model"]["tcn_dilations"], nlohmann::json({1, 2, 4, 8, 16, 32}));
}

TEST_F(CliTest, EvaluateChecksFingerprintAndShapesTheReport) {
    ASSERT_EQ(run({"synth", "--length", "600", "--seed", "1", "--out", path("a.csv")}).code, 0);
    ASSERT_EQ(run({"synth", "--length", "600", "--seed", "2", "--out", path("b.csv")}).code, 0);
    ASSERT_EQ(run({"train", "--model", "linear", "--epochs", "2", "--data", path("a.csv"), "--out-dir", path("m")}).code,
              0);

    const auto mismatch = run({"evaluate", "--model", path("m/model.params"), "--data", path("b.csv"), "--out-dir",
                               path("bad")});
    EXPECT_EQ(mismatch.code, exit_data);
    EXPECT_NE(mismatch.err.find("fingerprint"), std::string::npos) << mismatch.err;

    const auto ok = run({"evaluate", "--model", path("m/model.params"), "--data", path("a.csv"), "--out-dir",
                         path("eval")});
    ASSERT_EQ(ok.code, 0) << ok.err;
    const auto reports = read_reports(path("eval/report.csv"));
    ASSERT_EQ(reports.size(), 1u);
    EXPECT_EQ(reports[0].steps.size(), 10u);
    EXPECT_EQ(read_reports(path("eval/report.json")), reports);
    EXPECT_TRUE(fs::exists(path("eval/evaluate_manifest.json")));
}

TEST_F(CliTest, OracleStubScoresZeroEverywhere) {
    ASSERT_EQ(run({"synth", "--length", "600", "--out", path("a.csv")}).code, 0);
    const auto r = run({"evaluate", "--oracle-stub", "--data", path("a.csv"), "--out-dir", path("eval")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto reports = read_reports(path("eval/report.csv"));
    ASSERT_EQ(reports.size(), 1u);
    ASSERT_EQ(reports[0].steps.size(), 10u);
    for (const auto& m : reports[0].steps) {
        EXPECT_EQ(m.rmse, 0.0);
        EXPECT_EQ(m.r2, 1.0);
    }
}

TEST_F(CliTest, ConfigFileIsOverriddenByFlags) {
    ASSERT_EQ(run({"synth", "--length", "300", "--out", path("d.csv")}).code, 0);
    std::ofstream(path("exp.conf")) << "# experiment\nmodel = linear\nepochs = 3\nseed = 9\ndata = " << path("d.csv")
                                    << "\n";
    const auto r = run({"train", "--config", path("exp.conf"), "--epochs", "2", "--out-dir", path("run")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto manifest = nlohmann::json::parse(slurp(path("run/train_manifest.json")));
    EXPECT_EQ(manifest["config"]["model"], "linear");
    EXPECT_EQ(manifest["config"]["epochs"], 2);
    EXPECT_EQ(manifest["config"]["seed"], 9);
    EXPECT_EQ(line_count(slurp(path("run/history.csv"))), 3u);
}

TEST_F(CliTest, ConfigErrorsAreReportedAllAtOnce) {
    std::ofstream(path("bad.conf")) << "units = -4\nbogus_key = 1\nepochs = 1\nepochs = 2\n";
    const auto r = run({"train", "--config", path("bad.conf"), "--lr", "fast", "--model", "rnn", "--out-dir",
                        path("run")});
    EXPECT_EQ(r.code, exit_usage);
    for (const char* needle : {"units", "bogus_key", "epochs", "lr", "rnn"})
        EXPECT_NE(r.err.find(needle), std::string::npos) << needle << " missing from: " << r.err;
    EXPECT_FALSE(fs::exists(path("run/model.params")));
}

TEST_F(CliTest, UnknownSubcommandIsAUsageError) {
    EXPECT_EQ(run({"frobnicate"}).code, exit_usage);
    EXPECT_EQ(run({}).code, exit_usage);
}

TEST_F(CliTest, CompareRanksReportFiles) {
    const std::vector<HorizonReport> a{{"gru", {{1, 0.1, 0.05, 0.9, 5}, {2, 0.2, 0.1, 0.8, 5}}}};
    const std::vector<HorizonReport> b{{"lstm", {{1, 0.3, 0.2, 0.7, 5}, {2, 0.4, 0.3, 0.6, 5}}}};
    report_emit(a, ReportFormat::csv, path("a.csv"));
    report_emit(b, ReportFormat::json, path("b.json"));
    const auto r = run({"compare", path("a.csv"), path("b.json"), "--out-dir", path("cmp")});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = slurp(path("cmp/comparison.csv"));
    EXPECT_NE(csv.find("horizon,rmse,1,1,gru,"), std::string::npos);
    EXPECT_NE(csv.find("mean,r2,,2,lstm,"), std::string::npos);

    const std::vector<HorizonReport> c{{"cnn", {{1, 0.3, 0.2, 0.7, 5}}}};
    report_emit(c, ReportFormat::csv, path("c.csv"));
    EXPECT_EQ(run({"compare", path("a.csv"), path("c.csv"), "--out-dir", path("cmp2")}).code,
              exit_data);
    EXPECT_EQ(run({"compare", path("a.csv"), "--out-dir", path("cmp3")}).code, exit_usage);
}

TEST(ConfigText, ParsesCommentsAndCollectsLineErrors) {
    const auto parsed = parse_config_text("# header\n units = 8  # trailing\n\nno equals sign\n = 3\nunits = 9\n");
    EXPECT_EQ(parsed.values.at("units"), "8");
    ASSERT_EQ(parsed.errors.size(), 3u);
    EXPECT_NE(parsed.errors[0].find("line 4"), std::string::npos);
    EXPECT_NE(parsed.errors[2].find("duplicate key 'units'"), std::string::npos);
}
