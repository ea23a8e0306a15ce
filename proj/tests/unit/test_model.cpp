#include "seqcast/errors.hpp"
#include "seqcast/model.hpp"
#include "seqcast/serialization.hpp"

#include "model_gradcheck.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace seqcast;
using seqcast::oracle::random_tensor;

namespace {

ModelConfig small_config(ModelKind kind) {
    ModelConfig c;
    c.kind = kind;
    c.in_len = 6;
    c.horizon = 3;
    c.units = 3;
    c.cnn.filters = 3;
    c.tcn.dilations = {1, 2};
    c.tcn.filters = 3;
    return c;
}

const ModelKind kAllKinds[] = {ModelKind::lstm, ModelKind::gru, ModelKind::bilstm, ModelKind::bigru,
                               ModelKind::cnn,  ModelKind::tcn, ModelKind::linear};

}  // namespace

TEST(ModelKind, NamesRoundTrip) {
    for (ModelKind k : kAllKinds) EXPECT_EQ(parse_model_kind(to_string(k)), k);
    EXPECT_THROW(parse_model_kind("transformer"), ConfigError);
    EXPECT_EQ(compared_model_kinds().size(), 6u);
}

TEST(ModelConfig, DefaultsAreTheReferenceSettings) {
    const ModelConfig c;
    EXPECT_EQ(c.in_len, 10u);
    EXPECT_EQ(c.horizon, 10u);
    EXPECT_EQ(c.units, 50u);
    EXPECT_EQ(c.cnn.filters, 16u);
    EXPECT_EQ(c.cnn.kernel_size, 3u);
    EXPECT_EQ(c.tcn.dilations, (std::vector<std::size_t>{1, 2, 4, 8, 16, 32}));
    EXPECT_EQ(c.tcn.kernel_size, 3u);
    EXPECT_EQ(c.tcn.filters, 4u);
}

TEST(ModelConfig, MetaRoundTripAndValidation) {
    ModelConfig c = small_config(ModelKind::tcn);
    c.tcn.dropout_rate = 0.25;
    const ModelConfig back = config_from_meta(config_to_meta(c));
    EXPECT_EQ(back.kind, c.kind);
    EXPECT_EQ(back.tcn.dilations, c.tcn.dilations);
    EXPECT_EQ(back.tcn.dropout_rate, 0.25);
    ModelConfig bad = small_config(ModelKind::lstm);
    bad.units = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.tcn.dilations.clear();
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.tcn.dropout_rate = 1.0;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Forecaster, EveryKindPredictsTheHorizon) {
    for (ModelKind k : kAllKinds) {
        Rng rng(40);
        auto m = make_model(small_config(k), rng);
        const Tensor y = m->predict(random_tensor({4, 6, 1}, rng));
        EXPECT_EQ(y.shape(), (Shape{4, 3})) << to_string(k);
        EXPECT_TRUE(all_finite(y));
        EXPECT_THROW(m->predict(Tensor({4, 5, 1})), DimensionError) << to_string(k);
    }
}

TEST(Forecaster, ParameterNamesAreUniqueAndGradShapesMatch) {
    for (ModelKind k : kAllKinds) {
        Rng rng(41);
        auto m = make_model(small_config(k), rng);
        std::set<std::string> names;
        for (const auto& p : m->parameters()) {
            EXPECT_TRUE(names.insert(p.name).second) << p.name;
            EXPECT_EQ(p.value->shape(), p.grad->shape()) << p.name;
        }
        EXPECT_GT(m->parameter_count(), 0u);
    }
}

TEST(Forecaster, ForwardWithoutDropoutEqualsPredict) {
    for (ModelKind k : kAllKinds) {
        Rng rng(42);
        auto m = make_model(small_config(k), rng);
        const Tensor x = random_tensor({2, 6, 1}, rng);
        EXPECT_EQ(m->forward(x, rng), m->predict(x)) << to_string(k);
    }
}

TEST(Forecaster, ParameterPointersSurviveBackward) {
    for (ModelKind k : kAllKinds) {
        Rng rng(49);
        auto m = make_model(small_config(k), rng);
        const auto before = m->parameters();
        const Tensor y = m->forward(random_tensor({2, 6, 1}, rng), rng);
        m->backward(random_tensor(y.shape(), rng));
        const auto after = m->parameters();
        ASSERT_EQ(before.size(), after.size());
        for (std::size_t i = 0; i < before.size(); ++i) {
            EXPECT_EQ(before[i].value, after[i].value) << to_string(k) << ' ' << before[i].name;
            EXPECT_EQ(before[i].grad, after[i].grad) << to_string(k) << ' ' << before[i].name;
        }
    }
}

TEST(Forecaster, CloneIsIndependent) {
    Rng rng(43);
    auto m = make_model(small_config(ModelKind::gru), rng);
    auto copy = m->clone();
    const Tensor x = random_tensor({1, 6, 1}, rng);
    const Tensor before = copy->predict(x);
    (*m->parameters()[0].value)[0] += 1.0;
    EXPECT_EQ(copy->predict(x), before);
    EXPECT_NE(m->predict(x), before);
}

TEST(Forecaster, GradientsMatchFiniteDifferences) {
    for (ModelKind k : kAllKinds) {
        Rng rng(44);
        auto m = make_model(small_config(k), rng);
        oracle::move_biases_off_zero(*m, rng);
        const Tensor x = random_tensor({2, 6, 1}, rng);
        const auto summary = oracle::check_model_gradients(*m, x, rng, 1e-6);
        EXPECT_EQ(summary.failed, 0u) << to_string(k) << ": " << summary.worst;
        EXPECT_GT(summary.checked, 0u);
    }
}

TEST(Forecaster, TcnWithDropoutDiffersBetweenTrainAndPredict) {
    Rng rng(45);
    ModelConfig c = small_config(ModelKind::tcn);
    c.tcn.dropout_rate = 0.5;
    auto m = make_model(c, rng);
    oracle::move_biases_off_zero(*m, rng);
    const Tensor x = random_tensor({2, 6, 1}, rng);
    EXPECT_NE(m->forward(x, rng), m->predict(x));
    const auto summary = oracle::check_model_gradients(*m, x, rng, 1e-6);
    EXPECT_EQ(summary.failed, 0u) << summary.worst;
}

TEST(ParamFile, RoundTripIsBitExact) {
    for (ModelKind k : kAllKinds) {
        Rng rng(46);
        auto m = make_model(small_config(k), rng);
        std::stringstream buf;
        write_param_file(buf, model_to_param_file(*m, {{"note", "hello world"}}));
        const ParamFile file = read_param_file(buf);
        EXPECT_EQ(file.meta.at("note"), "hello world");
        auto loaded = model_from_param_file(file);
        const Tensor x = random_tensor({3, 6, 1}, rng);
        EXPECT_EQ(loaded->predict(x), m->predict(x)) << to_string(k);
        auto a = m->parameters();
        auto b = loaded->parameters();
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].value, *b[i].value);
    }
}

TEST(ParamFile, WritingTwiceGivesIdenticalText) {
    Rng r1(47), r2(47);
    auto a = make_model(small_config(ModelKind::bilstm), r1);
    auto b = make_model(small_config(ModelKind::bilstm), r2);
    std::stringstream sa, sb;
    write_param_file(sa, model_to_param_file(*a));
    write_param_file(sb, model_to_param_file(*b));
    EXPECT_EQ(sa.str(), sb.str());
}

TEST(ParamFile, RejectsCorruptInput) {
    auto read = [](const std::string& text) {
        std::istringstream in(text);
        return read_param_file(in);
    };
    EXPECT_THROW(read(""), DataError);
    EXPECT_THROW(read("seqcast-params 2\nend\n"), DataError);
    EXPECT_THROW(read("seqcast-params 1\ntensor a 1 2\n0x1p+0\nend\n"), DataError);
    EXPECT_THROW(read("seqcast-params 1\ntensor a 1 1\nbanana\nend\n"), DataError);
    EXPECT_THROW(read("seqcast-params 1\ntensor a 1 1\n0x1p+0\n"), DataError);

    Rng rng(48);
    auto m = make_model(small_config(ModelKind::gru), rng);
    ParamFile file = model_to_param_file(*m);
    file.tensors.back().second = Tensor({7});
    EXPECT_THROW(model_from_param_file(file), DataError);
    file = model_to_param_file(*m);
    file.tensors.pop_back();
    EXPECT_THROW(model_from_param_file(file), DataError);
}
