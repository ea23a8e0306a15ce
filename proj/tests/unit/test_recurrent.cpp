#include "seqcast/errors.hpp"
#include "seqcast/gradcheck.hpp"
#include "seqcast/recurrent.hpp"

#include "cell_oracle.hpp"
#include "model_gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace seqcast;
using seqcast::oracle::random_tensor;

namespace {

double weighted_sum(const Tensor& a, const Tensor& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * w[i];
    return s;
}

template <class Params>
void expect_param_grads(const Params& analytic, Params params, const std::function<double(const Params&)>& loss) {
    for (std::size_t g = 0; g < Params::gate_count; ++g) {
        for (auto member : {&Params::w_x, &Params::w_h, &Params::b}) {
            const Tensor numeric = finite_diff_grad(
                [&](const Tensor& t) {
                    Params p = params;
                    (p.*member)[g] = t;
                    return loss(p);
                },
                (params.*member)[g], 1e-6);
            const Tensor& a = (analytic.*member)[g];
            for (std::size_t i = 0; i < a.size(); ++i) {
                EXPECT_TRUE(grad_close(a[i], numeric[i])) << "gate " << g << " index " << i << " analytic " << a[i]
                                                          << " numeric " << numeric[i];
            }
        }
    }
}

}  // namespace

TEST(LstmCell, SaturatedForgetAndInputKeepCellState) {
    Rng rng(1);
    auto p = LstmParams::random(2, 3, rng);
    for (auto gate : {LstmGate::forget, LstmGate::input}) {
        p.w_x[gate_index(gate)].fill(0.0);
        p.w_h[gate_index(gate)].fill(0.0);
    }
    p.b[gate_index(LstmGate::forget)].fill(50.0);
    p.b[gate_index(LstmGate::input)].fill(-50.0);
    CellState state{random_tensor({2, 3}, rng), random_tensor({2, 3}, rng, -2.0, 2.0)};
    const auto [next, step] = lstm_cell_forward(random_tensor({2, 2}, rng), state, p);
    for (std::size_t i = 0; i < next.c->size(); ++i) EXPECT_NEAR((*next.c)[i], (*state.c)[i], 1e-6);
}

TEST(LstmCell, ClosedOutputGateZeroesHidden) {
    Rng rng(2);
    auto p = LstmParams::random(2, 3, rng);
    p.w_x[gate_index(LstmGate::output)].fill(0.0);
    p.w_h[gate_index(LstmGate::output)].fill(0.0);
    p.b[gate_index(LstmGate::output)].fill(-800.0);
    const auto [next, step] =
        lstm_cell_forward(random_tensor({2, 2}, rng), CellState{random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}, p);
    for (double v : next.h.values()) EXPECT_EQ(v, 0.0);
}

TEST(LstmCell, MatchesScalarOracle) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = LstmParams::random(4, 3, rng);
        LstmParams q = p;
        for (auto& b : q.b)
            for (auto& v : b.values()) v = rng.uniform(-1, 1);
        const Tensor x = random_tensor({2, 4}, rng), h = random_tensor({2, 3}, rng), c = random_tensor({2, 3}, rng);
        const auto [next, step] = lstm_cell_forward(x, CellState{h, c}, q);
        const auto ref = oracle::oracle_lstm_step(oracle::to_matrix(x), oracle::to_matrix(h), oracle::to_matrix(c), q);
        for (std::size_t n = 0; n < 2; ++n) {
            for (std::size_t j = 0; j < 3; ++j) {
                EXPECT_NEAR(next.h.at(n, j), ref.h[n][j], 1e-12);
                EXPECT_NEAR(next.c->at(n, j), ref.c[n][j], 1e-12);
            }
        }
    }
}

TEST(LstmCell, ShapeMismatchThrows) {
    Rng rng(4);
    const auto p = LstmParams::random(2, 3, rng);
    EXPECT_THROW(lstm_cell_forward(Tensor({2, 5}), zero_state(2, 3, true), p), DimensionError);
    EXPECT_THROW(lstm_cell_forward(Tensor({2, 2}), zero_state(2, 4, true), p), DimensionError);
    EXPECT_THROW(lstm_cell_forward(Tensor({2, 2}), zero_state(2, 3, false), p), DimensionError);
}

TEST(GruCell, SaturatedUpdateKeepsState) {
    Rng rng(5);
    auto p = GruParams::random(2, 3, rng);
    p.w_x[gate_index(GruGate::update)].fill(0.0);
    p.w_h[gate_index(GruGate::update)].fill(0.0);
    p.b[gate_index(GruGate::update)].fill(800.0);
    const Tensor h = random_tensor({2, 3}, rng);
    const auto [next, step] = gru_cell_forward(random_tensor({2, 2}, rng), h, p);
    for (std::size_t i = 0; i < h.size(); ++i) EXPECT_EQ(next[i], h[i]);
}

TEST(GruCell, ClosedGatesAndZeroInputGiveZero) {
    Rng rng(6);
    auto p = GruParams::random(2, 3, rng);
    for (auto gate : {GruGate::reset, GruGate::update}) {
        p.w_x[gate_index(gate)].fill(0.0);
        p.w_h[gate_index(gate)].fill(0.0);
        p.b[gate_index(gate)].fill(-800.0);
    }
    p.b[gate_index(GruGate::candidate)].fill(0.0);
    const auto [next, step] = gru_cell_forward(Tensor({2, 2}), random_tensor({2, 3}, rng), p);
    for (double v : next.values()) EXPECT_EQ(v, 0.0);
}

TEST(GruCell, MatchesScalarOracle) {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        GruParams p = GruParams::random(4, 3, rng);
        for (auto& b : p.b)
            for (auto& v : b.values()) v = rng.uniform(-1, 1);
        const Tensor x = random_tensor({2, 4}, rng), h = random_tensor({2, 3}, rng);
        const auto [next, step] = gru_cell_forward(x, h, p);
        const auto ref = oracle::oracle_gru_step(oracle::to_matrix(x), oracle::to_matrix(h), p);
        for (std::size_t n = 0; n < 2; ++n)
            for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(next.at(n, j), ref[n][j], 1e-12);
    }
}

TEST(GruCell, ParamsWithInconsistentHiddenDimAreRejected) {
    Rng rng(8);
    auto p = GruParams::random(2, 3, rng);
    p.b[1] = Tensor({4});
    EXPECT_THROW(p.validate(), DimensionError);
    EXPECT_THROW(gru_cell_forward(Tensor({1, 2}), Tensor({1, 3}), p), DimensionError);
}

TEST(Unroll, SingleStepEqualsCell) {
    Rng rng(9);
    const auto lp = LstmParams::random(1, 4, rng);
    const auto gp = GruParams::random(1, 4, rng);
    const Tensor seq = random_tensor({3, 1, 1}, rng);
    const Tensor x = seq.reshaped({3, 1});
    const auto lu = unroll_forward(seq, lp, zero_state(3, 4, true));
    const auto [ls, lt] = lstm_cell_forward(x, zero_state(3, 4, true), lp);
    EXPECT_EQ(lu.hidden.reshaped({3, 4}), ls.h);
    const auto gu = unroll_forward(seq, gp, zero_state(3, 4, false));
    const auto [gh, gt] = gru_cell_forward(x, Tensor({3, 4}), gp);
    EXPECT_EQ(gu.hidden.reshaped({3, 4}), gh);
    EXPECT_EQ(lu.trace.steps.size(), 1u);
}

TEST(Unroll, ZeroGruParamsGiveZeroHidden) {
    Rng rng(10);
    const auto p = GruParams::zeros(1, 5);
    const auto u = unroll_forward(random_tensor({2, 7, 1}, rng), p, zero_state(2, 5, false));
    for (double v : u.hidden.values()) EXPECT_EQ(v, 0.0);
}

TEST(Unroll, RecordsOneTraceStepPerInputStep) {
    Rng rng(11);
    const auto u = unroll_forward(random_tensor({2, 6, 1}, rng), LstmParams::random(1, 3, rng), zero_state(2, 3, true));
    EXPECT_EQ(u.trace.steps.size(), 6u);
    EXPECT_EQ(u.hidden.shape(), (Shape{2, 6, 3}));
}

TEST(Bptt, LstmGradientsMatchFiniteDifferences) {
    Rng rng(12);
    const auto params = LstmParams::random(2, 3, rng);
    const Tensor seq = random_tensor({2, 5, 2}, rng);
    const Tensor w = random_tensor({2, 5, 3}, rng);
    auto loss = [&](const LstmParams& p) { return weighted_sum(unroll_forward(seq, p, zero_state(2, 3, true)).hidden, w); };
    const auto fwd = unroll_forward(seq, params, zero_state(2, 3, true));
    const auto grads = rnn_backward(fwd.trace, w, params);
    expect_param_grads<LstmParams>(grads.params, params, loss);
    const Tensor dx = finite_diff_grad(
        [&](const Tensor& s) { return weighted_sum(unroll_forward(s, params, zero_state(2, 3, true)).hidden, w); }, seq,
        1e-6);
    for (std::size_t i = 0; i < dx.size(); ++i) EXPECT_TRUE(grad_close(grads.inputs[i], dx[i]));
}

TEST(Bptt, GruGradientsMatchFiniteDifferences) {
    Rng rng(13);
    const auto params = GruParams::random(2, 3, rng);
    const Tensor seq = random_tensor({2, 5, 2}, rng);
    const Tensor w = random_tensor({2, 5, 3}, rng);
    auto loss = [&](const GruParams& p) { return weighted_sum(unroll_forward(seq, p, zero_state(2, 3, false)).hidden, w); };
    const auto fwd = unroll_forward(seq, params, zero_state(2, 3, false));
    const auto grads = rnn_backward(fwd.trace, w, params);
    expect_param_grads<GruParams>(grads.params, params, loss);
}

TEST(Bidirectional, HalvesMatchDirectionalPasses) {
    Rng rng(14);
    const auto f = GruParams::random(1, 3, rng), b = GruParams::random(1, 3, rng);
    const Tensor seq = random_tensor({2, 6, 1}, rng);
    const auto out = bidirectional_forward(seq, f, b);
    ASSERT_EQ(out.output.shape(), (Shape{2, 6, 6}));
    const auto fwd = unroll_forward(seq, f, zero_state(2, 3, false));
    const auto bwd = unroll_forward(reverse_time(seq), b, zero_state(2, 3, false));
    for (std::size_t n = 0; n < 2; ++n) {
        for (std::size_t t = 0; t < 6; ++t) {
            for (std::size_t j = 0; j < 3; ++j) {
                EXPECT_EQ(out.output.at(n, t, j), fwd.hidden.at(n, t, j));
                EXPECT_EQ(out.output.at(n, t, 3 + j), bwd.hidden.at(n, 5 - t, j));
            }
        }
    }
}

TEST(Bidirectional, LstmGradientsMatchFiniteDifferences) {
    Rng rng(15);
    const auto f = LstmParams::random(1, 2, rng), b = LstmParams::random(1, 2, rng);
    const Tensor seq = random_tensor({2, 4, 1}, rng);
    const Tensor w = random_tensor({2, 4, 4}, rng);
    const auto out = bidirectional_forward(seq, f, b);
    const auto grads = bidirectional_backward(out, w, f, b);
    expect_param_grads<LstmParams>(grads.forward, f,
                                   [&](const LstmParams& p) { return weighted_sum(bidirectional_forward(seq, p, b).output, w); });
    expect_param_grads<LstmParams>(grads.backward, b,
                                   [&](const LstmParams& p) { return weighted_sum(bidirectional_forward(seq, f, p).output, w); });
    const Tensor dx =
        finite_diff_grad([&](const Tensor& s) { return weighted_sum(bidirectional_forward(s, f, b).output, w); }, seq, 1e-6);
    for (std::size_t i = 0; i < dx.size(); ++i) EXPECT_TRUE(grad_close(grads.inputs[i], dx[i]));
}

TEST(DenseHead, AffineMapAndGradients) {
    Rng rng(16);
    const auto head = DenseHead::random(4, 3, rng);
    const Tensor feat = random_tensor({2, 4}, rng);
    const Tensor y = dense_head_forward(feat, head);
    for (std::size_t n = 0; n < 2; ++n) {
        for (std::size_t o = 0; o < 3; ++o) {
            double ref = head.b[o];
            for (std::size_t k = 0; k < 4; ++k) ref += feat.at(n, k) * head.w.at(k, o);
            EXPECT_NEAR(y.at(n, o), ref, 1e-14);
        }
    }
    const Tensor w = random_tensor({2, 3}, rng);
    const auto g = dense_head_backward(feat, w, head);
    const Tensor dw = finite_diff_grad(
        [&](const Tensor& t) {
            DenseHead h = head;
            h.w = t;
            return weighted_sum(dense_head_forward(feat, h), w);
        },
        head.w);
    for (std::size_t i = 0; i < dw.size(); ++i) EXPECT_TRUE(grad_close(g.head.w[i], dw[i]));
    const Tensor df = finite_diff_grad([&](const Tensor& t) { return weighted_sum(dense_head_forward(t, head), w); }, feat);
    for (std::size_t i = 0; i < df.size(); ++i) EXPECT_TRUE(grad_close(g.features[i], df[i]));
    EXPECT_THROW(dense_head_forward(Tensor({2, 5}), head), DimensionError);
}
