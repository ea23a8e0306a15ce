#include "seqcast/recurrent.hpp"

#include "seqcast/errors.hpp"
#include "seqcast/init.hpp"

#include <cmath>

namespace seqcast {

template <std::size_t Gates>
GateParams<Gates> GateParams<Gates>::zeros(std::size_t input_dim, std::size_t hidden_dim) {
    GateParams p;
    for (std::size_t g = 0; g < Gates; ++g) {
        p.w_x[g] = Tensor({input_dim, hidden_dim});
        p.w_h[g] = Tensor({hidden_dim, hidden_dim});
        p.b[g] = Tensor({hidden_dim});
    }
    return p;
}

template <std::size_t Gates>
GateParams<Gates> GateParams<Gates>::random(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
    GateParams p;
    for (std::size_t g = 0; g < Gates; ++g) {
        p.w_x[g] = init_weights({input_dim, hidden_dim}, InitScheme::uniform_scaled, rng);
        p.w_h[g] = init_weights({hidden_dim, hidden_dim}, InitScheme::uniform_scaled, rng);
        p.b[g] = init_weights({hidden_dim}, InitScheme::zeros, rng);
    }
    return p;
}

template <std::size_t Gates>
void GateParams<Gates>::validate() const {
    const std::size_t in = w_x[0].dim(0);
    const std::size_t hid = w_x[0].dim(1);
    for (std::size_t g = 0; g < Gates; ++g) {
        if (w_x[g].shape() != Shape{in, hid} || w_h[g].shape() != Shape{hid, hid} || b[g].shape() != Shape{hid}) {
            throw DimensionError("recurrent parameters: gate " + std::to_string(g) + " has inconsistent shapes " +
                                 shape_to_string(w_x[g].shape()) + ", " + shape_to_string(w_h[g].shape()) + ", " +
                                 shape_to_string(b[g].shape()));
        }
    }
}

template struct GateParams<3>;
template struct GateParams<4>;

CellState zero_state(std::size_t batch, std::size_t hidden, bool with_cell) {
    CellState s{Tensor({batch, hidden}), std::nullopt};
    if (with_cell) s.c = Tensor({batch, hidden});
    return s;
}

namespace {

void check_step_input(const Tensor& x, const Tensor& h, std::size_t input_dim, std::size_t hidden_dim) {
    require_rank(x, 2, "cell input");
    require_rank(h, 2, "cell state");
    if (x.dim(1) != input_dim) {
        throw DimensionError("cell input " + shape_to_string(x.shape()) + " does not match input_dim " +
                             std::to_string(input_dim));
    }
    if (h.dim(0) != x.dim(0) || h.dim(1) != hidden_dim) {
        throw DimensionError("cell state " + shape_to_string(h.shape()) + " does not match batch " +
                             std::to_string(x.dim(0)) + " and hidden_dim " + std::to_string(hidden_dim));
    }
}

// x * W_x + h * W_h + b
Tensor gate_preactivation(const Tensor& x, const Tensor& h, const Tensor& w_x, const Tensor& w_h, const Tensor& b) {
    Tensor pre({x.dim(0), w_x.dim(1)});
    matmul_accumulate(x, w_x, pre);
    matmul_accumulate(h, w_h, pre);
    add_row_bias(pre, b);
    return pre;
}

template <std::size_t Gates>
void accumulate_gate_grads(GateParams<Gates>& grads, std::size_t g, const Tensor& x, const Tensor& h_in,
                           const Tensor& d_pre) {
    matmul_tn_accumulate(x, d_pre, grads.w_x[g]);
    matmul_tn_accumulate(h_in, d_pre, grads.w_h[g]);
    accumulate_column_sums(d_pre, grads.b[g]);
}

template <std::size_t Gates>
struct Transposed {
    std::array<Tensor, Gates> w_x;
    std::array<Tensor, Gates> w_h;
};

template <std::size_t Gates>
Transposed<Gates> transpose_all(const GateParams<Gates>& p) {
    Transposed<Gates> t;
    for (std::size_t g = 0; g < Gates; ++g) {
        t.w_x[g] = transpose(p.w_x[g]);
        t.w_h[g] = transpose(p.w_h[g]);
    }
    return t;
}

void check_sequence(const Tensor& sequence, std::size_t input_dim) {
    require_rank(sequence, 3, "recurrent sequence");
    if (sequence.dim(2) != input_dim) {
        throw DimensionError("sequence " + shape_to_string(sequence.shape()) + " does not match input_dim " +
                             std::to_string(input_dim));
    }
}

template <class Trace>
void check_backward_inputs(const Trace& trace, const Tensor& grad_hidden, std::size_t input_dim,
                           std::size_t hidden_dim) {
    if (trace.steps.empty()) throw DimensionError("rnn_backward: empty trace");
    require_rank(grad_hidden, 3, "rnn_backward grad_hidden");
    const auto& first = trace.steps.front();
    if (first.x.dim(1) != input_dim || first.h.dim(1) != hidden_dim) {
        throw DimensionError("rnn_backward: trace dims " + shape_to_string(first.x.shape()) + "/" +
                             shape_to_string(first.h.shape()) + " do not match parameters");
    }
    const Shape expected{first.x.dim(0), trace.steps.size(), hidden_dim};
    if (grad_hidden.shape() != expected) {
        throw DimensionError("rnn_backward: grad_hidden " + shape_to_string(grad_hidden.shape()) + " expected " +
                             shape_to_string(expected));
    }
}

}  // namespace

std::pair<CellState, LstmStepTrace> lstm_cell_forward(const Tensor& x_t, const CellState& state,
                                                      const LstmParams& params) {
    const std::size_t hid = params.hidden_dim();
    check_step_input(x_t, state.h, params.input_dim(), hid);
    if (!state.c) throw DimensionError("lstm_cell_forward: cell state missing");
    require_same_shape(state.h, *state.c, "lstm_cell_forward state");

    using enum LstmGate;
    LstmStepTrace tr;
    tr.x = x_t;
    tr.h_prev = state.h;
    tr.c_prev = *state.c;
    auto pre = [&](LstmGate g) {
        const auto i = gate_index(g);
        return gate_preactivation(x_t, state.h, params.w_x[i], params.w_h[i], params.b[i]);
    };
    tr.forget = activation(pre(forget), Activation::sigmoid);
    tr.input = activation(pre(input), Activation::sigmoid);
    tr.candidate = activation(pre(candidate), Activation::tanh);
    tr.output = activation(pre(output), Activation::sigmoid);

    tr.c = Tensor(state.h.shape());
    tr.tanh_c = Tensor(state.h.shape());
    tr.h = Tensor(state.h.shape());
    for (std::size_t k = 0; k < tr.c.size(); ++k) {
        tr.c[k] = tr.forget[k] * tr.c_prev[k] + tr.input[k] * tr.candidate[k];
        tr.tanh_c[k] = std::tanh(tr.c[k]);
        tr.h[k] = tr.output[k] * tr.tanh_c[k];
    }
    SEQCAST_CHECK_FINITE(tr.h, "lstm_cell_forward");
    CellState next{tr.h, tr.c};
    return {std::move(next), std::move(tr)};
}

std::pair<Tensor, GruStepTrace> gru_cell_forward(const Tensor& x_t, const Tensor& h_prev, const GruParams& params) {
    check_step_input(x_t, h_prev, params.input_dim(), params.hidden_dim());

    using enum GruGate;
    const auto r = gate_index(reset), z = gate_index(update), n = gate_index(candidate);
    GruStepTrace tr;
    tr.x = x_t;
    tr.h_prev = h_prev;
    tr.reset = activation(gate_preactivation(x_t, h_prev, params.w_x[r], params.w_h[r], params.b[r]),
                          Activation::sigmoid);
    tr.update = activation(gate_preactivation(x_t, h_prev, params.w_x[z], params.w_h[z], params.b[z]),
                           Activation::sigmoid);
    tr.reset_h = hadamard(tr.reset, h_prev);
    tr.candidate = activation(gate_preactivation(x_t, tr.reset_h, params.w_x[n], params.w_h[n], params.b[n]),
                              Activation::tanh);
    tr.h = Tensor(h_prev.shape());
    for (std::size_t k = 0; k < tr.h.size(); ++k) {
        tr.h[k] = tr.update[k] * h_prev[k] + (1.0 - tr.update[k]) * tr.candidate[k];
    }
    SEQCAST_CHECK_FINITE(tr.h, "gru_cell_forward");
    Tensor h = tr.h;
    return {std::move(h), std::move(tr)};
}

Unrolled<LstmTrace> unroll_forward(const Tensor& sequence, const LstmParams& params, const CellState& init) {
    params.validate();
    check_sequence(sequence, params.input_dim());
    const std::size_t batch = sequence.dim(0), steps = sequence.dim(1), hid = params.hidden_dim();
    Unrolled<LstmTrace> out{Tensor({batch, steps, hid}), {}};
    out.trace.steps.reserve(steps);
    CellState state = init;
    for (std::size_t t = 0; t < steps; ++t) {
        auto [next, step] = lstm_cell_forward(time_slice(sequence, t), state, params);
        set_time_slice(out.hidden, t, next.h);
        state = std::move(next);
        out.trace.steps.push_back(std::move(step));
    }
    return out;
}

Unrolled<GruTrace> unroll_forward(const Tensor& sequence, const GruParams& params, const CellState& init) {
    params.validate();
    check_sequence(sequence, params.input_dim());
    const std::size_t batch = sequence.dim(0), steps = sequence.dim(1), hid = params.hidden_dim();
    Unrolled<GruTrace> out{Tensor({batch, steps, hid}), {}};
    out.trace.steps.reserve(steps);
    Tensor h = init.h;
    for (std::size_t t = 0; t < steps; ++t) {
        auto [next, step] = gru_cell_forward(time_slice(sequence, t), h, params);
        set_time_slice(out.hidden, t, next);
        h = std::move(next);
        out.trace.steps.push_back(std::move(step));
    }
    return out;
}

RecurrentGrads<LstmParams> rnn_backward(const LstmTrace& trace, const Tensor& grad_hidden, const LstmParams& params) {
    params.validate();
    const std::size_t in = params.input_dim(), hid = params.hidden_dim();
    check_backward_inputs(trace, grad_hidden, in, hid);
    const std::size_t batch = grad_hidden.dim(0), steps = grad_hidden.dim(1);

    RecurrentGrads<LstmParams> grads{LstmParams::zeros(in, hid), Tensor({batch, steps, in})};
    const auto wt = transpose_all(params);
    Tensor dh_next({batch, hid});
    Tensor dc_next({batch, hid});
    std::array<Tensor, 4> d_pre;
    for (auto& d : d_pre) d = Tensor({batch, hid});

    using enum LstmGate;
    const auto gf = gate_index(forget), gi = gate_index(input), gc = gate_index(candidate), go = gate_index(output);
    for (std::size_t t = steps; t-- > 0;) {
        const auto& s = trace.steps[t];
        const Tensor dh_out = time_slice(grad_hidden, t);
        for (std::size_t k = 0; k < batch * hid; ++k) {
            const double dh = dh_out[k] + dh_next[k];
            const double o = s.output[k], f = s.forget[k], i = s.input[k], g = s.candidate[k];
            const double tc = s.tanh_c[k];
            const double dc = dc_next[k] + dh * o * (1.0 - tc * tc);
            d_pre[go][k] = dh * tc * o * (1.0 - o);
            d_pre[gf][k] = dc * s.c_prev[k] * f * (1.0 - f);
            d_pre[gi][k] = dc * g * i * (1.0 - i);
            d_pre[gc][k] = dc * i * (1.0 - g * g);
            dc_next[k] = dc * f;
        }
        dh_next.fill(0.0);
        Tensor dx({batch, in});
        for (std::size_t g = 0; g < 4; ++g) {
            accumulate_gate_grads(grads.params, g, s.x, s.h_prev, d_pre[g]);
            matmul_accumulate(d_pre[g], wt.w_x[g], dx);
            matmul_accumulate(d_pre[g], wt.w_h[g], dh_next);
        }
        set_time_slice(grads.inputs, t, dx);
    }
    return grads;
}

RecurrentGrads<GruParams> rnn_backward(const GruTrace& trace, const Tensor& grad_hidden, const GruParams& params) {
    params.validate();
    const std::size_t in = params.input_dim(), hid = params.hidden_dim();
    check_backward_inputs(trace, grad_hidden, in, hid);
    const std::size_t batch = grad_hidden.dim(0), steps = grad_hidden.dim(1);

    RecurrentGrads<GruParams> grads{GruParams::zeros(in, hid), Tensor({batch, steps, in})};
    const auto wt = transpose_all(params);
    using enum GruGate;
    const auto gr = gate_index(reset), gz = gate_index(update), gn = gate_index(candidate);

    Tensor dh_next({batch, hid});
    Tensor d_r({batch, hid}), d_z({batch, hid}), d_n({batch, hid});
    for (std::size_t t = steps; t-- > 0;) {
        const auto& s = trace.steps[t];
        const Tensor dh_out = time_slice(grad_hidden, t);
        Tensor dh_prev({batch, hid});
        for (std::size_t k = 0; k < batch * hid; ++k) {
            const double dh = dh_out[k] + dh_next[k];
            const double z = s.update[k], n = s.candidate[k];
            d_z[k] = dh * (s.h_prev[k] - n) * z * (1.0 - z);
            d_n[k] = dh * (1.0 - z) * (1.0 - n * n);
            dh_prev[k] = dh * z;
        }
        // Candidate path: its recurrent input is reset * h_prev.
        accumulate_gate_grads(grads.params, gn, s.x, s.reset_h, d_n);
        const Tensor d_reset_h = matmul(d_n, wt.w_h[gn]);
        for (std::size_t k = 0; k < batch * hid; ++k) {
            const double r = s.reset[k];
            d_r[k] = d_reset_h[k] * s.h_prev[k] * r * (1.0 - r);
            dh_prev[k] += d_reset_h[k] * r;
        }
        accumulate_gate_grads(grads.params, gr, s.x, s.h_prev, d_r);
        accumulate_gate_grads(grads.params, gz, s.x, s.h_prev, d_z);
        matmul_accumulate(d_r, wt.w_h[gr], dh_prev);
        matmul_accumulate(d_z, wt.w_h[gz], dh_prev);

        Tensor dx({batch, in});
        matmul_accumulate(d_r, wt.w_x[gr], dx);
        matmul_accumulate(d_z, wt.w_x[gz], dx);
        matmul_accumulate(d_n, wt.w_x[gn], dx);
        set_time_slice(grads.inputs, t, dx);
        dh_next = std::move(dh_prev);
    }
    return grads;
}

namespace {

template <class Params, class Trace>
BidirectionalOutput<Trace> bidirectional_impl(const Tensor& sequence, const Params& fwd, const Params& bwd,
                                              bool with_cell) {
    fwd.validate();
    bwd.validate();
    if (fwd.hidden_dim() != bwd.hidden_dim() || fwd.input_dim() != bwd.input_dim()) {
        throw DimensionError("bidirectional_forward: forward and backward cells differ in dimensions (hidden " +
                             std::to_string(fwd.hidden_dim()) + " vs " + std::to_string(bwd.hidden_dim()) + ")");
    }
    check_sequence(sequence, fwd.input_dim());
    const std::size_t batch = sequence.dim(0), steps = sequence.dim(1), hid = fwd.hidden_dim();
    const CellState init = zero_state(batch, hid, with_cell);
    auto f = unroll_forward(sequence, fwd, init);
    auto b = unroll_forward(reverse_time(sequence), bwd, init);

    BidirectionalOutput<Trace> out{Tensor({batch, steps, 2 * hid}), std::move(f.trace), std::move(b.trace)};
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t j = 0; j < hid; ++j) {
                out.output.at(n, t, j) = f.hidden.at(n, t, j);
                out.output.at(n, t, hid + j) = b.hidden.at(n, steps - 1 - t, j);
            }
    return out;
}

template <class Params, class Trace>
BidirectionalGrads<Params> bidirectional_backward_impl(const BidirectionalOutput<Trace>& out,
                                                       const Tensor& grad_output, const Params& fwd,
                                                       const Params& bwd) {
    require_same_shape(out.output, grad_output, "bidirectional_backward");
    const std::size_t batch = grad_output.dim(0), steps = grad_output.dim(1), hid = fwd.hidden_dim();
    Tensor g_fwd({batch, steps, hid});
    Tensor g_bwd({batch, steps, hid});
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t j = 0; j < hid; ++j) {
                g_fwd.at(n, t, j) = grad_output.at(n, t, j);
                g_bwd.at(n, steps - 1 - t, j) = grad_output.at(n, t, hid + j);
            }
    auto gf = rnn_backward(out.forward, g_fwd, fwd);
    auto gb = rnn_backward(out.backward, g_bwd, bwd);
    Tensor dx = gf.inputs;
    add_in_place(dx, reverse_time(gb.inputs));
    return {std::move(gf.params), std::move(gb.params), std::move(dx)};
}

}  // namespace

BidirectionalOutput<LstmTrace> bidirectional_forward(const Tensor& sequence, const LstmParams& forward_params,
                                                     const LstmParams& backward_params) {
    return bidirectional_impl<LstmParams, LstmTrace>(sequence, forward_params, backward_params, true);
}

BidirectionalOutput<GruTrace> bidirectional_forward(const Tensor& sequence, const GruParams& forward_params,
                                                    const GruParams& backward_params) {
    return bidirectional_impl<GruParams, GruTrace>(sequence, forward_params, backward_params, false);
}

BidirectionalGrads<LstmParams> bidirectional_backward(const BidirectionalOutput<LstmTrace>& out,
                                                      const Tensor& grad_output, const LstmParams& forward_params,
                                                      const LstmParams& backward_params) {
    return bidirectional_backward_impl(out, grad_output, forward_params, backward_params);
}

BidirectionalGrads<GruParams> bidirectional_backward(const BidirectionalOutput<GruTrace>& out,
                                                     const Tensor& grad_output, const GruParams& forward_params,
                                                     const GruParams& backward_params) {
    return bidirectional_backward_impl(out, grad_output, forward_params, backward_params);
}

DenseHead DenseHead::zeros(std::size_t feature_dim, std::size_t horizon) {
    return {Tensor({feature_dim, horizon}), Tensor({horizon})};
}

DenseHead DenseHead::random(std::size_t feature_dim, std::size_t horizon, Rng& rng) {
    return {init_weights({feature_dim, horizon}, InitScheme::uniform_scaled, rng),
            init_weights({horizon}, InitScheme::zeros, rng)};
}

Tensor dense_head_forward(const Tensor& features, const DenseHead& head) {
    require_rank(features, 2, "dense_head_forward features");
    if (features.dim(1) != head.feature_dim() || head.b.size() != head.horizon()) {
        throw DimensionError("dense_head_forward: features " + shape_to_string(features.shape()) +
                             " do not match head " + shape_to_string(head.w.shape()));
    }
    Tensor out = matmul(features, head.w);
    add_row_bias(out, head.b);
    SEQCAST_CHECK_FINITE(out, "dense_head_forward");
    return out;
}

DenseHeadGrads dense_head_backward(const Tensor& features, const Tensor& grad_out, const DenseHead& head) {
    if (grad_out.shape() != Shape{features.dim(0), head.horizon()}) {
        throw DimensionError("dense_head_backward: grad " + shape_to_string(grad_out.shape()) +
                             " does not match output shape");
    }
    DenseHeadGrads g{DenseHead::zeros(head.feature_dim(), head.horizon()), Tensor(features.shape())};
    matmul_tn_accumulate(features, grad_out, g.head.w);
    accumulate_column_sums(grad_out, g.head.b);
    g.features = matmul_nt(grad_out, head.w);
    return g;
}

}  // namespace seqcast
