#pragma once

#include "seqcast/rng.hpp"
#include "seqcast/tensor.hpp"

#include <array>
#include <optional>
#include <vector>

namespace seqcast {

enum class LstmGate : std::size_t { forget = 0, input = 1, candidate = 2, output = 3 };
enum class GruGate : std::size_t { reset = 0, update = 1, candidate = 2 };

/// Per-gate weights of a recurrent cell. Every gate has its own input
/// weights [input_dim x hidden_dim], recurrent weights [hidden_dim x
/// hidden_dim] and bias [hidden_dim]. The same layout doubles as the
/// container for parameter gradients.
template <std::size_t Gates>
struct GateParams {
    static constexpr std::size_t gate_count = Gates;

    std::array<Tensor, Gates> w_x;
    std::array<Tensor, Gates> w_h;
    std::array<Tensor, Gates> b;

    static GateParams zeros(std::size_t input_dim, std::size_t hidden_dim);
    /// Weights uniform in +-1/sqrt(fan_in), biases zero.
    static GateParams random(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

    std::size_t input_dim() const { return w_x[0].dim(0); }
    std::size_t hidden_dim() const { return w_h[0].dim(0); }

    /// Throws DimensionError unless all gates agree on input and hidden dims.
    void validate() const;
};

using LstmParams = GateParams<4>;
using GruParams = GateParams<3>;

template <class Gate>
constexpr std::size_t gate_index(Gate g) noexcept {
    return static_cast<std::size_t>(g);
}

struct CellState {
    Tensor h;                ///< [batch x hidden]
    std::optional<Tensor> c;  ///< [batch x hidden]; LSTM only
};

CellState zero_state(std::size_t batch, std::size_t hidden, bool with_cell);

struct LstmStepTrace {
    Tensor x, h_prev, c_prev;
    Tensor forget, input, candidate, output;
    Tensor c, tanh_c, h;
};

struct GruStepTrace {
    Tensor x, h_prev;
    Tensor reset, update, candidate;
    Tensor reset_h;  ///< reset gate applied to the previous hidden state
    Tensor h;
};

struct LstmTrace {
    std::vector<LstmStepTrace> steps;
};

struct GruTrace {
    std::vector<GruStepTrace> steps;
};

std::pair<CellState, LstmStepTrace> lstm_cell_forward(const Tensor& x_t, const CellState& state,
                                                      const LstmParams& params);

/// H_t = Z_t * H_{t-1} + (1 - Z_t) * candidate, with the update gate weighting
/// the previous state.
std::pair<Tensor, GruStepTrace> gru_cell_forward(const Tensor& x_t, const Tensor& h_prev, const GruParams& params);

template <class Trace>
struct Unrolled {
    Tensor hidden;  ///< [batch x steps x hidden]
    Trace trace;
};

/// Runs the cell left to right over sequence [batch x steps x input_dim].
Unrolled<LstmTrace> unroll_forward(const Tensor& sequence, const LstmParams& params, const CellState& init);
Unrolled<GruTrace> unroll_forward(const Tensor& sequence, const GruParams& params, const CellState& init);

template <class Params>
struct RecurrentGrads {
    Params params;
    Tensor inputs;  ///< [batch x steps x input_dim]
};

/// Backpropagation through time. grad_hidden is dLoss/dH for every step,
/// [batch x steps x hidden]; the initial state is treated as a constant.
RecurrentGrads<LstmParams> rnn_backward(const LstmTrace& trace, const Tensor& grad_hidden, const LstmParams& params);
RecurrentGrads<GruParams> rnn_backward(const GruTrace& trace, const Tensor& grad_hidden, const GruParams& params);

template <class Trace>
struct BidirectionalOutput {
    Tensor output;  ///< [batch x steps x 2*hidden]; forward half first
    Trace forward;
    Trace backward;  ///< trace of the pass over the time-reversed sequence
};

BidirectionalOutput<LstmTrace> bidirectional_forward(const Tensor& sequence, const LstmParams& forward_params,
                                                     const LstmParams& backward_params);
BidirectionalOutput<GruTrace> bidirectional_forward(const Tensor& sequence, const GruParams& forward_params,
                                                    const GruParams& backward_params);

template <class Params>
struct BidirectionalGrads {
    Params forward;
    Params backward;
    Tensor inputs;
};

BidirectionalGrads<LstmParams> bidirectional_backward(const BidirectionalOutput<LstmTrace>& out,
                                                      const Tensor& grad_output, const LstmParams& forward_params,
                                                      const LstmParams& backward_params);
BidirectionalGrads<GruParams> bidirectional_backward(const BidirectionalOutput<GruTrace>& out,
                                                     const Tensor& grad_output, const GruParams& forward_params,
                                                     const GruParams& backward_params);

/// Affine output layer mapping a feature vector to the forecast horizon.
struct DenseHead {
    Tensor w;  ///< [feature_dim x horizon]
    Tensor b;  ///< [horizon]

    static DenseHead zeros(std::size_t feature_dim, std::size_t horizon);
    static DenseHead random(std::size_t feature_dim, std::size_t horizon, Rng& rng);
    std::size_t feature_dim() const { return w.dim(0); }
    std::size_t horizon() const { return w.dim(1); }
};

Tensor dense_head_forward(const Tensor& features, const DenseHead& head);

struct DenseHeadGrads {
    DenseHead head;
    Tensor features;
};

DenseHeadGrads dense_head_backward(const Tensor& features, const Tensor& grad_out, const DenseHead& head);

}  // namespace seqcast
