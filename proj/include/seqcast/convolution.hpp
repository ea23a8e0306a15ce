#pragma once

#include "seqcast/recurrent.hpp"
#include "seqcast/rng.hpp"
#include "seqcast/tensor.hpp"

#include <optional>
#include <span>
#include <vector>

namespace seqcast {

enum class Padding { causal, none };

struct ConvSpec {
    std::size_t filters = 1;
    std::size_t kernel_size = 1;
    std::size_t stride = 1;
    std::size_t dilation = 1;
    Padding padding = Padding::causal;

    void validate() const;
    /// Number of input steps one output step spans: dilation * (kernel - 1) + 1.
    std::size_t span() const { return dilation * (kernel_size - 1) + 1; }
    std::size_t output_length(std::size_t input_length) const;
};

/// Temporal convolutional network layout: one residual block per dilation.
struct TcnSpec {
    static constexpr std::size_t convs_per_block = 2;

    std::vector<std::size_t> dilations{1, 2, 4, 8, 16, 32};
    std::size_t kernel_size = 3;
    std::size_t filters = 4;
    double dropout_rate = 0.0;

    void validate() const;
};

/// 1D convolution over x [batch x steps x in_ch] with weights
/// [kernel x in_ch x out_ch] and bias [out_ch]:
///   y[t] = sum_i w[i] * x[t*stride - d*(k-1-i)] + b      (causal, zero left pad)
///   y[t] = sum_i w[i] * x[t*stride + d*i] + b            (none, valid only)
Tensor conv1d_forward(const Tensor& x, const ConvSpec& spec, const Tensor& weights, const Tensor& bias);

struct ConvGrads {
    Tensor weights;
    Tensor bias;
    Tensor inputs;
};

ConvGrads conv1d_backward(const Tensor& x, const ConvSpec& spec, const Tensor& weights, const Tensor& grad_out);

struct PoolResult {
    Tensor output;
    std::vector<std::size_t> argmax;  ///< flat input index feeding each output element
};

/// Non-overlapping max pooling along the step axis; trailing remainder is
/// dropped. Ties resolve to the earliest step.
PoolResult max_pool1d(const Tensor& x, std::size_t pool_size);
Tensor max_pool1d_backward(const PoolResult& pool, const Shape& input_shape, const Tensor& grad_out);

/// w = g * v / ||v|| per output channel. The channel axis is the last axis
/// for rank >= 2; a rank-1 v is a single channel. g has one entry per channel.
Tensor weight_norm_apply(const Tensor& v, const Tensor& g);

struct WeightNormGrads {
    Tensor v;
    Tensor g;
};

WeightNormGrads weight_norm_backward(const Tensor& v, const Tensor& g, const Tensor& grad_w);

struct DropoutResult {
    Tensor output;
    Tensor mask;  ///< [batch x channels]; 0 for dropped channels, 1/(1-rate) for kept ones
};

/// Zeroes whole channels of x [batch x steps x channels], independently per
/// batch row. Identity when training is false or rate is 0; rng is only
/// advanced when a mask is actually drawn.
DropoutResult spatial_dropout(const Tensor& x, double rate, Rng& rng, bool training);
Tensor apply_channel_mask(const Tensor& x, const Tensor& mask);

/// Weight-normalized convolution: the kernel is g * v / ||v||.
struct WeightNormConv {
    Tensor v;     ///< [kernel x in_ch x out_ch]
    Tensor g;     ///< [out_ch]
    Tensor bias;  ///< [out_ch]
};

struct ResidualBlockParams {
    WeightNormConv conv1;
    WeightNormConv conv2;
    std::optional<Tensor> match_w;  ///< [1 x in_ch x out_ch]; present iff in_ch != out_ch
    std::optional<Tensor> match_b;  ///< [out_ch]

    static ResidualBlockParams random(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, Rng& rng);
    static ResidualBlockParams zeros_like(const ResidualBlockParams& other);
    std::size_t in_channels() const { return conv1.v.dim(1); }
    std::size_t out_channels() const { return conv1.v.dim(2); }
    void validate() const;
};

struct BlockConfig {
    std::size_t kernel_size = 3;
    std::size_t dilation = 1;
    double dropout_rate = 0.0;
};

struct ResidualBlockTrace {
    Tensor x;
    Tensor w1, pre1, mask1, hidden;  ///< hidden: first stage output after dropout
    Tensor w2, pre2, mask2;
    Tensor sum;  ///< skip + second stage output, before the final ReLU
};

/// out = ReLU(skip(x) + F(x)), F = [causal dilated conv (weight-normed) ->
/// ReLU -> spatial dropout] twice; skip is the 1x1 conv when present.
std::pair<Tensor, ResidualBlockTrace> residual_block_forward(const Tensor& x, const ResidualBlockParams& params,
                                                             const BlockConfig& config, Rng& rng, bool training);

struct ResidualBlockGrads {
    ResidualBlockParams params;
    Tensor inputs;
};

ResidualBlockGrads residual_block_backward(const ResidualBlockTrace& trace, const Tensor& grad_out,
                                           const ResidualBlockParams& params, const BlockConfig& config);

struct TcnParams {
    std::vector<ResidualBlockParams> blocks;
    DenseHead head;

    static TcnParams random(const TcnSpec& spec, std::size_t in_ch, std::size_t horizon, Rng& rng);
};

struct TcnTrace {
    std::vector<ResidualBlockTrace> blocks;
    Tensor trunk;  ///< [batch x steps x filters]
    Tensor features;  ///< last step of trunk, [batch x filters]
};

/// Residual stack only; output length equals input length.
std::pair<Tensor, TcnTrace> tcn_trunk_forward(const Tensor& x, const TcnSpec& spec, const TcnParams& params,
                                              Rng& rng, bool training);
/// Trunk followed by the dense head on the final step, [batch x horizon].
std::pair<Tensor, TcnTrace> tcn_forward(const Tensor& x, const TcnSpec& spec, const TcnParams& params, Rng& rng,
                                        bool training);

struct TcnGrads {
    std::vector<ResidualBlockParams> blocks;
    DenseHead head;
    Tensor inputs;
};

/// Gradients given dLoss/dTrunk [batch x steps x filters]; head grads are zero.
TcnGrads tcn_trunk_backward(const TcnTrace& trace, const Tensor& grad_trunk, const TcnSpec& spec,
                            const TcnParams& params);
TcnGrads tcn_backward(const TcnTrace& trace, const Tensor& grad_out, const TcnSpec& spec, const TcnParams& params);

/// 1 + convs_per_block * (kernel_size - 1) * sum(dilations).
std::size_t receptive_field(std::size_t kernel_size, std::span<const std::size_t> dilations,
                            std::size_t convs_per_block);

/// Single-layer CNN forecaster: causal conv -> ReLU -> max pool -> flatten -> dense.
struct CnnSpec {
    std::size_t filters = 16;
    std::size_t kernel_size = 3;
    std::size_t pool_size = 2;

    void validate() const;
};

struct CnnParams {
    Tensor w;     ///< [kernel x in_ch x filters]
    Tensor bias;  ///< [filters]
    DenseHead head;

    static CnnParams random(const CnnSpec& spec, std::size_t in_ch, std::size_t steps, std::size_t horizon, Rng& rng);
};

struct CnnTrace {
    Tensor x, pre;
    PoolResult pool;
    Tensor features;
};

std::pair<Tensor, CnnTrace> cnn_forward(const Tensor& x, const CnnSpec& spec, const CnnParams& params);

struct CnnGrads {
    CnnParams params;
    Tensor inputs;
};

CnnGrads cnn_backward(const CnnTrace& trace, const Tensor& grad_out, const CnnSpec& spec, const CnnParams& params);

}  // namespace seqcast
