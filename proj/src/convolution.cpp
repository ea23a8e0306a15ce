#include "seqcast/convolution.hpp"

#include "seqcast/errors.hpp"
#include "seqcast/init.hpp"

#include <cmath>
#include <numeric>

namespace seqcast {

void ConvSpec::validate() const {
    if (filters == 0 || kernel_size == 0 || stride == 0 || dilation == 0) {
        throw ConfigError("ConvSpec: filters, kernel_size, stride and dilation must all be >= 1");
    }
}

std::size_t ConvSpec::output_length(std::size_t input_length) const {
    if (padding == Padding::causal) return (input_length - 1) / stride + 1;
    if (input_length < span()) {
        throw DimensionError("conv1d: input length " + std::to_string(input_length) + " shorter than kernel span " +
                             std::to_string(span()));
    }
    return (input_length - span()) / stride + 1;
}

void TcnSpec::validate() const {
    if (dilations.empty()) throw ConfigError("TcnSpec: dilations must be non-empty");
    for (auto d : dilations)
        if (d == 0) throw ConfigError("TcnSpec: dilations must be positive");
    if (kernel_size == 0 || filters == 0) throw ConfigError("TcnSpec: kernel_size and filters must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("TcnSpec: dropout_rate must be in [0, 1)");
}

void CnnSpec::validate() const {
    if (filters == 0 || kernel_size == 0 || pool_size == 0) {
        throw ConfigError("CnnSpec: filters, kernel_size and pool_size must be positive");
    }
}

namespace {

void check_conv_args(const Tensor& x, const ConvSpec& spec, const Tensor& weights) {
    spec.validate();
    require_rank(x, 3, "conv1d input");
    require_rank(weights, 3, "conv1d weights");
    if (weights.dim(0) != spec.kernel_size || weights.dim(1) != x.dim(2) || weights.dim(2) != spec.filters) {
        throw DimensionError("conv1d: weights " + shape_to_string(weights.shape()) + " do not match input " +
                             shape_to_string(x.shape()) + " with kernel " + std::to_string(spec.kernel_size) +
                             " and " + std::to_string(spec.filters) + " filters");
    }
}

// Input step read by tap i of output step t, or -1 when it falls in the padding.
inline long source_step(const ConvSpec& spec, std::size_t t, std::size_t i) {
    const long pad = spec.padding == Padding::causal ? static_cast<long>(spec.dilation * (spec.kernel_size - 1)) : 0;
    return static_cast<long>(t * spec.stride + spec.dilation * i) - pad;
}

Tensor relu_mask_grad(const Tensor& grad, const Tensor& pre) {
    Tensor out = grad;
    for (std::size_t k = 0; k < out.size(); ++k)
        if (!(pre[k] > 0.0)) out[k] = 0.0;
    return out;
}

std::size_t channel_count(const Tensor& v) { return v.rank() == 1 ? 1 : v.shape().back(); }

std::vector<double> channel_norms(const Tensor& v) {
    const std::size_t ch = channel_count(v);
    std::vector<double> sq(ch, 0.0);
    for (std::size_t k = 0; k < v.size(); ++k) sq[k % ch] += v[k] * v[k];
    for (auto& s : sq) s = std::sqrt(s);
    return sq;
}

void check_weight_norm_args(const Tensor& v, const Tensor& g) {
    if (g.size() != channel_count(v)) {
        throw DimensionError("weight_norm: gain " + shape_to_string(g.shape()) + " does not match direction " +
                             shape_to_string(v.shape()));
    }
}

}  // namespace

Tensor conv1d_forward(const Tensor& x, const ConvSpec& spec, const Tensor& weights, const Tensor& bias) {
    check_conv_args(x, spec, weights);
    if (bias.size() != spec.filters) throw DimensionError("conv1d: bias size does not match filters");
    const std::size_t batch = x.dim(0), steps = x.dim(1), in_ch = x.dim(2), out_ch = spec.filters;
    const std::size_t out_len = spec.output_length(steps);
    Tensor y({batch, out_len, out_ch});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < out_len; ++t) {
            double* yrow = &y.at(b, t, 0);
            for (std::size_t o = 0; o < out_ch; ++o) yrow[o] = bias[o];
            for (std::size_t i = 0; i < spec.kernel_size; ++i) {
                const long src = source_step(spec, t, i);
                if (src < 0 || src >= static_cast<long>(steps)) continue;
                const double* xrow = &x.at(b, static_cast<std::size_t>(src), 0);
                for (std::size_t c = 0; c < in_ch; ++c) {
                    const double xv = xrow[c];
                    const double* wrow = &weights.at(i, c, 0);
                    for (std::size_t o = 0; o < out_ch; ++o) yrow[o] += wrow[o] * xv;
                }
            }
        }
    }
    SEQCAST_CHECK_FINITE(y, "conv1d_forward");
    return y;
}

ConvGrads conv1d_backward(const Tensor& x, const ConvSpec& spec, const Tensor& weights, const Tensor& grad_out) {
    check_conv_args(x, spec, weights);
    const std::size_t batch = x.dim(0), steps = x.dim(1), in_ch = x.dim(2), out_ch = spec.filters;
    const std::size_t out_len = spec.output_length(steps);
    if (grad_out.shape() != Shape{batch, out_len, out_ch}) {
        throw DimensionError("conv1d_backward: grad " + shape_to_string(grad_out.shape()) +
                             " does not match forward output");
    }
    ConvGrads g{Tensor(weights.shape()), Tensor({out_ch}), Tensor(x.shape())};
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < out_len; ++t) {
            const double* gy = &grad_out.at(b, t, 0);
            for (std::size_t o = 0; o < out_ch; ++o) g.bias[o] += gy[o];
            for (std::size_t i = 0; i < spec.kernel_size; ++i) {
                const long src = source_step(spec, t, i);
                if (src < 0 || src >= static_cast<long>(steps)) continue;
                const double* xrow = &x.at(b, static_cast<std::size_t>(src), 0);
                double* dxrow = &g.inputs.at(b, static_cast<std::size_t>(src), 0);
                for (std::size_t c = 0; c < in_ch; ++c) {
                    const double* wrow = &weights.at(i, c, 0);
                    double* dwrow = &g.weights.at(i, c, 0);
                    double acc = 0.0;
                    for (std::size_t o = 0; o < out_ch; ++o) {
                        dwrow[o] += xrow[c] * gy[o];
                        acc += wrow[o] * gy[o];
                    }
                    dxrow[c] += acc;
                }
            }
        }
    }
    return g;
}

PoolResult max_pool1d(const Tensor& x, std::size_t pool_size) {
    require_rank(x, 3, "max_pool1d input");
    if (pool_size == 0) throw ConfigError("max_pool1d: pool_size must be >= 1");
    const std::size_t batch = x.dim(0), steps = x.dim(1), ch = x.dim(2);
    if (pool_size > steps) {
        throw DimensionError("max_pool1d: pool_size " + std::to_string(pool_size) + " exceeds length " +
                             std::to_string(steps));
    }
    const std::size_t out_len = steps / pool_size;
    PoolResult r{Tensor({batch, out_len, ch}), {}};
    r.argmax.resize(r.output.size());
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < out_len; ++t)
            for (std::size_t c = 0; c < ch; ++c) {
                std::size_t best = t * pool_size;
                for (std::size_t s = best + 1; s < (t + 1) * pool_size; ++s)
                    if (x.at(b, s, c) > x.at(b, best, c)) best = s;
                const std::size_t out_idx = (b * out_len + t) * ch + c;
                r.output[out_idx] = x.at(b, best, c);
                r.argmax[out_idx] = (b * steps + best) * ch + c;
            }
    return r;
}

Tensor max_pool1d_backward(const PoolResult& pool, const Shape& input_shape, const Tensor& grad_out) {
    require_same_shape(pool.output, grad_out, "max_pool1d_backward");
    Tensor dx(input_shape);
    for (std::size_t k = 0; k < grad_out.size(); ++k) dx[pool.argmax[k]] += grad_out[k];
    return dx;
}

Tensor weight_norm_apply(const Tensor& v, const Tensor& g) {
    check_weight_norm_args(v, g);
    const auto norms = channel_norms(v);
    for (std::size_t c = 0; c < norms.size(); ++c) {
        if (!(norms[c] > 0.0)) {
            throw NumericalError("weight_norm_apply: direction vector of channel " + std::to_string(c) +
                                 " has zero norm");
        }
    }
    const std::size_t ch = norms.size();
    Tensor w(v.shape());
    for (std::size_t k = 0; k < v.size(); ++k) w[k] = g[k % ch] * v[k] / norms[k % ch];
    return w;
}

WeightNormGrads weight_norm_backward(const Tensor& v, const Tensor& g, const Tensor& grad_w) {
    check_weight_norm_args(v, g);
    require_same_shape(v, grad_w, "weight_norm_backward");
    const auto norms = channel_norms(v);
    const std::size_t ch = norms.size();
    // dL/dg = <grad_w, v>/||v||;  dL/dv = g/||v|| * grad_w - g <grad_w, v>/||v||^3 * v
    std::vector<double> dot(ch, 0.0);
    for (std::size_t k = 0; k < v.size(); ++k) dot[k % ch] += grad_w[k] * v[k];
    WeightNormGrads out{Tensor(v.shape()), Tensor(g.shape())};
    for (std::size_t c = 0; c < ch; ++c) out.g[c] = dot[c] / norms[c];
    for (std::size_t k = 0; k < v.size(); ++k) {
        const std::size_t c = k % ch;
        const double n = norms[c];
        out.v[k] = g[c] / n * grad_w[k] - g[c] * dot[c] / (n * n * n) * v[k];
    }
    return out;
}

Tensor apply_channel_mask(const Tensor& x, const Tensor& mask) {
    const std::size_t batch = x.dim(0), steps = x.dim(1), ch = x.dim(2);
    if (mask.shape() != Shape{batch, ch}) {
        throw DimensionError("channel mask " + shape_to_string(mask.shape()) + " does not fit " +
                             shape_to_string(x.shape()));
    }
    Tensor out = x;
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t c = 0; c < ch; ++c) out.at(b, t, c) *= mask.at(b, c);
    return out;
}

DropoutResult spatial_dropout(const Tensor& x, double rate, Rng& rng, bool training) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("spatial_dropout: rate must be in [0, 1)");
    require_rank(x, 3, "spatial_dropout input");
    const std::size_t batch = x.dim(0), ch = x.dim(2);
    DropoutResult r{x, Tensor({batch, ch}, 1.0)};
    if (!training || rate == 0.0) return r;
    const double keep_scale = 1.0 / (1.0 - rate);
    for (auto& m : r.mask.values()) m = rng.bernoulli(rate) ? 0.0 : keep_scale;
    r.output = apply_channel_mask(x, r.mask);
    return r;
}

ResidualBlockParams ResidualBlockParams::random(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, Rng& rng) {
    auto make_conv = [&](std::size_t cin) {
        WeightNormConv c;
        c.v = init_weights({kernel, cin, out_ch}, InitScheme::uniform_scaled, rng);
        // Gains start at ||v|| so the effective kernel initially equals v.
        const auto norms = channel_norms(c.v);
        c.g = Tensor({out_ch}, std::vector<double>(norms.begin(), norms.end()));
        c.bias = init_weights({out_ch}, InitScheme::zeros, rng);
        return c;
    };
    ResidualBlockParams p;
    p.conv1 = make_conv(in_ch);
    p.conv2 = make_conv(out_ch);
    if (in_ch != out_ch) {
        p.match_w = init_weights({1, in_ch, out_ch}, InitScheme::uniform_scaled, rng);
        p.match_b = Tensor({out_ch});
    }
    return p;
}

ResidualBlockParams ResidualBlockParams::zeros_like(const ResidualBlockParams& other) {
    auto zero_conv = [](const WeightNormConv& c) {
        return WeightNormConv{Tensor(c.v.shape()), Tensor(c.g.shape()), Tensor(c.bias.shape())};
    };
    ResidualBlockParams p;
    p.conv1 = zero_conv(other.conv1);
    p.conv2 = zero_conv(other.conv2);
    if (other.match_w) {
        p.match_w = Tensor(other.match_w->shape());
        p.match_b = Tensor(other.match_b->shape());
    }
    return p;
}

void ResidualBlockParams::validate() const {
    const std::size_t in = in_channels(), out = out_channels(), k = conv1.v.dim(0);
    auto check = [&](const WeightNormConv& c, std::size_t cin, const char* which) {
        if (c.v.shape() != Shape{k, cin, out} || c.g.shape() != Shape{out} || c.bias.shape() != Shape{out}) {
            throw DimensionError(std::string("residual block ") + which + " has inconsistent shapes " +
                                 shape_to_string(c.v.shape()));
        }
    };
    check(conv1, in, "conv1");
    check(conv2, out, "conv2");
    if ((in != out) != match_w.has_value() || match_w.has_value() != match_b.has_value()) {
        throw DimensionError("residual block: 1x1 matching conv must be present exactly when channel counts differ");
    }
    if (match_w && (match_w->shape() != Shape{1, in, out} || match_b->shape() != Shape{out})) {
        throw DimensionError("residual block: 1x1 matching conv has wrong shape " +
                             shape_to_string(match_w->shape()));
    }
}

namespace {

ConvSpec block_conv_spec(const BlockConfig& config, std::size_t filters) {
    return ConvSpec{filters, config.kernel_size, 1, config.dilation, Padding::causal};
}

ConvSpec pointwise_spec(std::size_t filters) { return ConvSpec{filters, 1, 1, 1, Padding::causal}; }

}  // namespace

std::pair<Tensor, ResidualBlockTrace> residual_block_forward(const Tensor& x, const ResidualBlockParams& params,
                                                             const BlockConfig& config, Rng& rng, bool training) {
    params.validate();
    require_rank(x, 3, "residual block input");
    if (x.dim(2) != params.in_channels()) {
        throw DimensionError("residual block: input " + shape_to_string(x.shape()) + " expects " +
                             std::to_string(params.in_channels()) + " channels");
    }
    const ConvSpec spec = block_conv_spec(config, params.out_channels());

    ResidualBlockTrace tr;
    tr.x = x;
    tr.w1 = weight_norm_apply(params.conv1.v, params.conv1.g);
    tr.pre1 = conv1d_forward(x, spec, tr.w1, params.conv1.bias);
    auto drop1 = spatial_dropout(activation(tr.pre1, Activation::relu), config.dropout_rate, rng, training);
    tr.mask1 = std::move(drop1.mask);
    tr.hidden = std::move(drop1.output);

    tr.w2 = weight_norm_apply(params.conv2.v, params.conv2.g);
    tr.pre2 = conv1d_forward(tr.hidden, spec, tr.w2, params.conv2.bias);
    auto drop2 = spatial_dropout(activation(tr.pre2, Activation::relu), config.dropout_rate, rng, training);
    tr.mask2 = std::move(drop2.mask);

    tr.sum = params.match_w ? conv1d_forward(x, pointwise_spec(params.out_channels()), *params.match_w,
                                             *params.match_b)
                            : x;
    add_in_place(tr.sum, drop2.output);
    Tensor out = activation(tr.sum, Activation::relu);
    return {std::move(out), std::move(tr)};
}

ResidualBlockGrads residual_block_backward(const ResidualBlockTrace& trace, const Tensor& grad_out,
                                           const ResidualBlockParams& params, const BlockConfig& config) {
    require_same_shape(trace.sum, grad_out, "residual_block_backward");
    const ConvSpec spec = block_conv_spec(config, params.out_channels());
    ResidualBlockGrads g{ResidualBlockParams::zeros_like(params), Tensor(trace.x.shape())};

    const Tensor d_sum = relu_mask_grad(grad_out, trace.sum);

    // Second stage.
    const Tensor d_pre2 = relu_mask_grad(apply_channel_mask(d_sum, trace.mask2), trace.pre2);
    auto c2 = conv1d_backward(trace.hidden, spec, trace.w2, d_pre2);
    auto wn2 = weight_norm_backward(params.conv2.v, params.conv2.g, c2.weights);
    g.params.conv2 = {std::move(wn2.v), std::move(wn2.g), std::move(c2.bias)};

    // First stage.
    const Tensor d_pre1 = relu_mask_grad(apply_channel_mask(c2.inputs, trace.mask1), trace.pre1);
    auto c1 = conv1d_backward(trace.x, spec, trace.w1, d_pre1);
    auto wn1 = weight_norm_backward(params.conv1.v, params.conv1.g, c1.weights);
    g.params.conv1 = {std::move(wn1.v), std::move(wn1.g), std::move(c1.bias)};
    g.inputs = std::move(c1.inputs);

    // Skip path.
    if (params.match_w) {
        auto m = conv1d_backward(trace.x, pointwise_spec(params.out_channels()), *params.match_w, d_sum);
        g.params.match_w = std::move(m.weights);
        g.params.match_b = std::move(m.bias);
        add_in_place(g.inputs, m.inputs);
    } else {
        add_in_place(g.inputs, d_sum);
    }
    return g;
}

TcnParams TcnParams::random(const TcnSpec& spec, std::size_t in_ch, std::size_t horizon, Rng& rng) {
    spec.validate();
    TcnParams p;
    std::size_t ch = in_ch;
    for (std::size_t i = 0; i < spec.dilations.size(); ++i) {
        p.blocks.push_back(ResidualBlockParams::random(ch, spec.filters, spec.kernel_size, rng));
        ch = spec.filters;
    }
    p.head = DenseHead::random(spec.filters, horizon, rng);
    return p;
}

namespace {

void check_tcn(const TcnSpec& spec, const TcnParams& params) {
    spec.validate();
    if (params.blocks.size() != spec.dilations.size()) {
        throw DimensionError("tcn: " + std::to_string(params.blocks.size()) + " blocks for " +
                             std::to_string(spec.dilations.size()) + " dilations");
    }
}

BlockConfig block_config(const TcnSpec& spec, std::size_t i) {
    return BlockConfig{spec.kernel_size, spec.dilations[i], spec.dropout_rate};
}

}  // namespace

std::pair<Tensor, TcnTrace> tcn_trunk_forward(const Tensor& x, const TcnSpec& spec, const TcnParams& params, Rng& rng,
                                              bool training) {
    check_tcn(spec, params);
    TcnTrace trace;
    Tensor h = x;
    for (std::size_t i = 0; i < params.blocks.size(); ++i) {
        auto [out, bt] = residual_block_forward(h, params.blocks[i], block_config(spec, i), rng, training);
        trace.blocks.push_back(std::move(bt));
        h = std::move(out);
    }
    trace.trunk = h;
    return {std::move(h), std::move(trace)};
}

std::pair<Tensor, TcnTrace> tcn_forward(const Tensor& x, const TcnSpec& spec, const TcnParams& params, Rng& rng,
                                        bool training) {
    auto [trunk, trace] = tcn_trunk_forward(x, spec, params, rng, training);
    trace.features = time_slice(trunk, trunk.dim(1) - 1);
    Tensor out = dense_head_forward(trace.features, params.head);
    return {std::move(out), std::move(trace)};
}

TcnGrads tcn_trunk_backward(const TcnTrace& trace, const Tensor& grad_trunk, const TcnSpec& spec,
                            const TcnParams& params) {
    check_tcn(spec, params);
    if (trace.blocks.size() != params.blocks.size()) throw DimensionError("tcn backward: trace/params mismatch");
    require_same_shape(trace.trunk, grad_trunk, "tcn_trunk_backward");
    TcnGrads g;
    g.blocks.resize(params.blocks.size());
    g.head = DenseHead::zeros(params.head.feature_dim(), params.head.horizon());
    Tensor grad = grad_trunk;
    for (std::size_t i = params.blocks.size(); i-- > 0;) {
        auto bg = residual_block_backward(trace.blocks[i], grad, params.blocks[i], block_config(spec, i));
        g.blocks[i] = std::move(bg.params);
        grad = std::move(bg.inputs);
    }
    g.inputs = std::move(grad);
    return g;
}

TcnGrads tcn_backward(const TcnTrace& trace, const Tensor& grad_out, const TcnSpec& spec, const TcnParams& params) {
    auto hg = dense_head_backward(trace.features, grad_out, params.head);
    Tensor grad_trunk(trace.trunk.shape());
    set_time_slice(grad_trunk, grad_trunk.dim(1) - 1, hg.features);
    TcnGrads g = tcn_trunk_backward(trace, grad_trunk, spec, params);
    g.head = std::move(hg.head);
    return g;
}

std::size_t receptive_field(std::size_t kernel_size, std::span<const std::size_t> dilations,
                            std::size_t convs_per_block) {
    const std::size_t total = std::accumulate(dilations.begin(), dilations.end(), std::size_t{0});
    return 1 + convs_per_block * (kernel_size - 1) * total;
}

CnnParams CnnParams::random(const CnnSpec& spec, std::size_t in_ch, std::size_t steps, std::size_t horizon,
                            Rng& rng) {
    spec.validate();
    if (spec.pool_size > steps) throw ConfigError("CnnSpec: pool_size exceeds input length");
    CnnParams p;
    p.w = init_weights({spec.kernel_size, in_ch, spec.filters}, InitScheme::uniform_scaled, rng);
    p.bias = init_weights({spec.filters}, InitScheme::zeros, rng);
    p.head = DenseHead::random((steps / spec.pool_size) * spec.filters, horizon, rng);
    return p;
}

namespace {

ConvSpec cnn_conv_spec(const CnnSpec& spec) { return ConvSpec{spec.filters, spec.kernel_size, 1, 1, Padding::causal}; }

}  // namespace

std::pair<Tensor, CnnTrace> cnn_forward(const Tensor& x, const CnnSpec& spec, const CnnParams& params) {
    CnnTrace tr;
    tr.x = x;
    tr.pre = conv1d_forward(x, cnn_conv_spec(spec), params.w, params.bias);
    tr.pool = max_pool1d(activation(tr.pre, Activation::relu), spec.pool_size);
    const Tensor& pooled = tr.pool.output;
    tr.features = pooled.reshaped({pooled.dim(0), pooled.dim(1) * pooled.dim(2)});
    Tensor out = dense_head_forward(tr.features, params.head);
    return {std::move(out), std::move(tr)};
}

CnnGrads cnn_backward(const CnnTrace& trace, const Tensor& grad_out, const CnnSpec& spec, const CnnParams& params) {
    auto hg = dense_head_backward(trace.features, grad_out, params.head);
    const Tensor d_pooled = hg.features.reshaped(trace.pool.output.shape());
    const Tensor d_act = max_pool1d_backward(trace.pool, trace.pre.shape(), d_pooled);
    const Tensor d_pre = relu_mask_grad(d_act, trace.pre);
    auto cg = conv1d_backward(trace.x, cnn_conv_spec(spec), params.w, d_pre);
    return CnnGrads{CnnParams{std::move(cg.weights), std::move(cg.bias), std::move(hg.head)}, std::move(cg.inputs)};
}

}  // namespace seqcast
