#include "seqcast/model.hpp"

#include "seqcast/errors.hpp"

#include <array>
#include <sstream>

namespace seqcast {

namespace {

constexpr std::array<ModelKind, 6> kComparedKinds{ModelKind::lstm,    ModelKind::gru, ModelKind::bilstm,
                                                  ModelKind::bigru,   ModelKind::cnn, ModelKind::tcn};

constexpr std::array<std::pair<ModelKind, std::string_view>, 7> kKindNames{{{ModelKind::lstm, "lstm"},
                                                                           {ModelKind::gru, "gru"},
                                                                           {ModelKind::bilstm, "bilstm"},
                                                                           {ModelKind::bigru, "bigru"},
                                                                           {ModelKind::cnn, "cnn"},
                                                                           {ModelKind::tcn, "tcn"},
                                                                           {ModelKind::linear, "linear"}}};

}  // namespace

std::string_view to_string(ModelKind kind) {
    for (const auto& [k, name] : kKindNames)
        if (k == kind) return name;
    return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
    for (const auto& [k, n] : kKindNames)
        if (n == name) return k;
    throw ConfigError("unknown model kind '" + std::string(name) + "' (expected lstm, gru, bilstm, bigru, cnn, tcn)");
}

std::span<const ModelKind> compared_model_kinds() { return kComparedKinds; }

void ModelConfig::validate() const {
    if (in_len == 0 || horizon == 0) throw ConfigError("model in_len and horizon must be positive");
    switch (kind) {
        case ModelKind::lstm:
        case ModelKind::gru:
        case ModelKind::bilstm:
        case ModelKind::bigru:
            if (units == 0) throw ConfigError("recurrent units must be positive");
            break;
        case ModelKind::cnn:
            cnn.validate();
            if (cnn.pool_size > in_len) throw ConfigError("cnn pool_size exceeds in_len");
            break;
        case ModelKind::tcn:
            tcn.validate();
            break;
        case ModelKind::linear:
            break;
    }
}

namespace {

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoul(item));
    return out;
}

std::string double_text(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace

std::map<std::string, std::string> config_to_meta(const ModelConfig& c) {
    return {
        {"model", std::string(to_string(c.kind))},
        {"in_len", std::to_string(c.in_len)},
        {"horizon", std::to_string(c.horizon)},
        {"units", std::to_string(c.units)},
        {"cnn_filters", std::to_string(c.cnn.filters)},
        {"cnn_kernel", std::to_string(c.cnn.kernel_size)},
        {"cnn_pool", std::to_string(c.cnn.pool_size)},
        {"tcn_dilations", join_sizes(c.tcn.dilations)},
        {"tcn_kernel", std::to_string(c.tcn.kernel_size)},
        {"tcn_filters", std::to_string(c.tcn.filters)},
        {"tcn_dropout", double_text(c.tcn.dropout_rate)},
    };
}

ModelConfig config_from_meta(const std::map<std::string, std::string>& meta) {
    auto get = [&](const char* key) -> const std::string& {
        auto it = meta.find(key);
        if (it == meta.end()) throw DataError(std::string("model file missing metadata key '") + key + "'");
        return it->second;
    };
    ModelConfig c;
    try {
        c.kind = parse_model_kind(get("model"));
        c.in_len = std::stoul(get("in_len"));
        c.horizon = std::stoul(get("horizon"));
        c.units = std::stoul(get("units"));
        c.cnn.filters = std::stoul(get("cnn_filters"));
        c.cnn.kernel_size = std::stoul(get("cnn_kernel"));
        c.cnn.pool_size = std::stoul(get("cnn_pool"));
        c.tcn.dilations = parse_sizes(get("tcn_dilations"));
        c.tcn.kernel_size = std::stoul(get("tcn_kernel"));
        c.tcn.filters = std::stoul(get("tcn_filters"));
        c.tcn.dropout_rate = std::stod(get("tcn_dropout"));
    } catch (const std::logic_error& e) {
        throw DataError(std::string("model file has malformed metadata: ") + e.what());
    }
    c.validate();
    return c;
}

std::size_t Forecaster::parameter_count() {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.value->size();
    return n;
}

void Forecaster::check_inputs(const Tensor& inputs) const {
    require_rank(inputs, 3, "forecaster input");
    if (inputs.dim(1) != config_.in_len || inputs.dim(2) != 1) {
        throw DimensionError("forecaster input " + shape_to_string(inputs.shape()) + " expected [batch x " +
                             std::to_string(config_.in_len) + " x 1]");
    }
}

namespace {

template <std::size_t Gates>
void append_gate_params(std::vector<ParamRef>& out, const std::string& prefix, GateParams<Gates>& value,
                        GateParams<Gates>& grad) {
    static constexpr std::array<const char*, 4> lstm_names{"forget", "input", "candidate", "output"};
    static constexpr std::array<const char*, 3> gru_names{"reset", "update", "candidate"};
    for (std::size_t g = 0; g < Gates; ++g) {
        const std::string gate = Gates == 4 ? lstm_names[g] : gru_names[g];
        out.push_back({prefix + ".w_x." + gate, &value.w_x[g], &grad.w_x[g]});
        out.push_back({prefix + ".w_h." + gate, &value.w_h[g], &grad.w_h[g]});
        out.push_back({prefix + ".b." + gate, &value.b[g], &grad.b[g]});
    }
}

void append_head(std::vector<ParamRef>& out, DenseHead& value, DenseHead& grad) {
    out.push_back({"head.w", &value.w, &grad.w});
    out.push_back({"head.b", &value.b, &grad.b});
}

Tensor last_step_features(const Tensor& hidden) { return time_slice(hidden, hidden.dim(1) - 1); }

template <class Params, class Trace>
class RecurrentForecaster final : public Forecaster {
public:
    RecurrentForecaster(const ModelConfig& config, Rng& rng)
        : Forecaster(config),
          cell_(Params::random(1, config.units, rng)),
          head_(DenseHead::random(config.units, config.horizon, rng)),
          cell_grad_(Params::zeros(1, config.units)),
          head_grad_(DenseHead::zeros(config.units, config.horizon)) {}

    Tensor predict(const Tensor& inputs) const override {
        check_inputs(inputs);
        auto run = unroll_forward(inputs, cell_, initial_state(inputs.dim(0)));
        return dense_head_forward(last_step_features(run.hidden), head_);
    }

    Tensor forward(const Tensor& inputs, Rng&) override {
        check_inputs(inputs);
        auto run = unroll_forward(inputs, cell_, initial_state(inputs.dim(0)));
        features_ = last_step_features(run.hidden);
        trace_ = std::move(run.trace);
        return dense_head_forward(features_, head_);
    }

    void backward(const Tensor& grad_out) override {
        if (trace_.steps.empty()) throw Error("backward called before forward");
        auto hg = dense_head_backward(features_, grad_out, head_);
        const std::size_t batch = features_.dim(0), steps = trace_.steps.size();
        Tensor grad_hidden({batch, steps, config().units});
        set_time_slice(grad_hidden, steps - 1, hg.features);
        auto rg = rnn_backward(trace_, grad_hidden, cell_);
        cell_grad_ = std::move(rg.params);
        head_grad_ = std::move(hg.head);
        input_grad_ = std::move(rg.inputs);
    }

    const Tensor& input_grad() const override { return input_grad_; }

    std::vector<ParamRef> parameters() override {
        std::vector<ParamRef> out;
        append_gate_params(out, Params::gate_count == 4 ? "lstm" : "gru", cell_, cell_grad_);
        append_head(out, head_, head_grad_);
        return out;
    }

    std::unique_ptr<Forecaster> clone() const override { return std::make_unique<RecurrentForecaster>(*this); }

private:
    CellState initial_state(std::size_t batch) const {
        return zero_state(batch, config().units, Params::gate_count == 4);
    }

    Params cell_;
    DenseHead head_;
    Params cell_grad_;
    DenseHead head_grad_;
    Trace trace_;
    Tensor features_;
    Tensor input_grad_;
};

// Feature vector: final forward state concatenated with the final state of
// the reverse pass (which sits at step 0 of the merged output).
Tensor bidirectional_features(const Tensor& merged, std::size_t hidden) {
    const std::size_t batch = merged.dim(0), steps = merged.dim(1);
    Tensor f({batch, 2 * hidden});
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < hidden; ++j) {
            f.at(b, j) = merged.at(b, steps - 1, j);
            f.at(b, hidden + j) = merged.at(b, 0, hidden + j);
        }
    return f;
}

template <class Params, class Trace>
class BidirectionalForecaster final : public Forecaster {
public:
    BidirectionalForecaster(const ModelConfig& config, Rng& rng)
        : Forecaster(config),
          fwd_(Params::random(1, config.units, rng)),
          bwd_(Params::random(1, config.units, rng)),
          head_(DenseHead::random(2 * config.units, config.horizon, rng)),
          fwd_grad_(Params::zeros(1, config.units)),
          bwd_grad_(Params::zeros(1, config.units)),
          head_grad_(DenseHead::zeros(2 * config.units, config.horizon)) {}

    Tensor predict(const Tensor& inputs) const override {
        check_inputs(inputs);
        auto run = bidirectional_forward(inputs, fwd_, bwd_);
        return dense_head_forward(bidirectional_features(run.output, config().units), head_);
    }

    Tensor forward(const Tensor& inputs, Rng&) override {
        check_inputs(inputs);
        run_ = bidirectional_forward(inputs, fwd_, bwd_);
        features_ = bidirectional_features(run_.output, config().units);
        has_trace_ = true;
        return dense_head_forward(features_, head_);
    }

    void backward(const Tensor& grad_out) override {
        if (!has_trace_) throw Error("backward called before forward");
        auto hg = dense_head_backward(features_, grad_out, head_);
        const std::size_t hid = config().units, batch = features_.dim(0), steps = run_.output.dim(1);
        Tensor grad_merged(run_.output.shape());
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t j = 0; j < hid; ++j) {
                grad_merged.at(b, steps - 1, j) = hg.features.at(b, j);
                grad_merged.at(b, 0, hid + j) = hg.features.at(b, hid + j);
            }
        auto bg = bidirectional_backward(run_, grad_merged, fwd_, bwd_);
        fwd_grad_ = std::move(bg.forward);
        bwd_grad_ = std::move(bg.backward);
        head_grad_ = std::move(hg.head);
        input_grad_ = std::move(bg.inputs);
    }

    const Tensor& input_grad() const override { return input_grad_; }

    std::vector<ParamRef> parameters() override {
        std::vector<ParamRef> out;
        const std::string cell = Params::gate_count == 4 ? "lstm" : "gru";
        append_gate_params(out, "fwd_" + cell, fwd_, fwd_grad_);
        append_gate_params(out, "bwd_" + cell, bwd_, bwd_grad_);
        append_head(out, head_, head_grad_);
        return out;
    }

    std::unique_ptr<Forecaster> clone() const override { return std::make_unique<BidirectionalForecaster>(*this); }

private:
    Params fwd_, bwd_;
    DenseHead head_;
    Params fwd_grad_, bwd_grad_;
    DenseHead head_grad_;
    BidirectionalOutput<Trace> run_;
    bool has_trace_ = false;
    Tensor features_;
    Tensor input_grad_;
};

class CnnForecaster final : public Forecaster {
public:
    CnnForecaster(const ModelConfig& config, Rng& rng)
        : Forecaster(config), params_(CnnParams::random(config.cnn, 1, config.in_len, config.horizon, rng)) {
        grads_ = CnnParams{Tensor(params_.w.shape()), Tensor(params_.bias.shape()),
                           DenseHead::zeros(params_.head.feature_dim(), params_.head.horizon())};
    }

    Tensor predict(const Tensor& inputs) const override {
        check_inputs(inputs);
        return cnn_forward(inputs, config().cnn, params_).first;
    }

    Tensor forward(const Tensor& inputs, Rng&) override {
        check_inputs(inputs);
        auto [out, trace] = cnn_forward(inputs, config().cnn, params_);
        trace_ = std::move(trace);
        return out;
    }

    void backward(const Tensor& grad_out) override {
        if (trace_.x.empty()) throw Error("backward called before forward");
        auto g = cnn_backward(trace_, grad_out, config().cnn, params_);
        grads_ = std::move(g.params);
        input_grad_ = std::move(g.inputs);
    }

    const Tensor& input_grad() const override { return input_grad_; }

    std::vector<ParamRef> parameters() override {
        std::vector<ParamRef> out{{"conv.w", &params_.w, &grads_.w}, {"conv.bias", &params_.bias, &grads_.bias}};
        append_head(out, params_.head, grads_.head);
        return out;
    }

    std::unique_ptr<Forecaster> clone() const override { return std::make_unique<CnnForecaster>(*this); }

private:
    CnnParams params_;
    CnnParams grads_;
    CnnTrace trace_;
    Tensor input_grad_;
};

class TcnForecaster final : public Forecaster {
public:
    TcnForecaster(const ModelConfig& config, Rng& rng)
        : Forecaster(config), params_(TcnParams::random(config.tcn, 1, config.horizon, rng)) {
        for (const auto& b : params_.blocks) grads_.blocks.push_back(ResidualBlockParams::zeros_like(b));
        grads_.head = DenseHead::zeros(params_.head.feature_dim(), params_.head.horizon());
    }

    Tensor predict(const Tensor& inputs) const override {
        check_inputs(inputs);
        Rng unused(0);
        return tcn_forward(inputs, config().tcn, params_, unused, false).first;
    }

    Tensor forward(const Tensor& inputs, Rng& rng) override {
        check_inputs(inputs);
        auto [out, trace] = tcn_forward(inputs, config().tcn, params_, rng, true);
        trace_ = std::move(trace);
        return out;
    }

    void backward(const Tensor& grad_out) override {
        if (trace_.blocks.empty()) throw Error("backward called before forward");
        auto g = tcn_backward(trace_, grad_out, config().tcn, params_);
        // Element-wise so ParamRef pointers handed out by parameters() stay valid.
        for (std::size_t i = 0; i < grads_.blocks.size(); ++i) grads_.blocks[i] = std::move(g.blocks[i]);
        grads_.head = std::move(g.head);
        input_grad_ = std::move(g.inputs);
    }

    const Tensor& input_grad() const override { return input_grad_; }

    std::vector<ParamRef> parameters() override {
        std::vector<ParamRef> out;
        for (std::size_t i = 0; i < params_.blocks.size(); ++i) {
            auto& p = params_.blocks[i];
            auto& g = grads_.blocks[i];
            const std::string prefix = "block" + std::to_string(i);
            out.push_back({prefix + ".conv1.v", &p.conv1.v, &g.conv1.v});
            out.push_back({prefix + ".conv1.g", &p.conv1.g, &g.conv1.g});
            out.push_back({prefix + ".conv1.bias", &p.conv1.bias, &g.conv1.bias});
            out.push_back({prefix + ".conv2.v", &p.conv2.v, &g.conv2.v});
            out.push_back({prefix + ".conv2.g", &p.conv2.g, &g.conv2.g});
            out.push_back({prefix + ".conv2.bias", &p.conv2.bias, &g.conv2.bias});
            if (p.match_w) {
                out.push_back({prefix + ".match.w", &*p.match_w, &*g.match_w});
                out.push_back({prefix + ".match.bias", &*p.match_b, &*g.match_b});
            }
        }
        append_head(out, params_.head, grads_.head);
        return out;
    }

    std::unique_ptr<Forecaster> clone() const override { return std::make_unique<TcnForecaster>(*this); }

private:
    TcnParams params_;
    TcnParams grads_;
    TcnTrace trace_;
    Tensor input_grad_;
};

/// Dense head applied directly to the flattened input window.
class LinearForecaster final : public Forecaster {
public:
    LinearForecaster(const ModelConfig& config, Rng& rng)
        : Forecaster(config),
          head_(DenseHead::random(config.in_len, config.horizon, rng)),
          grad_(DenseHead::zeros(config.in_len, config.horizon)) {}

    Tensor predict(const Tensor& inputs) const override {
        check_inputs(inputs);
        return dense_head_forward(flatten(inputs), head_);
    }

    Tensor forward(const Tensor& inputs, Rng&) override {
        check_inputs(inputs);
        features_ = flatten(inputs);
        return dense_head_forward(features_, head_);
    }

    void backward(const Tensor& grad_out) override {
        if (features_.empty()) throw Error("backward called before forward");
        auto g = dense_head_backward(features_, grad_out, head_);
        grad_ = std::move(g.head);
        input_grad_ = g.features.reshaped({features_.dim(0), features_.dim(1), 1});
    }

    const Tensor& input_grad() const override { return input_grad_; }

    std::vector<ParamRef> parameters() override {
        std::vector<ParamRef> out;
        append_head(out, head_, grad_);
        return out;
    }

    std::unique_ptr<Forecaster> clone() const override { return std::make_unique<LinearForecaster>(*this); }

private:
    static Tensor flatten(const Tensor& x) { return x.reshaped({x.dim(0), x.dim(1) * x.dim(2)}); }

    DenseHead head_;
    DenseHead grad_;
    Tensor features_;
    Tensor input_grad_;
};

}  // namespace

std::unique_ptr<Forecaster> make_model(const ModelConfig& config, Rng& rng) {
    config.validate();
    switch (config.kind) {
        case ModelKind::lstm:
            return std::make_unique<RecurrentForecaster<LstmParams, LstmTrace>>(config, rng);
        case ModelKind::gru:
            return std::make_unique<RecurrentForecaster<GruParams, GruTrace>>(config, rng);
        case ModelKind::bilstm:
            return std::make_unique<BidirectionalForecaster<LstmParams, LstmTrace>>(config, rng);
        case ModelKind::bigru:
            return std::make_unique<BidirectionalForecaster<GruParams, GruTrace>>(config, rng);
        case ModelKind::cnn:
            return std::make_unique<CnnForecaster>(config, rng);
        case ModelKind::tcn:
            return std::make_unique<TcnForecaster>(config, rng);
        case ModelKind::linear:
            return std::make_unique<LinearForecaster>(config, rng);
    }
    throw ConfigError("unhandled model kind");
}

}  // namespace seqcast
