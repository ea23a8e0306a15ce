#include "seqcast/training.hpp"

#include "seqcast/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace seqcast {

LossResult mse_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "mse_loss");
    const double n = static_cast<double>(pred.size());
    LossResult r{0.0, Tensor(pred.shape())};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        r.loss += d * d;
        r.grad[i] = 2.0 * d / n;
    }
    r.loss /= n;
    return r;
}

void adam_step(std::span<const ParamRef> params, AdamState& state) {
    for (const auto& p : params) {
        if (!all_finite(*p.grad)) throw NumericalError("adam_step: non-finite gradient for parameter '" + p.name + "'");
        require_same_shape(*p.value, *p.grad, "adam_step");
    }
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.value->shape());
            state.v.emplace_back(p.value->shape());
        }
    }
    if (state.m.size() != params.size()) throw DimensionError("adam_step: state tracks a different parameter list");

    const auto& c = state.config;
    ++state.t;
    const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
    const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& value = *params[k].value;
        const Tensor& grad = *params[k].grad;
        Tensor& m = state.m[k];
        Tensor& v = state.v[k];
        require_same_shape(value, m, "adam_step state");
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i];
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            value[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
        }
    }
}

Scaler Scaler::fit(std::span<const double> series) {
    if (series.empty()) throw DataError("scaler: cannot fit an empty series");
    const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
    if (!(*hi > *lo)) throw NumericalError("scaler: degenerate series (max == min)");
    return Scaler{*lo, *hi};
}

std::vector<double> Scaler::apply(std::span<const double> xs) const {
    std::vector<double> out(xs.size());
    std::transform(xs.begin(), xs.end(), out.begin(), [this](double x) { return apply(x); });
    return out;
}

std::vector<double> Scaler::invert(std::span<const double> ys) const {
    std::vector<double> out(ys.size());
    std::transform(ys.begin(), ys.end(), out.begin(), [this](double y) { return invert(y); });
    return out;
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (!(validation_split >= 0.0 && validation_split < 1.0)) throw ConfigError("validation_split must be in [0, 1)");
    if (!(adam.lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
        throw ConfigError("Adam betas must be in [0, 1)");
    }
    if (!(adam.epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

std::string TrainHistory::to_csv() const {
    std::string out = "epoch,train_loss,val_loss,seconds\n";
    char buf[128];
    for (const auto& e : epochs) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,", e.epoch, e.train_loss);
        out += buf;
        if (e.val_loss) {
            std::snprintf(buf, sizeof buf, "%.17g", *e.val_loss);
            out += buf;
        }
        std::snprintf(buf, sizeof buf, ",%.6f\n", e.seconds);
        out += buf;
    }
    return out;
}

std::size_t training_window_count(std::size_t total, double validation_split) {
    const auto n_val = static_cast<std::size_t>(std::floor(validation_split * static_cast<double>(total)));
    return total - n_val;
}

double evaluate_mse(const Forecaster& model, const WindowedDataset& dataset, std::size_t batch_size) {
    if (dataset.size() == 0) throw DataError("evaluate_mse: empty dataset");
    double total = 0.0;
    std::vector<std::size_t> rows;
    for (std::size_t begin = 0; begin < dataset.size(); begin += batch_size) {
        const std::size_t end = std::min(dataset.size(), begin + batch_size);
        rows.resize(end - begin);
        std::iota(rows.begin(), rows.end(), begin);
        auto [x, y] = dataset.gather(rows);
        total += mse_loss(model.predict(x), y).loss * static_cast<double>(rows.size());
    }
    return total / static_cast<double>(dataset.size());
}

TrainHistory train(Forecaster& model, const WindowedDataset& dataset, const TrainConfig& config,
                   const EpochCallback& on_epoch) {
    config.validate();
    if (dataset.size() == 0) throw DataError("train: empty dataset");
    const auto& mc = model.config();
    if (dataset.in_len() != mc.in_len || dataset.out_len() != mc.horizon) {
        throw DimensionError("train: windows of " + std::to_string(dataset.in_len()) + " -> " +
                             std::to_string(dataset.out_len()) + " do not match model " + std::to_string(mc.in_len) +
                             " -> " + std::to_string(mc.horizon));
    }
    const std::size_t n_train = training_window_count(dataset.size(), config.validation_split);
    if (n_train == 0) throw DataError("train: no windows left after the validation split");
    const bool has_val = n_train < dataset.size();
    const WindowedDataset val = has_val ? dataset.subset(n_train, dataset.size()) : WindowedDataset{};

    const Rng root(config.seed);
    Rng shuffle_rng = root.fork("shuffle");
    Rng dropout_rng = root.fork("dropout");
    AdamState adam{config.adam, 0, {}, {}};
    const auto params = model.parameters();

    TrainHistory history;
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        if (config.shuffle) {
            // Fisher-Yates with the library RNG so the order replays everywhere.
            for (std::size_t i = n_train; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
        }
        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < n_train; begin += config.batch_size) {
            const std::size_t end = std::min(n_train, begin + config.batch_size);
            const std::span<const std::size_t> rows(order.data() + begin, end - begin);
            auto [x, y] = dataset.gather(rows);
            const Tensor pred = model.forward(x, dropout_rng);
            auto loss = mse_loss(pred, y);
            if (!std::isfinite(loss.loss)) {
                throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch starting " +
                                     std::to_string(begin));
            }
            model.backward(loss.grad);
            adam_step(params, adam);
            loss_sum += loss.loss * static_cast<double>(rows.size());
        }
        EpochRecord rec{epoch, loss_sum / static_cast<double>(n_train), std::nullopt, 0.0};
        if (has_val) {
            rec.val_loss = evaluate_mse(model, val);
            if (!std::isfinite(*rec.val_loss)) {
                throw NumericalError("train: non-finite validation loss at epoch " + std::to_string(epoch));
            }
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        history.epochs.push_back(rec);
        if (on_epoch && !on_epoch(rec, model)) break;
    }
    return history;
}

}  // namespace seqcast
