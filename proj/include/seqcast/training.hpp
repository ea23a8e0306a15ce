#pragma once

#include "seqcast/data.hpp"
#include "seqcast/model.hpp"
#include "seqcast/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace seqcast {

struct LossResult {
    double loss;
    Tensor grad;  ///< dLoss/dPred = 2 (pred - target) / N
};

/// Mean of squared elementwise differences.
LossResult mse_loss(const Tensor& pred, const Tensor& target);

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moment estimates for one parameter list; m and v are created on the
/// first step to mirror the parameter shapes.
struct AdamState {
    AdamConfig config;
    std::uint64_t t = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
};

/// One bias-corrected Adam update of every parameter from its gradient.
/// Throws NumericalError (parameters untouched) on a non-finite gradient.
void adam_step(std::span<const ParamRef> params, AdamState& state);

/// Min-max scaling to [0, 1].
struct Scaler {
    double min = 0.0;
    double max = 1.0;

    static Scaler fit(std::span<const double> series);
    double apply(double x) const { return (x - min) / (max - min); }
    double invert(double y) const { return min + y * (max - min); }
    std::vector<double> apply(std::span<const double> xs) const;
    std::vector<double> invert(std::span<const double> ys) const;
};

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 128;
    double validation_split = 0.1;
    AdamConfig adam;
    std::uint64_t seed = 42;
    bool shuffle = true;

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch;  ///< 1-based
    double train_loss;
    std::optional<double> val_loss;
    double seconds;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;

    /// CSV with header `epoch,train_loss,val_loss,seconds`; val_loss is empty
    /// when no windows were held out. Only the seconds column varies between
    /// identical runs.
    std::string to_csv() const;
};

/// Called after every epoch; return false to stop training early.
using EpochCallback = std::function<bool(const EpochRecord&, Forecaster&)>;

/// Mini-batch MSE/Adam training. The last validation_split fraction of the
/// windows (chronologically) is held out for validation and never shuffled.
/// Initialization is the caller's; shuffle and dropout streams are forked
/// from config.seed.
TrainHistory train(Forecaster& model, const WindowedDataset& dataset, const TrainConfig& config,
                   const EpochCallback& on_epoch = {});

/// Number of windows kept for training (the rest validate).
std::size_t training_window_count(std::size_t total, double validation_split);

/// Mean-squared error of model predictions over a dataset, in batches.
double evaluate_mse(const Forecaster& model, const WindowedDataset& dataset, std::size_t batch_size = 512);

}  // namespace seqcast
