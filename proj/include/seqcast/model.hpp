#pragma once

#include "seqcast/convolution.hpp"
#include "seqcast/recurrent.hpp"
#include "seqcast/rng.hpp"
#include "seqcast/tensor.hpp"

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace seqcast {

/// The six compared forecasters, plus a dense-only linear baseline.
enum class ModelKind { lstm, gru, bilstm, bigru, cnn, tcn, linear };

std::string_view to_string(ModelKind kind);
/// Throws ConfigError for unknown names.
ModelKind parse_model_kind(std::string_view name);
std::span<const ModelKind> compared_model_kinds();

struct ModelConfig {
    ModelKind kind = ModelKind::gru;
    std::size_t in_len = 10;
    std::size_t horizon = 10;
    std::size_t units = 50;
    CnnSpec cnn;
    TcnSpec tcn;

    void validate() const;
};

/// Flat key/value description of a config, used in parameter files.
std::map<std::string, std::string> config_to_meta(const ModelConfig& config);
ModelConfig config_from_meta(const std::map<std::string, std::string>& meta);

struct ParamRef {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

/// A trainable direct multi-output forecaster. Inputs are windows
/// [batch x in_len x 1]; outputs are [batch x horizon].
class Forecaster {
public:
    explicit Forecaster(ModelConfig config) : config_(std::move(config)) {}
    virtual ~Forecaster() = default;

    const ModelConfig& config() const noexcept { return config_; }

    /// Inference pass; dropout disabled, no trace kept.
    virtual Tensor predict(const Tensor& inputs) const = 0;
    /// Training pass; keeps the trace consumed by backward().
    virtual Tensor forward(const Tensor& inputs, Rng& rng) = 0;
    /// Overwrites every gradient with dLoss/dParam given dLoss/dOutput of
    /// the most recent forward().
    virtual void backward(const Tensor& grad_out) = 0;
    /// dLoss/dInputs from the most recent backward().
    virtual const Tensor& input_grad() const = 0;

    virtual std::vector<ParamRef> parameters() = 0;
    virtual std::unique_ptr<Forecaster> clone() const = 0;

    std::size_t parameter_count();

protected:
    void check_inputs(const Tensor& inputs) const;

private:
    ModelConfig config_;
};

std::unique_ptr<Forecaster> make_model(const ModelConfig& config, Rng& rng);

}  // namespace seqcast
