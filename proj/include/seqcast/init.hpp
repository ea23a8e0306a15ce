#pragma once

#include "seqcast/rng.hpp"
#include "seqcast/tensor.hpp"

namespace seqcast {

enum class InitScheme { uniform_scaled, zeros };

/// Fan-in used by uniform_scaled: the leading dimension of a vector, or the
/// product of all but the last dimension otherwise (weights are stored
/// [inputs... x outputs]).
std::size_t fan_in(const Shape& shape);

/// uniform_scaled draws U(-1/sqrt(fan_in), 1/sqrt(fan_in)); zeros ignores rng.
Tensor init_weights(const Shape& shape, InitScheme scheme, Rng& rng);

}  // namespace seqcast
