#include "seqcast/init.hpp"

#include "seqcast/errors.hpp"

#include <cmath>

namespace seqcast {

std::size_t fan_in(const Shape& shape) {
    if (shape.empty()) throw DimensionError("fan_in of empty shape");
    if (shape.size() == 1) return shape[0];
    std::size_t n = 1;
    for (std::size_t i = 0; i + 1 < shape.size(); ++i) n *= shape[i];
    return n;
}

Tensor init_weights(const Shape& shape, InitScheme scheme, Rng& rng) {
    if (shape.empty()) throw DimensionError("init_weights: empty shape");
    Tensor out(shape);
    if (scheme == InitScheme::zeros) return out;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(shape)));
    for (auto& v : out.values()) v = rng.uniform(-bound, bound);
    return out;
}

}  // namespace seqcast
