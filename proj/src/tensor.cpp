#include "seqcast/tensor.hpp"

#include "seqcast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace seqcast {

std::string shape_to_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << " x ";
        out << shape[i];
    }
    out << ']';
    return out.str();
}

std::size_t shape_product(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

namespace {

void validate_shape(const Shape& shape) {
    if (shape.empty() || shape.size() > 3) {
        throw DimensionError("tensor rank must be 1..3, got shape " + shape_to_string(shape));
    }
    for (auto d : shape) {
        if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_to_string(shape));
    }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (data_.size() != shape_product(shape_)) {
        throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                             shape_to_string(shape_));
    }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged matrix literal");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_to_string(shape_));
    }
    return shape_[axis];
}

void Tensor::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_product(shape) != data_.size()) {
        throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(what) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                             shape_to_string(b.shape()));
    }
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                             shape_to_string(t.shape()));
    }
}

bool all_finite(const Tensor& t) noexcept {
    return std::all_of(t.values().begin(), t.values().end(), [](double v) { return std::isfinite(v); });
}

void require_finite(const Tensor& t, const char* what) {
    if (!all_finite(t)) throw NumericalError(std::string(what) + ": non-finite value");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul lhs");
    require_rank(b, 2, "matmul rhs");
    if (a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul: cannot multiply " + shape_to_string(a.shape()) + " by " +
                             shape_to_string(b.shape()));
    }
    Tensor out({a.dim(0), b.dim(1)});
    matmul_accumulate(a, b, out);
    SEQCAST_CHECK_FINITE(out, "matmul");
    return out;
}

void matmul_accumulate(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::size_t i = 0; i < m; ++i) {
        double* row = po + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double s = pa[i * k + p];
            if (s == 0.0) continue;
            const double* brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
        }
    }
}

void matmul_tn_accumulate(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::size_t p = 0; p < k; ++p) {
        const double* brow = pb + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double s = pa[p * m + i];
            if (s == 0.0) continue;
            double* row = po + i * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
        }
    }
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul_tn lhs");
    require_rank(b, 2, "matmul_tn rhs");
    if (a.dim(0) != b.dim(0)) {
        throw DimensionError("matmul_tn: cannot multiply transpose of " + shape_to_string(a.shape()) + " by " +
                             shape_to_string(b.shape()));
    }
    Tensor out({a.dim(1), b.dim(1)});
    matmul_tn_accumulate(a, b, out);
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul_nt lhs");
    require_rank(b, 2, "matmul_nt rhs");
    if (a.dim(1) != b.dim(1)) {
        throw DimensionError("matmul_nt: cannot multiply " + shape_to_string(a.shape()) + " by transpose of " +
                             shape_to_string(b.shape()));
    }
    return matmul(a, transpose(b));
}

Tensor transpose(const Tensor& a) {
    require_rank(a, 2, "transpose");
    const std::size_t r = a.dim(0), c = a.dim(1);
    Tensor out({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

void add_row_bias(Tensor& m, const Tensor& bias) {
    const std::size_t rows = m.dim(0), cols = m.dim(1);
    if (bias.size() != cols) {
        throw DimensionError("bias of shape " + shape_to_string(bias.shape()) + " does not match " +
                             shape_to_string(m.shape()));
    }
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m.at(i, j) += bias[j];
}

void accumulate_column_sums(const Tensor& m, Tensor& out) {
    const std::size_t rows = m.dim(0), cols = m.dim(1);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out[j] += m.at(i, j);
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor subtract(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "subtract");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "hadamard");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Tensor scale(const Tensor& a, double factor) {
    Tensor out = a;
    for (auto& v : out.values()) v *= factor;
    return out;
}

void add_in_place(Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add_in_place");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

double sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return s;
}

double max_abs(const Tensor& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

double sigmoid(double v) noexcept {
    // Split on sign so exp never overflows.
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

void activation_in_place(Tensor& x, Activation kind) {
    switch (kind) {
        case Activation::sigmoid:
            for (auto& v : x.values()) v = sigmoid(v);
            break;
        case Activation::tanh:
            for (auto& v : x.values()) v = std::tanh(v);
            break;
        case Activation::relu:
            for (auto& v : x.values()) v = v > 0.0 ? v : 0.0;
            break;
    }
}

Tensor activation(const Tensor& x, Activation kind) {
    Tensor out = x;
    activation_in_place(out, kind);
    return out;
}

Tensor time_slice(const Tensor& x, std::size_t step) {
    const std::size_t batch = x.dim(0), steps = x.dim(1), feat = x.dim(2);
    Tensor out({batch, feat});
    for (std::size_t b = 0; b < batch; ++b) {
        const double* src = x.data() + (b * steps + step) * feat;
        std::copy(src, src + feat, out.data() + b * feat);
    }
    return out;
}

void set_time_slice(Tensor& out, std::size_t step, const Tensor& slice) {
    const std::size_t batch = out.dim(0), steps = out.dim(1), feat = out.dim(2);
    if (slice.dim(0) != batch || slice.dim(1) != feat) {
        throw DimensionError("set_time_slice: slice " + shape_to_string(slice.shape()) + " does not fit " +
                             shape_to_string(out.shape()));
    }
    for (std::size_t b = 0; b < batch; ++b) {
        std::copy(slice.data() + b * feat, slice.data() + (b + 1) * feat, out.data() + (b * steps + step) * feat);
    }
}

Tensor reverse_time(const Tensor& x) {
    require_rank(x, 3, "reverse_time");
    const std::size_t batch = x.dim(0), steps = x.dim(1), feat = x.dim(2);
    Tensor out(x.shape());
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t f = 0; f < feat; ++f) out.at(b, steps - 1 - t, f) = x.at(b, t, f);
    return out;
}

}  // namespace seqcast
