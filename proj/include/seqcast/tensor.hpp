#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace seqcast {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles with rank 1 to 3.
///
/// Rank-2 tensors are indexed (row, col); rank-3 tensors are indexed
/// (batch, step, feature) throughout the library.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor vector(std::initializer_list<double> values);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor identity(std::size_t n);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    const double& operator[](std::size_t i) const noexcept { return data_[i]; }

    double& at(std::size_t i, std::size_t j) noexcept { return data_[i * shape_[1] + j]; }
    const double& at(std::size_t i, std::size_t j) const noexcept { return data_[i * shape_[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) noexcept {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    const double& at(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    void fill(double value) noexcept;
    Tensor reshaped(Shape shape) const;

    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

std::size_t shape_product(const Shape& shape);

/// Throws DimensionError naming both shapes when they differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);
void require_rank(const Tensor& t, std::size_t rank, const char* what);

/// Throws NumericalError when any element is NaN or infinite.
void require_finite(const Tensor& t, const char* what);
bool all_finite(const Tensor& t) noexcept;

// Debug-build NaN guard applied at the end of public operations.
#ifndef NDEBUG
#define SEQCAST_CHECK_FINITE(t, what) ::seqcast::require_finite((t), (what))
#else
#define SEQCAST_CHECK_FINITE(t, what) ((void)0)
#endif

// ---- linear algebra (rank-2) ----

/// a [m x k] times b [k x n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// transpose(a) times b, with a [k x m] and b [k x n].
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// a times transpose(b), with a [m x k] and b [n x k].
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// out += a * b without allocating; shapes must already conform.
void matmul_accumulate(const Tensor& a, const Tensor& b, Tensor& out);
/// out += transpose(a) * b.
void matmul_tn_accumulate(const Tensor& a, const Tensor& b, Tensor& out);

/// Adds a rank-1 bias to every row of a rank-2 tensor.
void add_row_bias(Tensor& m, const Tensor& bias);
/// Column sums of a rank-2 tensor accumulated into a rank-1 tensor.
void accumulate_column_sums(const Tensor& m, Tensor& out);

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
void add_in_place(Tensor& a, const Tensor& b);
double sum(const Tensor& a);
double max_abs(const Tensor& a);

enum class Activation { sigmoid, tanh, relu };

double sigmoid(double v) noexcept;
Tensor activation(const Tensor& x, Activation kind);
void activation_in_place(Tensor& x, Activation kind);

// ---- slicing for [batch x steps x features] sequences ----

/// Returns x[:, step, :] as a [batch x features] matrix.
Tensor time_slice(const Tensor& x, std::size_t step);
/// Writes a [batch x features] matrix into out[:, step, :].
void set_time_slice(Tensor& out, std::size_t step, const Tensor& slice);
/// Reverses the step axis of a rank-3 tensor.
Tensor reverse_time(const Tensor& x);

}  // namespace seqcast
