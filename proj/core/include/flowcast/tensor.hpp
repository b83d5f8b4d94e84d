#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace flowcast {

using Vector = std::vector<double>;

/// Read-only row-major view. Rows of a series are contiguous, so any run of
/// consecutive time steps is itself a view.
struct MatrixView {
    std::span<const double> data;
    std::size_t rows = 0;
    std::size_t cols = 0;

    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return data.subspan(r * cols, cols); }
    MatrixView row_range(std::size_t first, std::size_t count) const {
        return {data.subspan(first * cols, count * cols), count, cols};
    }
};

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols_, cols_); }
    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data_).subspan(r * cols_, cols_);
    }

    MatrixView view() const noexcept { return {data_, rows_, cols_}; }
    operator MatrixView() const noexcept { return view(); }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix to_matrix(MatrixView v);

/// Throws ShapeError with `what` when `ok` is false.
void require_shape(bool ok, std::string_view what);

/// W x + b, accumulated left to right.
Vector affine(const Matrix& w, std::span<const double> x, std::span<const double> b);

/// out += W x
void matvec_accumulate(const Matrix& w, std::span<const double> x, std::span<double> out);

/// out += W^T y
void matvec_transposed_accumulate(const Matrix& w, std::span<const double> y, std::span<double> out);

/// g += a b^T
void outer_accumulate(Matrix& g, std::span<const double> a, std::span<const double> b);

Vector elementwise_mul(std::span<const double> a, std::span<const double> b);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

enum class Activation { sigmoid, tanh };

double sigmoid(double x);
Vector activation(Activation kind, std::span<const double> x);

} // namespace flowcast
