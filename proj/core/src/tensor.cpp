#include "flowcast/tensor.hpp"

#include "flowcast/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <string>

namespace flowcast {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        require_shape(r.size() == cols_, "ragged initializer rows");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix to_matrix(MatrixView v) {
    Matrix m(v.rows, v.cols);
    std::copy(v.data.begin(), v.data.begin() + static_cast<std::ptrdiff_t>(v.rows * v.cols), m.data().begin());
    return m;
}

void require_shape(bool ok, std::string_view what) {
    if (!ok) throw ShapeError(std::string(what));
}

Vector affine(const Matrix& w, std::span<const double> x, std::span<const double> b) {
    require_shape(w.cols() == x.size(),
                  fmt::format("affine: weight has {} columns but input has {} entries", w.cols(), x.size()));
    require_shape(w.rows() == b.size(),
                  fmt::format("affine: weight has {} rows but bias has {} entries", w.rows(), b.size()));
    Vector out(b.begin(), b.end());
    matvec_accumulate(w, x, out);
    return out;
}

void matvec_accumulate(const Matrix& w, std::span<const double> x, std::span<double> out) {
    require_shape(w.cols() == x.size() && w.rows() == out.size(),
                  fmt::format("matvec: {}x{} weight against input {} / output {}", w.rows(), w.cols(), x.size(),
                              out.size()));
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const auto row = w.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * x[c];
        out[r] += acc;
    }
}

void matvec_transposed_accumulate(const Matrix& w, std::span<const double> y, std::span<double> out) {
    require_shape(w.rows() == y.size() && w.cols() == out.size(),
                  fmt::format("matvec^T: {}x{} weight against input {} / output {}", w.rows(), w.cols(), y.size(),
                              out.size()));
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const auto row = w.row(r);
        const double yr = y[r];
        for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c] * yr;
    }
}

void outer_accumulate(Matrix& g, std::span<const double> a, std::span<const double> b) {
    require_shape(g.rows() == a.size() && g.cols() == b.size(),
                  fmt::format("outer: {}x{} target against {} and {}", g.rows(), g.cols(), a.size(), b.size()));
    for (std::size_t r = 0; r < a.size(); ++r) {
        auto row = g.row(r);
        const double ar = a[r];
        for (std::size_t c = 0; c < b.size(); ++c) row[c] += ar * b[c];
    }
}

Vector elementwise_mul(std::span<const double> a, std::span<const double> b) {
    require_shape(a.size() == b.size(),
                  fmt::format("elementwise_mul: lengths {} and {} differ", a.size(), b.size()));
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    require_shape(x.size() == y.size(), fmt::format("axpy: lengths {} and {} differ", x.size(), y.size()));
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Vector activation(Activation kind, std::span<const double> x) {
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = kind == Activation::sigmoid ? sigmoid(x[i]) : std::tanh(x[i]);
    return out;
}

} // namespace flowcast
