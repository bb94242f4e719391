// SPDX-License-Identifier: Apache-2.0
#include "wardseq/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wardseq/errors.hpp"

namespace wardseq {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows * cols) {
        throw ShapeError("matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " given " + std::to_string(values_.size()) + " values");
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
    values_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw ShapeError("ragged matrix initializer");
        values_.insert(values_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void Matrix::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

std::string Matrix::shape_string() const {
    return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

Tensor3::Tensor3(std::size_t batch, std::size_t time, std::size_t feature, double fill)
    : batch_(batch), time_(time), feature_(feature), values_(batch * time * feature, fill) {}

std::string Tensor3::shape_string() const {
    return "[" + std::to_string(batch_) + ", " + std::to_string(time_) + ", " +
           std::to_string(feature_) + "]";
}

MaskMatrix::MaskMatrix(std::size_t batch, std::size_t time, bool fill)
    : batch_(batch), time_(time), flags_(batch * time, fill ? 1 : 0) {}

void MaskMatrix::set_valid_suffix(std::size_t b, std::size_t valid_steps) {
    if (valid_steps > time_) throw ShapeError("valid suffix longer than time dimension");
    const std::size_t pad = time_ - valid_steps;
    for (std::size_t t = 0; t < time_; ++t) set(b, t, t >= pad);
}

std::size_t MaskMatrix::valid_count(std::size_t b) const noexcept {
    std::size_t n = 0;
    for (std::size_t t = 0; t < time_; ++t) n += flags_[b * time_ + t];
    return n;
}

std::size_t MaskMatrix::first_valid(std::size_t b) const noexcept {
    for (std::size_t t = 0; t < time_; ++t) {
        if (valid(b, t)) return t;
    }
    return time_;
}

bool MaskMatrix::is_left_padded() const noexcept {
    for (std::size_t b = 0; b < batch_; ++b) {
        bool seen_valid = false;
        for (std::size_t t = 0; t < time_; ++t) {
            if (valid(b, t)) {
                seen_valid = true;
            } else if (seen_valid) {
                return false;
            }
        }
    }
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul shape mismatch: " + a.shape_string() + " x " + b.shape_string());
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        accumulate_vec_mat(a.row(i), b, out.row(i));
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

void softmax_inplace(std::span<double> v) noexcept {
    if (v.empty()) return;
    const double mx = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double& x : v) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (double& x : v) x /= sum;
}

Matrix softmax_rows(const Matrix& a) {
    Matrix out = a;
    for (std::size_t i = 0; i < out.rows(); ++i) softmax_inplace(out.row(i));
    return out;
}

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {

template <typename T, typename F>
T map_elements(const T& in, F f) {
    T out = in;
    for (double& v : out.values()) v = f(v);
    return out;
}

}  // namespace

Matrix sigmoid(const Matrix& a) { return map_elements(a, [](double x) { return sigmoid(x); }); }
Tensor3 sigmoid(const Tensor3& a) { return map_elements(a, [](double x) { return sigmoid(x); }); }
Matrix tanh_elem(const Matrix& a) { return map_elements(a, [](double x) { return std::tanh(x); }); }
Tensor3 tanh_elem(const Tensor3& a) { return map_elements(a, [](double x) { return std::tanh(x); }); }

bool all_finite(std::span<const double> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void accumulate_vec_mat(std::span<const double> x, const Matrix& w, std::span<double> out) noexcept {
    const std::size_t n = w.cols();
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double xk = x[k];
        if (xk == 0.0) continue;
        const double* wr = w.row(k).data();
        double* o = out.data();
        for (std::size_t j = 0; j < n; ++j) o[j] += xk * wr[j];
    }
}

void accumulate_mat_vec(const Matrix& w, std::span<const double> d, std::span<double> out) noexcept {
    const std::size_t n = w.cols();
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double* wr = w.row(k).data();
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += wr[j] * d[j];
        out[k] += s;
    }
}

void accumulate_outer(std::span<const double> x, std::span<const double> d, Matrix& w) noexcept {
    const std::size_t n = w.cols();
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double xk = x[k];
        if (xk == 0.0) continue;
        double* wr = w.row(k).data();
        for (std::size_t j = 0; j < n; ++j) wr[j] += xk * d[j];
    }
}

}  // namespace wardseq
