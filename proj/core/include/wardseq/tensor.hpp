// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major containers and the small kernel set the rest of the
// library is written against. Everything is float64.
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace wardseq {

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {values_.data() + r * cols_, cols_};
    }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    void fill(double v);
    std::string shape_string() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

/// [batch][time][feature] block.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(std::size_t batch, std::size_t time, std::size_t feature, double fill = 0.0);

    std::size_t batch() const noexcept { return batch_; }
    std::size_t time() const noexcept { return time_; }
    std::size_t feature() const noexcept { return feature_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator()(std::size_t b, std::size_t t, std::size_t f) noexcept {
        return values_[(b * time_ + t) * feature_ + f];
    }
    double operator()(std::size_t b, std::size_t t, std::size_t f) const noexcept {
        return values_[(b * time_ + t) * feature_ + f];
    }

    std::span<double> step(std::size_t b, std::size_t t) noexcept {
        return {values_.data() + (b * time_ + t) * feature_, feature_};
    }
    std::span<const double> step(std::size_t b, std::size_t t) const noexcept {
        return {values_.data() + (b * time_ + t) * feature_, feature_};
    }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    std::string shape_string() const;

    friend bool operator==(const Tensor3&, const Tensor3&) = default;

private:
    std::size_t batch_ = 0;
    std::size_t time_ = 0;
    std::size_t feature_ = 0;
    std::vector<double> values_;
};

/// Per (sample, step) validity. Padding is on the left, so the valid steps of
/// each row form a contiguous suffix.
class MaskMatrix {
public:
    MaskMatrix() = default;
    MaskMatrix(std::size_t batch, std::size_t time, bool fill = true);

    std::size_t batch() const noexcept { return batch_; }
    std::size_t time() const noexcept { return time_; }

    bool valid(std::size_t b, std::size_t t) const noexcept { return flags_[b * time_ + t] != 0; }
    void set(std::size_t b, std::size_t t, bool v) noexcept { flags_[b * time_ + t] = v ? 1 : 0; }

    /// Marks the last `valid_steps` steps of row b valid and the rest padded.
    void set_valid_suffix(std::size_t b, std::size_t valid_steps);

    std::size_t valid_count(std::size_t b) const noexcept;
    /// Index of the first valid step of row b, or time() when the row is empty.
    std::size_t first_valid(std::size_t b) const noexcept;
    bool is_left_padded() const noexcept;

    std::span<const std::uint8_t> flags() const noexcept { return flags_; }

    friend bool operator==(const MaskMatrix&, const MaskMatrix&) = default;

private:
    std::size_t batch_ = 0;
    std::size_t time_ = 0;
    std::vector<std::uint8_t> flags_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix softmax_rows(const Matrix& a);

double sigmoid(double x) noexcept;
Matrix sigmoid(const Matrix& a);
Tensor3 sigmoid(const Tensor3& a);

Matrix tanh_elem(const Matrix& a);
Tensor3 tanh_elem(const Tensor3& a);

/// In-place softmax over a contiguous span, stabilized by max subtraction.
void softmax_inplace(std::span<double> v) noexcept;

bool all_finite(std::span<const double> v) noexcept;

/// out[j] += sum_k x[k] * w(k, j). The vector-times-matrix used by every
/// dense/recurrent layer; `w` is row-major in x out.
void accumulate_vec_mat(std::span<const double> x, const Matrix& w, std::span<double> out) noexcept;

/// out[k] += sum_j w(k, j) * d[j]  (x-gradient of accumulate_vec_mat).
void accumulate_mat_vec(const Matrix& w, std::span<const double> d, std::span<double> out) noexcept;

/// w(k, j) += x[k] * d[j]  (weight-gradient of accumulate_vec_mat).
void accumulate_outer(std::span<const double> x, std::span<const double> d, Matrix& w) noexcept;

}  // namespace wardseq
