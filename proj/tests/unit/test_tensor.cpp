// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "testing.hpp"
#include "wardseq/errors.hpp"
#include "wardseq/tensor.hpp"

using namespace wardseq;

TEST(Matrix, ValuesConstructorChecksSize) {
    EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
    const Matrix m(2, 2, std::vector<double>{1, 2, 3, 4});
    EXPECT_EQ(m(1, 0), 3.0);
    EXPECT_EQ(m.shape_string(), "[2x2]");
}

TEST(Matmul, IdentityTimesMatrix) {
    const Matrix a{{1, 2}, {3, 4}};
    EXPECT_EQ(matmul(Matrix::identity(2), a), a);
}

TEST(Matmul, HandComputedProduct) {
    const Matrix a{{1, 2}, {3, 4}};
    const Matrix b{{5}, {6}};
    const Matrix expected{{17}, {39}};
    EXPECT_EQ(matmul(a, b), expected);
}

TEST(Matmul, MismatchNamesBothShapes) {
    const Matrix a(2, 3), b(4, 2);
    try {
        matmul(a, b);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[4x2]"), std::string::npos) << msg;
    }
}

TEST(Matmul, IdentityIsExactOnBothSides) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 10);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix a(3 + trial % 4, 2 + trial % 5);
        for (double& v : a.values()) v = n(rng);
        EXPECT_EQ(matmul(Matrix::identity(a.rows()), a), a);
        EXPECT_EQ(matmul(a, Matrix::identity(a.cols())), a);
    }
}

TEST(Transpose, SwapsIndices) {
    const Matrix a{{1, 2, 3}, {4, 5, 6}};
    const Matrix t = transpose(a);
    ASSERT_EQ(t.rows(), 3u);
    EXPECT_EQ(t(2, 1), 6.0);
}

TEST(Softmax, SymmetricRow) {
    const Matrix s = softmax_rows(Matrix{{0, 0}});
    EXPECT_DOUBLE_EQ(s(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(s(0, 1), 0.5);
}

TEST(Softmax, LargeValuesDoNotOverflow) {
    const Matrix s = softmax_rows(Matrix{{1000, 1000}});
    EXPECT_DOUBLE_EQ(s(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(s(0, 1), 0.5);
}

TEST(Softmax, LogThree) {
    const Matrix s = softmax_rows(Matrix{{0, std::log(3.0)}});
    EXPECT_NEAR(s(0, 0), 0.25, 1e-15);
    EXPECT_NEAR(s(0, 1), 0.75, 1e-15);
}

TEST(Softmax, ShiftInvariantAndNormalized) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0, 5);
    for (int trial = 0; trial < 100; ++trial) {
        Matrix a(3, 7);
        for (double& v : a.values()) v = n(rng);
        Matrix shifted = a;
        for (std::size_t r = 0; r < a.rows(); ++r) {
            const double c = n(rng) * 100;
            for (double& v : shifted.row(r)) v += c;
        }
        const Matrix s1 = softmax_rows(a), s2 = softmax_rows(shifted);
        for (std::size_t r = 0; r < a.rows(); ++r) {
            double sum = 0;
            for (std::size_t c = 0; c < a.cols(); ++c) {
                EXPECT_NEAR(s1(r, c), s2(r, c), 1e-12);
                EXPECT_GE(s1(r, c), 0.0);
                sum += s1(r, c);
            }
            EXPECT_NEAR(sum, 1.0, 1e-12);
        }
    }
}

TEST(Sigmoid, ReferenceValues) {
    EXPECT_EQ(sigmoid(0.0), 0.5);
    EXPECT_NEAR(sigmoid(std::log(3.0)), 0.75, 1e-15);
    const double tiny = sigmoid(-1000.0);
    EXPECT_FALSE(std::isnan(tiny));
    EXPECT_GE(tiny, 0.0);
    EXPECT_LT(tiny, 1e-300);
    EXPECT_EQ(sigmoid(1000.0), 1.0);
}

TEST(Sigmoid, ComplementIdentity) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-40, 40);
    for (int i = 0; i < 10000; ++i) {
        const double x = u(rng);
        EXPECT_NEAR(sigmoid(x) + sigmoid(-x), 1.0, 1e-12);
    }
}

TEST(Sigmoid, ElementwiseOverContainers) {
    const Matrix m = sigmoid(Matrix{{0, std::log(3.0)}});
    EXPECT_NEAR(m(0, 1), 0.75, 1e-15);
    Tensor3 t(1, 2, 1);
    t(0, 1, 0) = std::log(3.0);
    const Tensor3 s = sigmoid(t);
    EXPECT_EQ(s(0, 0, 0), 0.5);
    EXPECT_NEAR(s(0, 1, 0), 0.75, 1e-15);
}

TEST(Tanh, ReferenceValues) {
    const Matrix m = tanh_elem(Matrix{{0.0, 0.5, 40.0}});
    EXPECT_EQ(m(0, 0), 0.0);
    // tanh(1/2) = (e - 1) / (e + 1)
    const double e = std::exp(1.0);
    EXPECT_NEAR(m(0, 1), (e - 1) / (e + 1), 1e-15);
    EXPECT_NEAR(m(0, 1), 0.46212, 1e-5);
    EXPECT_NEAR(m(0, 2), 1.0, 1e-15);
}

TEST(Kernels, AreBitwiseDeterministic) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0, 1);
    Matrix a(5, 4), b(4, 3);
    for (double& v : a.values()) v = n(rng);
    for (double& v : b.values()) v = n(rng);
    EXPECT_EQ(matmul(a, b), matmul(a, b));
    EXPECT_EQ(softmax_rows(a), softmax_rows(a));
    EXPECT_EQ(tanh_elem(a), tanh_elem(a));
    EXPECT_EQ(sigmoid(a), sigmoid(a));
}

TEST(Kernels, FiniteInputsGiveFiniteOutputs) {
    const Matrix a{{1e300, -1e300}, {0, 5}};
    EXPECT_TRUE(all_finite(softmax_rows(a).values()));
    EXPECT_TRUE(all_finite(sigmoid(a).values()));
    EXPECT_TRUE(all_finite(tanh_elem(a).values()));
    const std::vector<double> bad{1.0, std::numeric_limits<double>::quiet_NaN()};
    EXPECT_FALSE(all_finite(bad));
}

TEST(RowKernels, MatchMatmul) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0, 1);
    Matrix x(1, 4), w(4, 3);
    for (double& v : x.values()) v = n(rng);
    for (double& v : w.values()) v = n(rng);
    std::vector<double> out(3, 0.0);
    accumulate_vec_mat(x.row(0), w, out);
    const Matrix ref = matmul(x, w);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(out[j], ref(0, j), 1e-14);

    std::vector<double> d{1.0, -2.0, 0.5}, back(4, 0.0);
    accumulate_mat_vec(w, d, back);
    const Matrix ref_back = matmul(w, Matrix(3, 1, d));
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(back[k], ref_back(k, 0), 1e-14);

    Matrix g(4, 3);
    accumulate_outer(x.row(0), d, g);
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(g(k, j), x(0, k) * d[j]);
}

TEST(Tensor3, LayoutAndShape) {
    Tensor3 t(2, 3, 4);
    t(1, 2, 3) = 7.0;
    EXPECT_EQ(t.values()[(1 * 3 + 2) * 4 + 3], 7.0);
    EXPECT_EQ(t.size(), 24u);
    EXPECT_EQ(t.shape_string(), "[2, 3, 4]");
}

TEST(MaskMatrix, SuffixConvention) {
    MaskMatrix m(2, 5);
    m.set_valid_suffix(0, 2);
    m.set_valid_suffix(1, 5);
    EXPECT_FALSE(m.valid(0, 2));
    EXPECT_TRUE(m.valid(0, 3));
    EXPECT_EQ(m.valid_count(0), 2u);
    EXPECT_EQ(m.first_valid(0), 3u);
    EXPECT_EQ(m.first_valid(1), 0u);
    EXPECT_TRUE(m.is_left_padded());
    m.set(1, 4, false);
    EXPECT_FALSE(m.is_left_padded());
}
