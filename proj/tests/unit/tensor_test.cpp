// Copyright 2026 The resprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "resprobe/error.hpp"
#include "resprobe/tensor.hpp"
#include "test_util.hpp"

namespace resprobe {
namespace {

using testing::random_tensor;

TEST(TensorTest, ShapeAndDataMustAgree) {
    EXPECT_THROW(Tensor({2, 3}, std::vector<float>(5)), DimensionError);
    EXPECT_THROW(Tensor({2, 0}), DimensionError);
    const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(t.size(), 6u);
    EXPECT_EQ(t.rows(), 2u);
    EXPECT_FLOAT_EQ(t.at(1, 2), 6.0f);
}

TEST(MatmulTest, IdentityLeavesMatrixUnchanged) {
    const Tensor out = matmul(Tensor::matrix({{1, 0}, {0, 1}}), Tensor::matrix({{3, 4}, {5, 6}}));
    EXPECT_EQ(out, Tensor::matrix({{3, 4}, {5, 6}}));
}

TEST(MatmulTest, RowTimesColumn) {
    const Tensor out = matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}}));
    ASSERT_EQ(out.shape(), (std::vector<std::size_t>{1, 1}));
    EXPECT_FLOAT_EQ(out[0], 11.0f);
}

TEST(MatmulTest, InnerDimensionMismatchThrows) {
    EXPECT_THROW(matmul(random_tensor({2, 3}, 1), random_tensor({2, 3}, 2)), DimensionError);
}

TEST(MatmulTest, MatchesTripleLoopOracle) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Tensor a = random_tensor({8, 8}, seed);
        const Tensor b = random_tensor({8, 8}, seed + 100);
        const Tensor out = matmul(a, b);
        for (std::size_t i = 0; i < 8; ++i) {
            for (std::size_t j = 0; j < 8; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < 8; ++k) acc += double(a.at(i, k)) * b.at(k, j);
                EXPECT_NEAR(out.at(i, j), acc, 1e-6);
            }
        }
    }
}

TEST(LayerNormTest, ConstantVectorMapsToZero) {
    const Tensor out = layer_norm_nonparametric(Tensor::vector({5, 5, 5, 5}));
    for (float v : out.data()) EXPECT_EQ(v, 0.0f);
}

TEST(LayerNormTest, AlreadyStandardized) {
    const Tensor out = layer_norm_nonparametric(Tensor::vector({1, -1}));
    EXPECT_NEAR(out[0], 1.0, 1e-4);
    EXPECT_NEAR(out[1], -1.0, 1e-4);
}

TEST(LayerNormTest, RandomVectorHasZeroMeanUnitVariance) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Tensor out = layer_norm_nonparametric(random_tensor({16}, seed, 3.0f));
        double mean = 0.0, var = 0.0;
        for (float v : out.data()) mean += v;
        mean /= 16.0;
        for (float v : out.data()) var += (v - mean) * (v - mean);
        var /= 16.0;
        EXPECT_NEAR(mean, 0.0, 1e-4);
        EXPECT_NEAR(var, 1.0, 1e-4);
    }
}

TEST(LayerNormTest, NormalizesEachRow) {
    const Tensor out = layer_norm_nonparametric(Tensor::matrix({{1, 2, 3}, {10, 10, 10}}));
    EXPECT_NEAR(out.at(0, 0) + out.at(0, 1) + out.at(0, 2), 0.0, 1e-5);
    EXPECT_EQ(out.at(1, 1), 0.0f);
}

TEST(RmsNormTest, OnesStayOnes) {
    const Tensor out = rms_norm(Tensor::vector({1, 1, 1, 1}), Tensor::vector({1, 1, 1, 1}));
    for (float v : out.data()) EXPECT_NEAR(v, 1.0, 1e-4);
}

TEST(RmsNormTest, HandComputedMeanSquare) {
    const Tensor out = rms_norm(Tensor::vector({2, 0}), Tensor::vector({1, 1}));
    EXPECT_NEAR(out[0], 2.0 / std::sqrt(2.0), 1e-4);
    EXPECT_NEAR(out[1], 0.0, 1e-4);
}

TEST(RmsNormTest, ZeroVectorStaysFinite) {
    const Tensor out = rms_norm(Tensor::vector({0, 0, 0}), Tensor::vector({1, 1, 1}));
    for (float v : out.data()) EXPECT_EQ(v, 0.0f);
}

TEST(RmsNormTest, GainLengthMismatchThrows) {
    EXPECT_THROW(rms_norm(Tensor::vector({1, 2, 3}), Tensor::vector({1, 1})), DimensionError);
}

TEST(SoftmaxTest, SymmetricInput) {
    const Tensor out = softmax(Tensor::vector({0, 0}));
    EXPECT_FLOAT_EQ(out[0], 0.5f);
    EXPECT_FLOAT_EQ(out[1], 0.5f);
}

TEST(SoftmaxTest, LargeLogitDoesNotOverflow) {
    const Tensor out = softmax(Tensor::vector({1000, 0}));
    EXPECT_NEAR(out[0], 1.0, 1e-6);
    EXPECT_NEAR(out[1], 0.0, 1e-6);
    EXPECT_TRUE(out.all_finite());
}

TEST(SoftmaxTest, RandomInputSumsToOne) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Tensor out = softmax(random_tensor({10}, seed, 20.0f));
        double sum = 0.0;
        for (float v : out.data()) {
            EXPECT_GE(v, 0.0f);
            sum += v;
        }
        EXPECT_NEAR(sum, 1.0, 1e-6);
    }
}

TEST(L2DistanceTest, IdenticalVectorsAreZeroApart) {
    const Tensor a = random_tensor({7}, 3);
    EXPECT_EQ(l2_distance(a, a), 0.0f);
}

TEST(L2DistanceTest, PythagoreanTriple) {
    EXPECT_FLOAT_EQ(l2_distance(Tensor::vector({0, 0}), Tensor::vector({3, 4})), 5.0f);
}

TEST(L2DistanceTest, MatchesNaiveLoopOracle) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Tensor a = random_tensor({64}, seed);
        const Tensor b = random_tensor({64}, seed + 50);
        double acc = 0.0;
        for (std::size_t i = 0; i < 64; ++i) acc += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
        EXPECT_NEAR(l2_distance(a, b), std::sqrt(acc), 1e-6);
    }
}

TEST(L2DistanceTest, ShapeMismatchThrows) {
    EXPECT_THROW(l2_distance(Tensor::vector({1, 2}), Tensor::vector({1, 2, 3})), DimensionError);
}

TEST(ProjectionTest, AxisAligned) {
    const Tensor p = orthogonal_project(Tensor::vector({0.5f, 1}), Tensor::vector({0, 0}), Tensor::vector({1, 0}));
    EXPECT_NEAR(p[0], 0.5, 1e-7);
    EXPECT_NEAR(p[1], 0.0, 1e-7);
}

TEST(ProjectionTest, PointOnSegmentIsFixed) {
    const Tensor a = random_tensor({12}, 1), b = random_tensor({12}, 2);
    Tensor c(a.shape());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.3f * a[i] + 0.7f * b[i];
    const Tensor p = orthogonal_project(c, a, b);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(p[i], c[i], 1e-6);
}

TEST(ProjectionTest, ResidualIsOrthogonalToLine) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Tensor a = random_tensor({32}, seed), b = random_tensor({32}, seed + 1), c = random_tensor({32}, seed + 2);
        const Tensor p = orthogonal_project(c, a, b);
        double dot = 0.0, nr = 0.0, nd = 0.0;
        for (std::size_t i = 0; i < 32; ++i) {
            const double r = double(c[i]) - p[i], d = double(b[i]) - a[i];
            dot += r * d;
            nr += r * r;
            nd += d * d;
        }
        EXPECT_LT(std::abs(dot) / std::sqrt(nr * nd), 1e-5);
    }
}

TEST(ProjectionTest, CoincidentEndpointsThrow) {
    const Tensor a = Tensor::vector({1, 2});
    EXPECT_THROW(orthogonal_project(Tensor::vector({0, 0}), a, a), DegenerateLineError);
}

}  // namespace
}  // namespace resprobe
