/*
   Copyright 2026 The sbmi Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sbmi/random.hpp"

using namespace sbmi;

class PhiloxTest : public ::testing::Test {
protected:
    using Ctr = Philox4x32::ctr_type;
    using Key = Philox4x32::key_type;
};

// Known-answer vectors of the reference Philox4x32-10 implementation.
TEST_F(PhiloxTest, KnownAnswerZero) {
    const Ctr out = Philox4x32::apply(Ctr{0, 0, 0, 0}, Key{0, 0});
    EXPECT_EQ(out, (Ctr{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST_F(PhiloxTest, KnownAnswerAllOnes) {
    const Ctr out = Philox4x32::apply(Ctr{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                      Key{0xffffffffu, 0xffffffffu});
    EXPECT_EQ(out, (Ctr{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST_F(PhiloxTest, KnownAnswerPi) {
    const Ctr out = Philox4x32::apply(Ctr{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                      Key{0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(out, (Ctr{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

class NoiseKeyTest : public ::testing::Test {
protected:
    NoiseKey key{12345, stream_id(StreamPurpose::shared_noise, 7)};
};

TEST_F(NoiseKeyTest, StreamIdLayout) {
    EXPECT_EQ(stream_id(StreamPurpose::aux_y, 3), 2u + 16u * 3u);
    EXPECT_EQ(stream_id(StreamPurpose::shared_noise, 0), 0u);
}

TEST_F(NoiseKeyTest, SameCoordinatesGiveIdenticalBits) {
    EXPECT_EQ(key.bits(5, 9, 0), key.bits(5, 9, 0));
    EXPECT_NE(key.bits(5, 9, 0), key.bits(6, 9, 0));
    EXPECT_NE(key.bits(5, 9, 0), key.bits(5, 10, 0));
    EXPECT_NE(key.bits(5, 9, 0), NoiseKey(12345, 8).bits(5, 9, 0));
}

TEST_F(NoiseKeyTest, CellNormalsIndependentOfRequestedRange) {
    std::vector<double> wide(64), narrow(13), upper(13);
    key.cell_normals(3, 0, wide.size(), wide.data());
    key.cell_normals(3, 21, narrow.size(), narrow.data(), upper.data());
    for (std::size_t k = 0; k < narrow.size(); ++k) {
        EXPECT_EQ(narrow[k], wide[21 + k]);
        EXPECT_NEAR(upper[k], 1.0 - normal_cdf(narrow[k]), 1e-12);
    }
}

TEST_F(NoiseKeyTest, CellNormalsMatchBlockLanes) {
    std::vector<double> z(12);
    key.cell_normals(4, 0, z.size(), z.data());
    for (std::uint32_t c = 0; c < z.size(); ++c) {
        EXPECT_EQ(z[c], key.normals(4, c / 4, 0)[c % 4]) << "cell " << c;
    }
}

TEST_F(NoiseKeyTest, NormalMoments) {
    double s1 = 0.0, s2 = 0.0;
    const std::size_t n = 200000;
    std::vector<double> z(n);
    key.cell_normals(0, 0, n, z.data());
    for (double v : z) {
        s1 += v;
        s2 += v * v;
    }
    EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(static_cast<double>(n)));
    EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / static_cast<double>(n)));
}

class RngStreamTest : public ::testing::Test {};

TEST_F(RngStreamTest, Deterministic) {
    RngStream a(9, 4), b(9, 4);
    for (int k = 0; k < 100; ++k) {
        EXPECT_EQ(a(), b());
    }
    EXPECT_NE(RngStream(9, 4)(), RngStream(9, 5)());
}

TEST_F(RngStreamTest, UniformOpenInterval) {
    RngStream rng(1, 1);
    for (int k = 0; k < 100000; ++k) {
        const double u = rng.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST_F(RngStreamTest, PoissonAndGammaMeans) {
    RngStream rng(2, 2);
    const int n = 100000;
    for (double mean : {0.3, 4.0, 50.0}) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) {
            s += static_cast<double>(rng.poisson(mean));
        }
        EXPECT_NEAR(s / n, mean, 4.0 * std::sqrt(mean / n)) << "poisson mean " << mean;
    }
    for (double shape : {0.5, 2.0, 7.0}) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) {
            s += rng.gamma(shape);
        }
        EXPECT_NEAR(s / n, shape, 4.0 * std::sqrt(shape / n)) << "gamma shape " << shape;
    }
}

TEST_F(RngStreamTest, SplitStreamsDiffer) {
    RngStream parent(3, 3);
    RngStream a = parent.split(0), b = parent.split(1);
    EXPECT_NE(a(), b());
}

class NormalQuantileTest : public ::testing::Test {};

TEST_F(NormalQuantileTest, InvertsCdf) {
    for (double x : {-8.0, -3.0, -1.0, -0.1, 0.0, 0.5, 2.0, 6.0}) {
        const double lower = normal_cdf(x);
        const double upper = 0.5 * std::erfc(x / std::sqrt(2.0));
        EXPECT_NEAR(normal_quantile(lower, upper), x, 1e-9 * (1.0 + std::fabs(x))) << "x = " << x;
    }
}

TEST_F(NormalQuantileTest, Symmetric) {
    for (double p : {1e-10, 1e-4, 0.1, 0.3}) {
        EXPECT_NEAR(normal_quantile(p, 1.0 - p), -normal_quantile(1.0 - p, p), 1e-12);
    }
}
