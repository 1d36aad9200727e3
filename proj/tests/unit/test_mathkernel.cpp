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
#include <random>

#include "sbmi/errors.hpp"
#include "sbmi/mathkernel.hpp"

using namespace sbmi;

class MathKernelTest : public ::testing::Test {
protected:
    std::mt19937_64 gen{20240611};
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); }

    // Independent oracle: plain bisection on g(A) = A^beta + (A - d)^beta - 2 over [d, d + 2^(1/beta)].
    static double a_oracle(double r, double beta, double beta_prime) {
        const double d = std::pow(r, 1.0 - beta_prime / beta);
        double lo = d, hi = d + std::pow(2.0, 1.0 / beta);
        for (int k = 0; k < 200; ++k) {
            const double mid = 0.5 * (lo + hi);
            (std::pow(mid, beta) + std::pow(mid - d, beta) - 2.0 < 0.0 ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }
};

TEST_F(MathKernelTest, PickNExamples) {
    EXPECT_EQ(imc_pick_N(0.4, 0.6), 2);
    EXPECT_EQ(imc_pick_N(0.49, 0.9), 3);
    EXPECT_THROW(imc_pick_N(0.4, 0.3), NoSolutionError);
    EXPECT_THROW(imc_pick_N(0.4, 0.4 / 0.6), NoSolutionError);
}

TEST_F(MathKernelTest, PickNBracketsXi) {
    for (int k = 0; k < 500; ++k) {
        const double a = uniform(0.05, 0.49);
        const double xi = uniform(a, a / (1.0 - a) * (1.0 - 1e-9));
        const int n = imc_pick_N(a, xi);
        double lo = 0.0;
        for (int j = 1; j <= n; ++j) {
            lo += std::pow(a, j);
        }
        EXPECT_LE(lo, xi);
        EXPECT_LT(xi, lo + std::pow(a, n + 1));
    }
}

TEST_F(MathKernelTest, ImcBoundExamples) {
    EXPECT_EQ(imc_bound(0.3, 1.0, 1.0, 0.4, 0.6, 2, 0.0), 0.0);
    EXPECT_NEAR(imc_bound(0.0, 0.0, 1.0, 0.4, 0.6, 2, 1.0), 2.0, 1e-12);
}

TEST_F(MathKernelTest, ImcBoundNonnegative) {
    for (int k = 0; k < 1000; ++k) {
        const double a = uniform(0.1, 0.49);
        const double xi = uniform(a, a / (1.0 - a) * 0.999);
        EXPECT_GE(imc_bound(uniform(-1, 1), uniform(0, 2), uniform(0, 2), a, xi, imc_pick_N(a, xi), uniform(0, 1)),
                  0.0);
    }
}

TEST_F(MathKernelTest, IntegralExamples) {
    const auto tri = integral_I(0, 0, 0, 1.7);
    ASSERT_TRUE(tri.finite);
    EXPECT_NEAR(tri.value, 1.7 * 1.7 / 2.0, 1e-12);
    EXPECT_FALSE(integral_I(-1, 0, 0, 1).finite);
    EXPECT_TRUE(std::isinf(integral_I(-1, 0, 0, 1).value));
}

TEST_F(MathKernelTest, IntegralMatchesMidpointOracle) {
    // int_0^1 r (1 - r) dr by a 10^5-point midpoint sum.
    const int n = 100000;
    double s = 0.0;
    for (int k = 0; k < n; ++k) {
        const double r = (k + 0.5) / n;
        s += r * (1.0 - r) / n;
    }
    const auto res = integral_I(1, 0, 0, 1);
    ASSERT_TRUE(res.finite);
    EXPECT_NEAR(res.value, s, 1e-9);
    EXPECT_NEAR(res.value, 1.0 / 6.0, 1e-12);
}

TEST_F(MathKernelTest, BetaIntegralSymmetricAndKnown) {
    EXPECT_NEAR(beta_integral(1, 1), 1.0, 1e-14);
    EXPECT_NEAR(beta_integral(0.5, 0.5), M_PI, 1e-12);
    EXPECT_NEAR(beta_integral(2, 3), 1.0 / 12.0, 1e-14);
    EXPECT_NEAR(beta_integral(0.3, 2.5), beta_integral(2.5, 0.3), 1e-12);
}

TEST_F(MathKernelTest, AllocateExponentsExamples) {
    const auto [b1, b2] = allocate_exponents(0, -0.5, 0);
    EXPECT_NEAR(b1, -0.25, 1e-15);
    EXPECT_NEAR(b2, -0.25, 1e-15);
    const auto [c1, c2] = allocate_exponents(-0.9, -0.2, 0.5);
    EXPECT_GT(-0.9 + c1, -1.0);
    EXPECT_GT(c2 + 0.5, -1.0);
    EXPECT_LT(c1, 0.0);
    EXPECT_LT(c2, 0.0);
    EXPECT_THROW(allocate_exponents(-0.5, -1.0, -0.5), NoSolutionError);
}

TEST_F(MathKernelTest, AllocateExponentsProperty) {
    for (int k = 0; k < 2000; ++k) {
        const double a = uniform(-0.99, 2), c = uniform(-0.99, 2);
        const double b = uniform(std::max(-1.5, -2.0 - a - c + 1e-6), -1e-6);
        const auto [b1, b2] = allocate_exponents(a, b, c);
        EXPECT_NEAR(b1 + b2, b, 1e-12);
        EXPECT_LT(b1, 0.0);
        EXPECT_LT(b2, 0.0);
        EXPECT_GT(a + b1, -1.0);
        EXPECT_GT(b2 + c, -1.0);
    }
}

TEST_F(MathKernelTest, ContactTimeImmediate) {
    const double eps = 0.01;
    EXPECT_EQ(contact_time(0.0, 0.0, 2.0 * std::sqrt(eps), 0.3, eps, 0.45), 0.3);
}

TEST_F(MathKernelTest, ContactTimeResidual) {
    const double t = contact_time(0.0, 0.0, 1.0, 0.1, 0.01, 0.45);
    EXPECT_GT(t, 0.1);
    const double lhs = 2.0 * 0.1 + std::pow(t, 0.45) + std::pow(t - 0.1, 0.45);
    EXPECT_LT(std::fabs(lhs - 1.0), 1e-10);
}

TEST_F(MathKernelTest, ContactTimeHorizon) { EXPECT_THROW(contact_time(0, 0, 1e6, 0.1, 0.01, 0.45), HorizonError); }

TEST_F(MathKernelTest, AOfRMatchesOracle) {
    for (double r : {1e-6, 1e-3, 0.1, 0.5, 1.0}) {
        const double a = A_of_r(r, 0.49, 0.45);
        EXPECT_NEAR(a, a_oracle(r, 0.49, 0.45), 1e-12) << "r = " << r;
        const double d = std::pow(r, 1.0 - 0.45 / 0.49);
        EXPECT_LT(std::fabs(std::pow(a, 0.49) + std::pow(a - d, 0.49) - 2.0), 1e-12);
        EXPECT_GE(a, 1.0 - 1e-12);
        EXPECT_LE(a, 1.0 + d + 1e-12);
    }
}

TEST_F(MathKernelTest, AOfRTendsToOne) { EXPECT_NEAR(A_of_r(1e-300, 0.49, 0.45), 1.0, 1e-3); }

TEST_F(MathKernelTest, TStarAtUnitGap) {
    EXPECT_NEAR(t_star(0.2, 1.2, 0.49, 0.45), 0.2 + a_oracle(1.0, 0.49, 0.45), 1e-12);
}

TEST_F(MathKernelTest, ParabolaExamples) {
    const Parabola p{0.0, 0.1, 0.1, 0.49};
    EXPECT_FALSE(parabolas_disjoint(p, p, 0.5));
    const double r = 0.05, eps = 0.01;
    const Parabola x{0.0, 0.0, std::sqrt(eps), 0.49};
    const Parabola y{2.0 * (std::sqrt(eps) + std::pow(r, 0.49)) + 1e-9, 0.02, std::sqrt(eps), 0.49};
    EXPECT_TRUE(parabolas_disjoint(x, y, r));
}

TEST_F(MathKernelTest, ParabolasDisjointBeforeContact) {
    for (int k = 0; k < 200; ++k) {
        const double eps = uniform(1e-4, 1e-2), beta = 0.45;
        const double t_j = uniform(0.01, 0.5);
        const double gap = 2.0 * std::sqrt(eps) + std::pow(t_j, beta) + uniform(0.01, 1.0);
        const double tc = contact_time(0.0, 0.0, gap, t_j, eps, beta);
        const Parabola p{0.0, 0.0, std::sqrt(eps), beta}, q{gap, t_j, std::sqrt(eps), beta};
        EXPECT_TRUE(parabolas_disjoint(p, q, t_j + 0.999 * (tc - t_j)));
        EXPECT_FALSE(parabolas_disjoint(p, q, tc + 1e-6));
    }
}

TEST_F(MathKernelTest, ClassifyIndices) {
    const double eps = 0.01, bp = 0.45;
    EXPECT_TRUE(classify_indices(0, 0, {}, 1, 1, eps, bp).all.empty());
    const double tj = 0.2;
    const double boundary = 2.0 * (std::sqrt(eps) + std::pow(tj, bp));
    const std::vector<Landing> landing = {{0.0, 0.1}, {boundary, tj}, {10.0, 0.3}};
    const auto cls = classify_indices(0.0, 0.0, landing, 0.9, 0.9, eps, bp);
    EXPECT_EQ(cls.all, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(cls.critical, (std::vector<std::size_t>{0}));
    EXPECT_EQ(cls.lateral, (std::vector<std::size_t>{1}));
}
