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

#include "sbmi/diffusion1d.hpp"
#include "sbmi/errors.hpp"
#include "sbmi/stats.hpp"

using namespace sbmi;

class DiffusionTest : public ::testing::Test {
protected:
    RngStream rng{77, 3};
    static constexpr std::size_t kN = 100000;
};

TEST_F(DiffusionTest, FellerAbsorbedAtZero) {
    for (int k = 0; k < 100; ++k) {
        EXPECT_EQ(feller_transition_sample(0.0, 1.0, rng), 0.0);
    }
}

TEST_F(DiffusionTest, FellerLaplaceTransform) {
    RunningStats s;
    for (std::size_t k = 0; k < kN; ++k) {
        s.add(std::exp(-feller_transition_sample(0.5, 1.0, rng)));
    }
    EXPECT_NEAR(feller_laplace(0.5, 1.0, 1.0), std::exp(-1.0 / 3.0), 1e-15);
    EXPECT_NEAR(s.mean(), std::exp(-1.0 / 3.0), 3.0 * s.std_error());
}

TEST_F(DiffusionTest, FellerZeroFraction) {
    std::size_t zeros = 0;
    for (std::size_t k = 0; k < kN; ++k) {
        zeros += feller_transition_sample(0.1, 1.0, rng) == 0.0 ? 1 : 0;
    }
    const double p = std::exp(-0.2);
    EXPECT_NEAR(static_cast<double>(zeros) / kN, p, 3.0 * binomial_sd(p, kN));
}

TEST_F(DiffusionTest, SurvivalProbability) {
    EXPECT_EQ(survival_prob(0.0, 1.0), 0.0);
    EXPECT_NEAR(survival_prob(0.5, 1.0), 1.0 - std::exp(-1.0), 1e-15);
    for (double z : {1e-4, 0.01, 0.3, 2.0}) {
        for (double t : {0.01, 0.5, 3.0}) {
            EXPECT_LE(survival_prob(z, t), 2.0 * z / t);
        }
    }
}

TEST_F(DiffusionTest, HitProbability) {
    EXPECT_EQ(hit_prob_one_before_zero(0.0), 0.0);
    EXPECT_EQ(hit_prob_one_before_zero(1.0), 1.0);
    EXPECT_EQ(hit_prob_one_before_zero(0.05), 0.05);
    EXPECT_THROW(hit_prob_one_before_zero(1.5), InputError);
    EXPECT_THROW(hit_prob_one_before_zero(-0.1), InputError);
}

TEST_F(DiffusionTest, HitFrequencyMatchesStartingMass) {
    const std::size_t n = 20000;
    std::size_t hits = 0;
    for (std::size_t k = 0; k < n; ++k) {
        hits += feller_hit_one_before_zero(0.2, rng).hit_one ? 1 : 0;
    }
    EXPECT_NEAR(static_cast<double>(hits) / n, 0.2, 3.0 * binomial_sd(0.2, n));
}

TEST_F(DiffusionTest, Besq4LeavesZero) {
    for (int k = 0; k < 1000; ++k) {
        EXPECT_GT(besq4_quarter_step(0.0, 0.1, rng), 0.0);
    }
}

TEST_F(DiffusionTest, Besq4Mean) {
    RunningStats s;
    for (std::size_t k = 0; k < kN; ++k) {
        s.add(besq4_quarter_step(0.3, 0.1, rng));
    }
    EXPECT_NEAR(s.mean(), 0.4, 3.0 * s.std_error());
}

TEST_F(DiffusionTest, Besq4VarianceMatchesEulerOracle) {
    // Variance of Z_t for dZ = dt + sqrt(Z) dB from z: z t + t^2 / 2. Check the oracle by fine Euler.
    const double z = 0.3, t = 0.1;
    const std::size_t n = 20000, steps = 1000;
    const double h = t / steps;
    RunningStats euler, exact;
    for (std::size_t k = 0; k < n; ++k) {
        double x = z;
        for (std::size_t j = 0; j < steps; ++j) {
            x = std::max(0.0, x + h + std::sqrt(x * h) * rng.normal());
        }
        euler.add(x);
        exact.add(besq4_quarter_step(z, t, rng));
    }
    const double expected = z * t + t * t / 2.0;
    EXPECT_NEAR(euler.variance(), expected, 0.05 * expected);
    EXPECT_NEAR(exact.variance(), expected, 0.05 * expected);
}

TEST_F(DiffusionTest, DriftFunction) {
    EXPECT_EQ(F_drift(0.0), 1.0);
    EXPECT_GT(F_drift(1.0), F_drift(2.0));
    EXPECT_NEAR(F_drift(1.0), std::exp(-1.0) / (1.0 - std::exp(-1.0)), 1e-15);
    double prev = F_drift(0.0);
    for (double x = 0.01; x < 50.0; x += 0.37) {
        EXPECT_LT(F_drift(x), prev);
        prev = F_drift(x);
    }
}

TEST_F(DiffusionTest, ConditionedPathsSurvive) {
    const std::size_t n = 2000;
    std::size_t alive = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const DiffusionPath p = conditioned_feller_path(0.05, 1.0, 1.0 / 2000.0, rng);
        alive += p.values.back() > 0.0 ? 1 : 0;
    }
    EXPECT_GE(static_cast<double>(alive) / n, 0.99);
    EXPECT_THROW(conditioned_feller_path(0.05, 1.0, 1.0, rng), ConfigError);
}

TEST_F(DiffusionTest, FellerPathNeverRevives) {
    for (int k = 0; k < 200; ++k) {
        const DiffusionPath p = feller_path(0.05, 1.0, 1e-3, rng);
        bool dead = false;
        for (double v : p.values) {
            if (dead) {
                ASSERT_EQ(v, 0.0);
            }
            dead = dead || v == 0.0;
        }
    }
}

TEST_F(DiffusionTest, MarkHitsInterpolates) {
    DiffusionPath p;
    p.times = {0.0, 1.0, 2.0, 3.0};
    p.values = {0.5, 0.8, 1.2, 0.0};
    p.mark_hits();
    ASSERT_TRUE(p.hit1.has_value());
    EXPECT_EQ(p.hit1->index, 2u);
    EXPECT_NEAR(p.hit1->time, 1.5, 1e-15);
    ASSERT_TRUE(p.hit0.has_value());
    EXPECT_EQ(p.hit0->index, 3u);
}

TEST_F(DiffusionTest, SpecValidation) {
    DiffusionSpec s;
    s.z0 = 0.1;
    EXPECT_NO_THROW(s.validate());
    s.dt = 0.5;
    EXPECT_THROW(s.validate(), ConfigError);
}

TEST_F(DiffusionTest, FractionalMomentBound) {
    const ParamVector params;
    const double v = fractional_moment_bound(0.01, 0.5, 0.5, 10.0, params);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(v, 0.0);
    EXPECT_LT(fractional_moment_bound(1e-12, 0.5, 0.5, 10.0, params), 1e-3);
}
