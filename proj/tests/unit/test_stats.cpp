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
#include <string>

#include "sbmi/errors.hpp"
#include "sbmi/stats.hpp"

using namespace sbmi;

class StatsTest : public ::testing::Test {
protected:
    std::mt19937_64 gen{5};
};

TEST_F(StatsTest, RunningStatsMergeMatchesSequential) {
    std::normal_distribution<double> nd(2.0, 3.0);
    RunningStats all, a, b;
    for (int k = 0; k < 1000; ++k) {
        const double x = nd(gen);
        all.add(x);
        (k < 400 ? a : b).add(x);
    }
    a.merge(b);
    EXPECT_EQ(a.count(), all.count());
    EXPECT_NEAR(a.mean(), all.mean(), 1e-12);
    EXPECT_NEAR(a.variance(), all.variance(), 1e-9);
}

TEST_F(StatsTest, WilsonInterval) {
    const Proportion p = wilson(50, 1000);
    EXPECT_DOUBLE_EQ(p.estimate, 0.05);
    EXPECT_LT(p.lo, 0.05);
    EXPECT_GT(p.hi, 0.05);
    EXPECT_EQ(wilson(0, 10).lo, 0.0);
    EXPECT_EQ(wilson(10, 10).hi, 1.0);
    EXPECT_THROW(wilson(11, 10), InputError);
}

TEST_F(StatsTest, KolmogorovSurvival) {
    EXPECT_NEAR(kolmogorov_q(1.0), 0.26999967167735456, 1e-12);
    EXPECT_NEAR(kolmogorov_q(1.358), 0.05, 1e-3);
}

TEST_F(StatsTest, KsSameLawAndShiftedLaw) {
    std::normal_distribution<double> nd;
    std::vector<double> a(2000), b(2000), c(2000);
    for (auto *v : {&a, &b}) {
        for (double &x : *v) {
            x = nd(gen);
        }
    }
    for (double &x : c) {
        x = nd(gen) + 0.5;
    }
    EXPECT_GT(ks_two_sample(a, b).p_value, 0.001);
    EXPECT_LT(ks_two_sample(a, c).p_value, 1e-6);
    EXPECT_EQ(ks_two_sample(a, c, 1.0).adjusted, 0.0);
    EXPECT_THROW(ks_two_sample({}, b), InputError);
}

TEST_F(StatsTest, QuantileAndFit) {
    EXPECT_DOUBLE_EQ(sample_quantile({3, 1, 2, 4}, 0.5), 2.5);
    EXPECT_THROW(sample_quantile({1}, 1.5), InputError);
    const LinearFit f = ols({0, 1, 2, 3}, {1, 3, 5, 7});
    EXPECT_NEAR(f.slope, 2.0, 1e-12);
    EXPECT_NEAR(f.intercept, 1.0, 1e-12);
    EXPECT_NEAR(f.slope_se, 0.0, 1e-12);
    EXPECT_THROW(ols({1, 1}, {1, 2}), InputError);
}

TEST_F(StatsTest, Fnv1aReferenceValues) {
    EXPECT_EQ(fnv1a("", 0), 0xcbf29ce484222325ULL);
    const std::string a = "a";
    EXPECT_EQ(fnv1a(a.data(), a.size()), 0xaf63dc4c8601ec8cULL);
}
