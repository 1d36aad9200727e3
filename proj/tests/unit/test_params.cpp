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

#include <algorithm>
#include <cmath>
#include <limits>

#include "sbmi/errors.hpp"
#include "sbmi/params.hpp"

using namespace sbmi;

class ParamsTest : public ::testing::Test {
protected:
    ParamVector p;  // defaults (1.01, 0.49, 1, 0.49, 0.45, 0.9, 3)

    static bool violates(const std::vector<ConstraintViolation> &v, const std::string &label) {
        return std::any_of(v.begin(), v.end(), [&](const auto &c) { return c.constraint == label; });
    }
};

TEST_F(ParamsTest, DefaultVectorIsValid) { EXPECT_TRUE(validate_params(p).empty()); }

TEST_F(ParamsTest, SmallXiViolatesAAndD) {
    p.xi = 0.5;
    const auto v = validate_params(p);
    EXPECT_TRUE(violates(v, "a"));
    EXPECT_TRUE(violates(v, "d"));
}

TEST_F(ParamsTest, EqualBetasViolateB) {
    p.beta = 0.45;
    p.beta_prime = 0.45;
    const auto v = validate_params(p);
    EXPECT_TRUE(violates(v, "b"));
    EXPECT_NE(describe(v.front()).find("b"), std::string::npos);
}

TEST_F(ParamsTest, NonFiniteFieldRejected) {
    p.eta = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(validate_params(p), InputError);
}

TEST_F(ParamsTest, ValidationIsPure) {
    p.xi = 0.5;
    const auto a = validate_params(p);
    const auto b = validate_params(p);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].constraint, b[k].constraint);
        EXPECT_EQ(a[k].lhs, b[k].lhs);
    }
}

TEST_F(ParamsTest, KappaValues) {
    const DerivedConstants dc = kappas(p);
    EXPECT_NEAR(dc.kappa1, 1.295, 1e-12);
    EXPECT_NEAR(dc.kappa2, std::pow(0.49, 3) / 4.0, 1e-12);
    EXPECT_NEAR(dc.kappa3, 0.68, 1e-12);
}

TEST_F(ParamsTest, DefaultWpInRange) {
    const DerivedConstants dc = derive_constants(p);
    EXPECT_GT(dc.wp, 0.0);
    EXPECT_LT(dc.wp, std::min(dc.kappa1, dc.kappa3));
    EXPECT_GT(dc.kappa1 - dc.wp, p.eta);
}

TEST_F(ParamsTest, DeltaAtMostHalfAndPositiveBelowR0) {
    const DerivedConstants dc = derive_constants(p);
    ASSERT_GT(dc.r0, 0.0);
    ASSERT_LE(dc.r0, 1.0);
    for (int k = 1; k <= 200; ++k) {
        const double r = dc.r0 * k / 200.0;
        EXPECT_LE(dc.delta(r), 0.5);
        EXPECT_GT(dc.delta(r), 0.0) << "r = " << r;
    }
}

TEST_F(ParamsTest, DeltaNumeratorApproachesLeadingTerm) {
    const DerivedConstants dc = derive_constants(p);
    for (double r : {1e-6, 1e-8, 1e-10}) {
        const double lead = std::pow(r, p.eta) / 4.0;
        EXPECT_GT(dc.delta_numerator(r), 0.0);
        EXPECT_NEAR(dc.delta_numerator(r) / lead, 1.0, 0.2);
    }
}

TEST_F(ParamsTest, WpOutOfRangeRejected) {
    EXPECT_THROW(derive_constants(p, 1.0, 0.0), ParameterError);
    EXPECT_THROW(derive_constants(p, 1.0, 10.0), ParameterError);
    EXPECT_THROW(derive_constants(p, -1.0), ParameterError);
}

TEST_F(ParamsTest, HugeKStarInfeasible) {
    try {
        derive_constants(p, 1e300);
        FAIL() << "expected InfeasibleError";
    } catch (const InfeasibleError &e) {
        EXPECT_NE(std::string(e.what()).find("K*"), std::string::npos);
    }
}

TEST_F(ParamsTest, Eps0RespectsItsCaps) {
    const DerivedConstants dc = derive_constants(p);
    const double r = 0.5 * dc.r0;
    const double e0 = dc.eps0(r, 1.0);
    EXPECT_GT(e0, 0.0);
    EXPECT_LE(e0, r);
    EXPECT_LE(e0, 1.0 / 8.0);
    EXPECT_LE(std::pow(e0, dc.kappa2), std::pow(r, dc.kappa1 - dc.kappa3) * (1.0 + 1e-9));
}
