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
#include "sbmi/spde.hpp"
#include "sbmi/stats.hpp"

using namespace sbmi;

class AllocationTest : public ::testing::Test {
protected:
    std::mt19937_64 gen{11};
    std::normal_distribution<double> nd;
};

TEST_F(AllocationTest, SingleCluster) {
    const auto xi = allocate_noise({0.3}, 1.7, {});
    ASSERT_EQ(xi.size(), 1u);
    EXPECT_DOUBLE_EQ(xi[0], 1.7);
}

TEST_F(AllocationTest, TwoEqualMasses) {
    const double g = 0.8, eta = -1.3, m = 0.2;
    const auto xi = allocate_noise({m, m}, g, {eta});
    EXPECT_NEAR(xi[0], (g + eta) / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(xi[1], (g - eta) / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(std::sqrt(m) * (xi[0] + xi[1]), std::sqrt(2.0 * m) * g, 1e-15);
}

TEST_F(AllocationTest, ZeroMassGetsFreshNoise) {
    const auto xi = allocate_noise({0.5, 0.0}, 0.4, {2.5});
    EXPECT_DOUBLE_EQ(xi[0], 0.4);
    EXPECT_DOUBLE_EQ(xi[1], 2.5);
}

TEST_F(AllocationTest, OrthogonalAndReconstructing) {
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 1 + trial % 7;
        std::vector<double> m(k);
        for (double &v : m) {
            v = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
        }
        // Columns of the map are the images of unit inputs; their Gram matrix must be I.
        std::vector<std::vector<double>> cols;
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<double> aux(k - 1, 0.0);
            const double g = c == 0 ? 1.0 : 0.0;
            if (c > 0) {
                aux[c - 1] = 1.0;
            }
            cols.push_back(allocate_noise(m, g, aux));
        }
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = 0; b < k; ++b) {
                double dot = 0.0;
                for (std::size_t r = 0; r < k; ++r) {
                    dot += cols[a][r] * cols[b][r];
                }
                EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-12);
            }
        }
        const double g = nd(gen);
        std::vector<double> aux(k - 1);
        for (double &v : aux) {
            v = nd(gen);
        }
        const auto xi = allocate_noise(m, g, aux);
        double lhs = 0.0, total = 0.0;
        for (std::size_t r = 0; r < k; ++r) {
            lhs += std::sqrt(m[r]) * xi[r];
            total += m[r];
        }
        EXPECT_NEAR(lhs, std::sqrt(total) * g, 1e-12);
    }
}

class MassStepTest : public ::testing::Test {
protected:
    RngStream rng{21, 5};
};

TEST_F(MassStepTest, NonnegativeAndAbsorbing) {
    for (int k = 0; k < 10000; ++k) {
        const double z = rng.normal();
        EXPECT_GE(qe_mass_step(rng.uniform() * 1e-3, 1e-4, z), 0.0);
        EXPECT_EQ(qe_mass_step(0.0, 1e-4, z), 0.0);
    }
}

TEST_F(MassStepTest, MatchesFirstTwoMoments) {
    for (double m : {1e-5, 1e-4, 1e-2}) {
        const double dt = 1e-4;
        RunningStats s;
        for (int k = 0; k < 200000; ++k) {
            s.add(qe_mass_step(m, dt, rng.normal()));
        }
        EXPECT_NEAR(s.mean(), m, 4.0 * s.std_error()) << "m = " << m;
        EXPECT_NEAR(s.variance() / (m * dt), 1.0, 0.03) << "m = " << m;
    }
}

TEST_F(MassStepTest, BatchMatchesScalar) {
    const std::size_t n = 257;
    std::vector<double> m(n), z(n), up(n), out(n);
    for (std::size_t k = 0; k < n; ++k) {
        m[k] = k % 5 == 0 ? 0.0 : rng.uniform() * 1e-3;
        z[k] = rng.normal();
        up[k] = 1.0 - normal_cdf(z[k]);
    }
    qe_mass_step_batch(m.data(), 1e-4, z.data(), up.data(), out.data(), n);
    for (std::size_t k = 0; k < n; ++k) {
        EXPECT_EQ(out[k], qe_mass_step(m[k], 1e-4, z[k], up[k])) << "cell " << k;
    }
}

class ImmigrationTest : public ::testing::Test {
protected:
    ImmigrationFunction psi;
};

TEST_F(ImmigrationTest, ScheduleTimes) {
    const auto s = ImmigrationSchedule::build(0.05, 0.2, psi, 1, 0);
    ASSERT_EQ(s.s_times.size(), 4u);
    ASSERT_EQ(s.t_times.size(), 4u);
    EXPECT_DOUBLE_EQ(s.s_times[0], 0.025);
    EXPECT_DOUBLE_EQ(s.t_times[3], 0.2);
    EXPECT_THROW(ImmigrationSchedule::build(0.2, 1.0, psi, 1, 0), InputError);
}

TEST_F(ImmigrationTest, ForcedEqualTargets) {
    const auto s = ImmigrationSchedule::build(0.05, 0.5, psi, 3, 0, true);
    EXPECT_EQ(s.targets_x, std::vector<double>(s.targets_y.begin(), s.targets_y.begin() + s.targets_x.size()));
}

TEST_F(ImmigrationTest, SymmetricBumpMeanIsHalf) {
    psi.shape = PsiShape::indicator;
    RngStream rng(8, 0);
    const auto x = sample_targets(psi, 100000, rng);
    RunningStats s;
    for (double v : x) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
        s.add(v);
    }
    EXPECT_NEAR(s.mean(), 0.5, 3.0 * s.std_error());
}

TEST_F(ImmigrationTest, ZeroPsiRejected) {
    psi.amplitude = 0.0;
    RngStream rng(8, 0);
    EXPECT_THROW(sample_targets(psi, 10, rng), InputError);
}

class CoupledSystemTest : public ::testing::Test {
protected:
    SimConfig cfg;
    void SetUp() override {
        cfg.eps = 0.05;
        cfg.horizon = 0.2;
        cfg.dx = cfg.eps / 4.0;
    }
};

TEST_F(CoupledSystemTest, HalfEpsIsWholeSteps) {
    const Discretization d = discretize(cfg);
    EXPECT_NEAR(d.half_eps_steps * d.dt, cfg.eps / 2.0, 1e-15);
    EXPECT_LE(d.dt, 0.5 * d.grid.dx * d.grid.dx);
}

TEST_F(CoupledSystemTest, FreshClusterCarriesImmigrantMass) {
    CoupledSystem fresh(cfg);
    while (fresh.time() + 0.5 * fresh.dt() < cfg.eps / 2.0) {
        fresh.step();
    }
    fresh.apply_births();
    ASSERT_FALSE(fresh.x_clusters().empty());
    EXPECT_NEAR(fresh.x_clusters().front().mass, cfg.psi.total_mass() * cfg.eps, 1e-12);
}

TEST_F(CoupledSystemTest, ZeroNoiseMassCountsBirths) {
    cfg.noise = false;
    cfg.margin = 4.0;
    CoupledSystem sys(cfg);
    while (!sys.finished()) {
        // Births at s_i = (i - 1/2) eps are applied at the start of the step from time s_i.
        const double t0 = sys.time();
        sys.step();
        const double births = std::floor(t0 / cfg.eps + 0.5 + 1e-9);
        EXPECT_NEAR(sys.total_mass('X'), cfg.eps * births, 1e-12) << "t = " << sys.time();
    }
}

TEST_F(CoupledSystemTest, NothingBeforeFirstBirth) {
    cfg.horizon = 0.02;  // below s_1 = eps/2
    CoupledSystem sys(cfg);
    while (!sys.finished()) {
        sys.step();
        EXPECT_EQ(sys.total_mass('X'), 0.0);
        EXPECT_EQ(sys.total_mass('Y'), 0.0);
    }
}

TEST_F(CoupledSystemTest, SameSeedSameDigest) {
    cfg.digest_noise = true;
    CoupledSystem a(cfg), b(cfg);
    cfg.seed = 2;
    CoupledSystem c(cfg);
    while (!a.finished()) {
        a.step();
        b.step();
        c.step();
    }
    EXPECT_EQ(a.shared_noise_digest_x(), b.shared_noise_digest_x());
    EXPECT_EQ(a.shared_noise_digest_y(), b.shared_noise_digest_y());
    EXPECT_NE(a.shared_noise_digest_x(), c.shared_noise_digest_x());
    EXPECT_EQ(a.total_mass('X'), b.total_mass('X'));
}

TEST_F(CoupledSystemTest, ClusterSumEqualsTrackedAggregate) {
    cfg.track_aggregate = true;
    CoupledSystem sys(cfg);
    while (!sys.finished()) {
        sys.step();
    }
    EXPECT_LT(sys.max_decomposition_error(), 1e-10);
}

TEST_F(CoupledSystemTest, FieldsStayNonnegative) {
    CoupledSystem sys(cfg);
    while (!sys.finished()) {
        sys.step();
    }
    for (const auto *cs : {&sys.x_clusters(), &sys.y_clusters()}) {
        for (const Cluster &c : *cs) {
            for (double v : c.v) {
                ASSERT_GE(v, 0.0);
            }
        }
    }
}
