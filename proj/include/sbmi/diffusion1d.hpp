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

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "sbmi/params.hpp"
#include "sbmi/random.hpp"

namespace sbmi {

enum class DiffusionKind { feller, besq4_quarter, conditioned_feller };

struct DiffusionSpec {
    DiffusionKind kind = DiffusionKind::feller;
    double z0 = 0.0;
    double horizon = 1.0;
    double dt = 1e-3;

    /// Throws ConfigError unless dt > 0, horizon > 0, dt <= horizon/10 and z0 >= 0.
    void validate() const;
};

struct HitMarker {
    std::size_t index = 0;  // first sample at or past the level
    double time = 0.0;      // linearly interpolated crossing instant
};

struct DiffusionPath {
    std::vector<double> times;
    std::vector<double> values;
    std::optional<HitMarker> hit0;
    std::optional<HitMarker> hit1;

    /// Fills hit0/hit1 from the samples: level 0 is hit at the first zero value, level 1 at the
    /// first value >= 1 with the time interpolated between neighbouring samples.
    void mark_hits();
};

/// Exact Feller (dZ = sqrt(Z) dB) transition over t: Z = (t/2) Gamma(N), N ~ Poisson(2z/t).
double feller_transition_sample(double z, double t, RngStream &rng);

/// Exact 1/4 BESQ^4(4z) transition over dt: Z = (dt/2) Gamma(N + 2), N ~ Poisson(2z/dt).
double besq4_quarter_step(double z, double dt, RngStream &rng);

/// 1 - exp(-2z/t).
double survival_prob(double z, double t);

/// P_z(T_1 < T_0) = z for the driftless Feller diffusion.
double hit_prob_one_before_zero(double z);

/// E_z[exp(-lambda Z_t)] = exp(-2 lambda z / (2 + lambda t)).
double feller_laplace(double z, double t, double lambda);

/// x e^{-x} / (1 - e^{-x}), with F(0) = 1.
double F_drift(double x);

/// Euler path of dZ = F(2Z/(T-s)) ds + sqrt(Z) dB on [0, T] with negative values clamped to 0.
/// Throws ConfigError if dt >= T.
DiffusionPath conditioned_feller_path(double z, double T, double dt, RngStream &rng);

/// Exact-transition Feller path on a fixed grid of step dt up to `horizon`; absorbed at 0.
DiffusionPath feller_path(double z, double horizon, double dt, RngStream &rng);

/// Exact-transition 1/4 BESQ^4 path on a fixed grid.
DiffusionPath besq4_path(double z, double horizon, double dt, RngStream &rng);

DiffusionPath simulate(const DiffusionSpec &spec, RngStream &rng);

struct HitOutcome {
    bool hit_one = false;
    double time = 0.0;  // absorption or crossing time
    std::size_t steps = 0;
};

/// Runs an exact-transition Feller path from z until it reaches 0 or crosses 1, with step size
/// shrinking near 1 and a Brownian-bridge crossing test between samples.
HitOutcome feller_hit_one_before_zero(double z, RngStream &rng, double max_time = 1e6);

/// Exact-transition Feller path from z over [0, T]; returns Z_T and whether level 1 was crossed
/// before T (bridge-corrected).
struct FellerHorizon {
    double z_T = 0.0;
    bool hit_one = false;
};
FellerHorizon feller_to_horizon(double z, double T, RngStream &rng);

/// 1/4 BESQ^4(4z) at time T, stopped at level 1 (returns 1 if the level is crossed before T).
/// Exact transitions on steps of at most max_dt, shrinking near 1, with a bridge crossing test.
double besq4_quarter_stopped(double z, double T, RngStream &rng, double max_dt = 1e-3);

/// K_p [(z^{p alpha^N0} T^{p alpha} + z^p) survival_prob(z,T) + z T^{p xi - 1}].
double fractional_moment_bound(double z, double T, double p, double K_p, const ParamVector &params);

struct KpCalibration {
    double moment = 0.0;     // MC estimate of E_z[Z_T^p; T <= T_1]
    double std_error = 0.0;
    double bracket = 0.0;    // fractional_moment_bound with K_p = 1
    double k_p = 0.0;        // smallest K_p with moment <= K_p * bracket
};
KpCalibration calibrate_kp(double z, double T, double p, const ParamVector &params, std::size_t n, RngStream &rng);

}  // namespace sbmi
