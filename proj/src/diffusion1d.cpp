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

#include "sbmi/diffusion1d.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sbmi/errors.hpp"

namespace sbmi {

namespace {

// Probability that a diffusion with local variance rate v crosses level 1 between samples a and b
// (both below 1) taken dt apart.
double bridge_cross_prob(double a, double b, double dt) {
    const double v = std::max(0.5 * (a + b), 1e-300);
    return std::exp(-2.0 * (1.0 - a) * (1.0 - b) / (v * dt));
}

double step_near_one(double z) {
    const double d = 1.0 - z;
    return std::clamp(d * d / 16.0, 1e-8, 1e-2);
}

}  // namespace

void DiffusionSpec::validate() const {
    if (!(z0 >= 0.0) || !std::isfinite(z0)) {
        throw ConfigError("DiffusionSpec: z0 must be finite and >= 0");
    }
    if (!(horizon > 0.0) || !(dt > 0.0) || dt > horizon / 10.0) {
        std::ostringstream os;
        os << "DiffusionSpec: need horizon > 0 and 0 < dt <= horizon/10 (dt=" << dt << ", horizon=" << horizon << ")";
        throw ConfigError(os.str());
    }
}

void DiffusionPath::mark_hits() {
    hit0.reset();
    hit1.reset();
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (!hit0 && values[k] <= 0.0) {
            double t = times[k];
            if (k > 0 && values[k - 1] > 0.0) {
                // Linear interpolation of the crossing inside the last interval.
                const double w = values[k - 1] / (values[k - 1] - values[k]);
                t = times[k - 1] + w * (times[k] - times[k - 1]);
            }
            hit0 = HitMarker{k, t};
        }
        if (!hit1 && values[k] >= 1.0) {
            double t = times[k];
            if (k > 0 && values[k - 1] < 1.0) {
                const double w = (1.0 - values[k - 1]) / (values[k] - values[k - 1]);
                t = times[k - 1] + w * (times[k] - times[k - 1]);
            }
            hit1 = HitMarker{k, t};
        }
        if (hit0 && hit1) {
            break;
        }
    }
}

double feller_transition_sample(double z, double t, RngStream &rng) {
    if (!(z > 0.0)) {
        return 0.0;
    }
    const auto n = rng.poisson(2.0 * z / t);
    if (n == 0) {
        return 0.0;
    }
    return 0.5 * t * rng.gamma(static_cast<double>(n));
}

double besq4_quarter_step(double z, double dt, RngStream &rng) {
    const auto n = z > 0.0 ? rng.poisson(2.0 * z / dt) : 0;
    return 0.5 * dt * rng.gamma(static_cast<double>(n) + 2.0);
}

double survival_prob(double z, double t) {
    if (!(t > 0.0)) {
        throw InputError("survival_prob: t must be positive");
    }
    if (z <= 0.0) {
        return 0.0;
    }
    return -std::expm1(-2.0 * z / t);
}

double hit_prob_one_before_zero(double z) {
    if (!(z >= 0.0 && z <= 1.0)) {
        throw InputError("hit_prob_one_before_zero: z must lie in [0,1]");
    }
    return z;
}

double feller_laplace(double z, double t, double lambda) { return std::exp(-2.0 * lambda * z / (2.0 + lambda * t)); }

double F_drift(double x) {
    if (x <= 0.0) {
        return 1.0;
    }
    if (x > 700.0) {
        return x * std::exp(-x);
    }
    return x / std::expm1(x);
}

DiffusionPath conditioned_feller_path(double z, double T, double dt, RngStream &rng) {
    if (!(z > 0.0) || !(T > 0.0)) {
        throw InputError("conditioned_feller_path: z and T must be positive");
    }
    if (!(dt > 0.0) || dt >= T) {
        throw ConfigError("conditioned_feller_path: dt must lie in (0, T)");
    }
    const auto n = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
    const double h = T / static_cast<double>(n);
    DiffusionPath p;
    p.times.reserve(n + 1);
    p.values.reserve(n + 1);
    double x = z;
    p.times.push_back(0.0);
    p.values.push_back(x);
    for (std::size_t k = 0; k < n; ++k) {
        const double s = static_cast<double>(k) * h;
        const double drift = F_drift(2.0 * x / (T - s));
        x += drift * h + std::sqrt(x) * std::sqrt(h) * rng.normal();
        x = std::max(x, 0.0);
        p.times.push_back(static_cast<double>(k + 1) * h);
        p.values.push_back(x);
    }
    p.mark_hits();
    return p;
}

namespace {

template <class Step>
DiffusionPath grid_path(double z, double horizon, double dt, Step step) {
    const auto n = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    const double h = horizon / static_cast<double>(n);
    DiffusionPath p;
    p.times.reserve(n + 1);
    p.values.reserve(n + 1);
    double x = z;
    p.times.push_back(0.0);
    p.values.push_back(x);
    for (std::size_t k = 0; k < n; ++k) {
        x = step(x, h);
        p.times.push_back(static_cast<double>(k + 1) * h);
        p.values.push_back(x);
    }
    p.mark_hits();
    return p;
}

}  // namespace

DiffusionPath feller_path(double z, double horizon, double dt, RngStream &rng) {
    return grid_path(z, horizon, dt, [&](double x, double h) { return feller_transition_sample(x, h, rng); });
}

DiffusionPath besq4_path(double z, double horizon, double dt, RngStream &rng) {
    return grid_path(z, horizon, dt, [&](double x, double h) { return besq4_quarter_step(x, h, rng); });
}

DiffusionPath simulate(const DiffusionSpec &spec, RngStream &rng) {
    spec.validate();
    switch (spec.kind) {
    case DiffusionKind::feller:
        return feller_path(spec.z0, spec.horizon, spec.dt, rng);
    case DiffusionKind::besq4_quarter:
        return besq4_path(spec.z0, spec.horizon, spec.dt, rng);
    case DiffusionKind::conditioned_feller:
        return conditioned_feller_path(spec.z0, spec.horizon, spec.dt, rng);
    }
    throw InputError("simulate: unknown diffusion kind");
}

HitOutcome feller_hit_one_before_zero(double z, RngStream &rng, double max_time) {
    HitOutcome out;
    if (z >= 1.0) {
        out.hit_one = true;
        return out;
    }
    double x = z;
    double t = 0.0;
    while (x > 0.0 && t < max_time) {
        const double h = step_near_one(x);
        const double next = feller_transition_sample(x, h, rng);
        ++out.steps;
        if (next >= 1.0) {
            // Crossing inside the step; place it by linear interpolation.
            out.hit_one = true;
            out.time = t + h * (1.0 - x) / (next - x);
            return out;
        }
        if (next > 0.0 && rng.uniform() < bridge_cross_prob(x, next, h)) {
            out.hit_one = true;
            out.time = t + 0.5 * h;
            return out;
        }
        x = next;
        t += h;
    }
    out.time = t;
    return out;
}

FellerHorizon feller_to_horizon(double z, double T, RngStream &rng) {
    FellerHorizon out;
    double x = z;
    double t = 0.0;
    while (t < T && x > 0.0) {
        const double h = std::min(step_near_one(std::min(x, 0.999999)), T - t);
        const double next = feller_transition_sample(x, h, rng);
        if (!out.hit_one) {
            if (next >= 1.0 || x >= 1.0) {
                out.hit_one = true;
            } else if (next > 0.0 && rng.uniform() < bridge_cross_prob(x, next, h)) {
                out.hit_one = true;
            }
        }
        x = next;
        t += h;
    }
    out.z_T = x;
    return out;
}

double besq4_quarter_stopped(double z, double T, RngStream &rng, double max_dt) {
    double x = z;
    double t = 0.0;
    while (t < T) {
        if (x >= 1.0) {
            return 1.0;
        }
        const double h = std::min({step_near_one(x), max_dt, T - t});
        const double next = besq4_quarter_step(x, h, rng);
        if (next >= 1.0 || rng.uniform() < bridge_cross_prob(x, next, h)) {
            return 1.0;
        }
        x = next;
        t += h;
    }
    return x;
}

double fractional_moment_bound(double z, double T, double p, double K_p, const ParamVector &params) {
    if (!(z > 0.0 && z <= 1.0) || !(T > 0.0 && T <= 1.0) || !(p > 0.0)) {
        throw InputError("fractional_moment_bound: requires z, T in (0,1] and p > 0");
    }
    const double an0 = std::pow(params.alpha, params.n0);
    const double head = (std::pow(z, p * an0) * std::pow(T, p * params.alpha) + std::pow(z, p)) * survival_prob(z, T);
    return K_p * (head + z * std::pow(T, p * params.xi - 1.0));
}

KpCalibration calibrate_kp(double z, double T, double p, const ParamVector &params, std::size_t n, RngStream &rng) {
    KpCalibration c;
    double s = 0.0;
    double s2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto r = feller_to_horizon(z, T, rng);
        const double v = r.hit_one ? 0.0 : std::pow(r.z_T, p);
        s += v;
        s2 += v * v;
    }
    const double nn = static_cast<double>(n);
    c.moment = s / nn;
    c.std_error = std::sqrt(std::max(s2 / nn - c.moment * c.moment, 0.0) / nn);
    c.bracket = fractional_moment_bound(z, T, p, 1.0, params);
    c.k_p = c.moment / c.bracket;
    return c;
}

}  // namespace sbmi
