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

#include "sbmi/validation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "sbmi/diffusion1d.hpp"
#include "sbmi/errors.hpp"
#include "sbmi/experiments.hpp"
#include "sbmi/lattice.hpp"
#include "sbmi/mathkernel.hpp"
#include "sbmi/random.hpp"
#include "sbmi/stats.hpp"

namespace sbmi {

namespace {

// Validator streams live above the lattice stream range.
constexpr std::uint64_t kValidationStream = 1ULL << 41;

RngStream validation_rng(std::uint64_t seed, std::uint64_t tag) { return RngStream(seed, kValidationStream + tag); }

CheckResult hard(const std::string &module, const std::string &name, bool passed, double value, double threshold,
                 const std::string &detail = {}) {
    return {module, name, false, passed, value, threshold, detail};
}

CheckResult statistical(const std::string &module, const std::string &name, double z, double z_limit,
                        const std::string &detail) {
    return {module, name, true, std::isfinite(z) && std::fabs(z) <= z_limit, z, z_limit, detail};
}

std::string fmt(const char *label, double v) {
    std::ostringstream os;
    os.precision(6);
    os << label << "=" << v;
    return os.str();
}

double uniform_in(RngStream &rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

}  // namespace

const std::vector<std::string> &validation_modules() {
    static const std::vector<std::string> names = {"params", "mathkernel", "diffusion1d", "lattice", "spde",
                                                   "experiments"};
    return names;
}

bool all_passed(const std::vector<CheckResult> &checks) {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult &c) { return c.passed; });
}

// ---------------------------------------------------------------------------------------------
// params

CheckResult check_param_constraints(const ParamVector &p) {
    const auto v = validate_params(p);
    std::string detail;
    for (const auto &c : v) {
        detail += (detail.empty() ? "" : "; ") + describe(c);
    }
    return hard("params", "constraints", v.empty(), static_cast<double>(v.size()), 0.0, detail);
}

CheckResult check_delta_positive(const ParamVector &p, double k_star, std::size_t points) {
    const DerivedConstants dc = derive_constants(p, k_star);
    bool ok = dc.kappa1 > 0.0 && dc.kappa2 > 0.0 && dc.kappa3 > 0.0 && dc.kappa1 > p.eta;
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= points; ++k) {
        const double r = dc.r0 * static_cast<double>(k) / static_cast<double>(points);
        const double d = dc.delta(r);
        worst = std::min(worst, d);
        ok = ok && d > 0.0 && d <= 0.5;
    }
    return hard("params", "delta_positive_on_(0,r0]", ok, worst, 0.0, fmt("r0", dc.r0));
}

// ---------------------------------------------------------------------------------------------
// mathkernel

CheckResult check_a_of_r(std::size_t r_points, std::size_t pairs) {
    double worst_res = 0.0;
    bool bounds = true;
    for (std::size_t q = 0; q < pairs; ++q) {
        // (beta, beta') spread over 1/3 <= beta' < beta < 1/2.
        const double beta = 0.36 + 0.135 * static_cast<double>(q + 1) / static_cast<double>(pairs + 1);
        const double beta_p = 1.0 / 3.0 + (beta - 1.0 / 3.0) * (0.1 + 0.8 * static_cast<double>(q % 5) / 4.0);
        for (std::size_t k = 1; k <= r_points; ++k) {
            const double r = static_cast<double>(k) / static_cast<double>(r_points);
            const double A = A_of_r(r, beta, beta_p);
            const double shift = std::pow(r, 1.0 - beta_p / beta);
            const double res = std::fabs(std::pow(A, beta) + std::pow(A - shift, beta) - 2.0);
            worst_res = std::max(worst_res, res);
            bounds = bounds && A >= 1.0 - 1e-12 && A <= 1.0 + shift + 1e-12 && A > shift;
        }
    }
    return hard("mathkernel", "A_of_r_residual_and_bounds", bounds && worst_res < 1e-12, worst_res, 1e-12);
}

CheckResult check_integral_quadrature(std::size_t triples, std::uint64_t seed) {
    RngStream rng = validation_rng(seed, 1);
    // Abscissas stay 1e-40 (relative) away from the endpoints. With every endpoint exponent at
    // least -0.7 the neglected mass is below 1e-12 of the integral.
    constexpr double kMinComplement = 1e-40;
    boost::math::quadrature::tanh_sinh<double> outer_q(15, kMinComplement);
    double worst = 0.0;
    std::string where;
    for (std::size_t n = 0; n < triples; ++n) {
        const double a = uniform_in(rng, -0.5, 2.0);
        const double c = uniform_in(rng, -0.5, 2.0);
        const double b = uniform_in(rng, std::max(-1.0, -1.7 - a - c), 1.0);
        const double T = uniform_in(rng, 0.2, 2.0);
        // Direct iterated integral; sc carries the distance to the nearer endpoint exactly.
        const auto inner = [&](double r) {
            boost::math::quadrature::tanh_sinh<double> q(15, kMinComplement);
            const auto g = [&](double s, double sc) {
                const double s_minus_r = sc < 0.0 ? -sc : s - r;
                return std::pow(s, b) * std::pow(s_minus_r, c);
            };
            return std::pow(r, a) * q.integrate(g, r, T, 1e-13);
        };
        const double quad = outer_q.integrate(inner, 0.0, T, 1e-12);
        const IntegralResult closed = integral_I(a, b, c, T);
        const double rel = std::fabs(closed.value - quad) / std::fabs(quad);
        if (!(rel <= worst)) {
            worst = rel;
            std::ostringstream os;
            os << "a=" << a << " b=" << b << " c=" << c << " T=" << T;
            where = os.str();
        }
    }
    return hard("mathkernel", "integral_I_vs_quadrature", worst < 1e-6, worst, 1e-6, where);
}

CheckResult check_allocate_exponents(std::size_t triples, std::uint64_t seed) {
    RngStream rng = validation_rng(seed, 2);
    std::size_t disagreements = 0;
    std::size_t violations = 0;
    for (std::size_t n = 0; n < triples; ++n) {
        const double a = uniform_in(rng, -0.99, 2.0);
        const double c = uniform_in(rng, -0.99, 2.0);
        // b < 0 with a + b + c > -2 and slack at least 0.01.
        const double b_lo = std::max(-(a + c + 2.0) + 0.01, -3.0);
        const double b = uniform_in(rng, b_lo, -1e-3);
        bool grid_feasible = false;
        for (int k = 1; k < 1000; ++k) {
            const double b1 = b * static_cast<double>(k) / 1000.0;
            const double b2 = b - b1;
            if (a + b1 > -1.0 && b2 + c > -1.0) {
                grid_feasible = true;
                break;
            }
        }
        bool solved = false;
        try {
            const auto [b1, b2] = allocate_exponents(a, b, c);
            solved = true;
            if (!(b1 < 0.0 && b2 < 0.0 && std::fabs(b1 + b2 - b) <= 1e-12 && a + b1 > -1.0 && b2 + c > -1.0)) {
                ++violations;
            }
        } catch (const NoSolutionError &) {
        }
        disagreements += solved != grid_feasible ? 1 : 0;
    }
    std::ostringstream os;
    os << "violations=" << violations << " disagreements=" << disagreements;
    return hard("mathkernel", "allocate_exponents_constraints", violations == 0 && disagreements == 0,
                static_cast<double>(violations + disagreements), 0.0, os.str());
}

CheckResult check_imc_domination(std::size_t functions, std::size_t times, std::uint64_t seed) {
    RngStream rng = validation_rng(seed, 3);
    constexpr std::size_t kGrid = 4000;
    std::size_t built = 0;
    std::size_t failures = 0;
    std::size_t attempts = 0;
    double worst_ratio = 0.0;
    std::vector<double> f(kGrid + 1), integral(kGrid + 1);
    while (built < functions && attempts < 50 * functions) {
        ++attempts;
        const double a = uniform_in(rng, 0.2, 0.49);
        const double b = uniform_in(rng, 0.0, 1.0);
        const double c = uniform_in(rng, 0.0, 2.0);
        const double f0 = (rng.uniform() < 0.5 ? -1.0 : 1.0) * uniform_in(rng, 0.1, 0.8);
        const double T = uniform_in(rng, 0.1, 1.0);
        const double omega = uniform_in(rng, 0.5, 30.0);
        const double phase = uniform_in(rng, 0.0, 6.283185307179586);
        const double theta = uniform_in(rng, 0.0, 0.9);
        // f = f0 + b t sin(omega t + phase) + theta c (|f0| t / 2)^a sin(2 omega t); certified below.
        for (std::size_t k = 0; k <= kGrid; ++k) {
            const double t = T * static_cast<double>(k) / kGrid;
            f[k] = f0 + b * t * std::sin(omega * t + phase) +
                   theta * c * std::pow(std::fabs(f0) * t / 2.0, a) * std::sin(2.0 * omega * t);
        }
        bool ok = true;
        integral[0] = 0.0;
        for (std::size_t k = 0; k <= kGrid && ok; ++k) {
            if (k > 0) {
                // Lower Riemann bound on int |f| keeps the certificate conservative.
                integral[k] = integral[k - 1] + T / kGrid * std::min(std::fabs(f[k]), std::fabs(f[k - 1]));
            }
            const double t = T * static_cast<double>(k) / kGrid;
            ok = std::fabs(f[k]) <= 1.0 && std::fabs(f[k] - f0) <= b * t + c * std::pow(integral[k], a) - 1e-12 * (k > 0);
        }
        if (!ok) {
            continue;
        }
        ++built;
        const double xi_p = uniform_in(rng, a, a / (1.0 - a));
        int n_p = 0;
        try {
            n_p = imc_pick_N(a, xi_p);
        } catch (const NoSolutionError &) {
            continue;
        }
        for (std::size_t q = 0; q < times; ++q) {
            const std::size_t k = 1 + (q * (kGrid - 1)) / std::max<std::size_t>(times - 1, 1);
            const double t = T * static_cast<double>(k) / kGrid;
            const double lhs = std::fabs(f[k] - f0);
            const double rhs = imc_bound(f0, b, c, a, xi_p, n_p, t);
            worst_ratio = std::max(worst_ratio, lhs / rhs);
            failures += lhs > rhs ? 1 : 0;
        }
    }
    std::ostringstream os;
    os << "functions=" << built << " failures=" << failures;
    return hard("mathkernel", "imc_bound_domination", built == functions && failures == 0, worst_ratio, 1.0, os.str());
}

CheckResult check_contact_time(std::size_t cases, std::uint64_t seed) {
    RngStream rng = validation_rng(seed, 4);
    double worst = 0.0;
    std::size_t bracket_failures = 0;
    for (std::size_t n = 0; n < cases; ++n) {
        const double eps = uniform_in(rng, 1e-4, 0.05);
        const double beta = uniform_in(rng, 1.0 / 3.0, 0.499);
        const double s_i = uniform_in(rng, 0.0, 1.0);
        const double t_j = s_i + uniform_in(rng, 1e-3, 1.0);
        const double x_i = uniform_in(rng, 0.0, 1.0);
        // Gaps beyond the widths at t_j, so the root lies strictly after t_j.
        const double born = 2.0 * std::sqrt(eps) + std::pow(t_j - s_i, beta);
        const double gap = born + uniform_in(rng, 1e-3, 2.0);
        const double y = x_i + (rng.uniform() < 0.5 ? -gap : gap);
        const double t = contact_time(x_i, s_i, y, t_j, eps, beta);
        const auto lhs = [&](double u) { return 2.0 * std::sqrt(eps) + std::pow(u - s_i, beta) + std::pow(u - t_j, beta); };
        worst = std::max(worst, std::fabs(lhs(t) - gap));
        bracket_failures += (lhs(t - 1e-12) <= gap && lhs(t + 1e-12) >= gap) ? 0 : 1;
    }
    std::ostringstream os;
    os << "bracket_failures=" << bracket_failures;
    return hard("mathkernel", "contact_time_residual", worst < 1e-10 && bracket_failures == 0, worst, 1e-10, os.str());
}

CheckResult check_parabolas(std::size_t pairs, std::size_t time_points, std::uint64_t seed) {
    RngStream rng = validation_rng(seed, 5);
    std::size_t disagreements = 0;
    for (std::size_t n = 0; n < pairs; ++n) {
        Parabola p{uniform_in(rng, 0.0, 1.0), uniform_in(rng, 0.0, 0.5), uniform_in(rng, 0.01, 0.2),
                   uniform_in(rng, 0.34, 0.49)};
        Parabola q{uniform_in(rng, 0.0, 1.0), uniform_in(rng, 0.0, 0.5), uniform_in(rng, 0.01, 0.2), p.exponent};
        const double start = std::max(p.birth, q.birth);
        const double t = start + uniform_in(rng, 0.0, 0.5);
        bool sampled = true;
        double closest = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k <= time_points; ++k) {
            const double s = start + (t - start) * static_cast<double>(k) / static_cast<double>(time_points);
            const double slack = std::fabs(p.center - q.center) - p.width(s) - q.width(s);
            closest = std::min(closest, std::fabs(slack));
            sampled = sampled && slack > 0.0;
        }
        // Ties within rounding of the sampled grid are not informative.
        if (closest > 1e-9 && sampled != parabolas_disjoint(p, q, t)) {
            ++disagreements;
        }
    }
    return hard("mathkernel", "parabolas_disjoint_vs_sampling", disagreements == 0,
                static_cast<double>(disagreements), 0.0);
}

// ---------------------------------------------------------------------------------------------
// diffusion1d

CheckResult check_hit_probability(double z, std::size_t n, std::uint64_t seed, unsigned workers, double z_limit) {
    std::vector<char> hit(n, 0);
    parallel_for(n, workers, [&](std::size_t k) {
        RngStream rng = validation_rng(seed, (10ULL << 32) + k);
        hit[k] = feller_hit_one_before_zero(z, rng).hit_one ? 1 : 0;
    });
    const auto hits = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
    const double p = static_cast<double>(hits) / static_cast<double>(n);
    const double sd = binomial_sd(z, n);
    return statistical("diffusion1d", "hit_one_before_zero", (p - z) / sd, z_limit,
                       fmt("freq", p) + " " + fmt("expected", hit_prob_one_before_zero(z)) + " " + fmt("sd", sd));
}

CheckResult check_survival(double z, double t, std::size_t n, std::uint64_t seed, double z_limit) {
    RngStream rng = validation_rng(seed, (11ULL << 32) + static_cast<std::uint64_t>(z * 1e6) * 7 +
                                             static_cast<std::uint64_t>(t * 1e6));
    std::size_t zeros = 0;
    for (std::size_t k = 0; k < n; ++k) {
        zeros += feller_transition_sample(z, t, rng) == 0.0 ? 1 : 0;
    }
    const double expected = 1.0 - survival_prob(z, t);
    const double p = static_cast<double>(zeros) / static_cast<double>(n);
    const double sd = binomial_sd(expected, n);
    std::ostringstream name;
    name << "survival_z" << z << "_t" << t;
    return statistical("diffusion1d", name.str(), (p - expected) / sd, z_limit,
                       fmt("zero_freq", p) + " " + fmt("expected", expected));
}

std::vector<CheckResult> check_laplace(std::size_t cases, std::size_t n, std::uint64_t seed, double z_limit) {
    RngStream pick = validation_rng(seed, 12ULL << 32);
    std::vector<CheckResult> out;
    for (std::size_t q = 0; q < cases; ++q) {
        const double lambda = uniform_in(pick, 0.1, 5.0);
        const double z = uniform_in(pick, 0.01, 1.0);
        const double t = uniform_in(pick, 0.05, 2.0);
        RngStream rng = validation_rng(seed, (12ULL << 32) + q + 1);
        RunningStats s;
        for (std::size_t k = 0; k < n; ++k) {
            s.add(std::exp(-lambda * feller_transition_sample(z, t, rng)));
        }
        const double expected = feller_laplace(z, t, lambda);
        std::ostringstream name;
        name << "laplace_case" << q;
        std::ostringstream detail;
        detail << "lambda=" << lambda << " z=" << z << " t=" << t << " mean=" << s.mean() << " expected=" << expected;
        out.push_back(statistical("diffusion1d", name.str(), (s.mean() - expected) / s.std_error(), z_limit,
                                  detail.str()));
    }
    return out;
}

CheckResult check_besq4_mean(double z, double dt, std::size_t n, std::uint64_t seed, double z_limit) {
    RngStream rng = validation_rng(seed, 13ULL << 32);
    RunningStats s;
    for (std::size_t k = 0; k < n; ++k) {
        s.add(besq4_quarter_step(z, dt, rng));
    }
    return statistical("diffusion1d", "besq4_mean", (s.mean() - (z + dt)) / s.std_error(), z_limit,
                       fmt("mean", s.mean()) + " " + fmt("expected", z + dt));
}

CheckResult check_feller_martingale(double z, std::size_t n, std::uint64_t seed, double z_limit) {
    double worst = 0.0;
    std::string detail;
    for (double t : {0.1, 0.5, 2.0}) {
        RngStream rng = validation_rng(seed, (14ULL << 32) + static_cast<std::uint64_t>(t * 10));
        RunningStats s;
        for (std::size_t k = 0; k < n; ++k) {
            s.add(feller_transition_sample(z, t, rng));
        }
        const double zs = (s.mean() - z) / s.std_error();
        if (std::fabs(zs) >= std::fabs(worst)) {
            worst = zs;
            detail = fmt("t", t) + " " + fmt("mean", s.mean());
        }
    }
    return statistical("diffusion1d", "feller_martingale", worst, z_limit, detail);
}

// ---------------------------------------------------------------------------------------------
// lattice

CheckResult check_heat_mass() {
    LatticeField f(Grid(-2.0, 2.0, 400));
    for (std::size_t k = 0; k < f.values.size(); ++k) {
        const double x = f.grid.x(k);
        f.values[k] = std::exp(-x * x / (2.0 * 0.01));
    }
    const double m0 = f.mass();
    const double dt = 0.25 * f.grid.dx * f.grid.dx;
    for (int s = 0; s < 200; ++s) {
        f = heat_half_step(f, dt);
    }
    const double rel = std::fabs(f.mass() - m0) / m0;
    return hard("lattice", "heat_mass_conservation", rel < 1e-12, rel, 1e-12);
}

CheckResult check_heat_kernel() {
    const double dx = 1.0 / 256.0;
    Grid g(-1.0 - dx / 2.0, 1.0 + dx / 2.0, 513);
    LatticeField f(g);
    f.values[256] = 1.0 / g.dx;
    const double t = 0.01;
    const double dt = 0.25 * g.dx * g.dx;
    const auto steps = static_cast<std::size_t>(std::llround(t / dt));
    for (std::size_t s = 0; s < steps; ++s) {
        f = heat_half_step(f, dt);
    }
    const double tt = dt * static_cast<double>(steps);
    double peak = 0.0;
    double err = 0.0;
    for (std::size_t k = 0; k < g.n_cells; ++k) {
        const double x = g.x(k);
        const double exact = std::exp(-x * x / (2.0 * tt)) / std::sqrt(2.0 * M_PI * tt);
        peak = std::max(peak, exact);
        err = std::max(err, std::fabs(f.values[k] - exact));
    }
    return hard("lattice", "heat_kernel_sup_error", err / peak < 0.02, err / peak, 0.02);
}

CheckResult check_noise_variance(std::size_t slices, std::uint64_t seed, double z_limit) {
    Grid g(0.0, 1.0, 64);
    const double dt = 1e-3;
    std::vector<double> phi(g.n_cells);
    double sum_sq = 0.0;
    for (std::size_t k = 0; k < g.n_cells; ++k) {
        phi[k] = std::sin(3.0 * g.x(k)) + 0.5;
        sum_sq += phi[k] * phi[k];
    }
    const double expected = dt * g.dx * sum_sq;
    NoiseKey key(seed, stream_id(StreamPurpose::diagnostics, 0x0FFFFFF));
    RunningStats s;
    for (std::size_t n = 0; n < slices; ++n) {
        s.add(pair_noise(white_noise_increment(g, key, n), phi, dt));
    }
    // Sample variance of a Gaussian has standard error sigma^2 sqrt(2 / (n - 1)).
    const double se = expected * std::sqrt(2.0 / static_cast<double>(slices - 1));
    return statistical("lattice", "noise_pairing_variance", (s.variance() - expected) / se, z_limit,
                       fmt("variance", s.variance()) + " " + fmt("expected", expected));
}

CheckResult check_crap_tent() {
    Grid g(-3.0, 3.0, 6000);
    LatticeField f(g);
    for (std::size_t k = 0; k < g.n_cells; ++k) {
        f.values[k] = std::max(0.0, 1.0 - std::fabs(g.x(k)));
    }
    const CrapNorm c = crap_norm(f, 40);
    const double err = std::fabs(c.value + c.tail_bound - 1.0);
    return hard("lattice", "crap_norm_tent", err <= 2.0 * g.dx, err, 2.0 * g.dx);
}

CheckResult check_mollifier_mass() {
    const double eps = 0.01;
    Grid g = Grid::with_spacing(-1.0, 1.0, 1.0 / 1024.0);
    const LatticeField f = mollifier_field(g, 0.1, eps);
    const double rel = std::fabs(f.mass() / eps - 1.0);
    return hard("lattice", "mollifier_mass", rel < 1e-3, rel, 1e-3);
}

// ---------------------------------------------------------------------------------------------
// spde

CheckResult check_allocation_orthogonality(std::size_t vectors, std::uint64_t seed) {
    RngStream rng = validation_rng(seed, 20ULL << 32);
    double worst_orth = 0.0;
    double worst_rec = 0.0;
    for (std::size_t n = 0; n < vectors; ++n) {
        const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform() * 8.0);
        std::vector<double> m(k);
        for (auto &v : m) {
            v = rng.uniform() < 0.25 ? 0.0 : rng.exponential();
        }
        // Columns of M from unit inputs.
        std::vector<std::vector<double>> cols;
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<double> aux(k - 1, 0.0);
            const double g = c == 0 ? 1.0 : 0.0;
            if (c > 0) {
                aux[c - 1] = 1.0;
            }
            cols.push_back(allocate_noise(m, g, aux));
        }
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < k; ++c) {
                    s += cols[c][i] * cols[c][j];
                }
                worst_orth = std::max(worst_orth, std::fabs(s - (i == j ? 1.0 : 0.0)));
            }
        }
        std::vector<double> aux(k - 1);
        for (auto &v : aux) {
            v = rng.normal();
        }
        const double g = rng.normal();
        const auto xi = allocate_noise(m, g, aux);
        double lhs = 0.0;
        double total = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            lhs += std::sqrt(m[j]) * xi[j];
            total += m[j];
        }
        worst_rec = std::max(worst_rec, std::fabs(lhs - std::sqrt(total) * g) / (1.0 + std::sqrt(total)));
    }
    std::ostringstream os;
    os << "reconstruction=" << worst_rec;
    return hard("spde", "allocation_MMt_identity", worst_orth < 1e-12 && worst_rec < 1e-12, worst_orth, 1e-12,
                os.str());
}

CheckResult check_decomposition(std::size_t steps, std::uint64_t seed) {
    SimConfig sc;
    sc.eps = 0.05;
    sc.dx = sc.eps / 4.0;
    sc.track_aggregate = true;
    sc.seed = seed;
    const Discretization probe = discretize(sc);
    sc.horizon = probe.dt * static_cast<double>(steps);
    CoupledSystem sys(sc);
    std::size_t done = 0;
    while (!sys.finished()) {
        sys.step();
        ++done;
    }
    std::size_t born = 0;
    for (const auto *cs : {&sys.x_clusters(), &sys.y_clusters()}) {
        for (const auto &c : *cs) {
            born += c.born ? 1 : 0;
        }
    }
    std::ostringstream os;
    os << "steps=" << done << " clusters_born=" << born;
    const double err = sys.max_decomposition_error();
    // At least one landing of each kind, so several clusters share cells.
    const bool ok = err <= 1e-10 && done >= steps && born >= 3;
    return hard("spde", "decomposition_identity", ok, err, 1e-10, os.str());
}

CheckResult check_zero_noise_mass() {
    SimConfig sc;
    sc.eps = 0.05;
    sc.noise = false;
    sc.horizon = 0.2;
    // A wide margin keeps boundary outflow below rounding; interior heat flow conserves mass.
    sc.margin = 4.0;
    CoupledSystem sys(sc);
    double worst = 0.0;
    while (!sys.finished()) {
        sys.step();
        sys.apply_births();
        std::size_t born = 0;
        for (const auto &c : sys.x_clusters()) {
            born += c.born ? 1 : 0;
        }
        const double expected = sc.eps * static_cast<double>(born);
        worst = std::max(worst, std::fabs(sys.total_mass('X') - expected) / sc.eps);
    }
    return hard("spde", "zero_noise_mass", worst < 1e-10, worst, 1e-10);
}

CheckResult check_reproducibility(std::uint64_t seed) {
    SimConfig sc;
    sc.eps = 0.05;
    sc.horizon = 0.06;
    sc.digest_noise = true;
    sc.seed = seed;
    auto run = [&] {
        CoupledSystem sys(sc);
        while (!sys.finished()) {
            sys.step();
        }
        std::vector<double> x, y;
        sys.sum_clusters('X', x);
        sys.sum_clusters('Y', y);
        std::uint64_t h = fnv1a(x.data(), x.size() * sizeof(double));
        h = fnv1a(y.data(), y.size() * sizeof(double), h);
        return std::array<std::uint64_t, 3>{sys.shared_noise_digest_x(), sys.shared_noise_digest_y(), h};
    };
    const auto a = run();
    const auto b = run();
    const bool ok = a == b && a[0] == a[1];
    return hard("spde", "reproducible_shared_noise", ok, ok ? 0.0 : 1.0, 0.0);
}

CheckResult check_lln(double eps, double t, std::uint64_t seed, double z_limit) {
    ImmigrationFunction psi;  // tent on [0, 1], psi(1) = 1
    const ImmigrationSchedule s = ImmigrationSchedule::build(eps, t, psi, seed, 0);
    // phi is a smooth bump on [0.2, 0.8].
    const auto phi = [](double x) {
        const double u = (x - 0.5) / 0.3;
        return std::fabs(u) < 1.0 ? std::exp(-1.0 / (1.0 - u * u)) : 0.0;
    };
    std::size_t count = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < s.s_times.size(); ++i) {
        if (s.s_times[i] <= t) {
            sum += phi(s.targets_x[i]);
            ++count;
        }
    }
    // <psi, phi> and Var phi(x_1) by composite Simpson on the support of psi.
    constexpr int kNodes = 20000;
    double m1 = 0.0;
    double m2 = 0.0;
    for (int k = 0; k <= kNodes; ++k) {
        const double x = psi.lo + (psi.hi - psi.lo) * k / kNodes;
        const double w = (k == 0 || k == kNodes) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        const double d = psi(x) * w;
        m1 += d * phi(x);
        m2 += d * phi(x) * phi(x);
    }
    const double h = (psi.hi - psi.lo) / kNodes / 3.0;
    m1 *= h;
    m2 *= h;
    const double psi1 = psi.total_mass();
    const double mean_phi = m1 / psi1;
    const double var_phi = m2 / psi1 - mean_phi * mean_phi;
    const double estimate = psi1 * eps * sum;
    const double target = t * m1;
    // The count differs from t / eps by at most one landing, which shifts the mean by eps <psi,phi>.
    const double bias = psi1 * eps * static_cast<double>(count) * mean_phi - target;
    const double sd = psi1 * eps * std::sqrt(static_cast<double>(count) * var_phi);
    std::ostringstream os;
    os << "estimate=" << estimate << " target=" << target << " count_bias=" << bias << " sd=" << sd;
    return statistical("spde", "immigration_lln", (estimate - target) / sd, z_limit, os.str());
}

// ---------------------------------------------------------------------------------------------
// experiments

CheckResult check_stopping_closed_form(const ParamVector &p) {
    // Constant mass m0: tau1 is the first grid time with (t - s_i)^eta / 4 > m0.
    const double m0 = 0.05;
    const double s_i = 0.025;
    StoppingInput in;
    in.params = p;
    in.s_i = s_i;
    in.initial_mass = m0;
    const double dt = 1e-5;
    for (std::size_t k = 0; k <= 200000; ++k) {
        in.times.push_back(s_i + dt * static_cast<double>(k));
        in.x_mass.push_back(m0);
    }
    const StoppingTimes st = stopping_times(in);
    const double expected = s_i + std::pow(4.0 * m0, 1.0 / p.eta);
    const double err = std::fabs(st.tau1 - expected);
    const bool ok = err <= dt && st.tau3 == kNever && st.tau <= s_i + 1.0;
    return hard("experiments", "stopping_time_closed_form", ok, err, dt);
}

CheckResult check_identical_dynamics(const ParamVector &p) {
    // Without noise and with shared targets, Y^j is X^j delayed by t_j - s_j = eps/2. Heat flow is
    // time invariant, so Y at step n equals X at step n - eps/(2 dt) cell by cell.
    SimConfig sc;
    sc.eps = 0.02;
    sc.dx = sc.eps / 4.0;
    sc.horizon = 0.08;
    sc.noise = false;
    sc.force_equal_targets = true;
    sc.envelope_beta = p.beta;
    CoupledSystem sys(sc);
    const std::size_t lag = sys.disc().half_eps_steps;
    std::vector<std::vector<double>> history;
    std::vector<double> x, y;
    double worst = 0.0;
    double sup_xy = 0.0;
    for (;;) {
        sys.apply_births();
        sys.sum_clusters('X', x);
        sys.sum_clusters('Y', y);
        history.push_back(x);
        if (history.size() > lag) {
            const auto &lagged = history[history.size() - 1 - lag];
            for (std::size_t k = 0; k < y.size(); ++k) {
                worst = std::max(worst, std::fabs(y[k] - lagged[k]));
            }
        }
        sup_xy = std::max(sup_xy, crap_norm_diff(sys.grid(), x.data(), y.data()).value);
        if (sys.finished()) {
            break;
        }
        sys.step();
    }
    std::ostringstream os;
    os << "lag_steps=" << lag << " sup_crap_norm_x_minus_y=" << sup_xy;
    return hard("experiments", "identical_dynamics_time_shift", worst <= 1e-12, worst, 1e-12, os.str());
}

// ---------------------------------------------------------------------------------------------

std::vector<CheckResult> run_validation(const ValidationOptions &opt, const std::optional<std::string> &only) {
    const auto &mods = validation_modules();
    if (only && std::find(mods.begin(), mods.end(), *only) == mods.end()) {
        throw InputError("unknown module '" + *only + "'");
    }
    auto wanted = [&](const char *m) { return !only || *only == m; };
    std::vector<CheckResult> out;
    const double zl = opt.z_limit;
    const std::uint64_t seed = opt.seed;
    if (wanted("params")) {
        out.push_back(check_param_constraints(opt.params));
        if (out.back().passed) {
            try {
                out.push_back(check_delta_positive(opt.params, opt.k_star, 2000));
            } catch (const Error &e) {
                out.push_back(hard("params", "derive_constants", false, 0.0, 0.0, e.what()));
            }
        }
    }
    if (wanted("mathkernel")) {
        out.push_back(check_a_of_r(1000, 5));
        out.push_back(check_integral_quadrature(20, seed));
        out.push_back(check_allocate_exponents(1000, seed));
        out.push_back(check_imc_domination(100, 100, seed));
        out.push_back(check_contact_time(1000, seed));
        out.push_back(check_parabolas(300, 2000, seed));
    }
    if (wanted("diffusion1d")) {
        out.push_back(check_hit_probability(0.2, 20000, seed, opt.workers, zl));
        for (auto [z, t] : {std::pair{0.1, 1.0}, {0.5, 1.0}, {0.2, 0.5}}) {
            out.push_back(check_survival(z, t, 100000, seed, zl));
        }
        for (auto &c : check_laplace(5, 20000, seed, zl)) {
            out.push_back(std::move(c));
        }
        out.push_back(check_besq4_mean(0.3, 0.1, 100000, seed, zl));
        out.push_back(check_feller_martingale(0.3, 50000, seed, zl));
    }
    if (wanted("lattice")) {
        out.push_back(check_heat_mass());
        out.push_back(check_heat_kernel());
        out.push_back(check_noise_variance(20000, seed, zl));
        out.push_back(check_crap_tent());
        out.push_back(check_mollifier_mass());
    }
    if (wanted("spde")) {
        out.push_back(check_allocation_orthogonality(1000, seed));
        out.push_back(check_decomposition(2000, seed));
        out.push_back(check_zero_noise_mass());
        out.push_back(check_reproducibility(seed));
        out.push_back(check_lln(1e-3, 1.0, seed, zl));
    }
    if (wanted("experiments")) {
        out.push_back(check_stopping_closed_form(opt.params));
        out.push_back(check_identical_dynamics(opt.params));
    }
    return out;
}

}  // namespace sbmi
