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

#include "sbmi/params.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sbmi/errors.hpp"

namespace sbmi {

namespace {

double geometric_partial(double a, int n) {
    double s = 0.0;
    double term = 1.0;
    for (int j = 1; j <= n; ++j) {
        term *= a;
        s += term;
    }
    return s;
}

void require_finite(double v, const char *name) {
    if (!std::isfinite(v)) {
        throw InputError(std::string("parameter ") + name + " is not finite");
    }
}

}  // namespace

std::vector<ConstraintViolation> validate_params(const ParamVector &p) {
    require_finite(p.eta, "eta");
    require_finite(p.alpha, "alpha");
    require_finite(p.L, "L");
    require_finite(p.beta, "beta");
    require_finite(p.beta_prime, "beta_prime");
    require_finite(p.xi, "xi");

    std::vector<ConstraintViolation> out;
    auto range = [&](bool ok, const char *what, double v, double bound) {
        if (!ok) {
            out.push_back({"range", what, v, bound});
        }
    };
    range(p.eta > 1.0, "eta > 1", p.eta, 1.0);
    range(p.alpha > 0.0 && p.alpha < 0.5, "alpha in (0,1/2)", p.alpha, 0.5);
    range(p.L > 0.0, "L > 0", p.L, 0.0);
    range(p.beta >= 1.0 / 3.0 && p.beta < 0.5, "beta in [1/3,1/2)", p.beta, 0.5);
    range(p.beta_prime >= 1.0 / 3.0 && p.beta_prime < 0.5, "beta_prime in [1/3,1/2)", p.beta_prime, 0.5);
    range(p.xi > 0.0 && p.xi < 1.0, "xi in (0,1)", p.xi, 1.0);
    range(p.n0 >= 1, "n0 >= 1", static_cast<double>(p.n0), 1.0);
    if (!out.empty()) {
        return out;
    }

    const double lower = geometric_partial(p.alpha, p.n0);
    const double upper = geometric_partial(p.alpha, p.n0 + 1);
    if (!(lower <= p.xi)) {
        out.push_back({"a", "sum_{j<=N0} alpha^j <= xi", lower, p.xi});
    }
    if (!(p.xi < upper)) {
        out.push_back({"a", "xi < sum_{j<=N0+1} alpha^j", p.xi, upper});
    }

    const double ratio = p.beta_prime / p.beta;
    if (!(p.alpha < ratio)) {
        out.push_back({"b", "alpha < beta'/beta", p.alpha, ratio});
    }
    if (!(ratio < 1.0)) {
        out.push_back({"b", "beta'/beta < 1", ratio, 1.0});
    }

    const double k3 = p.beta_prime - p.eta / 2.0 + 1.5 * p.alpha;
    if (!(k3 > 0.0)) {
        out.push_back({"c", "beta' - eta/2 + 3 alpha/2 > 0", k3, 0.0});
    }

    const double k1 = std::min(p.beta_prime + 1.0, p.beta_prime - p.eta / 2.0 + 1.5 * p.xi);
    if (!(k1 > p.eta)) {
        out.push_back({"d", "min(beta'+1, beta' - eta/2 + 3 xi/2) > eta", k1, p.eta});
    }
    return out;
}

std::string describe(const ConstraintViolation &v) {
    std::ostringstream os;
    os.precision(10);
    os << "(" << v.constraint << ") " << v.detail << ": lhs=" << v.lhs << " rhs=" << v.rhs;
    return os.str();
}

DerivedConstants kappas(const ParamVector &p) {
    DerivedConstants dc;
    dc.kappa1 = std::min(p.beta_prime + 1.0, p.beta_prime - p.eta / 2.0 + 1.5 * p.xi);
    dc.kappa2 = std::pow(p.alpha, p.n0) / 4.0;
    dc.kappa3 = p.beta_prime - p.eta / 2.0 + 1.5 * p.alpha;
    dc.eta = p.eta;
    dc.beta = p.beta;
    return dc;
}

double default_wp(const ParamVector &p) {
    const DerivedConstants dc = kappas(p);
    return 0.05 * std::min(dc.kappa1 - p.eta, dc.kappa3);
}

double DerivedConstants::delta_numerator(double r) const {
    return std::pow(r, eta) / 4.0 - 2.0 * k_star * std::pow(r, kappa1 - wp);
}

double DerivedConstants::delta(double r) const {
    const double q = delta_numerator(r) / (2.0 + 2.0 * std::pow(r, beta));
    return 0.5 * std::min(q, 1.0);
}

double DerivedConstants::eps0(double r, double psi1) const {
    double cap = std::min({r, 1.0 / (8.0 * psi1), 1.0});
    const double gap = kappa1 - kappa3;
    if (gap > 0.0) {
        // eps^kappa2 <= r^gap  <=>  eps <= r^(gap / kappa2)
        cap = std::min(cap, std::pow(r, gap / kappa2));
    }
    return cap;
}

double find_r0(const DerivedConstants &dc) {
    constexpr long kSteps = 1L << 20;
    constexpr double h = 1.0 / static_cast<double>(kSteps);
    for (long k = 1; k <= kSteps; ++k) {
        if (!(dc.delta_numerator(static_cast<double>(k) * h) > 0.0)) {
            return static_cast<double>(k - 1) * h;
        }
    }
    return 1.0;
}

DerivedConstants derive_constants(const ParamVector &p, double k_star, std::optional<double> wp) {
    const auto violations = validate_params(p);
    if (!violations.empty()) {
        throw ParameterError("invalid parameter vector: " + describe(violations.front()));
    }
    if (!(k_star > 0.0) || !std::isfinite(k_star)) {
        throw ParameterError("K* must be positive and finite");
    }
    DerivedConstants dc = kappas(p);
    dc.k_star = k_star;
    dc.wp = wp.value_or(default_wp(p));
    const double cap = std::min(dc.kappa1, dc.kappa3);
    if (!(dc.wp > 0.0 && dc.wp < cap && dc.kappa1 - dc.wp > p.eta)) {
        std::ostringstream os;
        os << "wp=" << dc.wp << " outside (0, " << cap << ") or kappa1 - wp <= eta";
        throw ParameterError(os.str());
    }
    dc.r0 = find_r0(dc);
    if (!(dc.r0 > 0.0)) {
        std::ostringstream os;
        os << "no r0 in (0,1] keeps delta positive for K*=" << k_star;
        throw InfeasibleError(os.str());
    }
    return dc;
}

}  // namespace sbmi
