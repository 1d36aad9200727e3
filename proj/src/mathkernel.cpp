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

#include "sbmi/mathkernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "sbmi/errors.hpp"

namespace sbmi {

namespace {

constexpr double kHorizon = 1e6;

template <class F>
double bisect(F &&f, double lo, double hi, double tol) {
    // f(lo) < 0 <= f(hi)
    for (int it = 0; it < 400 && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        if (f(mid) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

int imc_pick_N(double a, double xi_prime) {
    if (!(a > 0.0 && a < 0.5) || !std::isfinite(xi_prime)) {
        throw InputError("imc_pick_N: a must lie in (0, 1/2)");
    }
    if (xi_prime < a) {
        throw NoSolutionError("imc_pick_N: xi' below the first partial sum a");
    }
    if (xi_prime >= a / (1.0 - a)) {
        throw NoSolutionError("imc_pick_N: xi' at or above the geometric limit a/(1-a)");
    }
    double sum = a;
    double term = a;
    int n = 1;
    for (;;) {
        term *= a;
        if (xi_prime < sum + term) {
            return n;
        }
        sum += term;
        ++n;
    }
}

double imc_bound(double f0, double b, double c, double a, double xi_prime, int n_prime, double t) {
    if (!(t >= 0.0) || !(b >= 0.0) || !(c >= 0.0) || n_prime < 1) {
        throw InputError("imc_bound: requires t >= 0, b >= 0, c >= 0, N' >= 1");
    }
    const double cpow = std::pow(c, 1.0 / (1.0 - a)) + 1.0;
    double sum_f = 0.0;
    double sum_b = 0.0;
    double aj = 1.0;
    for (int j = 1; j <= n_prime; ++j) {
        aj *= a;
        sum_f += std::pow(std::fabs(f0), aj);
        sum_b += std::pow(b / 2.0, aj);
    }
    const double first = cpow * sum_f * std::pow(t, a);
    const double second = (b + cpow * sum_b + cpow) * std::pow(t, xi_prime);
    return first + second;
}

double beta_integral(double x, double y) {
    if (!(x > 0.0 && y > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    if (x <= 0.5 || y <= 0.5) {
        boost::math::quadrature::tanh_sinh<double> ts;
        // xc is the signed distance to the nearer endpoint: a - r near 0, b - r near 1.
        const auto g = [x, y](double r, double xc) {
            const double left = xc < 0.0 ? -xc : r;
            const double right = xc > 0.0 ? xc : 1.0 - r;
            return std::pow(left, x - 1.0) * std::pow(right, y - 1.0);
        };
        return ts.integrate(g, 0.0, 1.0);
    }
    return std::exp(std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y));
}

IntegralResult integral_I(double a, double b, double c, double T) {
    if (!(T > 0.0) || !std::isfinite(T)) {
        throw InputError("integral_I: T must be positive and finite");
    }
    IntegralResult res;
    if (!(a > -1.0 && c > -1.0 && a + b + c > -2.0)) {
        res.finite = false;
        res.value = std::numeric_limits<double>::infinity();
        return res;
    }
    const double e = a + b + c + 2.0;
    res.finite = true;
    res.value = beta_integral(a + 1.0, c + 1.0) * std::pow(T, e) / e;
    return res;
}

std::pair<double, double> allocate_exponents(double a, double b, double c) {
    if (!(a > -1.0 && b < 0.0 && c > -1.0 && a + b + c > -2.0)) {
        std::ostringstream os;
        os << "allocate_exponents: hypotheses fail for (a,b,c)=(" << a << "," << b << "," << c << ")";
        throw NoSolutionError(os.str());
    }
    const double lo = std::max(-(a + 1.0), b);
    const double hi = std::min(0.0, b + c + 1.0);
    const double b1 = 0.5 * (lo + hi);
    return {b1, b - b1};
}

double contact_time(double x_i, double s_i, double y, double t_j, double eps, double beta) {
    if (!(t_j > s_i) || !(eps > 0.0) || !(beta > 0.0 && beta < 1.0)) {
        throw InputError("contact_time: requires t_j > s_i, eps > 0, beta in (0,1)");
    }
    const double gap = std::fabs(y - x_i);
    const double shoulder = 2.0 * std::sqrt(eps);
    const auto f = [&](double t) { return shoulder + std::pow(t - s_i, beta) + std::pow(t - t_j, beta) - gap; };
    if (f(t_j) >= 0.0) {
        return t_j;
    }
    double hi = t_j + 1.0;
    while (f(hi) < 0.0) {
        if (hi > kHorizon) {
            throw HorizonError("contact_time: root beyond horizon 1e6");
        }
        hi = t_j + 2.0 * (hi - t_j);
    }
    // Bisection to adjacent doubles; this meets the 1e-12 tolerance with room to spare.
    return bisect(f, t_j, hi, 0.0);
}

double A_of_r(double r, double beta, double beta_prime) {
    if (!(r > 0.0 && r <= 1.0) || !(beta_prime < beta) || !(beta_prime > 0.0) || !(beta < 1.0)) {
        throw InputError("A_of_r: requires r in (0,1] and 0 < beta' < beta < 1");
    }
    const double q = std::pow(r, 1.0 - beta_prime / beta);
    const auto g = [&](double A) { return std::pow(A, beta) + std::pow(A - q, beta) - 2.0; };
    // g(1) <= 0 <= g(1 + q) since q <= 1.
    return bisect(g, 1.0, 1.0 + q, 0.0);
}

double t_star(double s_i, double t_j, double beta, double beta_prime) {
    const double d = t_j - s_i;
    if (!(d > 0.0 && d <= 1.0)) {
        throw InputError("t_star: requires 0 < t_j - s_i <= 1");
    }
    return s_i + A_of_r(d, beta, beta_prime) * std::pow(d, beta_prime / beta);
}

double Parabola::width(double t) const { return eps_half + std::pow(std::max(t - birth, 0.0), exponent); }

bool parabolas_disjoint(const Parabola &p, const Parabola &q, double t) {
    return std::fabs(p.center - q.center) > p.width(t) + q.width(t);
}

IndexClassification classify_indices(double x_i, double s_i, const std::vector<Landing> &landing, double t,
                                     double t_prime, double eps, double beta_prime) {
    IndexClassification out;
    const double se = std::sqrt(eps);
    const double outer = 2.0 * (se + std::pow(t - s_i, beta_prime));
    for (std::size_t j = 0; j < landing.size(); ++j) {
        const auto &l = landing[j];
        const double d = std::fabs(l.y - x_i);
        if (!(l.t > s_i && l.t <= t_prime && d <= outer)) {
            continue;
        }
        out.all.push_back(j);
        if (d < 2.0 * (se + std::pow(l.t - s_i, beta_prime))) {
            out.critical.push_back(j);
        } else {
            out.lateral.push_back(j);
        }
    }
    return out;
}

}  // namespace sbmi
