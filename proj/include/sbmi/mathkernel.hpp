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
#include <utility>
#include <vector>

namespace sbmi {

/// N' with sum_{j<=N'} a^j <= xi' < sum_{j<=N'+1} a^j. Throws NoSolutionError when xi' < a or
/// xi' >= a/(1-a).
int imc_pick_N(double a, double xi_prime);

/// Right-hand side of the improved modulus of continuity bound at time t.
double imc_bound(double f0, double b, double c, double a, double xi_prime, int n_prime, double t);

struct IntegralResult {
    bool finite = false;
    double value = 0.0;  // +inf when !finite
};

/// I(a,b,c)_T = int_0^T r^a int_r^T s^b (s-r)^c ds dr, closed form via the Beta integral.
IntegralResult integral_I(double a, double b, double c, double T);

/// B(x, y) = int_0^1 r^(x-1) (1-r)^(y-1) dr; log-Gamma identity, with tanh-sinh quadrature when
/// x or y lies in (0, 0.5].
double beta_integral(double x, double y);

/// (b1, b2) with b1 + b2 = b, both negative, a + b1 > -1 and b2 + c > -1. b1 is the midpoint of
/// the feasible interval (max(-(a+1), b), min(0, b+c+1)).
std::pair<double, double> allocate_exponents(double a, double b, double c);

/// Root t > t_j of 2 eps^(1/2) + (t-s_i)^beta + (t-t_j)^beta = |y - x_i|, by bisection to 1e-12.
/// Returns t_j if the parabolas already touch at t_j; throws HorizonError past t = 1e6.
double contact_time(double x_i, double s_i, double y, double t_j, double eps, double beta);

/// Unique A > r^(1 - beta'/beta) with A^beta + (A - r^(1-beta'/beta))^beta = 2.
double A_of_r(double r, double beta, double beta_prime);

/// s_i + A(t_j - s_i) (t_j - s_i)^(beta'/beta).
double t_star(double s_i, double t_j, double beta, double beta_prime);

/// Space-time envelope |x - center| <= eps_half + (t - birth)^exponent, t >= birth.
struct Parabola {
    double center = 0.0;
    double birth = 0.0;
    double eps_half = 0.0;
    double exponent = 0.45;

    double width(double t) const;
};

/// True iff the s-sections of p and q are disjoint for every s in [max(births), t]. Widths grow
/// in s, so this is the endpoint test gap > width_p(t) + width_q(t).
bool parabolas_disjoint(const Parabola &p, const Parabola &q, double t);

struct Landing {
    double y = 0.0;
    double t = 0.0;
};

struct IndexClassification {
    std::vector<std::size_t> all;
    std::vector<std::size_t> critical;
    std::vector<std::size_t> lateral;
};

/// all:      |y_j - x_i| <= 2(eps^(1/2) + (t - s_i)^beta'), s_i < t_j <= t'
/// critical: members of all with |y_j - x_i| < 2(eps^(1/2) + (t_j - s_i)^beta')
/// lateral:  all \ critical
IndexClassification classify_indices(double x_i, double s_i, const std::vector<Landing> &landing, double t,
                                     double t_prime, double eps, double beta_prime);

}  // namespace sbmi
