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

#include <optional>
#include <string>
#include <vector>

namespace sbmi {

/// Auxiliary exponents (eta, alpha, L, beta, beta', xi, N0) driving the separation argument.
struct ParamVector {
    double eta = 1.01;
    double alpha = 0.49;
    double L = 1.0;
    double beta = 0.49;
    double beta_prime = 0.45;
    double xi = 0.9;
    int n0 = 3;
};

/// One violated constraint: its label, and the two sides of the inequality.
struct ConstraintViolation {
    std::string constraint;  // "range", "a", "b", "c", "d"
    std::string detail;
    double lhs = 0.0;
    double rhs = 0.0;
};

/// Empty iff every range condition and (a)-(d) hold.
/// Throws InputError if a field is non-finite.
std::vector<ConstraintViolation> validate_params(const ParamVector &p);

std::string describe(const ConstraintViolation &v);

struct DerivedConstants {
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    double kappa3 = 0.0;
    double wp = 0.0;      // the small exponent loss, in (0, min(kappa1, kappa3)) with kappa1 - wp > eta
    double k_star = 1.0;  // configured
    double eta = 0.0;
    double beta = 0.0;
    double r0 = 0.0;

    /// 0.5 * min((r^eta/4 - 2K* r^(kappa1 - wp)) / (2 + 2 r^beta), 1)
    double delta(double r) const;
    /// Numerator r^eta/4 - 2K* r^(kappa1 - wp) of delta.
    double delta_numerator(double r) const;
    /// Largest admissible eps for a given r and psi(1): eps^kappa2 <= r^(kappa1-kappa3) and
    /// eps <= min(r, 1/(8 psi1), 1).
    double eps0(double r, double psi1) const;
};

/// Default wp = 0.05 * min(kappa1 - eta, kappa3).
double default_wp(const ParamVector &p);

/// kappa constants only; no validation of wp or K*.
DerivedConstants kappas(const ParamVector &p);

/// Throws ParameterError for wp out of range or K* <= 0, InfeasibleError if no r0 exists.
/// Passing std::nullopt for wp selects default_wp.
DerivedConstants derive_constants(const ParamVector &p, double k_star = 1.0, std::optional<double> wp = std::nullopt);

/// Grid search (spacing 2^-20) for the largest r0 in (0,1] with delta > 0 on (0, r0].
/// Returns 0 if even the first grid point fails.
double find_r0(const DerivedConstants &dc);

}  // namespace sbmi
