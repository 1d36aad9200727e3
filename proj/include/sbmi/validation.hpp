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
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sbmi/params.hpp"
#include "sbmi/spde.hpp"

namespace sbmi {

/// One validator outcome. Hard checks compare against exact or tolerance-bounded values;
/// statistical checks carry a z score and fail when |z| exceeds the suite limit.
struct CheckResult {
    std::string module;
    std::string name;
    bool statistical = false;
    bool passed = true;
    double value = 0.0;      // residual, error, frequency or z score
    double threshold = 0.0;  // the bound `value` was compared with
    std::string detail;
};

struct ValidationOptions {
    ParamVector params;
    ImmigrationFunction psi;
    double k_star = 1.0;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    double z_limit = 4.0;
};

/// Names accepted by run_validation's `only` filter.
const std::vector<std::string> &validation_modules();

/// Runs every validator, or only those of one module. Throws InputError for an unknown module.
std::vector<CheckResult> run_validation(const ValidationOptions &opt, const std::optional<std::string> &only = {});

bool all_passed(const std::vector<CheckResult> &checks);

// Individual validators with explicit sample sizes; run_validation uses lighter sizes.

// params
CheckResult check_param_constraints(const ParamVector &p);
CheckResult check_delta_positive(const ParamVector &p, double k_star, std::size_t points);

// mathkernel
CheckResult check_a_of_r(std::size_t r_points, std::size_t pairs);
CheckResult check_integral_quadrature(std::size_t triples, std::uint64_t seed);
CheckResult check_allocate_exponents(std::size_t triples, std::uint64_t seed);
CheckResult check_imc_domination(std::size_t functions, std::size_t times, std::uint64_t seed);
CheckResult check_contact_time(std::size_t cases, std::uint64_t seed);
CheckResult check_parabolas(std::size_t pairs, std::size_t time_points, std::uint64_t seed);

// diffusion1d
CheckResult check_hit_probability(double z, std::size_t n, std::uint64_t seed, unsigned workers, double z_limit);
CheckResult check_survival(double z, double t, std::size_t n, std::uint64_t seed, double z_limit);
/// One check per random (lambda, z, t) case.
std::vector<CheckResult> check_laplace(std::size_t cases, std::size_t n, std::uint64_t seed, double z_limit);
CheckResult check_besq4_mean(double z, double dt, std::size_t n, std::uint64_t seed, double z_limit);
CheckResult check_feller_martingale(double z, std::size_t n, std::uint64_t seed, double z_limit);

// lattice
CheckResult check_heat_mass();
CheckResult check_heat_kernel();
CheckResult check_noise_variance(std::size_t slices, std::uint64_t seed, double z_limit);
CheckResult check_crap_tent();
CheckResult check_mollifier_mass();

// spde
CheckResult check_allocation_orthogonality(std::size_t vectors, std::uint64_t seed);
/// Runs `steps` coupled steps with separately tracked aggregates.
CheckResult check_decomposition(std::size_t steps, std::uint64_t seed);
CheckResult check_zero_noise_mass();
CheckResult check_reproducibility(std::uint64_t seed);
CheckResult check_lln(double eps, double t, std::uint64_t seed, double z_limit);

// experiments
CheckResult check_stopping_closed_form(const ParamVector &p);
CheckResult check_identical_dynamics(const ParamVector &p);

}  // namespace sbmi
