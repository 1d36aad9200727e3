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
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sbmi/diffusion1d.hpp"
#include "sbmi/params.hpp"
#include "sbmi/spde.hpp"
#include "sbmi/stats.hpp"

namespace sbmi {

/// A stopping time that is not reached inside the observed horizon.
inline constexpr double kNever = std::numeric_limits<double>::infinity();

/// Runs fn(k) for k in [0, n) on `workers` threads (0 selects the hardware count). Each index runs
/// exactly once; callers store results by index, so the outcome does not depend on `workers`.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)> &fn);

// ---------------------------------------------------------------------------------------------
// Stopping times and conditioning

/// Mass data for cluster i on an ascending grid of absolute times starting at s_i.
struct StoppingInput {
    std::vector<double> times;
    std::vector<double> x_mass;  // X^i total mass
    std::vector<double> y_mass;  // sum over s_i < t_j <= t of Y^j total mass; empty means 0
    double s_i = 0.0;
    double initial_mass = 0.0;  // psi(1) eps
    ParamVector params;
};

/// Absolute times; kNever when not reached on the grid. tau = min(tau1, tau2, tau3, s_i + 1).
struct StoppingTimes {
    double t1 = kNever;  // first grid time with mass >= 1
    double tau1 = kNever;
    double tau2 = kNever;
    double tau3 = kNever;
    double tau = kNever;
};

/// tau1: mass (stopped at T1) < (t - s_i)^eta / 4; tau2: |X - m0 - (t - s_i)| > L (int X ds)^alpha
/// (trapezoid integral); both capped at T1. tau3: y_mass > 1. First grid crossing in each case.
StoppingTimes stopping_times(const StoppingInput &in);

/// True iff the path reaches 1 and does so before it reaches 0.
bool accepted_by_hit(const DiffusionPath &mass_path);

struct ConditioningConfig {
    double eps = 0.05;
    ImmigrationFunction psi;
    double t_obs = 0.1;          // observation time after s_1
    double dx_factor = 0.125;    // dx = dx_factor * eps
    double dt_factor = 0.5;      // dt = dt_factor * dx^2
    std::size_t target_accepted = 5000;
    std::size_t max_replicas = 400000;
    std::size_t comparator_samples = 20000;
    double allowance_dx = 2.0;   // KS allowance in units of dx
    double rho = 0.1;            // quantile level for the delta_1 estimate
    ParamVector params;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::size_t batch = 2000;    // replicas per scheduling round
};

/// Estimates of one conditional functional by rejection and by importance weighting.
struct EstimatorPair {
    std::string name;
    double rejection = 0.0;
    double rejection_se = 0.0;
    double weighted = 0.0;
    double weighted_se = 0.0;
    double z = 0.0;  // difference over the combined standard error
};

struct ConditioningReport {
    ConditioningConfig config;
    std::size_t replicas = 0;
    std::size_t accepted = 0;
    std::size_t hit_on_lattice = 0;   // reached 1 before t_obs on the lattice
    std::size_t continued = 0;        // alive at t_obs and resolved by the 1-d continuation
    Proportion acceptance;
    double expected_rate = 0.0;       // psi(1) eps
    double dx = 0.0;
    double dt = 0.0;
    std::vector<double> accepted_mass;    // mass at s_1 + t_obs on accepted replicas
    std::vector<double> comparator_mass;  // direct 1/4 BESQ^4 stopped at 1
    KsResult ks;
    double allowance = 0.0;
    std::vector<EstimatorPair> consistency;
    double delta1 = kNever;               // rho-quantile of tau - s_1 on accepted replicas
    double tau_censored_fraction = 0.0;   // accepted replicas with tau beyond t_obs
    double runtime_s = 0.0;
};

/// Rejection conditioning of a single lattice cluster on hitting 1 before 0. The lattice runs to
/// s_1 + t_obs; a replica still alive below 1 is resolved by an exact 1-d Feller continuation from
/// its mass. Stops once target_accepted replicas are accepted or max_replicas were run.
ConditioningReport run_conditioning(const ConditioningConfig &cfg);

// ---------------------------------------------------------------------------------------------
// Separation events

/// Mass of cells with value > threshold whose centres lie in [lo, hi], times dx.
double window_mass_above(const Grid &g, const double *v, double lo, double hi, double threshold);

/// Per-grid-time check of the G^i clauses, for use while a run advances.
class EventG {
public:
    EventG(std::size_t i, double s_i, double x_i, double eps, const DerivedConstants &dc);
    /// Updates the event with window masses at time s_i + elapsed; ignored unless 0 <= elapsed <= T - s_i.
    void observe(double elapsed, double x_window_mass, double y_window_mass, double T);
    bool holds() const { return holds_; }
    std::optional<double> failed_at() const { return failed_at_; }
    /// Envelope half width, X floor and Y ceiling as functions of the elapsed time s - s_i.
    double half_width(double elapsed) const;
    double x_floor(double elapsed) const;
    double y_ceiling(double elapsed) const;
    double center() const { return x_i_; }
    std::size_t index() const { return i_; }
    double birth() const { return s_i_; }

private:
    std::size_t i_;
    double s_i_, x_i_, eps_;
    DerivedConstants dc_;
    bool holds_ = true;
    std::optional<double> failed_at_;
};

/// Outcome of the three Gamma^i clauses for one cluster; `censored` marks clauses whose deadline
/// lies past the simulated horizon (treated as satisfied).
struct GammaOutcome {
    bool holds = true;
    bool clause_a = true;
    bool clause_b = true;
    bool clause_c = true;
    bool censored = false;
};

struct SeparationConfig {
    ParamVector params;
    double k_star = 1.0;
    std::optional<double> wp;
    std::vector<double> eps_list = {0.04, 0.02};
    double r = 0.0;                 // must be set; the CLI accepts "r0" for the derived value
    std::size_t replicas = 500;
    std::uint64_t seed = 1;
    ImmigrationFunction psi;
    double dx_factor = 0.125;
    double dt_factor = 0.25;
    double support_threshold = 1e-12;
    bool noise = true;
    bool force_equal_targets = false;
    double floor_allowance = 0.01;  // pre-registered discretization allowance on the floor
    unsigned workers = 1;
    std::vector<double> k_star_table;  // K* values for the sensitivity table
    std::size_t table_replicas = 100;
    double table_r_fraction = 0.9;     // table rows use r = fraction * r0(K*)
    double table_dx_factor = 0.25;
};

struct ReplicaSeparation {
    bool aborted = false;
    std::string abort_reason;
    bool S = false;
    std::size_t g_count = 0;               // i <= N with G^i(s_i + r)
    std::size_t gamma_failures = 0;        // i <= N with Gamma^i failing
    std::size_t gamma_censored = 0;
    std::size_t sigma_early = 0;           // clusters with sigma_beta - birth <= r
    double sup_norm = 0.0;                 // sup over grid times s <= 2r of crap_norm(X - Y)
    double x_mass_end = 0.0;
    double y_mass_end = 0.0;
    double us2_max_discrepancy = 0.0;      // Y window mass minus J-restricted sum, on Gamma runs
    std::size_t us2_steps = 0;
};

struct SeparationRow {
    double eps = 0.0;
    std::size_t n_index = 0;  // floor(r / eps)
    bool degenerate = false;  // no index or no birth before 2r: S(r) is empty by construction
    bool eps_above_eps0 = false;
    std::size_t replicas = 0;
    std::size_t aborts = 0;
    Proportion s_freq;
    Proportion sup_ge_delta;
    Proportion sup_ge_half_delta;
    std::size_t implication_violations = 0;  // S but sup < delta (with tolerance)
    std::size_t g_total = 0;
    std::size_t gamma_failures = 0;
    std::size_t gamma_censored = 0;
    std::size_t sigma_early = 0;
    RunningStats sup_norm;
    double floor = 0.0;             // psi(1) r / 4
    double floor_sd = 0.0;          // binomial sd at the floor
    double us2_max_discrepancy = 0.0;
    std::string verdict;            // PASS, AMBER or FAIL
};

struct SensitivityRow {
    double k_star = 0.0;
    double r0 = 0.0;
    double delta = 0.0;
    double floor = 0.0;
    std::vector<SeparationRow> rows;
    std::string note;
};

struct SeparationReport {
    SeparationConfig config;
    DerivedConstants constants;
    double delta = 0.0;
    double eps0 = 0.0;
    double implication_factor = 1.0;     // the lattice check asserts sup >= factor * delta
    std::vector<SeparationRow> rows;
    bool abort_limit_exceeded = false;
    std::vector<SensitivityRow> sensitivity;
    std::vector<std::string> warnings;
    double runtime_s = 0.0;
};

/// Slack on delta for the lattice version of the window-mass to pointwise step: the window holds
/// at most (width + dx)/dx cells and the last grid time before s_i + r may fall short by one dt.
double implication_factor(double eps, double r, double beta, double eta, double dx, double dt);

/// One replica of the coupled run on [0, 2r] with all event tallies.
ReplicaSeparation run_separation_replica(const SeparationConfig &cfg, const DerivedConstants &dc, double eps,
                                         std::uint64_t seed, std::uint32_t replica);

/// Throws InputError if r is outside (0, r0], eps_list is empty or not decreasing, or replicas < 100;
/// ParameterError if the parameter vector is invalid.
SeparationReport run_separation(const SeparationConfig &cfg);

/// Floor verdict: PASS if freq >= floor - 3 sd, AMBER if only the allowance closes the gap.
std::string floor_verdict(double freq, double floor, double sd, double allowance);

// ---------------------------------------------------------------------------------------------
// Support propagation, mean mass, covariation

struct SupportScalingConfig {
    std::vector<double> eps_list = {0.02, 0.04, 0.08};
    std::vector<double> r_list = {0.04, 0.08, 0.16};
    std::size_t replicas = 4000;
    double beta = 0.49;
    double dx_factor = 0.125;
    double dt_factor = 0.5;
    double support_threshold = 1e-12;
    ImmigrationFunction psi;
    std::uint64_t seed = 1;
    unsigned workers = 1;
};

struct SupportCell {
    double eps = 0.0;
    double r = 0.0;
    Proportion freq;  // P(sigma_beta - s_1 <= r)
    double regressor = 0.0;  // eps * max(r, eps)
};

struct SupportScalingReport {
    std::vector<SupportCell> cells;
    LinearFit fit;  // log freq against log regressor over cells with a positive count
    std::size_t cells_used = 0;
    double runtime_s = 0.0;
};

SupportScalingReport run_support_scaling(const SupportScalingConfig &cfg);

struct MeanMassConfig {
    SimConfig sim;                          // simulate_y is forced off
    std::vector<double> times = {0.05, 0.1, 0.15};
    std::size_t replicas = 1000;
    unsigned workers = 1;
};

struct MeanMassRow {
    double t = 0.0;
    RunningStats mass;
    double expected = 0.0;  // psi(1) eps #{s_i <= t}
    double z = 0.0;
};

struct MeanMassReport {
    std::vector<MeanMassRow> rows;
    double runtime_s = 0.0;
};

MeanMassReport run_mean_mass(const MeanMassConfig &cfg);

struct CovariationConfig {
    SimConfig sim;  // track_covariation is forced on
    std::size_t runs = 1000;
    unsigned workers = 1;
};

struct CovariationSummary {
    std::size_t runs = 0;
    std::size_t runs_with_pairs = 0;
    std::size_t bracket_holds = 0;    // every pair, H = 1 and all random H
    std::size_t realized_holds = 0;   // |sum dX dY| <= bound for every pair (diagnostic)
    double min_margin = kNever;       // min over pairs of (bound - |bracket|) / bound
    double runtime_s = 0.0;
};

CovariationSummary run_covariation(const CovariationConfig &cfg);

}  // namespace sbmi
