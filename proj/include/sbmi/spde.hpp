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
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sbmi/diffusion1d.hpp"
#include "sbmi/lattice.hpp"
#include "sbmi/random.hpp"

namespace sbmi {

enum class PsiShape { tent, indicator, smooth };

/// Immigration density psi >= 0 supported on [lo, hi] with total mass psi(1) = amplitude.
struct ImmigrationFunction {
    PsiShape shape = PsiShape::tent;
    double lo = 0.0;
    double hi = 1.0;
    double amplitude = 1.0;

    double operator()(double x) const;
    double total_mass() const { return amplitude; }
    /// Throws InputError if the support is empty or amplitude <= 0.
    void validate() const;
};

/// Tabulated inverse CDF of psi/psi(1) (linear interpolation of the cumulative on 4096 nodes).
class TargetSampler {
public:
    explicit TargetSampler(const ImmigrationFunction &psi, std::size_t nodes = 4096);
    double quantile(double u) const;
    double sample(RngStream &rng) const { return quantile(rng.uniform()); }

private:
    std::vector<double> x_;
    std::vector<double> cdf_;
};

/// i.i.d. draws with density psi/psi(1). Throws InputError for psi == 0.
std::vector<double> sample_targets(const ImmigrationFunction &psi, std::size_t n, RngStream &rng);

/// Landing times s_i = (i - 1/2) eps, t_i = i eps for i = 1..n, with targets.
struct ImmigrationSchedule {
    double eps = 0.0;
    std::vector<double> s_times;
    std::vector<double> t_times;
    std::vector<double> targets_x;
    std::vector<double> targets_y;

    /// Schedule for all i with s_i (resp. t_i) <= horizon. Throws InputError unless
    /// 0 < eps <= min(1/(8 psi(1)), 1).
    static ImmigrationSchedule build(double eps, double horizon, const ImmigrationFunction &psi, std::uint64_t seed,
                                     std::uint32_t replica, bool force_equal_targets = false);
};

/// xi = H (g, aux) where H is the Householder reflection sending e1 to u = sqrt(m)/|sqrt(m)|, so
/// sum_j sqrt(m_j) xi_j = sqrt(sum m) g and the map is orthogonal. aux has length m.size() - 1.
std::vector<double> allocate_noise(const std::vector<double> &masses, double shared_g, const std::vector<double> &aux);

/// In-place variant on raw arrays; u receives the unit vector used (e1 when all masses vanish).
void allocate_noise_into(const double *masses, std::size_t k, double shared_g, const double *aux, double *xi, double *u);

enum class NoiseScheme { qe, truncated_euler };

/// Cell-mass update over dt driven by standard normal z. The QE scheme matches the first two
/// conditional moments of the Feller transition (mean m, variance m dt) and is nonnegative.
double qe_mass_step(double m, double dt, double z);
/// Same map given upper = 1 - Phi(z) directly, which avoids erfc when the caller has it exactly.
double qe_mass_step(double m, double dt, double z, double upper);
/// qe_mass_step over arrays: out[k] = qe_mass_step(m[k], dt, z[k], upper[k]).
void qe_mass_step_batch(const double *m, double dt, const double *z, const double *upper, double *out, std::size_t n);
double euler_mass_step(double m, double dt, double z);

struct SimConfig {
    double eps = 0.05;
    ImmigrationFunction psi;
    double horizon = 0.1;
    double dx = 0.0;          // 0 selects eps/8
    double dt_factor = 0.25;  // dt = dt_factor * dx^2, at most 1/2, then reduced so eps/2 is a multiple
    double margin = 0.0;      // 0 selects max(2, envelope width at horizon + 0.1)
    NoiseScheme scheme = NoiseScheme::qe;
    bool noise = true;
    bool simulate_y = true;
    bool force_equal_targets = false;
    BumpShape bump = BumpShape::triangular;
    bool normalize_deposit = true;
    double support_threshold = 1e-12;
    double envelope_beta = 0.49;
    std::size_t max_x_clusters = std::numeric_limits<std::size_t>::max();
    std::size_t max_y_clusters = std::numeric_limits<std::size_t>::max();
    bool track_aggregate = false;
    bool record_masses = false;
    bool track_covariation = false;
    bool digest_noise = false;  // fold every shared normal into the per-kind digests
    std::size_t covariation_h_count = 10;
    std::uint64_t seed = 1;
    std::uint32_t replica = 0;
};

/// Grid and time step implied by a config.
struct Discretization {
    Grid grid;
    double dt = 0.0;
    std::uint64_t steps = 0;        // number of steps to reach the horizon
    std::uint64_t half_eps_steps = 0;  // eps/2 = half_eps_steps * dt
};
Discretization discretize(const SimConfig &cfg);

struct Cluster {
    char kind = 'X';
    std::size_t index = 0;  // 1-based immigrant index i (X) or j (Y)
    double birth = 0.0;
    std::uint64_t birth_step = 0;
    double target = 0.0;
    bool born = false;
    std::vector<double> v;     // density
    std::vector<double> heat;  // scratch: heat-stepped density
    std::size_t lo = 1;        // active cell range [lo, hi]; empty when lo > hi
    std::size_t hi = 0;
    double mass = 0.0;
    std::optional<double> sigma;  // first envelope escape time
    double support_lo = 0.0;      // support extent (cell centres above threshold), valid if has_support
    double support_hi = 0.0;
    bool has_support = false;

    bool active() const { return lo <= hi; }
    bool dead() const { return born && mass <= 0.0; }
    LatticeField field(const Grid &g) const;
};

struct MassRecord {
    std::uint64_t step = 0;
    double time = 0.0;
    std::size_t cluster_id = 0;
    char kind = 'X';
    double mass = 0.0;
    double support_lo = 0.0;
    double support_hi = 0.0;
    bool has_support = false;
};

/// Per (i, j) pair accumulators for the covariation bound.
struct PairCovariation {
    std::size_t i = 0;
    std::size_t j = 0;
    double bracket = 0.0;   // sum over steps and cells of dt sqrt(U_i V_j) rho
    double bound = 0.0;     // sum over steps and cells of dt sqrt(U_i V_j)
    double realized = 0.0;  // sum over steps of dX^i(1) dY^j(1)
    std::vector<double> h_bracket;
    std::vector<double> h_bound;
};

/// Coupled (X, Y) lattice system with per-immigrant clusters sharing one noise field.
class CoupledSystem {
public:
    explicit CoupledSystem(const SimConfig &cfg);

    const SimConfig &config() const { return cfg_; }
    const Discretization &disc() const { return disc_; }
    const Grid &grid() const { return disc_.grid; }
    double dt() const { return disc_.dt; }
    std::uint64_t step_index() const { return step_; }
    double time() const { return static_cast<double>(step_) * disc_.dt; }
    const ImmigrationSchedule &schedule() const { return schedule_; }

    const std::vector<Cluster> &x_clusters() const { return xs_; }
    const std::vector<Cluster> &y_clusters() const { return ys_; }

    /// Deposits newly born clusters at the current time (idempotent per step).
    void apply_births();
    /// Births at the current time, then one step to time + dt.
    void step();
    bool finished() const { return step_ >= disc_.steps; }

    LatticeField aggregate_x() const;
    LatticeField aggregate_y() const;
    /// Sum of cluster fields into `out` (resized to the grid).
    void sum_clusters(char kind, std::vector<double> &out) const;
    double total_mass(char kind) const;

    /// Separately evolved aggregates (track_aggregate): heat(aggregate) + sum of cluster noise
    /// increments.
    const std::vector<double> &tracked_aggregate(char kind) const { return kind == 'X' ? agg_x_ : agg_y_; }
    /// max_k |sum clusters - tracked| / (1 + tracked) over both kinds; tracked since the last reset.
    double max_decomposition_error() const { return max_decomp_err_; }

    std::uint64_t shared_noise_digest_x() const { return digest_x_; }
    std::uint64_t shared_noise_digest_y() const { return digest_y_; }

    const std::vector<MassRecord> &mass_records() const { return records_; }
    const std::vector<PairCovariation> &covariation() const { return pairs_; }

    /// Releases field storage of dead clusters; indices are kept.
    void compact();

private:
    void deposit(Cluster &c);
    void evolve_kind(std::vector<Cluster> &cs, const NoiseKey &aux_key, std::size_t L, std::size_t H, char kind);
    /// Rescans [lo, hi] and settles range, mass, support and sigma.
    void finish_cluster(Cluster &c, double t_new);
    void settle_cluster(Cluster &c, double t_new, double sum, std::size_t nlo, std::size_t nhi, std::size_t slo,
                        std::size_t shi);
    void record(const Cluster &c);
    PairCovariation &pair(std::size_t i, std::size_t j);

    SimConfig cfg_;
    Discretization disc_;
    ImmigrationSchedule schedule_;
    std::vector<Cluster> xs_;
    std::vector<Cluster> ys_;
    std::uint64_t step_ = 0;
    std::uint64_t births_applied_step_ = std::numeric_limits<std::uint64_t>::max();
    NoiseKey shared_key_;
    NoiseKey aux_x_key_;
    NoiseKey aux_y_key_;
    NoiseKey h_key_;
    std::vector<double> mbuf_;    // single-cluster cell masses
    std::vector<double> g_, gu_;  // shared normals and their upper-tail probabilities
    std::vector<double> agg_x_, agg_y_, agg_scratch_;
    double max_decomp_err_ = 0.0;
    std::uint64_t digest_x_ = 14695981039346656037ULL;
    std::uint64_t digest_y_ = 14695981039346656037ULL;
    std::vector<MassRecord> records_;
    std::vector<PairCovariation> pairs_;
    std::vector<double> h_values_;
    // Per-cell scratch for the allocation (sized to the cluster count).
    std::vector<std::size_t> idx_;
    std::vector<double> m_, aux_, xi_, u_;
    // Per-cell allocation coefficients, kept for the covariation accumulators.
    std::vector<std::size_t> cell_x_idx_, cell_y_idx_;
    std::vector<double> cell_x_u_, cell_y_u_, cell_x_m_, cell_y_m_;
};

/// Total-mass path of one cluster from recorded masses, with level 0/1 markers.
DiffusionPath mass_process(const std::vector<MassRecord> &records, char kind, std::size_t cluster_id);

struct CovariationReport {
    double realized = 0.0;
    double bound = 0.0;
    double margin = 0.0;  // bound - |realized|
    bool holds = true;
    std::vector<double> h_realized;
    std::vector<double> h_bound;
};

/// Offline check from aligned field paths: realized sum dX(1) dY(1) against
/// sum dt dx sum_x sqrt(X Y) at left endpoints, for H = 1 and each supplied H path.
CovariationReport covariation_check(const std::vector<LatticeField> &x_path, const std::vector<LatticeField> &y_path,
                                    double dt, const std::vector<std::vector<double>> &h_paths = {});

struct EnvelopeEstimate {
    char kind = 'X';
    std::size_t cluster_id = 0;
    std::optional<double> sigma;  // first recorded time the support leaves the envelope
};

/// sigma_beta per cluster from recorded support intervals.
std::vector<EnvelopeEstimate> support_envelope_check(const std::vector<MassRecord> &records,
                                                     const ImmigrationSchedule &schedule, double beta);

/// Columns: step,time,cluster_id,kind,mass,support_lo,support_hi.
void write_mass_csv(std::ostream &os, const std::vector<MassRecord> &records);

}  // namespace sbmi
