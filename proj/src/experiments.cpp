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

#include "sbmi/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "sbmi/errors.hpp"
#include "sbmi/mathkernel.hpp"

namespace sbmi {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Stream namespace for draws that belong to no lattice replica (comparator samples). Lattice
// stream ids are below 2^32, so these never collide with them.
constexpr std::uint64_t kComparatorStreamBase = 1ULL << 40;

// floor(r / eps) with a relative guard so r = k eps counts k.
std::size_t index_cap(double r, double eps) {
    return static_cast<std::size_t>(std::floor(r / eps * (1.0 + 1e-12)));
}

bool intervals_meet(double a_lo, double a_hi, double b_lo, double b_hi) { return a_lo <= b_hi && b_lo <= a_hi; }

}  // namespace

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)> &fn) {
    if (workers == 0) {
        workers = std::max(1u, std::thread::hardware_concurrency());
    }
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
    if (workers <= 1) {
        for (std::size_t k = 0; k < n; ++k) {
            fn(k);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= n) {
                return;
            }
            try {
                fn(k);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back(worker);
    }
    for (auto &t : pool) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

// ---------------------------------------------------------------------------------------------
// Stopping times

StoppingTimes stopping_times(const StoppingInput &in) {
    const std::size_t n = in.times.size();
    if (in.x_mass.size() != n || (!in.y_mass.empty() && in.y_mass.size() != n)) {
        throw InputError("stopping_times: mass paths must align with the time grid");
    }
    const ParamVector &p = in.params;
    StoppingTimes out;
    std::size_t last = n;  // index of T1 on the grid, or n if never reached
    for (std::size_t k = 0; k < n; ++k) {
        if (in.x_mass[k] >= 1.0) {
            out.t1 = in.times[k];
            last = k;
            break;
        }
    }
    // tau1 and tau2 look at the path stopped at T1, so only indices up to T1 matter; the cap at T1
    // applies when neither crossing happens first.
    const std::size_t scan_end = last < n ? last + 1 : n;
    double integral = 0.0;
    for (std::size_t k = 0; k < scan_end; ++k) {
        const double t = in.times[k];
        const double u = std::max(t - in.s_i, 0.0);
        const double m = in.x_mass[k];
        if (k > 0) {
            integral += 0.5 * (m + in.x_mass[k - 1]) * (t - in.times[k - 1]);
        }
        if (out.tau1 == kNever && m < std::pow(u, p.eta) / 4.0) {
            out.tau1 = t;
        }
        if (out.tau2 == kNever && std::fabs(m - in.initial_mass - u) > p.L * std::pow(integral, p.alpha)) {
            out.tau2 = t;
        }
    }
    out.tau1 = std::min(out.tau1, out.t1);
    out.tau2 = std::min(out.tau2, out.t1);
    for (std::size_t k = 0; k < in.y_mass.size(); ++k) {
        if (in.y_mass[k] > 1.0) {
            out.tau3 = in.times[k];
            break;
        }
    }
    out.tau = std::min({out.tau1, out.tau2, out.tau3, in.s_i + 1.0});
    return out;
}

bool accepted_by_hit(const DiffusionPath &mass_path) {
    if (!mass_path.hit1) {
        return false;
    }
    return !mass_path.hit0 || mass_path.hit1->index < mass_path.hit0->index;
}

// ---------------------------------------------------------------------------------------------
// Conditioning

namespace {

struct ConditioningReplica {
    bool accepted = false;
    bool hit_on_lattice = false;
    bool continued = false;
    double stopped_mass = 0.0;  // mass at s_1 + t_obs stopped at level 1
    double tau_rel = kNever;    // tau - s_1 if observed on the lattice
};

ConditioningReplica conditioning_replica(const SimConfig &sc, const ConditioningConfig &cfg, double m0,
                                         std::uint32_t replica) {
    SimConfig c = sc;
    c.replica = replica;
    CoupledSystem sys(c);
    StoppingInput in;
    in.params = cfg.params;
    in.initial_mass = m0;
    ConditioningReplica out;
    bool started = false;
    while (!sys.finished()) {
        sys.step();
        const Cluster &cl = sys.x_clusters().front();
        if (!cl.born) {
            continue;
        }
        if (!started) {
            started = true;
            in.s_i = cl.birth;
            in.times.push_back(cl.birth);
            in.x_mass.push_back(m0);
        }
        in.times.push_back(sys.time());
        in.x_mass.push_back(cl.mass);
        if (cl.mass <= 0.0 || cl.mass >= 1.0) {
            break;
        }
    }
    const double m = in.x_mass.empty() ? 0.0 : in.x_mass.back();
    if (m >= 1.0) {
        out.accepted = true;
        out.hit_on_lattice = true;
        out.stopped_mass = 1.0;
    } else if (m > 0.0) {
        out.continued = true;
        out.stopped_mass = m;
        RngStream rng(cfg.seed, stream_id(StreamPurpose::scalar, replica));
        out.accepted = feller_hit_one_before_zero(m, rng).hit_one;
    }
    if (out.accepted && !in.times.empty()) {
        const StoppingTimes st = stopping_times(in);
        if (st.tau <= in.times.back()) {
            out.tau_rel = st.tau - in.s_i;
        }
    }
    return out;
}

EstimatorPair compare_estimators(const std::string &name, const std::vector<ConditioningReplica> &reps, double m0,
                                 const std::function<double(double)> &f) {
    RunningStats rejection;
    RunningStats weighted;
    for (const auto &r : reps) {
        if (r.accepted) {
            rejection.add(f(r.stopped_mass));
        }
        weighted.add(r.stopped_mass / m0 * f(r.stopped_mass));
    }
    EstimatorPair e;
    e.name = name;
    e.rejection = rejection.mean();
    e.rejection_se = rejection.std_error();
    e.weighted = weighted.mean();
    e.weighted_se = weighted.std_error();
    const double se = std::hypot(e.rejection_se, e.weighted_se);
    e.z = se > 0.0 ? (e.rejection - e.weighted) / se : 0.0;
    return e;
}

}  // namespace

ConditioningReport run_conditioning(const ConditioningConfig &cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    if (!(cfg.t_obs > 0.0) || cfg.target_accepted == 0 || cfg.max_replicas == 0 || cfg.batch == 0 ||
        !(cfg.rho > 0.0 && cfg.rho < 1.0)) {
        throw InputError("conditioning: need t_obs > 0, positive counts and rho in (0, 1)");
    }
    SimConfig sc;
    sc.eps = cfg.eps;
    sc.psi = cfg.psi;
    sc.horizon = 0.5 * cfg.eps + cfg.t_obs;
    sc.dx = cfg.dx_factor * cfg.eps;
    sc.dt_factor = cfg.dt_factor;
    sc.simulate_y = false;
    sc.max_x_clusters = 1;
    sc.envelope_beta = cfg.params.beta;
    sc.seed = cfg.seed;
    const Discretization disc = discretize(sc);
    const double m0 = cfg.psi.total_mass() * cfg.eps;

    ConditioningReport rep;
    rep.config = cfg;
    rep.dx = disc.grid.dx;
    rep.dt = disc.dt;
    rep.expected_rate = m0;
    rep.allowance = cfg.allowance_dx * disc.grid.dx;

    std::vector<ConditioningReplica> all;
    std::size_t accepted = 0;
    while (accepted < cfg.target_accepted && all.size() < cfg.max_replicas) {
        const std::size_t base = all.size();
        const std::size_t n = std::min(cfg.batch, cfg.max_replicas - base);
        std::vector<ConditioningReplica> batch(n);
        parallel_for(n, cfg.workers, [&](std::size_t k) {
            batch[k] = conditioning_replica(sc, cfg, m0, static_cast<std::uint32_t>(base + k));
        });
        // Keep replicas in index order up to the target-th acceptance, so the outcome does not
        // depend on the batch size.
        for (const auto &r : batch) {
            all.push_back(r);
            accepted += r.accepted ? 1 : 0;
            if (accepted >= cfg.target_accepted) {
                break;
            }
        }
    }

    std::vector<double> taus;
    std::size_t censored = 0;
    for (const auto &r : all) {
        rep.hit_on_lattice += r.hit_on_lattice ? 1 : 0;
        rep.continued += r.continued ? 1 : 0;
        if (r.accepted) {
            rep.accepted_mass.push_back(r.stopped_mass);
            taus.push_back(r.tau_rel);
            censored += r.tau_rel == kNever ? 1 : 0;
        }
    }
    rep.replicas = all.size();
    rep.accepted = accepted;
    rep.acceptance = wilson(accepted, all.size());

    // The lattice observation instant is the first grid time at or after s_1 + t_obs.
    const double t_obs_grid = static_cast<double>(disc.steps) * disc.dt - 0.5 * cfg.eps;
    rep.comparator_mass.resize(cfg.comparator_samples);
    parallel_for(cfg.comparator_samples, cfg.workers, [&](std::size_t k) {
        RngStream rng(cfg.seed, kComparatorStreamBase + k);
        rep.comparator_mass[k] = besq4_quarter_stopped(m0, t_obs_grid, rng);
    });

    if (!rep.accepted_mass.empty() && !rep.comparator_mass.empty()) {
        rep.ks = ks_two_sample(rep.accepted_mass, rep.comparator_mass, rep.allowance);
        const double med = sample_quantile(rep.comparator_mass, 0.5);
        rep.consistency.push_back(compare_estimators("mean_mass", all, m0, [](double m) { return m; }));
        rep.consistency.push_back(compare_estimators("p_below_comparator_median", all, m0,
                                                     [med](double m) { return m <= med ? 1.0 : 0.0; }));
    }
    if (!taus.empty()) {
        rep.tau_censored_fraction = static_cast<double>(censored) / static_cast<double>(taus.size());
        // Order statistic rather than interpolation: censored values are +inf.
        std::sort(taus.begin(), taus.end());
        const auto k = static_cast<std::size_t>(std::ceil(cfg.rho * static_cast<double>(taus.size())));
        rep.delta1 = taus[std::max<std::size_t>(k, 1) - 1];
    }
    rep.runtime_s = seconds_since(t0);
    return rep;
}

// ---------------------------------------------------------------------------------------------
// Separation

double window_mass_above(const Grid &g, const double *v, double lo, double hi, double threshold) {
    if (g.n_cells == 0 || hi < lo) {
        return 0.0;
    }
    // Cells with centre in [lo, hi]: k from ceil((lo - x_min)/dx - 1/2) to floor((hi - x_min)/dx - 1/2).
    const double a = std::ceil((lo - g.x_min) / g.dx - 0.5);
    const double b = std::floor((hi - g.x_min) / g.dx - 0.5);
    const double last = static_cast<double>(g.n_cells - 1);
    if (b < 0.0 || a > last) {
        return 0.0;
    }
    std::size_t k0 = static_cast<std::size_t>(std::max(a, 0.0));
    std::size_t k1 = static_cast<std::size_t>(std::min(b, last));
    // Rounding at the edges: enforce the centre test exactly.
    while (k0 <= k1 && g.x(k0) < lo) {
        ++k0;
    }
    while (k1 >= k0 && k1 > 0 && g.x(k1) > hi) {
        --k1;
    }
    double s = 0.0;
    for (std::size_t k = k0; k <= k1 && k < g.n_cells; ++k) {
        if (g.x(k) >= lo && g.x(k) <= hi && v[k] > threshold) {
            s += v[k];
        }
    }
    return s * g.dx;
}

EventG::EventG(std::size_t i, double s_i, double x_i, double eps, const DerivedConstants &dc)
    : i_(i), s_i_(s_i), x_i_(x_i), eps_(eps), dc_(dc) {}

double EventG::half_width(double elapsed) const { return std::sqrt(eps_) + std::pow(elapsed, dc_.beta); }

double EventG::x_floor(double elapsed) const { return std::pow(elapsed, dc_.eta) / 4.0; }

double EventG::y_ceiling(double elapsed) const {
    if (elapsed <= 0.0) {
        return 0.0;
    }
    return dc_.k_star * (std::pow(elapsed, dc_.kappa1 - dc_.wp) +
                         std::pow(eps_, dc_.kappa2) * std::pow(elapsed, dc_.kappa3 - dc_.wp));
}

void EventG::observe(double elapsed, double x_window_mass, double y_window_mass, double T) {
    if (!holds_ || elapsed < 0.0 || s_i_ + elapsed > T) {
        return;
    }
    if (x_window_mass < x_floor(elapsed) || y_window_mass > y_ceiling(elapsed)) {
        holds_ = false;
        failed_at_ = s_i_ + elapsed;
    }
}

double implication_factor(double eps, double r, double beta, double eta, double dx, double dt) {
    const double width = 2.0 * std::sqrt(eps) + 2.0 * std::pow(r, beta);
    const double grid_time = std::max(r - dt, 0.0) / r;
    return width / (width + dx) * std::pow(grid_time, eta);
}

namespace {

// Per X^i bookkeeping while a separation replica runs.
struct ClusterWatch {
    std::size_t x_pos = 0;  // position in x_clusters()
    EventG g;
    bool clause_a = true;
    double us2 = 0.0;
    std::size_t us2_steps = 0;
};

}  // namespace

ReplicaSeparation run_separation_replica(const SeparationConfig &cfg, const DerivedConstants &dc, double eps,
                                         std::uint64_t seed, std::uint32_t replica) {
    const double r = cfg.r;
    SimConfig sc;
    sc.eps = eps;
    sc.psi = cfg.psi;
    sc.horizon = 2.0 * r;
    sc.dx = cfg.dx_factor * eps;
    sc.dt_factor = cfg.dt_factor;
    sc.support_threshold = cfg.support_threshold;
    sc.noise = cfg.noise;
    sc.force_equal_targets = cfg.force_equal_targets;
    sc.envelope_beta = cfg.params.beta;
    sc.seed = seed;
    sc.replica = replica;
    const double thr = cfg.support_threshold;
    const double beta_p = cfg.params.beta_prime;

    ReplicaSeparation out;
    try {
        CoupledSystem sys(sc);
        const Grid &g = sys.grid();
        const double dt = sys.dt();
        const std::size_t n_index = std::min(index_cap(r, eps), sys.x_clusters().size());
        std::vector<ClusterWatch> watch;
        for (std::size_t p = 0; p < n_index; ++p) {
            const Cluster &c = sys.x_clusters()[p];
            watch.push_back({p, EventG(c.index, c.birth, c.target, eps, dc), true, 0.0, 0});
        }
        std::vector<Landing> landings;
        for (const Cluster &y : sys.y_clusters()) {
            landings.push_back({y.target, y.birth});
        }
        std::vector<double> ax, ay;
        std::vector<char> in_j(sys.y_clusters().size(), 0);

        auto observe = [&] {
            const std::uint64_t step = sys.step_index();
            const auto &ys = sys.y_clusters();
            for (auto &w : watch) {
                const Cluster &xc = sys.x_clusters()[w.x_pos];
                if (!xc.born || step < xc.birth_step) {
                    continue;
                }
                const double elapsed = static_cast<double>(step - xc.birth_step) * dt;
                if (elapsed > r + 1e-9 * dt) {
                    continue;
                }
                const double half = w.g.half_width(elapsed);
                const double lo = xc.target - half;
                const double hi = xc.target + half;
                const double s = xc.birth + elapsed;
                const double xw = xc.v.empty() ? 0.0 : window_mass_above(g, xc.v.data(), lo, hi, thr);
                std::fill(in_j.begin(), in_j.end(), 0);
                for (std::size_t j : classify_indices(xc.target, xc.birth, landings, s, s + 0.5 * dt, eps, beta_p).all) {
                    in_j[j] = 1;
                }
                double yw = 0.0;
                double outside_j = 0.0;
                for (std::size_t q = 0; q < ys.size(); ++q) {
                    const Cluster &yc = ys[q];
                    if (!yc.born || !yc.has_support || yc.v.empty() ||
                        !intervals_meet(yc.support_lo, yc.support_hi, lo, hi)) {
                        continue;
                    }
                    if (yc.birth <= xc.birth) {
                        w.clause_a = false;
                    }
                    const double m = window_mass_above(g, yc.v.data(), lo, hi, thr);
                    yw += m;
                    if (!in_j[q]) {
                        outside_j += m;
                    }
                }
                w.g.observe(elapsed, xw, yw, xc.birth + r + 1e-9 * dt);
                w.us2 = std::max(w.us2, outside_j);
                ++w.us2_steps;
            }
            sys.sum_clusters('X', ax);
            sys.sum_clusters('Y', ay);
            std::size_t lo = g.n_cells;
            std::size_t hi = 0;
            for (const auto *cs : {&sys.x_clusters(), &sys.y_clusters()}) {
                for (const Cluster &c : *cs) {
                    if (c.born && c.active()) {
                        lo = std::min(lo, c.lo);
                        hi = std::max(hi, c.hi);
                    }
                }
            }
            if (lo <= hi) {
                out.sup_norm = std::max(out.sup_norm, crap_norm_diff(g, ax.data(), ay.data(), lo, hi).value);
            }
        };

        sys.apply_births();
        observe();
        while (!sys.finished()) {
            sys.step();
            sys.apply_births();
            observe();
        }

        const double horizon = sys.time();
        for (auto &w : watch) {
            const Cluster &xc = sys.x_clusters()[w.x_pos];
            if (w.g.holds()) {
                ++out.g_count;
            }
            GammaOutcome gam;
            gam.clause_a = w.clause_a;
            for (const Cluster &yc : sys.y_clusters()) {
                if (yc.birth > xc.birth + r) {
                    continue;
                }
                if (yc.sigma && *yc.sigma <= yc.birth + 3.0 * r) {
                    gam.clause_b = false;
                } else if (yc.birth + 3.0 * r > horizon) {
                    gam.censored = true;
                }
            }
            if (xc.sigma && *xc.sigma <= xc.birth + 2.0 * r) {
                gam.clause_c = false;
            } else if (xc.birth + 2.0 * r > horizon) {
                gam.censored = true;
            }
            gam.holds = gam.clause_a && gam.clause_b && gam.clause_c;
            if (!gam.holds) {
                ++out.gamma_failures;
            } else {
                if (gam.censored) {
                    ++out.gamma_censored;
                }
                out.us2_max_discrepancy = std::max(out.us2_max_discrepancy, w.us2);
                out.us2_steps += w.us2_steps;
            }
        }
        out.S = out.g_count > 0;
        for (const auto *cs : {&sys.x_clusters(), &sys.y_clusters()}) {
            for (const Cluster &c : *cs) {
                if (c.born && c.sigma && *c.sigma - c.birth <= r) {
                    ++out.sigma_early;
                }
            }
        }
        out.x_mass_end = sys.total_mass('X');
        out.y_mass_end = sys.total_mass('Y');
    } catch (const SimulationAbort &e) {
        out = ReplicaSeparation{};
        out.aborted = true;
        out.abort_reason = e.what();
    }
    return out;
}

std::string floor_verdict(double freq, double floor, double sd, double allowance) {
    if (freq >= floor - 3.0 * sd) {
        return "PASS";
    }
    if (freq >= floor - 3.0 * sd - allowance) {
        return "AMBER";
    }
    return "FAIL";
}

namespace {

SeparationRow separation_row(const SeparationConfig &cfg, const DerivedConstants &dc, double eps, double delta,
                             double factor, std::uint64_t seed, std::size_t replicas) {
    SeparationRow row;
    row.eps = eps;
    row.n_index = index_cap(cfg.r, eps);
    row.eps_above_eps0 = eps > dc.eps0(cfg.r, cfg.psi.total_mass());
    // No index, or the first X birth lies past the horizon: S(r) is empty by construction.
    row.degenerate = row.n_index == 0 || 0.5 * eps > 2.0 * cfg.r;
    std::vector<ReplicaSeparation> reps(replicas);
    parallel_for(replicas, cfg.workers, [&](std::size_t k) {
        reps[k] = run_separation_replica(cfg, dc, eps, seed, static_cast<std::uint32_t>(k));
    });
    std::size_t s_count = 0;
    std::size_t ge_delta = 0;
    std::size_t ge_half = 0;
    for (const auto &rp : reps) {
        if (rp.aborted) {
            ++row.aborts;
            continue;
        }
        ++row.replicas;
        s_count += rp.S ? 1 : 0;
        ge_delta += rp.sup_norm >= delta ? 1 : 0;
        ge_half += rp.sup_norm >= 0.5 * delta ? 1 : 0;
        if (rp.S && rp.sup_norm < factor * delta) {
            ++row.implication_violations;
        }
        row.g_total += rp.g_count;
        row.gamma_failures += rp.gamma_failures;
        row.gamma_censored += rp.gamma_censored;
        row.sigma_early += rp.sigma_early;
        row.sup_norm.add(rp.sup_norm);
        row.us2_max_discrepancy = std::max(row.us2_max_discrepancy, rp.us2_max_discrepancy);
    }
    row.s_freq = wilson(s_count, row.replicas);
    row.sup_ge_delta = wilson(ge_delta, row.replicas);
    row.sup_ge_half_delta = wilson(ge_half, row.replicas);
    row.floor = cfg.psi.total_mass() * cfg.r / 4.0;
    row.floor_sd = binomial_sd(std::min(row.floor, 1.0), std::max<std::size_t>(row.replicas, 1));
    row.verdict = floor_verdict(row.s_freq.estimate, row.floor, row.floor_sd, cfg.floor_allowance);
    return row;
}

double separation_dt(const SeparationConfig &cfg, double eps) {
    SimConfig sc;
    sc.eps = eps;
    sc.psi = cfg.psi;
    sc.horizon = 2.0 * cfg.r;
    sc.dx = cfg.dx_factor * eps;
    sc.dt_factor = cfg.dt_factor;
    sc.envelope_beta = cfg.params.beta;
    return discretize(sc).dt;
}

}  // namespace

SeparationReport run_separation(const SeparationConfig &cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.eps_list.empty()) {
        throw InputError("separation: eps_list is empty");
    }
    for (std::size_t k = 1; k < cfg.eps_list.size(); ++k) {
        if (!(cfg.eps_list[k] < cfg.eps_list[k - 1])) {
            throw InputError("separation: eps_list must be strictly decreasing");
        }
    }
    if (cfg.replicas < 100) {
        throw InputError("separation: need at least 100 replicas");
    }
    const auto violations = validate_params(cfg.params);
    if (!violations.empty()) {
        throw ParameterError("separation: " + describe(violations.front()));
    }
    SeparationReport rep;
    rep.config = cfg;
    rep.constants = derive_constants(cfg.params, cfg.k_star, cfg.wp);
    const DerivedConstants &dc = rep.constants;
    if (!(cfg.r > 0.0) || cfg.r > dc.r0 * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "separation: r=" << cfg.r << " must lie in (0, r0] with r0=" << dc.r0;
        throw InputError(os.str());
    }
    const double psi1 = cfg.psi.total_mass();
    rep.delta = dc.delta(cfg.r);
    rep.eps0 = dc.eps0(cfg.r, psi1);
    for (double eps : cfg.eps_list) {
        const double dx = cfg.dx_factor * eps;
        const double factor = implication_factor(eps, cfg.r, cfg.params.beta, cfg.params.eta, dx,
                                                 separation_dt(cfg, eps));
        rep.implication_factor = rep.rows.empty() ? factor : std::min(rep.implication_factor, factor);
        SeparationRow row = separation_row(cfg, dc, eps, rep.delta, factor, cfg.seed, cfg.replicas);
        if (row.eps_above_eps0) {
            std::ostringstream os;
            os << "eps=" << eps << " exceeds eps0(r)=" << rep.eps0;
            rep.warnings.push_back(os.str());
        }
        if (row.degenerate) {
            std::ostringstream os;
            os << "eps=" << eps << ": floor(r/eps)=" << row.n_index << ", so S(r) is empty by construction";
            rep.warnings.push_back(os.str());
        }
        if (row.aborts * 100 > row.aborts + row.replicas) {
            rep.abort_limit_exceeded = true;
        }
        rep.rows.push_back(std::move(row));
    }

    for (std::size_t t = 0; t < cfg.k_star_table.size(); ++t) {
        SensitivityRow srow;
        srow.k_star = cfg.k_star_table[t];
        try {
            const DerivedConstants dk = derive_constants(cfg.params, srow.k_star, cfg.wp);
            SeparationConfig sub = cfg;
            sub.k_star = srow.k_star;
            sub.r = cfg.table_r_fraction * dk.r0;
            sub.dx_factor = cfg.table_dx_factor;
            srow.r0 = dk.r0;
            srow.delta = dk.delta(sub.r);
            srow.floor = psi1 * sub.r / 4.0;
            const std::uint64_t seed = cfg.seed + 1000003ULL * (t + 1);
            for (double eps : cfg.eps_list) {
                const double factor = implication_factor(eps, sub.r, cfg.params.beta, cfg.params.eta,
                                                         sub.dx_factor * eps, separation_dt(sub, eps));
                srow.rows.push_back(separation_row(sub, dk, eps, srow.delta, factor, seed, cfg.table_replicas));
            }
        } catch (const InfeasibleError &e) {
            srow.note = e.what();
        }
        rep.sensitivity.push_back(std::move(srow));
    }
    rep.runtime_s = seconds_since(t0);
    return rep;
}

// ---------------------------------------------------------------------------------------------
// Support propagation

SupportScalingReport run_support_scaling(const SupportScalingConfig &cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.eps_list.empty() || cfg.r_list.empty() || cfg.replicas == 0) {
        throw InputError("support scaling: need eps and r grids and replicas");
    }
    SupportScalingReport rep;
    const double r_max = *std::max_element(cfg.r_list.begin(), cfg.r_list.end());
    for (double eps : cfg.eps_list) {
        SimConfig sc;
        sc.eps = eps;
        sc.psi = cfg.psi;
        sc.horizon = 0.5 * eps + r_max;
        sc.dx = cfg.dx_factor * eps;
        sc.dt_factor = cfg.dt_factor;
        sc.simulate_y = false;
        sc.max_x_clusters = 1;
        sc.envelope_beta = cfg.beta;
        sc.support_threshold = cfg.support_threshold;
        sc.seed = cfg.seed;
        // One run per replica serves every r: the events are nested in r.
        std::vector<double> escape(cfg.replicas, kNever);
        parallel_for(cfg.replicas, cfg.workers, [&](std::size_t k) {
            SimConfig c = sc;
            c.replica = static_cast<std::uint32_t>(k);
            CoupledSystem sys(c);
            while (!sys.finished()) {
                sys.step();
                const Cluster &cl = sys.x_clusters().front();
                if (cl.sigma) {
                    escape[k] = *cl.sigma - cl.birth;
                    break;
                }
                if (cl.born && cl.mass <= 0.0) {
                    break;
                }
            }
        });
        for (double r : cfg.r_list) {
            std::size_t hits = 0;
            for (double e : escape) {
                hits += e <= r ? 1 : 0;
            }
            SupportCell cell;
            cell.eps = eps;
            cell.r = r;
            cell.freq = wilson(hits, cfg.replicas);
            cell.regressor = eps * std::max(r, eps);
            rep.cells.push_back(cell);
        }
    }
    std::vector<double> lx, ly;
    for (const auto &c : rep.cells) {
        if (c.freq.successes > 0) {
            lx.push_back(std::log(c.regressor));
            ly.push_back(std::log(c.freq.estimate));
        }
    }
    rep.cells_used = lx.size();
    if (lx.size() >= 2) {
        rep.fit = ols(lx, ly);
    }
    rep.runtime_s = seconds_since(t0);
    return rep;
}

// ---------------------------------------------------------------------------------------------
// Mean mass

MeanMassReport run_mean_mass(const MeanMassConfig &cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.times.empty() || cfg.replicas < 2) {
        throw InputError("mean mass: need observation times and at least two replicas");
    }
    SimConfig sc = cfg.sim;
    sc.simulate_y = false;
    sc.horizon = *std::max_element(cfg.times.begin(), cfg.times.end());
    const Discretization disc = discretize(sc);
    // Observation steps: first grid time at or after each requested time.
    std::vector<std::uint64_t> obs;
    for (double t : cfg.times) {
        obs.push_back(static_cast<std::uint64_t>(std::ceil(t / disc.dt - 1e-9)));
    }
    std::vector<std::vector<double>> mass(cfg.replicas, std::vector<double>(obs.size(), 0.0));
    parallel_for(cfg.replicas, cfg.workers, [&](std::size_t k) {
        SimConfig c = sc;
        c.replica = static_cast<std::uint32_t>(k);
        CoupledSystem sys(c);
        for (std::size_t q = 0; q < obs.size(); ++q) {
            while (sys.step_index() < obs[q]) {
                sys.step();
            }
            sys.apply_births();
            mass[k][q] = sys.total_mass('X');
        }
    });
    MeanMassReport rep;
    const ImmigrationSchedule sched = ImmigrationSchedule::build(sc.eps, sc.horizon, sc.psi, sc.seed, 0);
    for (std::size_t q = 0; q < obs.size(); ++q) {
        MeanMassRow row;
        row.t = static_cast<double>(obs[q]) * disc.dt;
        for (const auto &m : mass) {
            row.mass.add(m[q]);
        }
        std::size_t born = 0;
        for (std::size_t i = 0; i < sched.s_times.size(); ++i) {
            born += (2 * i + 1) * disc.half_eps_steps <= obs[q] ? 1 : 0;
        }
        row.expected = sc.psi.total_mass() * sc.eps * static_cast<double>(born);
        const double se = row.mass.std_error();
        row.z = se > 0.0 ? (row.mass.mean() - row.expected) / se : 0.0;
        rep.rows.push_back(row);
    }
    rep.runtime_s = seconds_since(t0);
    return rep;
}

// ---------------------------------------------------------------------------------------------
// Covariation

CovariationSummary run_covariation(const CovariationConfig &cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    SimConfig sc = cfg.sim;
    sc.track_covariation = true;
    sc.simulate_y = true;
    struct RunResult {
        bool has_pairs = false;
        bool bracket = true;
        bool realized = true;
        double margin = kNever;
    };
    std::vector<RunResult> res(cfg.runs);
    parallel_for(cfg.runs, cfg.workers, [&](std::size_t k) {
        SimConfig c = sc;
        c.replica = static_cast<std::uint32_t>(k);
        CoupledSystem sys(c);
        while (!sys.finished()) {
            sys.step();
        }
        RunResult &r = res[k];
        for (const auto &p : sys.covariation()) {
            if (!(p.bound > 0.0)) {
                continue;
            }
            r.has_pairs = true;
            // Cells holding only X^i and Y^j have correlation exactly 1, so equality is attained;
            // the tolerance absorbs rounding in the correlation sums.
            constexpr double kRound = 1e-12;
            if (std::fabs(p.bracket) > p.bound * (1.0 + kRound)) {
                r.bracket = false;
            }
            for (std::size_t h = 0; h < p.h_bracket.size(); ++h) {
                if (std::fabs(p.h_bracket[h]) > p.h_bound[h] * (1.0 + kRound)) {
                    r.bracket = false;
                }
            }
            if (std::fabs(p.realized) > p.bound) {
                r.realized = false;
            }
            r.margin = std::min(r.margin, (p.bound - std::fabs(p.bracket)) / p.bound);
        }
    });
    CovariationSummary s;
    s.runs = cfg.runs;
    for (const auto &r : res) {
        s.runs_with_pairs += r.has_pairs ? 1 : 0;
        s.bracket_holds += r.bracket ? 1 : 0;
        s.realized_holds += r.realized ? 1 : 0;
        s.min_margin = std::min(s.min_margin, r.margin);
    }
    s.runtime_s = seconds_since(t0);
    return s;
}

}  // namespace sbmi
