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

#include "sbmi/spde.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <ostream>
#include <sstream>

#include "sbmi/errors.hpp"

namespace sbmi {

namespace {

constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

// Word-wise FNV-1a.
inline void fnv_mix(std::uint64_t &h, std::uint64_t word) {
    h ^= word;
    h *= kFnvPrime;
}

inline void fnv_mix(std::uint64_t &h, double v) {
    std::uint64_t w;
    std::memcpy(&w, &v, sizeof w);
    fnv_mix(h, w);
}

constexpr double kSmoothPsiNorm = 0.4439938161680794;

}  // namespace

// ---------------------------------------------------------------------------------------------
// Immigration

double ImmigrationFunction::operator()(double x) const {
    if (x < lo || x > hi) {
        return 0.0;
    }
    const double width = hi - lo;
    const double half = 0.5 * width;
    const double u = (x - (lo + half)) / half;
    switch (shape) {
    case PsiShape::tent:
        return amplitude * std::max(0.0, 1.0 - std::fabs(u)) / half;
    case PsiShape::indicator:
        return amplitude / width;
    case PsiShape::smooth: {
        const double a = std::fabs(u);
        if (a >= 1.0) {
            return 0.0;
        }
        return amplitude * std::exp(-1.0 / (1.0 - a * a)) / (kSmoothPsiNorm * half);
    }
    }
    return 0.0;
}

void ImmigrationFunction::validate() const {
    if (!(hi > lo) || !(amplitude > 0.0) || !std::isfinite(amplitude)) {
        throw InputError("immigration function vanishes: need hi > lo and amplitude > 0");
    }
}

TargetSampler::TargetSampler(const ImmigrationFunction &psi, std::size_t nodes) {
    psi.validate();
    x_.resize(nodes + 1);
    cdf_.resize(nodes + 1);
    const double h = (psi.hi - psi.lo) / static_cast<double>(nodes);
    double acc = 0.0;
    double prev = psi(psi.lo);
    x_[0] = psi.lo;
    cdf_[0] = 0.0;
    for (std::size_t k = 1; k <= nodes; ++k) {
        x_[k] = psi.lo + static_cast<double>(k) * h;
        const double cur = psi(x_[k]);
        acc += 0.5 * (prev + cur) * h;
        cdf_[k] = acc;
        prev = cur;
    }
    if (!(acc > 0.0)) {
        throw InputError("immigration function integrates to zero");
    }
    for (auto &c : cdf_) {
        c /= acc;
    }
    cdf_.back() = 1.0;
}

double TargetSampler::quantile(double u) const {
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.begin()) {
        return x_.front();
    }
    if (it == cdf_.end()) {
        return x_.back();
    }
    const auto k = static_cast<std::size_t>(it - cdf_.begin());
    const double c0 = cdf_[k - 1];
    const double c1 = cdf_[k];
    const double w = c1 > c0 ? (u - c0) / (c1 - c0) : 0.0;
    return x_[k - 1] + w * (x_[k] - x_[k - 1]);
}

std::vector<double> sample_targets(const ImmigrationFunction &psi, std::size_t n, RngStream &rng) {
    const TargetSampler sampler(psi);
    std::vector<double> out(n);
    for (auto &x : out) {
        x = sampler.sample(rng);
    }
    return out;
}

ImmigrationSchedule ImmigrationSchedule::build(double eps, double horizon, const ImmigrationFunction &psi,
                                               std::uint64_t seed, std::uint32_t replica, bool force_equal_targets) {
    psi.validate();
    if (!(eps > 0.0) || eps > std::min(1.0 / (8.0 * psi.total_mass()), 1.0) * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "eps=" << eps << " outside (0, min(1/(8 psi(1)), 1)]";
        throw InputError(os.str());
    }
    ImmigrationSchedule s;
    s.eps = eps;
    const auto nx = static_cast<std::size_t>(std::floor(horizon / eps + 0.5 + 1e-12));
    const auto ny = static_cast<std::size_t>(std::floor(horizon / eps + 1e-12));
    for (std::size_t i = 1; i <= nx; ++i) {
        s.s_times.push_back((static_cast<double>(i) - 0.5) * eps);
    }
    for (std::size_t j = 1; j <= ny; ++j) {
        s.t_times.push_back(static_cast<double>(j) * eps);
    }
    RngStream rx(seed, stream_id(StreamPurpose::targets_x, replica));
    s.targets_x = sample_targets(psi, nx, rx);
    if (force_equal_targets) {
        s.targets_y.assign(s.targets_x.begin(), s.targets_x.begin() + static_cast<std::ptrdiff_t>(std::min(nx, ny)));
    } else {
        RngStream ry(seed, stream_id(StreamPurpose::targets_y, replica));
        s.targets_y = sample_targets(psi, ny, ry);
    }
    return s;
}

// ---------------------------------------------------------------------------------------------
// Noise allocation and per-cell schemes

void allocate_noise_into(const double *masses, std::size_t k, double shared_g, const double *aux, double *xi,
                         double *u) {
    if (k == 0) {
        return;
    }
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        total += masses[j];
    }
    if (!(total > 0.0)) {
        u[0] = 1.0;
        for (std::size_t j = 1; j < k; ++j) {
            u[j] = 0.0;
        }
    } else {
        const double inv = 1.0 / std::sqrt(total);
        for (std::size_t j = 0; j < k; ++j) {
            u[j] = std::sqrt(masses[j]) * inv;
        }
    }
    // v = e1 - u with v_1 = 1 - u_1 computed as (sum_{j>=2} u_j^2) / (1 + u_1) to avoid cancellation.
    double tail = 0.0;
    for (std::size_t j = 1; j < k; ++j) {
        tail += u[j] * u[j];
    }
    const double v1 = tail / (1.0 + u[0]);
    const double vv = v1 * v1 + tail;
    xi[0] = shared_g;
    for (std::size_t j = 1; j < k; ++j) {
        xi[j] = aux[j - 1];
    }
    if (vv == 0.0) {
        return;
    }
    double vw = v1 * xi[0];
    for (std::size_t j = 1; j < k; ++j) {
        vw -= u[j] * xi[j];
    }
    const double f = 2.0 * vw / vv;
    xi[0] -= f * v1;
    for (std::size_t j = 1; j < k; ++j) {
        xi[j] += f * u[j];
    }
}

std::vector<double> allocate_noise(const std::vector<double> &masses, double shared_g, const std::vector<double> &aux) {
    const std::size_t k = masses.size();
    if (k == 0) {
        return {};
    }
    if (aux.size() + 1 < k) {
        throw InputError("allocate_noise: need masses.size() - 1 auxiliary normals");
    }
    for (double m : masses) {
        if (!(m >= 0.0) || !std::isfinite(m)) {
            throw InputError("allocate_noise: masses must be finite and nonnegative");
        }
    }
    std::vector<double> xi(k), u(k);
    allocate_noise_into(masses.data(), k, shared_g, aux.data(), xi.data(), u.data());
    return xi;
}

double qe_mass_step(double m, double dt, double z) {
    if (!(m > 0.0)) {
        return 0.0;
    }
    return qe_mass_step(m, dt, z, 0.5 * std::erfc(z * (std::numbers::sqrt2 / 2.0)));
}

double qe_mass_step(double m, double dt, double z, double upper) {
    if (!(m > 0.0)) {
        return 0.0;
    }
    const double psi = dt / m;  // squared coefficient of variation of the Feller transition
    if (psi <= 1.5) {
        const double i2 = 2.0 / psi;
        const double b2 = i2 - 1.0 + std::sqrt(i2) * std::sqrt(i2 - 1.0);
        const double b = std::sqrt(b2);
        const double a = m / (1.0 + b2);
        const double s = b + z;
        return a * s * s;
    }
    // Point mass at 0 with probability p, exponential tail with mean m / (1 - p) otherwise.
    const double q = 2.0 / (psi + 1.0);  // 1 - p
    if (upper >= q) {
        return 0.0;
    }
    return (m / q) * std::log(q / upper);
}

void qe_mass_step_batch(const double *m, double dt, const double *z, const double *upper, double *out,
                        std::size_t n) {
    // Quadratic branch for every slot (vectorizable, inputs clamped into its domain), then an exact
    // scalar pass over the slots that belong to the other branch. Matches qe_mass_step bitwise.
    for (std::size_t k = 0; k < n; ++k) {
        const double psi = dt / std::max(m[k], dt / 1.5);
        const double i2 = 2.0 / psi;
        const double b2 = i2 - 1.0 + std::sqrt(i2) * std::sqrt(i2 - 1.0);
        const double b = std::sqrt(b2);
        const double a = m[k] / (1.0 + b2);
        const double s = b + z[k];
        out[k] = a * s * s;
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (!(m[k] > 0.0) || dt / m[k] > 1.5) {
            out[k] = qe_mass_step(m[k], dt, z[k], upper[k]);
        }
    }
}

double euler_mass_step(double m, double dt, double z) {
    if (!(m > 0.0)) {
        return 0.0;
    }
    return std::max(0.0, m + std::sqrt(m * dt) * z);
}

// ---------------------------------------------------------------------------------------------
// Discretization

Discretization discretize(const SimConfig &cfg) {
    cfg.psi.validate();
    if (!(cfg.eps > 0.0) || !(cfg.horizon > 0.0)) {
        throw ConfigError("eps and horizon must be positive");
    }
    if (!(cfg.dt_factor > 0.0 && cfg.dt_factor <= 0.5)) {
        std::ostringstream os;
        os << "dt_factor=" << cfg.dt_factor << " must lie in (0, 1/2] for a stable explicit heat step";
        throw ConfigError(os.str());
    }
    const double dx = cfg.dx > 0.0 ? cfg.dx : cfg.eps / 8.0;
    const double reach = std::sqrt(cfg.eps) + std::pow(cfg.horizon, cfg.envelope_beta) + 0.1;
    const double margin = cfg.margin > 0.0 ? cfg.margin : std::max(2.0, reach);
    Discretization d;
    d.grid = Grid::with_spacing(cfg.psi.lo - margin, cfg.psi.hi + margin, dx);
    const double dt_max = cfg.dt_factor * d.grid.dx * d.grid.dx;
    const double half = 0.5 * cfg.eps;
    d.half_eps_steps = static_cast<std::uint64_t>(std::ceil(half / dt_max - 1e-9));
    d.dt = half / static_cast<double>(d.half_eps_steps);
    d.steps = static_cast<std::uint64_t>(std::ceil(cfg.horizon / d.dt - 1e-9));
    check_stability(d.grid, d.dt);
    return d;
}

LatticeField Cluster::field(const Grid &g) const {
    LatticeField f(g);
    if (!v.empty()) {
        f.values = v;
    }
    return f;
}

// ---------------------------------------------------------------------------------------------
// CoupledSystem

CoupledSystem::CoupledSystem(const SimConfig &cfg) : cfg_(cfg), disc_(discretize(cfg)) {
    schedule_ = ImmigrationSchedule::build(cfg.eps, cfg.horizon, cfg.psi, cfg.seed, cfg.replica, cfg.force_equal_targets);
    if (disc_.grid.dx > std::sqrt(cfg.eps) / 3.0) {
        std::ostringstream os;
        os << "dx=" << disc_.grid.dx << " leaves the mollifier under-resolved for eps=" << cfg.eps;
        throw ResolutionError(os.str());
    }
    shared_key_ = NoiseKey(cfg.seed, stream_id(StreamPurpose::shared_noise, cfg.replica));
    aux_x_key_ = NoiseKey(cfg.seed, stream_id(StreamPurpose::aux_x, cfg.replica));
    aux_y_key_ = NoiseKey(cfg.seed, stream_id(StreamPurpose::aux_y, cfg.replica));
    h_key_ = NoiseKey(cfg.seed, stream_id(StreamPurpose::diagnostics, cfg.replica));

    const std::size_t nx = std::min(schedule_.s_times.size(), cfg.max_x_clusters);
    for (std::size_t i = 0; i < nx; ++i) {
        Cluster c;
        c.kind = 'X';
        c.index = i + 1;
        c.birth = schedule_.s_times[i];
        c.birth_step = (2 * i + 1) * disc_.half_eps_steps;
        c.target = schedule_.targets_x[i];
        xs_.push_back(std::move(c));
    }
    if (cfg.simulate_y) {
        const std::size_t ny = std::min(schedule_.t_times.size(), cfg.max_y_clusters);
        for (std::size_t j = 0; j < ny; ++j) {
            Cluster c;
            c.kind = 'Y';
            c.index = j + 1;
            c.birth = schedule_.t_times[j];
            c.birth_step = (2 * j + 2) * disc_.half_eps_steps;
            c.target = schedule_.targets_y[j];
            ys_.push_back(std::move(c));
        }
    }
    const std::size_t n = disc_.grid.n_cells;
    if (cfg.track_aggregate) {
        agg_x_.assign(n, 0.0);
        agg_y_.assign(n, 0.0);
        agg_scratch_.assign(n, 0.0);
    }
    const std::size_t kmax = std::max<std::size_t>(1, std::max(xs_.size(), ys_.size()));
    idx_.resize(kmax);
    m_.resize(kmax);
    aux_.resize(kmax);
    xi_.resize(kmax);
    u_.resize(kmax);
    cell_x_idx_.resize(kmax);
    cell_y_idx_.resize(kmax);
    cell_x_u_.resize(kmax);
    cell_y_u_.resize(kmax);
    cell_x_m_.resize(kmax);
    cell_y_m_.resize(kmax);
    h_values_.assign(cfg.covariation_h_count, 0.0);
}

void CoupledSystem::deposit(Cluster &c) {
    const Grid &g = disc_.grid;
    LatticeField f = mollifier_field(g, c.target, cfg_.eps, cfg_.bump);
    const double psi1 = cfg_.psi.total_mass();
    double scale = psi1;
    if (cfg_.normalize_deposit) {
        const double m = f.mass();
        scale = psi1 * cfg_.eps / m;
    }
    c.v.assign(g.n_cells, 0.0);
    c.heat.assign(g.n_cells, 0.0);
    c.lo = 1;
    c.hi = 0;
    for (std::size_t k = 0; k < g.n_cells; ++k) {
        const double val = f.values[k] * scale;
        if (val > 0.0) {
            c.v[k] = val;
            if (c.lo > c.hi) {
                c.lo = k;
            }
            c.hi = k;
        }
    }
    c.born = true;
    std::vector<double> *agg = c.kind == 'X' ? &agg_x_ : &agg_y_;
    if (cfg_.track_aggregate) {
        for (std::size_t k = c.lo; k <= c.hi && c.active(); ++k) {
            (*agg)[k] += c.v[k];
        }
    }
    finish_cluster(c, c.birth);
}

void CoupledSystem::apply_births() {
    if (births_applied_step_ == step_) {
        return;
    }
    births_applied_step_ = step_;
    for (auto *cs : {&xs_, &ys_}) {
        for (auto &c : *cs) {
            if (!c.born && c.birth_step == step_) {
                deposit(c);
            }
        }
    }
}

void CoupledSystem::finish_cluster(Cluster &c, double t_new) {
    double s = 0.0;
    std::size_t nlo = 1;
    std::size_t nhi = 0;
    std::size_t slo = 1;
    std::size_t shi = 0;
    for (std::size_t k = c.lo; k <= c.hi && c.lo <= c.hi; ++k) {
        const double val = c.v[k];
        if (val > 0.0) {
            s += val;
            if (nlo > nhi) {
                nlo = k;
            }
            nhi = k;
            if (val > cfg_.support_threshold) {
                if (slo > shi) {
                    slo = k;
                }
                shi = k;
            }
        }
    }
    settle_cluster(c, t_new, s, nlo, nhi, slo, shi);
}

void CoupledSystem::settle_cluster(Cluster &c, double t_new, double sum, std::size_t nlo, std::size_t nhi,
                                   std::size_t slo, std::size_t shi) {
    const Grid &g = disc_.grid;
    c.lo = nlo;
    c.hi = nhi;
    c.mass = sum * g.dx;
    c.has_support = slo <= shi;
    if (c.has_support) {
        c.support_lo = g.x(slo);
        c.support_hi = g.x(shi);
        if (!c.sigma) {
            const double w = std::sqrt(cfg_.eps) + std::pow(std::max(t_new - c.birth, 0.0), cfg_.envelope_beta);
            if (c.support_lo < c.target - w || c.support_hi > c.target + w) {
                c.sigma = t_new;
            }
        }
    }
    if (cfg_.record_masses) {
        record(c);
    }
}

void CoupledSystem::record(const Cluster &c) {
    MassRecord r;
    r.step = step_;
    r.time = time();
    if (c.birth_step == step_ && births_applied_step_ == step_) {
        r.time = c.birth;
    }
    r.cluster_id = c.index;
    r.kind = c.kind;
    r.mass = c.mass;
    r.has_support = c.has_support;
    r.support_lo = c.support_lo;
    r.support_hi = c.support_hi;
    records_.push_back(r);
}

PairCovariation &CoupledSystem::pair(std::size_t i, std::size_t j) {
    for (auto &p : pairs_) {
        if (p.i == i && p.j == j) {
            return p;
        }
    }
    PairCovariation p;
    p.i = i;
    p.j = j;
    p.h_bracket.assign(cfg_.covariation_h_count, 0.0);
    p.h_bound.assign(cfg_.covariation_h_count, 0.0);
    pairs_.push_back(std::move(p));
    return pairs_.back();
}

void CoupledSystem::step() {
    apply_births();
    const Grid &g = disc_.grid;
    const std::size_t n = g.n_cells;
    const double dt = disc_.dt;
    const double dx = g.dx;
    const double lam = dt / (2.0 * dx * dx);
    const bool with_y = cfg_.simulate_y;

    // Heat part on each active cluster, widening its range by one cell.
    std::size_t L = n;
    std::size_t H = 0;
    bool any = false;
    std::size_t n_active = 0;
    Cluster *single = nullptr;
    std::vector<double> prev_x, prev_y;
    if (cfg_.track_covariation) {
        prev_x.reserve(xs_.size());
        prev_y.reserve(ys_.size());
        for (const auto &c : xs_) {
            prev_x.push_back(c.mass);
        }
        for (const auto &c : ys_) {
            prev_y.push_back(c.mass);
        }
    }
    for (auto *cs : {&xs_, &ys_}) {
        for (auto &c : *cs) {
            if (!c.born || !c.active()) {
                continue;
            }
            const std::size_t nlo = c.lo > 0 ? c.lo - 1 : 0;
            const std::size_t nhi = std::min(c.hi + 1, n - 1);
            heat_range(c.v.data(), c.heat.data(), n, nlo, nhi, lam);
            c.lo = nlo;
            c.hi = nhi;
            L = std::min(L, nlo);
            H = std::max(H, nhi);
            any = true;
            ++n_active;
            single = &c;
        }
    }

    const double t_new = static_cast<double>(step_ + 1) * dt;
    if (!any) {
        ++step_;
        return;
    }

    const std::size_t width = H - L + 1;
    if (g_.size() < width) {
        g_.resize(width);
    }
    if (gu_.size() < width) {
        gu_.resize(width);
    }
    shared_key_.cell_normals(step_, static_cast<std::uint32_t>(L), width, g_.data(), gu_.data());
    if (cfg_.digest_noise) {
        for (std::size_t k = 0; k < width; ++k) {
            fnv_mix(digest_x_, g_[k]);
            if (with_y) {
                fnv_mix(digest_y_, g_[k]);
            }
        }
    }
    if (cfg_.track_aggregate) {
        heat_range(agg_x_.data(), agg_scratch_.data(), n, L, H, lam);
        std::copy(agg_scratch_.begin() + static_cast<std::ptrdiff_t>(L),
                  agg_scratch_.begin() + static_cast<std::ptrdiff_t>(H + 1), agg_x_.begin() + static_cast<std::ptrdiff_t>(L));
        if (with_y) {
            heat_range(agg_y_.data(), agg_scratch_.data(), n, L, H, lam);
            std::copy(agg_scratch_.begin() + static_cast<std::ptrdiff_t>(L),
                      agg_scratch_.begin() + static_cast<std::ptrdiff_t>(H + 1),
                      agg_y_.begin() + static_cast<std::ptrdiff_t>(L));
        }
    }
    if (cfg_.track_covariation) {
        for (std::size_t m = 0; m < h_values_.size(); ++m) {
            const auto bits = h_key_.bits(step_, 0, static_cast<std::uint32_t>(m));
            h_values_[m] = 2.0 * ((static_cast<double>(bits[0]) + 0.5) * 0x1p-32) - 1.0;
        }
    }

    const bool noise = cfg_.noise;
    const bool qe = cfg_.scheme == NoiseScheme::qe;

    struct Scan {
        double sum;
        std::size_t nlo, nhi, slo, shi;
    };
    Cluster *fused = nullptr;
    Scan fused_scan{};
    if (n_active == 1 && !cfg_.track_aggregate && !cfg_.track_covariation) {
        // One cluster: allocation is the identity, xi = g.
        Cluster &c = *single;
        double *v = c.v.data();
        const double *h = c.heat.data();
        const double *gz = g_.data() - L;
        if (!noise) {
            std::copy(h + c.lo, h + c.hi + 1, v + c.lo);
        } else {
            // Batched update, then one scan for positive range, support range and mass.
            const double *gu = gu_.data() - L;
            const double thr = cfg_.support_threshold;
            double sum = 0.0;
            std::size_t nlo = 1, nhi = 0, slo = 1, shi = 0;
            const std::size_t w = c.hi - c.lo + 1;
            if (mbuf_.size() < w) {
                mbuf_.resize(w);
            }
            for (std::size_t k = c.lo; k <= c.hi; ++k) {
                mbuf_[k - c.lo] = h[k] * dx;
            }
            if (qe) {
                qe_mass_step_batch(mbuf_.data(), dt, gz + c.lo, gu + c.lo, v + c.lo, w);
            } else {
                for (std::size_t k = c.lo; k <= c.hi; ++k) {
                    v[k] = euler_mass_step(mbuf_[k - c.lo], dt, gz[k]);
                }
            }
            const double inv_dx = 1.0 / dx;
            for (std::size_t k = c.lo; k <= c.hi; ++k) {
                v[k] *= inv_dx;
                sum += v[k];
            }
            // Values are >= 0, so ranges come from searches inward from both ends.
            nlo = c.lo;
            nhi = c.hi;
            while (nlo <= nhi && !(v[nlo] > 0.0)) {
                ++nlo;
            }
            while (nhi > nlo && !(v[nhi] > 0.0)) {
                --nhi;
            }
            if (nlo <= nhi) {
                slo = nlo;
                shi = nhi;
                while (slo <= shi && !(v[slo] > thr)) {
                    ++slo;
                }
                while (shi > slo && !(v[shi] > thr)) {
                    --shi;
                }
                if (slo > shi || !(v[shi] > thr)) {
                    slo = 1;
                    shi = 0;
                }
            } else {
                nlo = 1;
                nhi = 0;
            }
            fused = &c;
            fused_scan = {sum, nlo, nhi, slo, shi};
        }
    } else {
        auto update_kind = [&](std::vector<Cluster> &cs, const NoiseKey &aux_key, std::size_t k, double gk,
                               std::vector<double> *agg, std::size_t *out_idx, double *out_u, double *out_m) {
            std::size_t cnt = 0;
            for (std::size_t c = 0; c < cs.size(); ++c) {
                Cluster &cl = cs[c];
                if (!cl.born || k < cl.lo || k > cl.hi) {
                    continue;
                }
                if (cl.heat[k] > 0.0) {
                    idx_[cnt] = c;
                    m_[cnt] = cl.heat[k] * dx;
                    ++cnt;
                } else {
                    cl.v[k] = 0.0;
                }
            }
            if (cnt == 0) {
                return cnt;
            }
            if (!noise) {
                for (std::size_t a = 0; a < cnt; ++a) {
                    Cluster &cl = cs[idx_[a]];
                    cl.v[k] = cl.heat[k];
                    u_[a] = 0.0;
                }
            } else {
                if (cnt == 1) {
                    xi_[0] = gk;
                    u_[0] = 1.0;
                } else {
                    aux_key.cell_vector(step_, static_cast<std::uint32_t>(k), cnt - 1, aux_.data());
                    allocate_noise_into(m_.data(), cnt, gk, aux_.data(), xi_.data(), u_.data());
                }
                double incr = 0.0;
                for (std::size_t a = 0; a < cnt; ++a) {
                    Cluster &cl = cs[idx_[a]];
                    const double next = (qe ? qe_mass_step(m_[a], dt, xi_[a]) : euler_mass_step(m_[a], dt, xi_[a])) / dx;
                    incr += next - cl.heat[k];
                    cl.v[k] = next;
                }
                if (agg) {
                    (*agg)[k] += incr;
                }
            }
            if (out_idx) {
                for (std::size_t a = 0; a < cnt; ++a) {
                    out_idx[a] = idx_[a];
                    out_u[a] = u_[a];
                    out_m[a] = m_[a];
                }
            }
            return cnt;
        };

        std::vector<double> *ax = cfg_.track_aggregate ? &agg_x_ : nullptr;
        std::vector<double> *ay = cfg_.track_aggregate ? &agg_y_ : nullptr;
        const bool cov = cfg_.track_covariation;
        for (std::size_t k = L; k <= H; ++k) {
            const double gk = g_[k - L];
            const std::size_t kx = update_kind(xs_, aux_x_key_, k, gk, ax, cov ? cell_x_idx_.data() : nullptr,
                                               cell_x_u_.data(), cell_x_m_.data());
            std::size_t ky = 0;
            if (with_y) {
                ky = update_kind(ys_, aux_y_key_, k, gk, ay, cov ? cell_y_idx_.data() : nullptr, cell_y_u_.data(),
                                 cell_y_m_.data());
            }
            if (cov && kx > 0 && ky > 0) {
                for (std::size_t a = 0; a < kx; ++a) {
                    for (std::size_t b = 0; b < ky; ++b) {
                        const double base = dt * std::sqrt(cell_x_m_[a] * cell_y_m_[b]);
                        const double br = base * cell_x_u_[a] * cell_y_u_[b];
                        PairCovariation &p = pair(xs_[cell_x_idx_[a]].index, ys_[cell_y_idx_[b]].index);
                        p.bracket += br;
                        p.bound += base;
                        for (std::size_t m = 0; m < h_values_.size(); ++m) {
                            p.h_bracket[m] += h_values_[m] * br;
                            p.h_bound[m] += std::fabs(h_values_[m]) * base;
                        }
                    }
                }
            }
        }
    }

    ++step_;
    for (auto *cs : {&xs_, &ys_}) {
        for (auto &c : *cs) {
            if (&c == fused) {
                settle_cluster(c, t_new, fused_scan.sum, fused_scan.nlo, fused_scan.nhi, fused_scan.slo,
                               fused_scan.shi);
            } else if (c.born && (c.active() || cfg_.record_masses)) {
                finish_cluster(c, t_new);
            }
        }
    }
    for (auto &c : xs_) {
        if (c.born && !std::isfinite(c.mass)) {
            std::ostringstream os;
            os << "non-finite mass in X cluster " << c.index << " at step " << step_;
            throw SimulationAbort(os.str());
        }
    }
    for (auto &c : ys_) {
        if (c.born && !std::isfinite(c.mass)) {
            std::ostringstream os;
            os << "non-finite mass in Y cluster " << c.index << " at step " << step_;
            throw SimulationAbort(os.str());
        }
    }

    if (cfg_.track_covariation) {
        for (auto &p : pairs_) {
            const double dxm = xs_[p.i - 1].mass - prev_x[p.i - 1];
            const double dym = ys_[p.j - 1].mass - prev_y[p.j - 1];
            p.realized += dxm * dym;
        }
    }

    if (cfg_.track_aggregate) {
        for (const auto *agg : {&agg_x_, &agg_y_}) {
            const char kind = agg == &agg_x_ ? 'X' : 'Y';
            if (kind == 'Y' && !with_y) {
                continue;
            }
            const auto &cs = kind == 'X' ? xs_ : ys_;
            for (std::size_t k = L; k <= H; ++k) {
                double s = 0.0;
                for (const auto &c : cs) {
                    if (c.born && !c.v.empty()) {
                        s += c.v[k];
                    }
                }
                const double err = std::fabs(s - (*agg)[k]) / (1.0 + std::fabs((*agg)[k]));
                max_decomp_err_ = std::max(max_decomp_err_, err);
            }
        }
    }
}

void CoupledSystem::sum_clusters(char kind, std::vector<double> &out) const {
    out.assign(disc_.grid.n_cells, 0.0);
    const auto &cs = kind == 'X' ? xs_ : ys_;
    for (const auto &c : cs) {
        if (!c.born || !c.active()) {
            continue;
        }
        for (std::size_t k = c.lo; k <= c.hi; ++k) {
            out[k] += c.v[k];
        }
    }
}

LatticeField CoupledSystem::aggregate_x() const {
    LatticeField f(disc_.grid);
    sum_clusters('X', f.values);
    return f;
}

LatticeField CoupledSystem::aggregate_y() const {
    LatticeField f(disc_.grid);
    sum_clusters('Y', f.values);
    return f;
}

double CoupledSystem::total_mass(char kind) const {
    double s = 0.0;
    for (const auto &c : kind == 'X' ? xs_ : ys_) {
        if (c.born) {
            s += c.mass;
        }
    }
    return s;
}

void CoupledSystem::compact() {
    for (auto *cs : {&xs_, &ys_}) {
        for (auto &c : *cs) {
            if (c.born && !c.active()) {
                std::vector<double>().swap(c.v);
                std::vector<double>().swap(c.heat);
            }
        }
    }
}

// ---------------------------------------------------------------------------------------------
// Offline diagnostics

DiffusionPath mass_process(const std::vector<MassRecord> &records, char kind, std::size_t cluster_id) {
    DiffusionPath p;
    for (const auto &r : records) {
        if (r.kind == kind && r.cluster_id == cluster_id) {
            p.times.push_back(r.time);
            p.values.push_back(r.mass);
        }
    }
    if (p.times.empty()) {
        throw InputError("mass_process: no records for the requested cluster");
    }
    p.mark_hits();
    return p;
}

CovariationReport covariation_check(const std::vector<LatticeField> &x_path, const std::vector<LatticeField> &y_path,
                                    double dt, const std::vector<std::vector<double>> &h_paths) {
    if (x_path.size() != y_path.size() || x_path.empty()) {
        throw InputError("covariation_check: paths must be non-empty and aligned");
    }
    for (std::size_t s = 0; s < x_path.size(); ++s) {
        if (!(x_path[s].grid == y_path[s].grid) || !(x_path[s].grid == x_path.front().grid)) {
            throw InputError("covariation_check: misaligned grids");
        }
    }
    for (const auto &h : h_paths) {
        if (h.size() + 1 < x_path.size()) {
            throw InputError("covariation_check: H path shorter than the time grid");
        }
    }
    CovariationReport rep;
    rep.h_realized.assign(h_paths.size(), 0.0);
    rep.h_bound.assign(h_paths.size(), 0.0);
    const double dx = x_path.front().grid.dx;
    for (std::size_t s = 0; s + 1 < x_path.size(); ++s) {
        const double dX = x_path[s + 1].mass() - x_path[s].mass();
        const double dY = y_path[s + 1].mass() - y_path[s].mass();
        double inner = 0.0;
        const auto &a = x_path[s].values;
        const auto &b = y_path[s].values;
        for (std::size_t k = 0; k < a.size(); ++k) {
            if (a[k] > 0.0 && b[k] > 0.0) {
                inner += std::sqrt(a[k] * b[k]);
            }
        }
        const double inc_bound = dt * dx * inner;
        rep.realized += dX * dY;
        rep.bound += inc_bound;
        for (std::size_t m = 0; m < h_paths.size(); ++m) {
            rep.h_realized[m] += h_paths[m][s] * dX * dY;
            rep.h_bound[m] += std::fabs(h_paths[m][s]) * inc_bound;
        }
    }
    rep.margin = rep.bound - std::fabs(rep.realized);
    rep.holds = rep.margin >= 0.0;
    for (std::size_t m = 0; m < h_paths.size(); ++m) {
        rep.holds = rep.holds && std::fabs(rep.h_realized[m]) <= rep.h_bound[m];
    }
    return rep;
}

std::vector<EnvelopeEstimate> support_envelope_check(const std::vector<MassRecord> &records,
                                                     const ImmigrationSchedule &schedule, double beta) {
    std::vector<EnvelopeEstimate> out;
    const double se = std::sqrt(schedule.eps);
    auto find = [&](char kind, std::size_t id) -> EnvelopeEstimate & {
        for (auto &e : out) {
            if (e.kind == kind && e.cluster_id == id) {
                return e;
            }
        }
        out.push_back(EnvelopeEstimate{kind, id, std::nullopt});
        return out.back();
    };
    for (const auto &r : records) {
        auto &e = find(r.kind, r.cluster_id);
        if (e.sigma || !r.has_support) {
            continue;
        }
        const bool is_x = r.kind == 'X';
        const auto &births = is_x ? schedule.s_times : schedule.t_times;
        const auto &targets = is_x ? schedule.targets_x : schedule.targets_y;
        if (r.cluster_id == 0 || r.cluster_id > births.size()) {
            continue;
        }
        const double birth = births[r.cluster_id - 1];
        const double c = targets[r.cluster_id - 1];
        const double w = se + std::pow(std::max(r.time - birth, 0.0), beta);
        if (r.support_lo < c - w || r.support_hi > c + w) {
            e.sigma = r.time;
        }
    }
    return out;
}

void write_mass_csv(std::ostream &os, const std::vector<MassRecord> &records) {
    os << "step,time,cluster_id,kind,mass,support_lo,support_hi\n";
    os.precision(17);
    for (const auto &r : records) {
        os << r.step << ',' << r.time << ',' << r.cluster_id << ',' << r.kind << ',' << r.mass << ',';
        if (r.has_support) {
            os << r.support_lo << ',' << r.support_hi;
        } else {
            os << "nan,nan";
        }
        os << '\n';
    }
}

}  // namespace sbmi
