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

// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero iff any criterion
// fails. `--scale f` shrinks every sample size by f for quick local runs; ctest uses scale 1.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sbmi/diffusion1d.hpp"
#include "sbmi/experiments.hpp"
#include "sbmi/params.hpp"
#include "sbmi/stats.hpp"
#include "sbmi/validation.hpp"

using namespace sbmi;

namespace {

struct Outcome {
    bool passed = false;
    std::string verdict;  // PASS, FAIL or AMBER
    std::string detail;
};

Outcome from_checks(const std::vector<CheckResult> &checks) {
    Outcome o;
    o.passed = all_passed(checks);
    std::ostringstream os;
    os.precision(4);
    for (const auto &c : checks) {
        os << (os.tellp() > 0 ? "; " : "") << c.name << "=" << c.value << (c.passed ? "" : " [fail]");
    }
    o.detail = os.str();
    return o;
}

std::size_t scaled(std::size_t n, double scale, std::size_t floor_n = 10) {
    return std::max(floor_n, static_cast<std::size_t>(std::llround(static_cast<double>(n) * scale)));
}

struct Suite {
    double scale = 1.0;
    std::uint64_t seed = 1;
    unsigned workers = 0;
    ParamVector params;
};

// 1. P(T1 < T0) = psi(1) eps for the Feller mass started at eps.
Outcome criterion_hit(const Suite &s) {
    const double z = 0.05;
    const std::size_t n = scaled(200000, s.scale);
    std::vector<char> hit(n, 0);
    parallel_for(n, s.workers, [&](std::size_t k) {
        RngStream rng(s.seed, (1ULL << 42) + k);
        hit[k] = feller_hit_one_before_zero(z, rng).hit_one ? 1 : 0;
    });
    const auto hits = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
    const double p = static_cast<double>(hits) / static_cast<double>(n);
    const double tol = 3.0 * binomial_sd(z, n);
    std::ostringstream os;
    os << "freq=" << p << " target=0.05 |diff|=" << std::fabs(p - z) << " tol(3sd)=" << tol << " N=" << n;
    return {std::fabs(p - z) <= tol, "", os.str()};
}

// 2. Zero fraction exp(-2z/t) at three (z, t).
Outcome criterion_survival(const Suite &s) {
    std::vector<CheckResult> checks;
    for (auto [z, t] : {std::pair{0.1, 1.0}, {0.5, 1.0}, {0.2, 0.5}}) {
        checks.push_back(check_survival(z, t, scaled(100000, s.scale), s.seed, 3.0));
    }
    return from_checks(checks);
}

// 3. Laplace transform at ten random (lambda, z, t).
Outcome criterion_laplace(const Suite &s) {
    return from_checks(check_laplace(10, scaled(100000, s.scale), s.seed, 3.0));
}

// 4. Rejection-conditioned lattice mass against 1/4 BESQ^4.
Outcome criterion_conditioned(const Suite &s) {
    ConditioningConfig cfg;
    cfg.params = s.params;
    cfg.seed = s.seed;
    cfg.workers = s.workers;
    cfg.target_accepted = scaled(cfg.target_accepted, s.scale, 50);
    cfg.comparator_samples = scaled(cfg.comparator_samples, s.scale, 500);
    const ConditioningReport r = run_conditioning(cfg);
    std::ostringstream os;
    os.precision(4);
    os << "KS p=" << r.ks.p_value << " D=" << r.ks.statistic << " allowance=" << r.allowance << " accepted=" << r.accepted
       << "/" << r.replicas << " acceptance=" << r.acceptance.estimate << " [" << r.acceptance.lo << ","
       << r.acceptance.hi << "]";
    for (const auto &p : r.consistency) {
        os << " " << p.name << "_z=" << p.z;
    }
    os << " delta1=" << r.delta1 << " runtime=" << r.runtime_s << "s";
    return {r.accepted == cfg.target_accepted && r.ks.p_value > 0.01, "", os.str()};
}

// 5. Deterministic kernel.
Outcome criterion_kernel(const Suite &s) {
    std::vector<CheckResult> checks;
    checks.push_back(check_a_of_r(10000, 20));
    checks.push_back(check_integral_quadrature(100, s.seed));
    checks.push_back(check_allocate_exponents(1000, s.seed));
    checks.push_back(check_imc_domination(1000, 100, s.seed));
    checks.push_back(check_contact_time(1000, s.seed));
    return from_checks(checks);
}

// 6. Decomposition identity and allocation orthogonality.
Outcome criterion_decomposition(const Suite &s) {
    return from_checks({check_decomposition(10000, s.seed),
                        check_allocation_orthogonality(1000, s.seed)});
}

// 7. Immigration law of large numbers.
Outcome criterion_lln(const Suite &s) { return from_checks({check_lln(1e-3, 1.0, s.seed, 3.0)}); }

// 8. Mean total mass at three times.
Outcome criterion_mean_mass(const Suite &s) {
    MeanMassConfig cfg;
    cfg.sim.seed = s.seed;
    cfg.replicas = scaled(cfg.replicas, s.scale);
    cfg.workers = s.workers;
    const MeanMassReport r = run_mean_mass(cfg);
    bool ok = true;
    std::ostringstream os;
    os.precision(4);
    for (const auto &row : r.rows) {
        ok = ok && std::fabs(row.z) <= 3.0;
        os << "t=" << row.t << ": mean=" << row.mass.mean() << " expected=" << row.expected << " z=" << row.z << "; ";
    }
    os << "replicas=" << cfg.replicas;
    return {ok, "", os.str()};
}

// 9. Covariation bound on 99% of coupled runs.
Outcome criterion_covariation(const Suite &s) {
    CovariationConfig cfg;
    cfg.sim.seed = s.seed;
    cfg.runs = scaled(cfg.runs, s.scale);
    cfg.workers = s.workers;
    const CovariationSummary r = run_covariation(cfg);
    const double frac = static_cast<double>(r.bracket_holds) / static_cast<double>(r.runs);
    std::ostringstream os;
    os.precision(4);
    os << "holds=" << r.bracket_holds << "/" << r.runs << " (" << frac << ") runs_with_pairs=" << r.runs_with_pairs
       << " realized_holds=" << r.realized_holds << " min_margin=" << r.min_margin;
    return {frac >= 0.99, "", os.str()};
}

// 10. Separation floor and the sup-norm implication, with the K* sensitivity table.
Outcome criterion_separation(const Suite &s) {
    SeparationConfig cfg;
    cfg.params = s.params;
    cfg.k_star = 1.0;
    cfg.r = derive_constants(s.params, cfg.k_star).r0;
    cfg.replicas = scaled(cfg.replicas, s.scale, 100);
    cfg.seed = s.seed;
    cfg.workers = s.workers;
    cfg.k_star_table = {0.3, 0.25, 0.2};
    cfg.table_replicas = scaled(cfg.table_replicas, s.scale, 20);
    const SeparationReport r = run_separation(cfg);
    bool ok = !r.abort_limit_exceeded;
    bool amber = false;
    std::ostringstream os;
    os.precision(4);
    os << "r=" << cfg.r << " Delta=" << r.delta;
    auto describe_rows = [&](const std::vector<SeparationRow> &rows, bool binding) {
        for (const auto &row : rows) {
            os << " | eps=" << row.eps << " S=" << row.s_freq.successes << "/" << row.replicas
               << " floor=" << row.floor << " sd=" << row.floor_sd << " sup>=Delta=" << row.sup_ge_delta.successes
               << " implication_violations=" << row.implication_violations << " verdict=" << row.verdict
               << (row.degenerate ? " (degenerate: S(r) empty by construction)" : "");
            if (binding) {
                ok = ok && row.verdict != "FAIL" && row.implication_violations == 0;
                amber = amber || row.verdict == "AMBER";
            }
        }
    };
    describe_rows(r.rows, true);
    for (const auto &t : r.sensitivity) {
        os << " || K*=" << t.k_star << " r=" << cfg.table_r_fraction * t.r0;
        describe_rows(t.rows, false);
    }
    os << " runtime=" << r.runtime_s << "s";
    return {ok, ok && amber ? "AMBER" : "", os.str()};
}

// 11. Support propagation slope.
Outcome criterion_support(const Suite &s) {
    SupportScalingConfig cfg;
    cfg.seed = s.seed;
    cfg.workers = s.workers;
    cfg.replicas = scaled(cfg.replicas, s.scale, 100);
    const SupportScalingReport r = run_support_scaling(cfg);
    std::ostringstream os;
    os.precision(4);
    for (const auto &c : r.cells) {
        os << "(eps=" << c.eps << ",r=" << c.r << "):" << c.freq.successes << "/" << c.freq.trials << " ";
    }
    const bool fitted = r.cells_used >= 3;
    const double err = std::fabs(r.fit.slope - 1.0);
    os << "slope=" << r.fit.slope << " se=" << r.fit.slope_se << " |slope-1|=" << err << " cells_used=" << r.cells_used
       << " runtime=" << r.runtime_s << "s";
    return {fitted && err < 0.3, "", os.str()};
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Acceptance criteria 1-11"};
    Suite suite;
    std::vector<int> only;
    app.add_option("--scale", suite.scale, "Sample-size multiplier (1 = full size)");
    app.add_option("--seed", suite.seed, "Base seed");
    app.add_option("--workers", suite.workers, "Worker threads (0 = logical cores)");
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<const char *, std::function<Outcome(const Suite &)>>> criteria = {
        {"hitting probability", criterion_hit},
        {"survival probability", criterion_survival},
        {"Laplace transform", criterion_laplace},
        {"conditioned law", criterion_conditioned},
        {"deterministic kernel", criterion_kernel},
        {"decomposition identity", criterion_decomposition},
        {"immigration LLN", criterion_lln},
        {"mean mass", criterion_mean_mass},
        {"covariation bound", criterion_covariation},
        {"separation floor", criterion_separation},
        {"support propagation", criterion_support},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k + 1);
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) {
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].second(suite);
        } catch (const std::exception &e) {
            o = {false, "", std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const std::string verdict = !o.verdict.empty() ? o.verdict : (o.passed ? "PASS" : "FAIL");
        std::printf("%s criterion %d (%s) [%.1fs]: %s\n", verdict.c_str(), id, criteria[k].first, secs,
                    o.detail.c_str());
        std::fflush(stdout);
        failures += o.passed ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
