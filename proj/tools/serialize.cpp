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

#include "serialize.hpp"

#include <cmath>

#include "sbmi/config.hpp"

namespace sbmi::cli {

Json num(double v) {
    if (std::isfinite(v)) {
        return v;
    }
    return fmt_double(v);
}

Json to_json(const ParamVector &p) {
    return Json{{"eta", p.eta}, {"alpha", p.alpha},           {"L", p.L},   {"beta", p.beta},
                {"beta_prime", p.beta_prime}, {"xi", p.xi}, {"n0", p.n0}};
}

Json to_json(const DerivedConstants &dc) {
    return Json{{"kappa1", num(dc.kappa1)}, {"kappa2", num(dc.kappa2)}, {"kappa3", num(dc.kappa3)},
                {"wp", num(dc.wp)},         {"k_star", num(dc.k_star)}, {"r0", num(dc.r0)}};
}

Json to_json(const Proportion &p) {
    return Json{{"successes", p.successes}, {"trials", p.trials}, {"estimate", num(p.estimate)},
                {"wilson_lo", num(p.lo)},   {"wilson_hi", num(p.hi)}};
}

Json to_json(const RunningStats &s) {
    return Json{{"count", s.count()}, {"mean", num(s.mean())}, {"variance", num(s.variance())}};
}

Json to_json(const KsResult &k) {
    return Json{{"statistic", num(k.statistic)}, {"adjusted", num(k.adjusted)}, {"n_eff", num(k.n_eff)},
                {"p_value", num(k.p_value)}};
}

Json to_json(const CheckResult &c) {
    return Json{{"module", c.module},          {"name", c.name},
                {"statistical", c.statistical}, {"passed", c.passed},
                {"value", num(c.value)},        {"threshold", num(c.threshold)},
                {"detail", c.detail}};
}

Json to_json(const SeparationRow &row) {
    return Json{{"eps", num(row.eps)},
                {"n_index", row.n_index},
                {"degenerate", row.degenerate},
                {"eps_above_eps0", row.eps_above_eps0},
                {"replicas", row.replicas},
                {"aborts", row.aborts},
                {"s_freq", to_json(row.s_freq)},
                {"sup_ge_delta", to_json(row.sup_ge_delta)},
                {"sup_ge_half_delta", to_json(row.sup_ge_half_delta)},
                {"implication_violations", row.implication_violations},
                {"g_total", row.g_total},
                {"gamma_failures", row.gamma_failures},
                {"gamma_censored", row.gamma_censored},
                {"sigma_early", row.sigma_early},
                {"sup_norm", to_json(row.sup_norm)},
                {"floor", num(row.floor)},
                {"floor_sd", num(row.floor_sd)},
                {"us2_max_discrepancy", num(row.us2_max_discrepancy)},
                {"verdict", row.verdict}};
}

Json to_json(const SeparationReport &r) {
    Json rows = Json::array();
    for (const auto &row : r.rows) {
        rows.push_back(to_json(row));
    }
    Json table = Json::array();
    for (const auto &s : r.sensitivity) {
        Json srows = Json::array();
        for (const auto &row : s.rows) {
            srows.push_back(to_json(row));
        }
        table.push_back(Json{{"k_star", num(s.k_star)},
                             {"r0", num(s.r0)},
                             {"delta", num(s.delta)},
                             {"floor", num(s.floor)},
                             {"note", s.note},
                             {"rows", srows}});
    }
    Json eps_list = Json::array();
    for (double e : r.config.eps_list) {
        eps_list.push_back(e);
    }
    const auto &c = r.config;
    return Json{{"config",
                 {{"params", to_json(c.params)},
                  {"k_star", c.k_star},
                  {"eps_list", eps_list},
                  {"r", num(c.r)},
                  {"replicas", c.replicas},
                  {"seed", c.seed},
                  {"dx_factor", c.dx_factor},
                  {"dt_factor", c.dt_factor},
                  {"support_threshold", c.support_threshold},
                  {"noise", c.noise},
                  {"force_equal_targets", c.force_equal_targets},
                  {"floor_allowance", c.floor_allowance},
                  {"table_replicas", c.table_replicas},
                  {"table_r_fraction", c.table_r_fraction},
                  {"table_dx_factor", c.table_dx_factor}}},
                {"constants", to_json(r.constants)},
                {"delta", num(r.delta)},
                {"eps0", num(r.eps0)},
                {"implication_factor", num(r.implication_factor)},
                {"abort_limit_exceeded", r.abort_limit_exceeded},
                {"rows", rows},
                {"sensitivity", table},
                {"warnings", r.warnings}};
}

Json to_json(const ConditioningReport &r) {
    Json pairs = Json::array();
    for (const auto &p : r.consistency) {
        pairs.push_back(Json{{"name", p.name},
                             {"rejection", num(p.rejection)},
                             {"rejection_se", num(p.rejection_se)},
                             {"weighted", num(p.weighted)},
                             {"weighted_se", num(p.weighted_se)},
                             {"z", num(p.z)}});
    }
    const auto &c = r.config;
    return Json{{"config",
                 {{"eps", c.eps},
                  {"t_obs", c.t_obs},
                  {"dx_factor", c.dx_factor},
                  {"dt_factor", c.dt_factor},
                  {"target_accepted", c.target_accepted},
                  {"max_replicas", c.max_replicas},
                  {"comparator_samples", c.comparator_samples},
                  {"allowance_dx", c.allowance_dx},
                  {"rho", c.rho},
                  {"seed", c.seed}}},
                {"replicas", r.replicas},
                {"accepted", r.accepted},
                {"hit_on_lattice", r.hit_on_lattice},
                {"continued", r.continued},
                {"acceptance", to_json(r.acceptance)},
                {"expected_rate", num(r.expected_rate)},
                {"dx", num(r.dx)},
                {"dt", num(r.dt)},
                {"ks", to_json(r.ks)},
                {"allowance", num(r.allowance)},
                {"consistency", pairs},
                {"delta1", num(r.delta1)},
                {"tau_censored_fraction", num(r.tau_censored_fraction)}};
}

}  // namespace sbmi::cli
