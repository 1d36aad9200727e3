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

// Command-line front end: validate, simulate, decompose, condition, separation.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sbmi/config.hpp"
#include "sbmi/errors.hpp"
#include "sbmi/experiments.hpp"
#include "sbmi/params.hpp"
#include "sbmi/report.hpp"
#include "sbmi/spde.hpp"
#include "sbmi/validation.hpp"
#include "serialize.hpp"

namespace fs = std::filesystem;
using namespace sbmi;
using cli::num;
using cli::to_json;

namespace {

// Stable exit-code contract.
constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitUsage = 2;
constexpr int kExitAbort = 3;

/// Raised for malformed flags or configuration; maps to kExitUsage.
struct UsageError : Error {
    using Error::Error;
};

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::string out = "out";
    std::optional<std::string> only;
    std::vector<std::string> sets;
    bool frames = false;
};

struct Context {
    Config config;
    ArtifactHeader header;
    fs::path out;
    unsigned workers = 0;
};

Context make_context(const std::string &command, const Options &o) {
    Context ctx;
    try {
        if (!o.config_path.empty()) {
            ctx.config = Config::load(o.config_path);
        }
        for (const auto &kv : o.sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos || eq == 0) {
                throw UsageError("--set expects key=value, got '" + kv + "'");
            }
            ctx.config.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (o.seed) {
            ctx.config.set("run.seed", std::to_string(*o.seed));
        }
        if (o.workers) {
            ctx.config.set("run.workers", std::to_string(*o.workers));
        }
        ctx.config.check_known(known_config_keys());
        ctx.workers = static_cast<unsigned>(ctx.config.get_u64("run.workers", 0));
        ctx.header = ArtifactHeader{command, ctx.config.digest(), ctx.config.get_u64("run.seed", 1)};
    } catch (const UsageError &) {
        throw;
    } catch (const Error &e) {
        throw UsageError(e.what());
    }
    ctx.out = o.out;
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec || !fs::is_directory(ctx.out)) {
        throw UsageError("output directory '" + o.out + "' is not writable");
    }
    return ctx;
}

/// Typed config access where a bad value is a usage error.
template <class F>
auto usage_guard(F &&f) -> decltype(f()) {
    try {
        return f();
    } catch (const UsageError &) {
        throw;
    } catch (const ConfigError &e) {
        throw UsageError(e.what());
    } catch (const InputError &e) {
        throw UsageError(e.what());
    } catch (const ParameterError &e) {
        throw UsageError(e.what());
    }
}

std::string path_in(const Context &ctx, const char *name) { return (ctx.out / name).string(); }

Json config_echo(const Config &c) {
    Json j = Json::object();
    for (const auto &[k, v] : c.values()) {
        j[k] = v;
    }
    return j;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------------------------

int cmd_validate(const Options &o) {
    Context ctx = make_context("validate", o);
    const auto t0 = std::chrono::steady_clock::now();
    ValidationOptions vo = usage_guard([&] {
        ValidationOptions v;
        v.params = params_from(ctx.config);
        v.psi = psi_from(ctx.config);
        v.k_star = ctx.config.get_double("params.k_star", 1.0);
        v.seed = ctx.header.seed;
        v.workers = ctx.workers;
        return v;
    });
    const auto checks = usage_guard([&] { return run_validation(vo, o.only); });
    Json arr = Json::array();
    std::vector<std::vector<std::string>> rows;
    std::size_t failed = 0;
    for (const auto &c : checks) {
        arr.push_back(to_json(c));
        rows.push_back({c.module, c.name, c.statistical ? "statistical" : "hard", c.passed ? "pass" : "fail",
                        fmt_double(c.value), fmt_double(c.threshold)});
        if (!c.passed) {
            ++failed;
            std::cerr << "FAIL " << c.module << "/" << c.name << ": " << c.detail << "\n";
        }
    }
    const Json body{{"config", config_echo(ctx.config)},
                    {"only", o.only ? Json(*o.only) : Json(nullptr)},
                    {"checks", arr},
                    {"failed", failed},
                    {"passed", failed == 0}};
    write_json(path_in(ctx, "report.json"), make_report(ctx.header, body, seconds_since(t0)));
    write_csv(path_in(ctx, "summary.csv"), ctx.header, {"module", "check", "kind", "result", "value", "threshold"},
              rows);
    std::cout << checks.size() - failed << "/" << checks.size() << " checks passed\n";
    return failed == 0 ? kExitOk : kExitValidation;
}

int cmd_simulate(const Options &o, bool decompose) {
    Context ctx = make_context(decompose ? "decompose" : "simulate", o);
    const auto t0 = std::chrono::steady_clock::now();
    SimConfig sc = usage_guard([&] {
        SimConfig s = sim_from(ctx.config);
        s.record_masses = !decompose;
        s.track_aggregate = decompose;
        s.psi.validate();
        return s;
    });
    const auto frame_every = static_cast<std::uint64_t>(usage_guard([&] {
        return ctx.config.get_u64("run.frame_every", 0);
    }));
    std::unique_ptr<CoupledSystem> sys = usage_guard([&] { return std::make_unique<CoupledSystem>(sc); });

    fs::path frames_dir = ctx.out / "frames";
    if (o.frames) {
        fs::create_directories(frames_dir);
    }
    auto emit_frame = [&] {
        const std::uint64_t s = sys->step_index();
        if (!o.frames || (frame_every > 0 && s % frame_every != 0 && !sys->finished())) {
            return;
        }
        char name[64];
        for (char kind : {'X', 'Y'}) {
            if (kind == 'Y' && !sc.simulate_y) {
                continue;
            }
            std::snprintf(name, sizeof name, "%c_%08llu.frm", kind, static_cast<unsigned long long>(s));
            std::ofstream f(frames_dir / name, std::ios::binary);
            write_frame(f, kind == 'X' ? sys->aggregate_x() : sys->aggregate_y(), s, sys->time());
        }
    };

    std::vector<std::vector<std::string>> rows;
    std::vector<double> x, y;
    double sup_diff = 0.0;
    try {
        sys->apply_births();
        emit_frame();
        while (!sys->finished()) {
            sys->step();
            sys->apply_births();
            if (decompose) {
                if (sys->step_index() % 100 == 0 || sys->finished()) {
                    rows.push_back({std::to_string(sys->step_index()), fmt_double(sys->time()),
                                    fmt_double(sys->max_decomposition_error())});
                }
            } else if (sc.simulate_y) {
                sys->sum_clusters('X', x);
                sys->sum_clusters('Y', y);
                sup_diff = std::max(sup_diff, crap_norm_diff(sys->grid(), x.data(), y.data()).value);
            }
            emit_frame();
            sys->compact();
        }
    } catch (const SimulationAbort &e) {
        std::cerr << "simulation aborted: " << e.what() << "\n";
        const Json body{{"config", config_echo(ctx.config)}, {"aborted", true}, {"reason", e.what()}};
        write_json(path_in(ctx, "report.json"), make_report(ctx.header, body, seconds_since(t0)));
        return kExitAbort;
    }

    Json body{{"config", config_echo(ctx.config)},
              {"eps", sc.eps},
              {"dx", sys->grid().dx},
              {"dt", sys->dt()},
              {"steps", sys->step_index()},
              {"time", sys->time()},
              {"x_clusters", sys->x_clusters().size()},
              {"y_clusters", sys->y_clusters().size()},
              {"x_mass", num(sys->total_mass('X'))},
              {"y_mass", sc.simulate_y ? num(sys->total_mass('Y')) : Json(nullptr)},
              {"aborted", false}};
    if (decompose) {
        const double err = sys->max_decomposition_error();
        body["max_decomposition_error"] = num(err);
        body["passed"] = err <= 1e-10;
        write_csv(path_in(ctx, "summary.csv"), ctx.header, {"step", "time", "max_error"}, rows);
        write_text(path_in(ctx, "plot.gp"), ctx.header,
                   "set datafile separator ','\nset logscale y\nset xlabel 'time'\nset ylabel 'max relative error'\n"
                   "plot 'summary.csv' using 2:3 skip 2 with lines title 'decomposition error'\n");
    } else {
        body["sup_crap_norm_diff"] = num(sup_diff);
        for (const auto &r : sys->mass_records()) {
            rows.push_back({std::to_string(r.step), fmt_double(r.time), std::to_string(r.cluster_id),
                            std::string(1, r.kind), fmt_double(r.mass),
                            r.has_support ? fmt_double(r.support_lo) : "", r.has_support ? fmt_double(r.support_hi) : ""});
        }
        write_csv(path_in(ctx, "summary.csv"), ctx.header,
                  {"step", "time", "cluster_id", "kind", "mass", "support_lo", "support_hi"}, rows);
        write_text(path_in(ctx, "plot.gp"), ctx.header,
                   "set datafile separator ','\nset xlabel 'time'\nset ylabel 'cluster mass'\n"
                   "plot 'summary.csv' using 2:($4 eq 'X' ? $5 : 1/0) skip 2 with dots title 'X clusters', \\\n"
                   "     'summary.csv' using 2:($4 eq 'Y' ? $5 : 1/0) skip 2 with dots title 'Y clusters'\n");
    }
    write_json(path_in(ctx, "report.json"), make_report(ctx.header, body, seconds_since(t0)));
    if (decompose && !body["passed"].get<bool>()) {
        return kExitValidation;
    }
    return kExitOk;
}

int cmd_condition(const Options &o) {
    Context ctx = make_context("condition", o);
    const auto t0 = std::chrono::steady_clock::now();
    ConditioningConfig cc = usage_guard([&] {
        const Config &c = ctx.config;
        ConditioningConfig k;
        k.params = params_from(c);
        k.psi = psi_from(c);
        k.psi.validate();
        k.eps = c.get_double("condition.eps", k.eps);
        k.t_obs = c.get_double("condition.t_obs", k.t_obs);
        k.target_accepted = c.get_u64("condition.accepted", k.target_accepted);
        k.max_replicas = c.get_u64("condition.max_replicas", k.max_replicas);
        k.comparator_samples = c.get_u64("condition.comparator", k.comparator_samples);
        k.allowance_dx = c.get_double("condition.allowance_dx", k.allowance_dx);
        k.rho = c.get_double("condition.rho", k.rho);
        k.dx_factor = c.get_double("condition.dx_factor", k.dx_factor);
        k.dt_factor = c.get_double("condition.dt_factor", k.dt_factor);
        k.seed = ctx.header.seed;
        k.workers = ctx.workers;
        return k;
    });
    ConditioningReport rep;
    try {
        rep = usage_guard([&] { return run_conditioning(cc); });
    } catch (const SimulationAbort &e) {
        std::cerr << "conditioning aborted: " << e.what() << "\n";
        return kExitAbort;
    }
    Json body = to_json(rep);
    body["config_echo"] = config_echo(ctx.config);
    write_json(path_in(ctx, "report.json"), make_report(ctx.header, body, seconds_since(t0)));
    std::vector<std::vector<std::string>> rows;
    for (int q = 1; q < 20; ++q) {
        const double p = q / 20.0;
        rows.push_back({fmt_double(p),
                        rep.accepted_mass.empty() ? "" : fmt_double(sample_quantile(rep.accepted_mass, p)),
                        rep.comparator_mass.empty() ? "" : fmt_double(sample_quantile(rep.comparator_mass, p))});
    }
    write_csv(path_in(ctx, "summary.csv"), ctx.header, {"quantile", "lattice_conditioned", "besq4_comparator"}, rows);
    write_text(path_in(ctx, "plot.gp"), ctx.header,
               "set datafile separator ','\nset xlabel 'BESQ4 comparator quantile'\n"
               "set ylabel 'conditioned lattice quantile'\n"
               "plot 'summary.csv' using 3:2 skip 2 with points title 'Q-Q', x with lines title 'identity'\n");
    std::cout << "accepted " << rep.accepted << "/" << rep.replicas << ", KS p = " << rep.ks.p_value << "\n";
    return kExitOk;
}

std::vector<std::string> row_csv(const std::string &table, double k_star, const SeparationRow &r) {
    return {table,
            fmt_double(k_star),
            fmt_double(r.eps),
            std::to_string(r.replicas),
            std::to_string(r.aborts),
            fmt_double(r.s_freq.estimate),
            fmt_double(r.s_freq.lo),
            fmt_double(r.s_freq.hi),
            fmt_double(r.sup_ge_delta.estimate),
            fmt_double(r.sup_ge_half_delta.estimate),
            std::to_string(r.implication_violations),
            fmt_double(r.floor),
            fmt_double(r.floor_sd),
            r.verdict,
            r.degenerate ? "1" : "0"};
}

int cmd_separation(const Options &o) {
    Context ctx = make_context("separation", o);
    const auto t0 = std::chrono::steady_clock::now();
    const Config &c = ctx.config;
    SeparationConfig sc = usage_guard([&] {
        SeparationConfig s;
        s.params = params_from(c);
        s.k_star = c.get_double("params.k_star", s.k_star);
        if (c.has("params.wp")) {
            s.wp = c.get_double("params.wp", 0.0);
        }
        s.psi = psi_from(c);
        s.psi.validate();
        s.eps_list = c.get_list("separation.eps_list", s.eps_list);
        s.replicas = c.get_u64("separation.replicas", s.replicas);
        s.seed = ctx.header.seed;
        s.dx_factor = c.get_double("separation.dx_factor", s.dx_factor);
        s.dt_factor = c.get_double("separation.dt_factor", s.dt_factor);
        s.support_threshold = c.get_double("lattice.support_threshold", s.support_threshold);
        s.noise = c.get_bool("separation.noise", s.noise);
        s.force_equal_targets = c.get_bool("lattice.force_equal_targets", s.force_equal_targets);
        s.floor_allowance = c.get_double("separation.allowance", s.floor_allowance);
        s.k_star_table = c.get_list("separation.k_star_table", s.k_star_table);
        s.table_replicas = c.get_u64("separation.table_replicas", s.table_replicas);
        s.table_r_fraction = c.get_double("separation.table_r_fraction", s.table_r_fraction);
        s.table_dx_factor = c.get_double("separation.table_dx_factor", s.table_dx_factor);
        s.workers = ctx.workers;
        if (!c.has("separation.r")) {
            throw UsageError("separation requires separation.r (a number or r0)");
        }
        const std::string r = c.get_string("separation.r", "");
        if (r == "r0") {
            s.r = derive_constants(s.params, s.k_star, s.wp).r0;
        } else {
            s.r = c.get_double("separation.r", 0.0);
        }
        return s;
    });
    SeparationReport rep = usage_guard([&] { return run_separation(sc); });
    for (const auto &w : rep.warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    Json body = to_json(rep);
    body["config_echo"] = config_echo(c);
    write_json(path_in(ctx, "report.json"), make_report(ctx.header, body, seconds_since(t0)));

    std::vector<std::vector<std::string>> rows;
    for (const auto &r : rep.rows) {
        rows.push_back(row_csv("main", sc.k_star, r));
    }
    for (const auto &s : rep.sensitivity) {
        for (const auto &r : s.rows) {
            rows.push_back(row_csv("sensitivity", s.k_star, r));
        }
    }
    write_csv(path_in(ctx, "summary.csv"), ctx.header,
              {"table", "k_star", "eps", "replicas", "aborts", "s_freq", "s_lo", "s_hi", "sup_ge_delta",
               "sup_ge_half_delta", "implication_violations", "floor", "floor_sd", "verdict", "degenerate"},
              rows);
    write_text(path_in(ctx, "plot.gp"), ctx.header,
               "set datafile separator ','\nset logscale x\nset xlabel 'eps'\nset ylabel 'frequency'\n"
               "plot 'summary.csv' using 3:($1 eq 'main' ? $6 : 1/0):7:8 skip 2 with yerrorbars title 'P(S(r))', \\\n"
               "     'summary.csv' using 3:($1 eq 'main' ? $12 : 1/0) skip 2 with lines title 'floor', \\\n"
               "     'summary.csv' using 3:($1 eq 'main' ? $9 : 1/0) skip 2 with points title 'sup >= Delta'\n");

    for (const auto &r : rep.rows) {
        std::cout << "eps=" << r.eps << " S=" << r.s_freq.estimate << " floor=" << r.floor << " verdict=" << r.verdict
                  << " implication_violations=" << r.implication_violations << "\n";
    }
    if (rep.abort_limit_exceeded) {
        std::cerr << "more than 1% of replicas aborted\n";
        return kExitAbort;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Coupled super-Brownian motions with immigration: validation and separation experiments"};
    app.require_subcommand(1);
    Options o;
    auto add_common = [&](CLI::App *sub) {
        sub->add_option("--config", o.config_path, "Flat key = value config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Base seed (overrides run.seed)");
        sub->add_option("--workers", o.workers, "Worker threads (0 = logical cores)");
        sub->add_option("--out", o.out, "Output directory")->capture_default_str();
        sub->add_option("--set", o.sets, "Override a config key: key=value (repeatable)");
    };
    auto *validate = app.add_subcommand("validate", "Run the validator suite");
    add_common(validate);
    validate->add_option("--only", o.only, "Run one module's validators");
    auto *simulate = app.add_subcommand("simulate", "Run one coupled lattice simulation");
    add_common(simulate);
    simulate->add_flag("--frames", o.frames, "Write binary field frames to <out>/frames");
    auto *decompose = app.add_subcommand("decompose", "Check the cluster decomposition identity");
    add_common(decompose);
    auto *condition = app.add_subcommand("condition", "Rejection conditioning on hitting 1 before 0");
    add_common(condition);
    auto *separation = app.add_subcommand("separation", "Separation experiment");
    add_common(separation);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (validate->parsed()) {
            return cmd_validate(o);
        }
        if (simulate->parsed()) {
            return cmd_simulate(o, false);
        }
        if (decompose->parsed()) {
            return cmd_simulate(o, true);
        }
        if (condition->parsed()) {
            return cmd_condition(o);
        }
        return cmd_separation(o);
    } catch (const UsageError &e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const SimulationAbort &e) {
        std::cerr << "aborted: " << e.what() << "\n";
        return kExitAbort;
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitAbort;
    }
}
