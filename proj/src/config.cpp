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

#include "sbmi/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "sbmi/errors.hpp"
#include "sbmi/stats.hpp"

namespace sbmi {

namespace {

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string &key, const std::string &value, const char *what) {
    throw ConfigError("invalid value for key '" + key + "': '" + value + "' (" + what + ")");
}

double parse_double(const std::string &key, const std::string &v) {
    std::size_t pos = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception &) {
        bad_value(key, v, "expected a real number");
    }
    if (pos != v.size()) {
        bad_value(key, v, "expected a real number");
    }
    return out;
}

}  // namespace

Config Config::parse(std::istream &is, const std::string &source) {
    Config c;
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw ConfigError(source + ":" + std::to_string(lineno) + ": malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
        }
        c.set(section.empty() ? key : section + "." + key, trim(line.substr(eq + 1)));
    }
    return c;
}

Config Config::load(const std::string &path) {
    std::ifstream f(path);
    if (!f) {
        throw ConfigError("cannot read config file '" + path + "'");
    }
    return parse(f, path);
}

void Config::set(const std::string &key, const std::string &value) { values_[key] = value; }

std::string Config::get_string(const std::string &key, const std::string &fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string &key, double fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_double(key, it->second);
}

std::int64_t Config::get_int(const std::string &key, std::int64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    std::int64_t out = 0;
    const auto &v = it->second;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
        bad_value(key, v, "expected an integer");
    }
    return out;
}

std::uint64_t Config::get_u64(const std::string &key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    std::uint64_t out = 0;
    const auto &v = it->second;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
        bad_value(key, v, "expected an unsigned integer");
    }
    return out;
}

bool Config::get_bool(const std::string &key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    const auto &v = it->second;
    if (v == "true" || v == "1" || v == "on" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "off" || v == "no") {
        return false;
    }
    bad_value(key, v, "expected a boolean");
}

std::vector<double> Config::get_list(const std::string &key, const std::vector<double> &fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) {
            bad_value(key, it->second, "empty list element");
        }
        out.push_back(parse_double(key, item));
    }
    if (out.empty()) {
        bad_value(key, it->second, "empty list");
    }
    return out;
}

void Config::check_known(const std::set<std::string> &known) const {
    for (const auto &[k, v] : values_) {
        if (!known.count(k)) {
            throw ConfigError("unknown configuration key '" + k + "'");
        }
    }
}

std::string Config::canonical() const {
    std::string out;
    for (const auto &[k, v] : values_) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

std::uint64_t Config::digest() const {
    const std::string s = canonical();
    return fnv1a(s.data(), s.size());
}

const std::set<std::string> &known_config_keys() {
    static const std::set<std::string> keys = {
        "params.eta", "params.alpha", "params.L", "params.beta", "params.beta_prime", "params.xi", "params.n0",
        "params.k_star", "params.wp",
        "psi.shape", "psi.lo", "psi.hi", "psi.amplitude",
        "lattice.eps", "lattice.horizon", "lattice.dx", "lattice.dt_factor", "lattice.margin", "lattice.scheme",
        "lattice.noise", "lattice.simulate_y", "lattice.force_equal_targets", "lattice.bump",
        "lattice.support_threshold", "lattice.beta", "lattice.max_x_clusters", "lattice.max_y_clusters",
        "run.seed", "run.replicas", "run.workers", "run.frame_every",
        "condition.eps", "condition.t_obs", "condition.accepted", "condition.max_replicas",
        "condition.comparator", "condition.allowance_dx", "condition.rho", "condition.dx_factor",
        "condition.dt_factor",
        "separation.r", "separation.eps_list", "separation.replicas", "separation.k_star_table",
        "separation.table_replicas", "separation.dx_factor", "separation.dt_factor", "separation.allowance",
        "separation.table_r_fraction", "separation.table_dx_factor", "separation.noise",
    };
    return keys;
}

ParamVector params_from(const Config &c) {
    ParamVector p;
    p.eta = c.get_double("params.eta", p.eta);
    p.alpha = c.get_double("params.alpha", p.alpha);
    p.L = c.get_double("params.L", p.L);
    p.beta = c.get_double("params.beta", p.beta);
    p.beta_prime = c.get_double("params.beta_prime", p.beta_prime);
    p.xi = c.get_double("params.xi", p.xi);
    p.n0 = static_cast<int>(c.get_int("params.n0", p.n0));
    return p;
}

ImmigrationFunction psi_from(const Config &c) {
    ImmigrationFunction psi;
    const std::string shape = c.get_string("psi.shape", "tent");
    if (shape == "tent") {
        psi.shape = PsiShape::tent;
    } else if (shape == "indicator") {
        psi.shape = PsiShape::indicator;
    } else if (shape == "smooth") {
        psi.shape = PsiShape::smooth;
    } else {
        bad_value("psi.shape", shape, "expected tent, indicator or smooth");
    }
    psi.lo = c.get_double("psi.lo", psi.lo);
    psi.hi = c.get_double("psi.hi", psi.hi);
    psi.amplitude = c.get_double("psi.amplitude", psi.amplitude);
    return psi;
}

SimConfig sim_from(const Config &c) {
    SimConfig s;
    s.psi = psi_from(c);
    s.eps = c.get_double("lattice.eps", s.eps);
    s.horizon = c.get_double("lattice.horizon", s.horizon);
    s.dx = c.get_double("lattice.dx", s.dx);
    s.dt_factor = c.get_double("lattice.dt_factor", s.dt_factor);
    s.margin = c.get_double("lattice.margin", s.margin);
    const std::string scheme = c.get_string("lattice.scheme", "qe");
    if (scheme == "qe") {
        s.scheme = NoiseScheme::qe;
    } else if (scheme == "euler") {
        s.scheme = NoiseScheme::truncated_euler;
    } else {
        bad_value("lattice.scheme", scheme, "expected qe or euler");
    }
    s.noise = c.get_bool("lattice.noise", s.noise);
    s.simulate_y = c.get_bool("lattice.simulate_y", s.simulate_y);
    s.force_equal_targets = c.get_bool("lattice.force_equal_targets", s.force_equal_targets);
    const std::string bump = c.get_string("lattice.bump", "triangular");
    if (bump == "triangular") {
        s.bump = BumpShape::triangular;
    } else if (bump == "smooth") {
        s.bump = BumpShape::smooth;
    } else {
        bad_value("lattice.bump", bump, "expected triangular or smooth");
    }
    s.support_threshold = c.get_double("lattice.support_threshold", s.support_threshold);
    s.envelope_beta = c.get_double("lattice.beta", s.envelope_beta);
    if (c.has("lattice.max_x_clusters")) {
        s.max_x_clusters = c.get_u64("lattice.max_x_clusters", 0);
    }
    if (c.has("lattice.max_y_clusters")) {
        s.max_y_clusters = c.get_u64("lattice.max_y_clusters", 0);
    }
    s.seed = c.get_u64("run.seed", s.seed);
    return s;
}

std::string hex64(std::uint64_t v) {
    static const char *digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int k = 15; k >= 0; --k) {
        s[static_cast<std::size_t>(k)] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

}  // namespace sbmi
