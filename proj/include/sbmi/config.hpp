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

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sbmi/params.hpp"
#include "sbmi/spde.hpp"

namespace sbmi {

/// Flat key/value configuration. Lines are `key = value`; `#` starts a comment; a `[section]`
/// line prefixes the following keys with `section.`. Later assignments override earlier ones.
class Config {
public:
    /// Throws ConfigError naming the line for malformed input.
    static Config parse(std::istream &is, const std::string &source = "<stream>");
    /// Throws ConfigError if the file cannot be read.
    static Config load(const std::string &path);

    void set(const std::string &key, const std::string &value);
    bool has(const std::string &key) const { return values_.count(key) > 0; }
    const std::map<std::string, std::string> &values() const { return values_; }

    /// Typed getters; a present but unparsable value throws ConfigError naming the key.
    std::string get_string(const std::string &key, const std::string &fallback) const;
    double get_double(const std::string &key, double fallback) const;
    std::int64_t get_int(const std::string &key, std::int64_t fallback) const;
    std::uint64_t get_u64(const std::string &key, std::uint64_t fallback) const;
    bool get_bool(const std::string &key, bool fallback) const;
    /// Comma-separated reals.
    std::vector<double> get_list(const std::string &key, const std::vector<double> &fallback) const;

    /// Throws ConfigError naming the first key not in `known`.
    void check_known(const std::set<std::string> &known) const;

    /// Sorted `key=value` lines; the digest is FNV-1a 64 of this text.
    std::string canonical() const;
    std::uint64_t digest() const;

private:
    std::map<std::string, std::string> values_;
};

/// Every key the command-line tool understands.
const std::set<std::string> &known_config_keys();

ParamVector params_from(const Config &c);
ImmigrationFunction psi_from(const Config &c);
/// Lattice settings (`lattice.*`, `psi.*`, `run.seed`).
SimConfig sim_from(const Config &c);

/// Hex rendering used in artifact headers.
std::string hex64(std::uint64_t v);

}  // namespace sbmi
