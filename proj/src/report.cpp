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

#include "sbmi/report.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>

#include "sbmi/config.hpp"
#include "sbmi/errors.hpp"
#include "sbmi/stats.hpp"

namespace sbmi {

namespace {

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::ofstream open_out(const std::string &path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw Error("cannot write '" + path + "'");
    }
    return f;
}

}  // namespace

std::string header_comment(const ArtifactHeader &h, const std::string &prefix) {
    return prefix + " sbmi " + h.command + " config_digest=" + hex64(h.config_digest) +
           " seed=" + std::to_string(h.seed);
}

Json make_report(const ArtifactHeader &h, const Json &body, double runtime_s) {
    Json r;
    r["header"] = Json{{"tool", "sbmi"},
                       {"command", h.command},
                       {"config_digest", hex64(h.config_digest)},
                       {"seed", h.seed},
                       {"timestamp", utc_timestamp()},
                       {"runtime_s", runtime_s}};
    for (const auto &[k, v] : body.items()) {
        r[k] = v;
    }
    r["digest"] = hex64(report_digest(r));
    return r;
}

std::uint64_t report_digest(const Json &report) {
    Json copy = report;
    copy.erase("digest");
    if (copy.contains("header")) {
        copy["header"].erase("timestamp");
        copy["header"].erase("runtime_s");
    }
    const std::string s = copy.dump();
    return fnv1a(s.data(), s.size());
}

void write_json(const std::string &path, const Json &report) {
    auto f = open_out(path);
    f << report.dump(2) << '\n';
    if (!f) {
        throw Error("write failed for '" + path + "'");
    }
}

void write_csv(const std::string &path, const ArtifactHeader &h, const std::vector<std::string> &columns,
               const std::vector<std::vector<std::string>> &rows) {
    auto f = open_out(path);
    f << header_comment(h) << '\n';
    for (std::size_t k = 0; k < columns.size(); ++k) {
        f << (k ? "," : "") << columns[k];
    }
    f << '\n';
    for (const auto &row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            f << (k ? "," : "") << row[k];
        }
        f << '\n';
    }
    if (!f) {
        throw Error("write failed for '" + path + "'");
    }
}

void write_text(const std::string &path, const ArtifactHeader &h, const std::string &body) {
    auto f = open_out(path);
    f << header_comment(h) << '\n' << body;
    if (!f) {
        throw Error("write failed for '" + path + "'");
    }
}

std::string fmt_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

}  // namespace sbmi
