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
#include <string>
#include <vector>

#include <json.hpp>

namespace sbmi {

using Json = nlohmann::ordered_json;

/// Identity stamped at the top of every artifact.
struct ArtifactHeader {
    std::string command;
    std::uint64_t config_digest = 0;
    std::uint64_t seed = 0;
};

/// "# sbmi <command> config_digest=<hex> seed=<n>" for text artifacts.
std::string header_comment(const ArtifactHeader &h, const std::string &prefix = "#");

/// Document {"header": {...}, <body fields>, "digest": hex}. The digest covers everything except
/// the header's timestamp and runtime_s, so identical runs give identical digests.
Json make_report(const ArtifactHeader &h, const Json &body, double runtime_s);
std::uint64_t report_digest(const Json &report);

/// Writes `report` (pretty-printed) to path; throws Error on I/O failure.
void write_json(const std::string &path, const Json &report);

/// CSV with a header comment line, a column row, then `rows`.
void write_csv(const std::string &path, const ArtifactHeader &h, const std::vector<std::string> &columns,
               const std::vector<std::vector<std::string>> &rows);

/// Gnuplot script with a header comment line.
void write_text(const std::string &path, const ArtifactHeader &h, const std::string &body);

/// Shortest round-trip decimal form.
std::string fmt_double(double v);

}  // namespace sbmi
