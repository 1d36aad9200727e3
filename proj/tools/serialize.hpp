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

#include "sbmi/experiments.hpp"
#include "sbmi/params.hpp"
#include "sbmi/report.hpp"
#include "sbmi/stats.hpp"
#include "sbmi/validation.hpp"

namespace sbmi::cli {

/// Finite values as numbers; infinities and NaN as the strings "inf", "-inf", "nan".
Json num(double v);

Json to_json(const ParamVector &p);
Json to_json(const DerivedConstants &dc);
Json to_json(const Proportion &p);
Json to_json(const RunningStats &s);
Json to_json(const KsResult &k);
Json to_json(const CheckResult &c);
Json to_json(const SeparationRow &row);
Json to_json(const SeparationReport &r);
Json to_json(const ConditioningReport &r);

}  // namespace sbmi::cli
