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

#include <cstddef>
#include <cstdint>
#include <vector>

namespace sbmi {

/// Welford accumulator; merge() is associative so per-worker partials can be combined in order.
class RunningStats {
public:
    void add(double x);
    void merge(const RunningStats &o);

    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    /// Unbiased sample variance; 0 for fewer than two samples.
    double variance() const;
    /// Standard error of the mean.
    double std_error() const;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct Proportion {
    std::size_t successes = 0;
    std::size_t trials = 0;
    double estimate = 0.0;
    double lo = 0.0;  // Wilson interval
    double hi = 0.0;
};

/// Wilson score interval at normal quantile z. Throws InputError if successes > trials.
Proportion wilson(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

/// Binomial standard deviation sqrt(p (1 - p) / n) of a frequency at probability p.
double binomial_sd(double p, std::size_t n);

/// Kolmogorov survival function Q(lambda) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

struct KsResult {
    double statistic = 0.0;  // sup |F_a - F_b|
    double adjusted = 0.0;   // max(0, statistic - allowance)
    double n_eff = 0.0;      // n m / (n + m)
    double p_value = 0.0;    // from `adjusted`, with the Stephens small-sample correction
};

/// Two-sample Kolmogorov-Smirnov test. The allowance is subtracted from the statistic before the
/// p-value is computed. Throws InputError if either sample is empty.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b, double allowance = 0.0);

/// Linear-interpolation sample quantile (type 7). Throws InputError on an empty sample or q outside
/// [0, 1].
double sample_quantile(std::vector<double> v, double q);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
};

/// Ordinary least squares y = intercept + slope x. Throws InputError for fewer than two points or
/// constant x.
LinearFit ols(const std::vector<double> &x, const std::vector<double> &y);

/// FNV-1a 64 over bytes.
std::uint64_t fnv1a(const void *data, std::size_t n, std::uint64_t h = 14695981039346656037ULL);

}  // namespace sbmi
