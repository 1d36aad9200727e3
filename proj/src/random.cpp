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

#include "sbmi/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace sbmi {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t &hi, std::uint32_t &lo) noexcept {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

// Word x maps to the open interval: lower = (x + 0.5) 2^-32, upper = (2^32 - x - 0.5) 2^-32, both exact.
inline double word_lower(std::uint32_t x) noexcept { return (static_cast<double>(x) + 0.5) * 0x1p-32; }
inline double word_upper(std::uint32_t x) noexcept {
    return (0x1p32 - static_cast<double>(x) - 0.5) * 0x1p-32;
}

inline double word_normal(std::uint32_t x) noexcept { return normal_quantile(word_lower(x), word_upper(x)); }

}  // namespace

Philox4x32::ctr_type Philox4x32::apply(ctr_type c, key_type k) noexcept {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kM0, c[0], hi0, lo0);
        mulhilo(kM1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kW0;
        k[1] += kW1;
    }
    return c;
}

Philox4x32::ctr_type NoiseKey::bits(std::uint64_t step, std::uint32_t cell, std::uint32_t block) const noexcept {
    // Step occupies 32 bits of the counter plus the upper half of the key word mix;
    // simulations never exceed 2^32 steps.
    const Philox4x32::ctr_type ctr{cell, static_cast<std::uint32_t>(step), stream_, block};
    const Philox4x32::key_type key{static_cast<std::uint32_t>(seed_),
                                   static_cast<std::uint32_t>(seed_ >> 32) ^ static_cast<std::uint32_t>(step >> 32)};
    return Philox4x32::apply(ctr, key);
}

std::array<double, 4> NoiseKey::normals(std::uint64_t step, std::uint32_t cell, std::uint32_t block) const noexcept {
    const auto w = bits(step, cell, block);
    return {word_normal(w[0]), word_normal(w[1]), word_normal(w[2]), word_normal(w[3])};
}

namespace {

constexpr std::size_t kBatch = 16;  // Philox blocks per vectorized batch

// Central-region rational of AS241; exact for |lower - 1/2| <= 0.425, garbage (but finite) outside.
inline double quantile_central(double lower) noexcept {
    const double q = lower - 0.5;
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
}

// Philox4x32-10 on counters {b0 + i, step_lo, stream, 0} for i < kBatch, structure-of-arrays so
// the rounds vectorize; w[lane][i] equals word `lane` of the scalar bijection.
void philox_batch(std::uint32_t b0, std::uint32_t step_lo, std::uint32_t stream, std::uint32_t k0, std::uint32_t k1,
                  std::uint32_t (&w)[4][kBatch]) noexcept {
    std::uint32_t *c0 = w[0];
    std::uint32_t *c1 = w[1];
    std::uint32_t *c2 = w[2];
    std::uint32_t *c3 = w[3];
    for (std::size_t i = 0; i < kBatch; ++i) {
        c0[i] = b0 + static_cast<std::uint32_t>(i);
        c1[i] = step_lo;
        c2[i] = stream;
        c3[i] = 0;
    }
    for (int round = 0; round < 10; ++round) {
        for (std::size_t i = 0; i < kBatch; ++i) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c0[i];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c2[i];
            const std::uint32_t n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1[i] ^ k0;
            const std::uint32_t n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3[i] ^ k1;
            c1[i] = static_cast<std::uint32_t>(p1);
            c3[i] = static_cast<std::uint32_t>(p0);
            c0[i] = n0;
            c2[i] = n2;
        }
        k0 += kW0;
        k1 += kW1;
    }
}

}  // namespace

void NoiseKey::cell_normals(std::uint64_t step, std::uint32_t cell_lo, std::size_t n, double *out,
                            double *upper) const noexcept {
    if (n == 0) {
        return;
    }
    const std::uint32_t cell_hi = cell_lo + static_cast<std::uint32_t>(n);  // exclusive
    const std::uint32_t first_block = cell_lo / 4;
    const std::uint32_t last_block = (cell_hi - 1) / 4;
    const std::uint32_t k0 = static_cast<std::uint32_t>(seed_);
    const std::uint32_t k1 = static_cast<std::uint32_t>(seed_ >> 32) ^ static_cast<std::uint32_t>(step >> 32);
    const std::uint32_t step_lo = static_cast<std::uint32_t>(step);

    alignas(64) std::uint32_t w[4][kBatch];
    alignas(64) double lo[4 * kBatch], up[4 * kBatch], z[4 * kBatch];
    for (std::uint32_t b0 = first_block; b0 <= last_block; b0 += kBatch) {
        philox_batch(b0, step_lo, stream_, k0, k1, w);
        // Lane-major scratch: slot lane * kBatch + i holds word `lane` of block b0 + i.
        for (std::size_t lane = 0; lane < 4; ++lane) {
            for (std::size_t i = 0; i < kBatch; ++i) {
                lo[lane * kBatch + i] = word_lower(w[lane][i]);
                up[lane * kBatch + i] = word_upper(w[lane][i]);
            }
        }
        // Central rational everywhere (vectorized), then the few tail slots (about 15%) exactly.
        std::uint8_t tail[4 * kBatch];
        std::size_t n_tail = 0;
        for (std::size_t i = 0; i < 4 * kBatch; ++i) {
            z[i] = quantile_central(lo[i]);
        }
        for (std::size_t i = 0; i < 4 * kBatch; ++i) {
            tail[n_tail] = static_cast<std::uint8_t>(i);
            n_tail += std::fabs(lo[i] - 0.5) > 0.425 ? 1 : 0;
        }
        for (std::size_t t = 0; t < n_tail; ++t) {
            const std::size_t i = tail[t];
            z[i] = normal_quantile(lo[i], up[i]);
        }
        const std::uint64_t base = static_cast<std::uint64_t>(b0) * 4;
        const std::uint64_t from = std::max<std::uint64_t>(base, cell_lo);
        const std::uint64_t to = std::min<std::uint64_t>(base + 4 * kBatch, cell_hi);
        for (std::uint64_t c = from; c < to; ++c) {
            const std::size_t slot = ((c - base) % 4) * kBatch + (c - base) / 4;
            out[c - cell_lo] = z[slot];
            if (upper) {
                upper[c - cell_lo] = up[slot];
            }
        }
    }
}

void NoiseKey::cell_vector(std::uint64_t step, std::uint32_t cell, std::size_t n, double *out) const noexcept {
    // Blocks are offset by one so that the per-cell vector never aliases the lane layout of
    // cell_normals on the same stream.
    std::size_t filled = 0;
    for (std::uint32_t block = 1; filled < n; ++block) {
        const auto z = normals(step, cell, block);
        for (std::size_t lane = 0; lane < 4 && filled < n; ++lane) {
            out[filled++] = z[lane];
        }
    }
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream) noexcept
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32) ^ 0x5bd1e995u}, stream_(stream) {}

void RngStream::refill() noexcept {
    const Philox4x32::ctr_type ctr{static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                                   static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    buf_ = Philox4x32::apply(ctr, key_);
    ++counter_;
    pos_ = 0;
}

RngStream::result_type RngStream::operator()() noexcept {
    if (pos_ == 4) {
        refill();
    }
    return buf_[pos_++];
}

double RngStream::uniform() noexcept {
    const std::uint64_t hi = (*this)() >> 5;  // 27 bits
    const std::uint64_t lo = (*this)() >> 6;  // 26 bits
    return (static_cast<double>((hi << 26) | lo) + 0.5) * 0x1p-53;
}

double RngStream::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double th = 2.0 * std::numbers::pi * uniform();
    spare_normal_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
}

double RngStream::exponential() noexcept { return -std::log(uniform()); }

std::uint64_t RngStream::poisson(double mean) {
    if (mean <= 0.0) {
        return 0;
    }
    if (mean < 30.0) {
        // Inversion by sequential search.
        const double u = uniform();
        double p = std::exp(-mean);
        double cdf = p;
        std::uint64_t k = 0;
        while (u > cdf && p > 0.0) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
        }
        return k;
    }
    std::poisson_distribution<std::uint64_t> d(mean);
    return d(*this);
}

double RngStream::gamma(double shape) {
    std::gamma_distribution<double> d(shape, 1.0);
    return d(*this);
}

RngStream RngStream::split(std::uint64_t child) const noexcept {
    RngStream s;
    const auto mixed = Philox4x32::apply(
        {key_[0], key_[1], static_cast<std::uint32_t>(child), static_cast<std::uint32_t>(child >> 32)},
        {static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)});
    s.key_ = {mixed[0], mixed[1]};
    s.stream_ = (static_cast<std::uint64_t>(mixed[2]) << 32) | mixed[3];
    return s;
}

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

double normal_quantile(double lower, double upper) noexcept {
    const double q = lower - 0.5;
    if (std::fabs(q) <= 0.425) {
        return quantile_central(lower);
    }
    const bool upper_tail = q > 0.0;
    double r = std::sqrt(-std::log(upper_tail ? upper : lower));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                   1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
                4.6303378461565452959) * r + 1.42343711074968357734) /
              (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                   0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
                2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                   0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
                5.4637849111641143699) * r + 6.6579046435011037772) /
              (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                   7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
                0.59983220655588793769) * r + 1.0);
    }
    return upper_tail ? val : -val;
}

}  // namespace sbmi
