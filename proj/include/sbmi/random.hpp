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

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>

namespace sbmi {

/// Philox4x32-10 counter-based bijection (Salmon et al. 2011).
struct Philox4x32 {
    using ctr_type = std::array<std::uint32_t, 4>;
    using key_type = std::array<std::uint32_t, 2>;

    static ctr_type apply(ctr_type ctr, key_type key) noexcept;
};

/// Stream purposes. A lattice stream id is purpose + 16 * replica.
enum class StreamPurpose : std::uint32_t {
    shared_noise = 0,
    aux_x = 1,
    aux_y = 2,
    targets_x = 3,
    targets_y = 4,
    scalar = 5,
    diagnostics = 6,
};

constexpr std::uint32_t stream_id(StreamPurpose purpose, std::uint32_t replica) noexcept {
    return static_cast<std::uint32_t>(purpose) + 16u * replica;
}

/// Stateless keyed noise: (seed, stream, step, cell, block) fixes four outputs.
class NoiseKey {
public:
    NoiseKey() = default;
    NoiseKey(std::uint64_t seed, std::uint32_t stream) noexcept : seed_(seed), stream_(stream) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint32_t stream() const noexcept { return stream_; }

    Philox4x32::ctr_type bits(std::uint64_t step, std::uint32_t cell, std::uint32_t block) const noexcept;

    /// Four standard normals for block `block` of (step, cell), one per 32-bit word by inversion.
    std::array<double, 4> normals(std::uint64_t step, std::uint32_t cell, std::uint32_t block) const noexcept;

    /// One standard normal per cell in [cell_lo, cell_lo + n): cell c uses lane c % 4 of block
    /// (c / 4), so the value for a cell does not depend on the requested range. If `upper` is
    /// non-null it receives 1 - Phi(z) for each normal, computed exactly from the source word.
    void cell_normals(std::uint64_t step, std::uint32_t cell_lo, std::size_t n, double *out,
                      double *upper = nullptr) const noexcept;

    /// `n` normals private to (step, cell), e.g. auxiliary allocation noise.
    void cell_vector(std::uint64_t step, std::uint32_t cell, std::size_t n, double *out) const noexcept;

private:
    std::uint64_t seed_ = 0;
    std::uint32_t stream_ = 0;
};

/// Sequential generator on top of Philox; satisfies UniformRandomBitGenerator.
class RngStream {
public:
    using result_type = std::uint32_t;

    RngStream() = default;
    RngStream(std::uint64_t seed, std::uint64_t stream) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;

    /// Uniform on (0,1) with 53 random bits; never returns 0 or 1.
    double uniform() noexcept;
    double normal() noexcept;
    double exponential() noexcept;
    /// Poisson(mean); inversion for small means, PTRS otherwise via std::poisson_distribution.
    std::uint64_t poisson(double mean);
    /// Gamma(shape, 1).
    double gamma(double shape);

    /// Independent child stream derived from this stream's key.
    RngStream split(std::uint64_t child) const noexcept;

private:
    void refill() noexcept;

    Philox4x32::key_type key_{0, 0};
    std::uint64_t stream_ = 0;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    unsigned pos_ = 4;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

/// Standard normal CDF.
double normal_cdf(double x) noexcept;

/// Phi^{-1}(1 - upper) given both tail probabilities (lower + upper = 1); Wichura's AS241,
/// relative accuracy about 1e-16.
double normal_quantile(double lower, double upper) noexcept;

}  // namespace sbmi
