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
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "sbmi/random.hpp"

namespace sbmi {

/// Uniform cell-centred grid on [x_min, x_max).
struct Grid {
    double x_min = -2.0;
    double x_max = 3.0;
    std::size_t n_cells = 0;
    double dx = 0.0;

    Grid() = default;
    Grid(double lo, double hi, std::size_t n);
    /// Grid with spacing close to `dx` covering [lo, hi]; the cell count is rounded up.
    static Grid with_spacing(double lo, double hi, double dx);

    double x(std::size_t k) const { return x_min + (static_cast<double>(k) + 0.5) * dx; }
    /// Index of the cell containing x, clamped to the grid.
    std::size_t cell_of(double x) const;
    bool operator==(const Grid &o) const;
};

/// Nonnegative density on a Grid.
struct LatticeField {
    Grid grid;
    std::vector<double> values;

    LatticeField() = default;
    explicit LatticeField(const Grid &g) : grid(g), values(g.n_cells, 0.0) {}

    double mass() const;
    /// dx * sum of values over cells whose centre lies in [lo, hi].
    double window_mass(double lo, double hi) const;
    /// Cells with value > threshold as [first, last]; (1, 0) when empty.
    std::pair<std::size_t, std::size_t> support(double threshold) const;
};

/// Explicit heat update f + (dt/2) * Lap_h f with zero Dirichlet boundary.
/// Throws ConfigError if dt > dx^2/2.
LatticeField heat_half_step(const LatticeField &f, double dt);

/// Range kernel behind heat_half_step: writes out[k] for k in [lo, hi] given lam = dt/(2 dx^2).
void heat_range(const double *in, double *out, std::size_t n, std::size_t lo, std::size_t hi, double lam) noexcept;

void check_stability(const Grid &g, double dt);

/// One standard normal per cell for one time step.
struct NoiseSlice {
    Grid grid;
    std::vector<double> gaussians;
    std::uint32_t stream_id = 0;
    std::uint64_t step = 0;
};

NoiseSlice white_noise_increment(const Grid &grid, const NoiseKey &key, std::uint64_t step);

/// Variance-weighted pairing dx * sum phi_k xi_k sqrt(dt/dx).
double pair_noise(const NoiseSlice &s, const std::vector<double> &phi, double dt);

struct CrapNorm {
    double value = 0.0;
    double tail_bound = 0.0;
};

/// sum_{lambda=1}^{lambda_max} 2^-lambda min(sup_k |f_k| e^{lambda |x_k|}, 1); tail bound 2^-lambda_max.
CrapNorm crap_norm(const LatticeField &f, int lambda_max = 40);
/// Same norm on raw values sharing a grid, for f - g without a temporary.
CrapNorm crap_norm_diff(const Grid &g, const double *f, const double *h, int lambda_max = 40);
/// Same, with f and h known to agree outside cells [lo, hi].
CrapNorm crap_norm_diff(const Grid &g, const double *f, const double *h, std::size_t lo, std::size_t hi,
                        int lambda_max = 40);

/// Even bump J supported on [-1, 1] with unit integral.
enum class BumpShape { triangular, smooth };

double bump_value(BumpShape shape, double u);
/// Triangular bump (1 - |u|)_+.
double triangular_bump(double u);

/// z -> eps^(1/2) J((x - z) eps^(-1/2)) sampled at cell centres; continuous mass eps.
/// Throws ResolutionError when eps^(1/2) < 3 dx.
LatticeField mollifier_field(const Grid &grid, double x, double eps, BumpShape shape = BumpShape::triangular);

// Snapshot I/O. The binary frame is: magic "SBMIFRM1" (8 bytes), x_min, x_max (f64), n_cells (u64),
// step (u64), time (f64), then n_cells f64 values; all little-endian.
void write_field_csv(std::ostream &os, const LatticeField &f);
void write_frame(std::ostream &os, const LatticeField &f, std::uint64_t step, double time);
struct Frame {
    LatticeField field;
    std::uint64_t step = 0;
    double time = 0.0;
};
Frame read_frame(std::istream &is);

}  // namespace sbmi
