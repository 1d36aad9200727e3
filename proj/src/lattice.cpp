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

#include "sbmi/lattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "sbmi/errors.hpp"

namespace sbmi {

namespace {

// Integral of exp(-1/(1-u^2)) over [-1, 1].
constexpr double kSmoothBumpNorm = 0.4439938161680794;
constexpr char kFrameMagic[8] = {'S', 'B', 'M', 'I', 'F', 'R', 'M', '1'};

template <class T>
void put_le(std::ostream &os, T v) {
    static_assert(sizeof(T) == 8);
    std::uint64_t u = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<unsigned char>(u >> (8 * i));
    }
    os.write(reinterpret_cast<const char *>(b), 8);
}

template <class T>
T get_le(std::istream &is) {
    static_assert(sizeof(T) == 8);
    unsigned char b[8];
    is.read(reinterpret_cast<char *>(b), 8);
    if (!is) {
        throw InputError("read_frame: truncated frame");
    }
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) {
        u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    }
    return std::bit_cast<T>(u);
}

}  // namespace

Grid::Grid(double lo, double hi, std::size_t n) : x_min(lo), x_max(hi), n_cells(n) {
    if (!(hi > lo) || n == 0) {
        throw ConfigError("Grid: need x_max > x_min and n_cells > 0");
    }
    dx = (hi - lo) / static_cast<double>(n);
}

Grid Grid::with_spacing(double lo, double hi, double dx) {
    if (!(dx > 0.0)) {
        throw ConfigError("Grid: dx must be positive");
    }
    const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / dx - 1e-9));
    return Grid(lo, lo + static_cast<double>(n) * dx, n);
}

std::size_t Grid::cell_of(double xv) const {
    const double k = std::floor((xv - x_min) / dx);
    if (k < 0.0) {
        return 0;
    }
    return std::min(static_cast<std::size_t>(k), n_cells - 1);
}

bool Grid::operator==(const Grid &o) const {
    return x_min == o.x_min && x_max == o.x_max && n_cells == o.n_cells;
}

double LatticeField::mass() const {
    double s = 0.0;
    for (double v : values) {
        s += v;
    }
    return s * grid.dx;
}

double LatticeField::window_mass(double lo, double hi) const {
    double s = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double xv = grid.x(k);
        if (xv >= lo && xv <= hi) {
            s += values[k];
        }
    }
    return s * grid.dx;
}

std::pair<std::size_t, std::size_t> LatticeField::support(double threshold) const {
    std::size_t lo = 1;
    std::size_t hi = 0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (values[k] > threshold) {
            if (lo > hi) {
                lo = k;
            }
            hi = k;
        }
    }
    return {lo, hi};
}

void check_stability(const Grid &g, double dt) {
    if (!(dt > 0.0) || dt > 0.5 * g.dx * g.dx * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "explicit heat step unstable: dt=" << dt << " exceeds dx^2/2 with dx=" << g.dx;
        throw ConfigError(os.str());
    }
}

void heat_range(const double *in, double *out, std::size_t n, std::size_t lo, std::size_t hi, double lam) noexcept {
    for (std::size_t k = lo; k <= hi; ++k) {
        const double l = k > 0 ? in[k - 1] : 0.0;
        const double r = k + 1 < n ? in[k + 1] : 0.0;
        out[k] = in[k] + lam * (l - 2.0 * in[k] + r);
    }
}

LatticeField heat_half_step(const LatticeField &f, double dt) {
    check_stability(f.grid, dt);
    LatticeField out(f.grid);
    if (f.grid.n_cells == 0) {
        return out;
    }
    const double lam = dt / (2.0 * f.grid.dx * f.grid.dx);
    heat_range(f.values.data(), out.values.data(), f.grid.n_cells, 0, f.grid.n_cells - 1, lam);
    return out;
}

NoiseSlice white_noise_increment(const Grid &grid, const NoiseKey &key, std::uint64_t step) {
    NoiseSlice s;
    s.grid = grid;
    s.stream_id = key.stream();
    s.step = step;
    s.gaussians.resize(grid.n_cells);
    key.cell_normals(step, 0, grid.n_cells, s.gaussians.data());
    return s;
}

double pair_noise(const NoiseSlice &s, const std::vector<double> &phi, double dt) {
    if (phi.size() != s.gaussians.size()) {
        throw InputError("pair_noise: test vector length differs from grid");
    }
    const double amp = std::sqrt(dt / s.grid.dx);
    double acc = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) {
        acc += phi[k] * s.gaussians[k];
    }
    return s.grid.dx * amp * acc;
}

CrapNorm crap_norm_diff(const Grid &g, const double *f, const double *h, int lambda_max) {
    return crap_norm_diff(g, f, h, 0, g.n_cells == 0 ? 0 : g.n_cells - 1, lambda_max);
}

CrapNorm crap_norm_diff(const Grid &g, const double *f, const double *h, std::size_t lo, std::size_t hi,
                        int lambda_max) {
    if (lambda_max < 1) {
        throw InputError("crap_norm: lambda_max must be >= 1");
    }
    CrapNorm out;
    out.tail_bound = std::ldexp(1.0, -lambda_max);
    // sup_k |f_k| e^{lambda|x_k|} is nondecreasing in lambda, so once a term clamps at 1 all later
    // terms do too.
    int lambda = 1;
    for (; lambda <= lambda_max; ++lambda) {
        double sup = 0.0;
        const double lam = static_cast<double>(lambda);
        for (std::size_t k = lo; k <= hi && k < g.n_cells; ++k) {
            const double v = std::fabs(f[k] - (h ? h[k] : 0.0));
            if (v > 0.0) {
                sup = std::max(sup, v * std::exp(lam * std::fabs(g.x(k))));
                if (sup >= 1.0) {
                    break;
                }
            }
        }
        if (sup >= 1.0) {
            break;
        }
        out.value += std::ldexp(sup, -lambda);
    }
    if (lambda <= lambda_max) {
        // Remaining terms each contribute 2^-lambda.
        out.value += std::ldexp(1.0, -(lambda - 1)) - std::ldexp(1.0, -lambda_max);
    }
    return out;
}

CrapNorm crap_norm(const LatticeField &f, int lambda_max) {
    return crap_norm_diff(f.grid, f.values.data(), nullptr, lambda_max);
}

double triangular_bump(double u) { return std::max(0.0, 1.0 - std::fabs(u)); }

double bump_value(BumpShape shape, double u) {
    switch (shape) {
    case BumpShape::triangular:
        return triangular_bump(u);
    case BumpShape::smooth: {
        const double a = std::fabs(u);
        if (a >= 1.0) {
            return 0.0;
        }
        return std::exp(-1.0 / (1.0 - a * a)) / kSmoothBumpNorm;
    }
    }
    return 0.0;
}

LatticeField mollifier_field(const Grid &grid, double x, double eps, BumpShape shape) {
    if (!(eps > 0.0)) {
        throw InputError("mollifier_field: eps must be positive");
    }
    const double se = std::sqrt(eps);
    if (se < 3.0 * grid.dx) {
        std::ostringstream os;
        os << "mollifier under-resolved: eps^(1/2)=" << se << " < 3 dx=" << 3.0 * grid.dx;
        throw ResolutionError(os.str());
    }
    LatticeField f(grid);
    const std::size_t lo = grid.cell_of(x - se);
    const std::size_t hi = grid.cell_of(x + se);
    for (std::size_t k = lo; k <= hi; ++k) {
        f.values[k] = se * bump_value(shape, (x - grid.x(k)) / se);
    }
    return f;
}

void write_field_csv(std::ostream &os, const LatticeField &f) {
    os << "x,value\n";
    os.precision(17);
    for (std::size_t k = 0; k < f.values.size(); ++k) {
        os << f.grid.x(k) << ',' << f.values[k] << '\n';
    }
}

void write_frame(std::ostream &os, const LatticeField &f, std::uint64_t step, double time) {
    os.write(kFrameMagic, 8);
    put_le(os, f.grid.x_min);
    put_le(os, f.grid.x_max);
    put_le(os, static_cast<std::uint64_t>(f.grid.n_cells));
    put_le(os, step);
    put_le(os, time);
    for (double v : f.values) {
        put_le(os, v);
    }
}

Frame read_frame(std::istream &is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kFrameMagic, 8) != 0) {
        throw InputError("read_frame: bad magic");
    }
    Frame fr;
    const double lo = get_le<double>(is);
    const double hi = get_le<double>(is);
    const auto n = get_le<std::uint64_t>(is);
    fr.step = get_le<std::uint64_t>(is);
    fr.time = get_le<double>(is);
    fr.field = LatticeField(Grid(lo, hi, static_cast<std::size_t>(n)));
    for (auto &v : fr.field.values) {
        v = get_le<double>(is);
    }
    return fr;
}

}  // namespace sbmi
