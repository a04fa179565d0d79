#pragma once

// Fixtures and brute-force oracles shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "livseg/volume.hpp"

namespace livseg::test {

inline Grid cube(int n, Spacing spacing = {1.0, 1.0, 1.0}) { return Grid{{n, n, n}, spacing, {}}; }

inline Volume random_volume(const Grid& g, VolumeKind kind, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<float> d(g.size());
    for (auto& v : d) v = static_cast<float>(u(rng));
    return Volume(g, kind, std::move(d));
}

/// Each voxel carries `label` with probability `density`.
inline Mask random_mask(const Grid& g, std::mt19937_64& rng, double density, std::uint8_t label = kTumorLabel) {
    std::bernoulli_distribution b(density);
    std::vector<std::uint8_t> l(g.size());
    for (auto& v : l) v = b(rng) ? label : kBackgroundLabel;
    return Mask(g, std::move(l));
}

inline std::vector<double> random_probabilities(std::size_t n, std::mt19937_64& rng, double lo = 0.01,
                                                double hi = 0.99) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> p(n);
    for (auto& v : p) v = u(rng);
    return p;
}

inline std::vector<std::uint8_t> random_binary(std::size_t n, std::mt19937_64& rng, double density = 0.5) {
    std::bernoulli_distribution b(density);
    std::vector<std::uint8_t> g(n);
    for (auto& v : g) v = b(rng) ? 1 : 0;
    return g;
}

/// Five-point central difference of f along coordinate i.
inline double fd_derivative(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                            std::size_t i, double h = 1e-4) {
    const double x0 = x[i];
    auto at = [&](double d) {
        x[i] = x0 + d;
        return f(x);
    };
    const double r = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
    x[i] = x0;
    return r;
}

/// |a - n| / max(|a|, |n|, 1e-6).
inline double rel_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

/// Labels each foreground voxel of `on` with its 26-connected component id
/// (1-based, -1 outside), by repeated relaxation of neighbour minima until
/// nothing changes. Deliberately unlike a stack flood fill.
inline std::vector<int> relaxation_components(const Grid& g, const std::vector<std::uint8_t>& on) {
    std::vector<int> id(g.size(), -1);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (on[i]) id[i] = static_cast<int>(i);
    }
    bool changed = true;
    while (changed) {
        changed = false;
        for (int z = 0; z < g.dims[2]; ++z) {
            for (int y = 0; y < g.dims[1]; ++y) {
                for (int x = 0; x < g.dims[0]; ++x) {
                    const std::size_t i = g.index(x, y, z);
                    if (id[i] < 0) continue;
                    for (int dz = -1; dz <= 1; ++dz) {
                        for (int dy = -1; dy <= 1; ++dy) {
                            for (int dx = -1; dx <= 1; ++dx) {
                                if (!g.contains(x + dx, y + dy, z + dz)) continue;
                                const std::size_t j = g.index(x + dx, y + dy, z + dz);
                                if (id[j] >= 0 && id[j] < id[i]) {
                                    id[i] = id[j];
                                    changed = true;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return id;
}

/// Largest 26-connected component of `label`, ties to the component with
/// the smallest index.
inline Mask oracle_largest_component(const Mask& m, std::uint8_t label) {
    const Grid& g = m.grid();
    std::vector<std::uint8_t> on(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) on[i] = m[i] == label;
    const auto id = relaxation_components(g, on);
    std::vector<std::size_t> size(g.size(), 0);
    for (int v : id) {
        if (v >= 0) ++size[static_cast<std::size_t>(v)];
    }
    std::size_t best = 0, best_size = 0;
    for (std::size_t r = 0; r < g.size(); ++r) {
        if (size[r] > best_size) {
            best_size = size[r];
            best = r;
        }
    }
    std::vector<std::uint8_t> out(m.labels().begin(), m.labels().end());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (on[i] && static_cast<std::size_t>(id[i]) != best) out[i] = kBackgroundLabel;
    }
    return Mask(g, std::move(out), m.label_map());
}

/// Hole filling by 6-connected reachability from the border, computed as a
/// fixed point over repeated sweeps.
inline Mask oracle_fill_holes(const Mask& m, std::uint8_t label) {
    const Grid& g = m.grid();
    std::vector<std::uint8_t> reach(g.size(), 0);
    auto bg = [&](std::size_t i) { return !m.is_foreground(i); };
    for (int z = 0; z < g.dims[2]; ++z) {
        for (int y = 0; y < g.dims[1]; ++y) {
            for (int x = 0; x < g.dims[0]; ++x) {
                const bool border = x == 0 || y == 0 || z == 0 || x == g.dims[0] - 1 || y == g.dims[1] - 1 ||
                                    z == g.dims[2] - 1;
                const std::size_t i = g.index(x, y, z);
                if (border && bg(i)) reach[i] = 1;
            }
        }
    }
    const int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    bool changed = true;
    while (changed) {
        changed = false;
        for (int z = 0; z < g.dims[2]; ++z) {
            for (int y = 0; y < g.dims[1]; ++y) {
                for (int x = 0; x < g.dims[0]; ++x) {
                    const std::size_t i = g.index(x, y, z);
                    if (reach[i] || !bg(i)) continue;
                    for (const auto& d : nb) {
                        if (g.contains(x + d[0], y + d[1], z + d[2]) && reach[g.index(x + d[0], y + d[1], z + d[2])]) {
                            reach[i] = 1;
                            changed = true;
                            break;
                        }
                    }
                }
            }
        }
    }
    std::vector<std::uint8_t> out(m.labels().begin(), m.labels().end());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (bg(i) && !reach[i]) out[i] = label;
    }
    return Mask(g, std::move(out), m.label_map());
}

/// Solid ball of `label` voxels.
inline Mask ball(const Grid& g, double cx, double cy, double cz, double r, std::uint8_t label) {
    std::vector<std::uint8_t> l(g.size(), kBackgroundLabel);
    for (int z = 0; z < g.dims[2]; ++z) {
        for (int y = 0; y < g.dims[1]; ++y) {
            for (int x = 0; x < g.dims[0]; ++x) {
                const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz);
                if (d2 <= r * r) l[g.index(x, y, z)] = label;
            }
        }
    }
    return Mask(g, std::move(l));
}

inline double binary_dice(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    std::size_t inter = 0, sa = 0, sb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool x = a[i] != 0, y = b[i] != 0;
        inter += x && y;
        sa += x;
        sb += y;
    }
    return sa + sb == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(sa + sb);
}

}  // namespace livseg::test
