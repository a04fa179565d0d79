#include "livseg/postprocess.hpp"

#include <algorithm>
#include <vector>

#include "livseg/error.hpp"

namespace livseg {
namespace {

bool in_domain(std::span<const std::uint8_t> domain, std::size_t i) { return domain.empty() || domain[i] != 0; }

void check_domain(const Grid& grid, std::span<const std::uint8_t> domain) {
    if (!domain.empty() && domain.size() != grid.size()) throw Error(Errc::ShapeMismatch, "domain does not match grid");
}

// Four in-plane line segments through the centre: along x, along y and the
// two diagonals.
constexpr int kLines[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};

std::uint8_t sample(const Grid& g, std::span<const std::uint8_t> u, int x, int y, int z) {
    return g.contains(x, y, z) ? u[g.index(x, y, z)] : std::uint8_t{0};
}

}  // namespace

Mask largest_component(const Mask& m, std::uint8_t label) {
    const Grid& g = m.grid();
    const auto labels = m.labels();
    std::vector<int> comp(labels.size(), -1);
    std::vector<std::size_t> sizes;
    std::vector<std::size_t> stack;
    for (std::size_t seed = 0; seed < labels.size(); ++seed) {
        if (labels[seed] != label || comp[seed] >= 0) continue;
        const int id = static_cast<int>(sizes.size());
        std::size_t size = 0;
        comp[seed] = id;
        stack.push_back(seed);
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            ++size;
            const auto c = g.coords(i);
            for (int dz = -1; dz <= 1; ++dz) {
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int x = c[0] + dx, y = c[1] + dy, z = c[2] + dz;
                        if (!g.contains(x, y, z)) continue;
                        const std::size_t j = g.index(x, y, z);
                        if (labels[j] == label && comp[j] < 0) {
                            comp[j] = id;
                            stack.push_back(j);
                        }
                    }
                }
            }
        }
        sizes.push_back(size);
    }
    if (sizes.size() <= 1) return m;
    // max_element returns the first maximum, i.e. the component discovered
    // first in linear order.
    const int keep = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    std::vector<std::uint8_t> out(labels.begin(), labels.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (comp[i] >= 0 && comp[i] != keep) out[i] = kBackgroundLabel;
    }
    return Mask(g, std::move(out), m.label_map());
}

Mask fill_holes(const Mask& m, std::uint8_t label) {
    const Grid& g = m.grid();
    const auto& d = g.dims;
    std::vector<std::uint8_t> reached(m.size(), 0);
    std::vector<std::size_t> stack;
    auto push = [&](int x, int y, int z) {
        const std::size_t i = g.index(x, y, z);
        if (!reached[i] && !m.is_foreground(i)) {
            reached[i] = 1;
            stack.push_back(i);
        }
    };
    for (int z = 0; z < d[2]; ++z) {
        for (int y = 0; y < d[1]; ++y) {
            for (int x = 0; x < d[0]; ++x) {
                const bool border =
                    x == 0 || y == 0 || z == 0 || x == d[0] - 1 || y == d[1] - 1 || z == d[2] - 1;
                if (border) push(x, y, z);
            }
        }
    }
    constexpr int kSteps[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    while (!stack.empty()) {
        const auto c = g.coords(stack.back());
        stack.pop_back();
        for (const auto& s : kSteps) {
            const int x = c[0] + s[0], y = c[1] + s[1], z = c[2] + s[2];
            if (g.contains(x, y, z)) push(x, y, z);
        }
    }
    std::vector<std::uint8_t> out(m.labels().begin(), m.labels().end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!m.is_foreground(i) && !reached[i]) out[i] = label;
    }
    return Mask(g, std::move(out), m.label_map());
}

void ContourConfig::validate() const {
    if (iterations < 0 || smoothing_passes < 0 || !(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
        throw Error(Errc::InvalidArgument, "contour settings must be non-negative");
    }
}

RegionMeans region_means(const Volume& intensity, std::span<const std::uint8_t> u,
                         std::span<const std::uint8_t> domain) {
    if (u.size() != intensity.size()) throw Error(Errc::ShapeMismatch, "mask does not match image");
    check_domain(intensity.grid(), domain);
    double s_in = 0.0, s_out = 0.0;
    RegionMeans r;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!in_domain(domain, i)) continue;
        if (u[i]) {
            s_in += intensity[i];
            ++r.n_inside;
        } else {
            s_out += intensity[i];
            ++r.n_outside;
        }
    }
    if (r.n_inside) r.inside = s_in / static_cast<double>(r.n_inside);
    if (r.n_outside) r.outside = s_out / static_cast<double>(r.n_outside);
    return r;
}

std::vector<std::uint8_t> mask_gradient_support(const Grid& g, std::span<const std::uint8_t> u) {
    const auto& d = g.dims;
    std::vector<std::uint8_t> out(u.size(), 0);
    for (int z = 0; z < d[2]; ++z) {
        for (int y = 0; y < d[1]; ++y) {
            for (int x = 0; x < d[0]; ++x) {
                const std::array<int, 3> c{x, y, z};
                bool nonzero = false;
                for (int a = 0; a < 3 && !nonzero; ++a) {
                    const int n = d[static_cast<std::size_t>(a)];
                    if (n < 2) continue;
                    std::array<int, 3> lo = c, hi = c;
                    const int i = c[static_cast<std::size_t>(a)];
                    lo[static_cast<std::size_t>(a)] = i == 0 ? 0 : i - 1;
                    hi[static_cast<std::size_t>(a)] = i == n - 1 ? n - 1 : i + 1;
                    nonzero = u[g.index(lo[0], lo[1], lo[2])] != u[g.index(hi[0], hi[1], hi[2])];
                }
                out[g.index(x, y, z)] = nonzero ? 1 : 0;
            }
        }
    }
    return out;
}

std::vector<std::uint8_t> attachment_step(const Volume& intensity, std::span<const std::uint8_t> u,
                                          const RegionMeans& means, const ContourConfig& cfg,
                                          std::span<const std::uint8_t> domain) {
    check_domain(intensity.grid(), domain);
    const auto support = mask_gradient_support(intensity.grid(), u);
    std::vector<std::uint8_t> out(u.begin(), u.end());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!support[i] || !in_domain(domain, i)) continue;
        const double v = intensity[i];
        const double a = cfg.lambda1 * (v - means.inside) * (v - means.inside);
        const double b = cfg.lambda2 * (v - means.outside) * (v - means.outside);
        if (a < b) {
            out[i] = 1;
        } else if (a > b) {
            out[i] = 0;
        }
    }
    return out;
}

std::vector<std::uint8_t> sup_inf(const Grid& g, std::span<const std::uint8_t> u) {
    std::vector<std::uint8_t> out(u.size(), 0);
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!u[i]) continue;
        const auto c = g.coords(i);
        for (const auto& l : kLines) {
            if (sample(g, u, c[0] + l[0], c[1] + l[1], c[2]) && sample(g, u, c[0] - l[0], c[1] - l[1], c[2])) {
                out[i] = 1;
                break;
            }
        }
    }
    return out;
}

std::vector<std::uint8_t> inf_sup(const Grid& g, std::span<const std::uint8_t> u) {
    std::vector<std::uint8_t> out(u.size(), 1);
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i]) continue;
        const auto c = g.coords(i);
        for (const auto& l : kLines) {
            if (!sample(g, u, c[0] + l[0], c[1] + l[1], c[2]) && !sample(g, u, c[0] - l[0], c[1] - l[1], c[2])) {
                out[i] = 0;
                break;
            }
        }
    }
    return out;
}

std::vector<std::uint8_t> CurvatureCycle::operator()(const Grid& grid, std::span<const std::uint8_t> u) {
    const bool second = second_;
    second_ = !second_;
    if (!second) return sup_inf(grid, inf_sup(grid, u));
    return inf_sup(grid, sup_inf(grid, u));
}

double chan_vese_energy(const Volume& intensity, std::span<const std::uint8_t> u, double c_in, double c_out,
                        const ContourConfig& cfg, std::span<const std::uint8_t> domain) {
    check_domain(intensity.grid(), domain);
    double e = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!in_domain(domain, i)) continue;
        const double v = intensity[i];
        e += u[i] ? cfg.lambda1 * (v - c_in) * (v - c_in) : cfg.lambda2 * (v - c_out) * (v - c_out);
    }
    return e;
}

ContourResult active_contour_refine(const Volume& intensity, const Mask& init, const ContourConfig& cfg,
                                    const std::optional<Mask>& domain, std::uint8_t label) {
    cfg.validate();
    require_aligned(intensity.grid(), init.grid(), "active_contour_refine");
    std::vector<std::uint8_t> dom;
    if (domain) {
        require_aligned(intensity.grid(), domain->grid(), "active_contour_refine domain");
        dom = domain->foreground();
    }
    const Grid& g = intensity.grid();
    std::vector<std::uint8_t> u = init.foreground();
    if (!dom.empty()) {
        for (std::size_t i = 0; i < u.size(); ++i) u[i] &= dom[i];
    }
    auto to_mask = [&](const std::vector<std::uint8_t>& bin) {
        return Mask::from_binary(init.grid(), bin, label);
    };

    ContourResult result;
    CurvatureCycle curvature;
    std::vector<std::uint8_t> last_valid = u;
    for (int it = 0; it < cfg.iterations; ++it) {
        const auto means = region_means(intensity, u, dom);
        if (means.n_inside == 0 || means.n_outside == 0) {
            result.degenerate = true;
            break;
        }
        last_valid = u;
        u = attachment_step(intensity, u, means, cfg, dom);
        for (int s = 0; s < cfg.smoothing_passes; ++s) u = curvature(g, u);
        if (!dom.empty()) {
            for (std::size_t i = 0; i < u.size(); ++i) u[i] &= dom[i];
        }
        result.iterations_run = it + 1;
    }
    if (!result.degenerate && cfg.iterations > 0) {
        const auto means = region_means(intensity, u, dom);
        if (means.n_inside == 0 || means.n_outside == 0) result.degenerate = true;
    }
    result.mask = to_mask(result.degenerate ? last_valid : u);
    return result;
}

}  // namespace livseg
