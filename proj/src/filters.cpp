#include "filters.hpp"

#include <algorithm>
#include <cmath>

namespace livseg::detail {

// Separable 1D filter along `axis` with edge replication.
std::vector<double> filter_axis(const std::vector<double>& in, const Dims& d, int axis, std::span<const double> kernel) {
    const int radius = static_cast<int>(kernel.size() / 2);
    const int n = d[static_cast<std::size_t>(axis)];
    std::vector<double> out(in.size());
    const std::array<std::size_t, 3> stride{1, static_cast<std::size_t>(d[0]),
                                            static_cast<std::size_t>(d[0]) * static_cast<std::size_t>(d[1])};
    const std::size_t s = stride[static_cast<std::size_t>(axis)];
    std::vector<double> line(static_cast<std::size_t>(n));
    for (int z = 0; z < d[2]; ++z) {
        for (int y = 0; y < d[1]; ++y) {
            for (int x = 0; x < d[0]; ++x) {
                const std::array<int, 3> c{x, y, z};
                if (c[static_cast<std::size_t>(axis)] != 0) continue;
                const std::size_t base = static_cast<std::size_t>(x) + stride[1] * static_cast<std::size_t>(y) +
                                         stride[2] * static_cast<std::size_t>(z);
                for (int i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = in[base + s * static_cast<std::size_t>(i)];
                for (int i = 0; i < n; ++i) {
                    double acc = 0.0;
                    for (int k = -radius; k <= radius; ++k) {
                        const int j = std::clamp(i + k, 0, n - 1);
                        acc += kernel[static_cast<std::size_t>(k + radius)] * line[static_cast<std::size_t>(j)];
                    }
                    out[base + s * static_cast<std::size_t>(i)] = acc;
                }
            }
        }
    }
    return out;
}

std::vector<double> separable(const std::vector<double>& in, const Dims& d, std::span<const double> kernel) {
    auto a = filter_axis(in, d, 0, kernel);
    auto b = filter_axis(a, d, 1, kernel);
    return filter_axis(b, d, 2, kernel);
}

std::vector<double> box_kernel(int radius) {
    return std::vector<double>(static_cast<std::size_t>(2 * radius + 1), 1.0 / (2.0 * radius + 1.0));
}

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double w = std::exp(-0.5 * i * i / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = w;
        sum += w;
    }
    for (auto& w : k) w /= sum;
    return k;
}

}  // namespace livseg::detail
