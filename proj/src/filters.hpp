#pragma once

#include <span>
#include <vector>

#include "livseg/volume.hpp"

namespace livseg::detail {

/// 1D filter along `axis` with edge replication; `kernel` has odd length.
std::vector<double> filter_axis(const std::vector<double>& in, const Dims& d, int axis, std::span<const double> kernel);
/// Same kernel along all three axes.
std::vector<double> separable(const std::vector<double>& in, const Dims& d, std::span<const double> kernel);
std::vector<double> box_kernel(int radius);
/// Normalized Gaussian truncated at ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

}  // namespace livseg::detail
