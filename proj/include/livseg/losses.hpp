#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "livseg/volume.hpp"

namespace livseg {

struct LossWeights {
    double focal = 1.0;
    double dice = 1.0;
    double weak = 0.5;

    void validate() const;
    bool operator==(const LossWeights&) const = default;
};

struct FocalParams {
    double gamma = 2.0;

    void validate() const;
    bool operator==(const FocalParams&) const = default;
};

/// Loss value together with d(value)/d(p_i).
struct LossValue {
    double value = 0.0;
    std::vector<double> grad;
};

struct LossBundle {
    double total = 0.0;
    double dice = 0.0;
    double focal = 0.0;
    double weak = 0.0;
    std::vector<double> grad;
};

inline constexpr double kDiceSmoothing = 1e-6;
inline constexpr double kLogGuard = 1e-12;

/// Squared-denominator soft Dice: 1 - (2 sum p g + eps) / (sum p^2 + sum g^2 + eps).
LossValue dice_loss(std::span<const double> p, std::span<const std::uint8_t> g);

/// Mean focal loss over voxels, -(1/N) sum (1 - p_t)^gamma log(p_t + delta).
LossValue focal_loss(std::span<const double> p, std::span<const std::uint8_t> g, const FocalParams& fp);

/// Squared deviation of the soft tumor ratio (mean p over `region`) from the
/// clinical estimate `r_hat`. Gradient is zero outside the region.
LossValue weak_loss(std::span<const double> p, std::span<const std::uint8_t> region, double r_hat);

/// lambda_f * focal + lambda_d * dice + lambda_w * weak. Terms with zero
/// weight are skipped, so `region` may be empty when lambda_w == 0.
LossBundle combined_loss(std::span<const double> p, std::span<const std::uint8_t> g,
                         std::span<const std::uint8_t> region, double r_hat, const LossWeights& w,
                         const FocalParams& fp);

/// Volume/Mask front ends: check alignment and use the non-background
/// voxels of `g` and `region`.
LossValue dice_loss(const Volume& p, const Mask& g);
LossValue focal_loss(const Volume& p, const Mask& g, const FocalParams& fp);
LossValue weak_loss(const Volume& p, const Mask& region, double r_hat);
LossBundle combined_loss(const Volume& p, const Mask& g, const Mask& region, double r_hat, const LossWeights& w,
                         const FocalParams& fp);

}  // namespace livseg
