#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "livseg/volume.hpp"

namespace livseg {

/// Keeps the largest 26-connected component of `label`; other voxels of
/// `label` become background. Equal sizes keep the component that contains
/// the smallest linear index.
Mask largest_component(const Mask& m, std::uint8_t label);

/// Background voxels that cannot reach the volume border through
/// 6-connected background are relabeled to `label`.
Mask fill_holes(const Mask& m, std::uint8_t label);

struct ContourConfig {
    int iterations = 2;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    int smoothing_passes = 1;

    void validate() const;
    bool operator==(const ContourConfig&) const = default;
};

struct ContourResult {
    Mask mask;
    /// Set when the inside or outside region emptied (or was empty on
    /// entry); `mask` is then the last mask on which both means existed.
    bool degenerate = false;
    int iterations_run = 0;
};

/// Region means over the voxels of `domain` (all voxels when empty).
struct RegionMeans {
    double inside = 0.0;
    double outside = 0.0;
    std::size_t n_inside = 0;
    std::size_t n_outside = 0;
};

RegionMeans region_means(const Volume& intensity, std::span<const std::uint8_t> u,
                         std::span<const std::uint8_t> domain = {});

/// Voxels where the central-difference gradient of `u` is nonzero along any
/// axis (one-sided differences at the faces).
std::vector<std::uint8_t> mask_gradient_support(const Grid& grid, std::span<const std::uint8_t> u);

/// Data attachment: on gradient-support voxels, foreground when
/// l1 (I - c_in)^2 < l2 (I - c_out)^2, background when greater, unchanged on
/// ties.
std::vector<std::uint8_t> attachment_step(const Volume& intensity, std::span<const std::uint8_t> u,
                                          const RegionMeans& means, const ContourConfig& cfg,
                                          std::span<const std::uint8_t> domain = {});

/// Sup of erosions and inf of dilations by the four 3-voxel line segments of
/// each axial slice. Voxels outside the volume count as background.
std::vector<std::uint8_t> sup_inf(const Grid& grid, std::span<const std::uint8_t> u);
std::vector<std::uint8_t> inf_sup(const Grid& grid, std::span<const std::uint8_t> u);

/// Curvature operators alternate between SI(IS(u)) and IS(SI(u)) on
/// successive applications, starting with SI(IS(u)).
class CurvatureCycle {
public:
    std::vector<std::uint8_t> operator()(const Grid& grid, std::span<const std::uint8_t> u);

private:
    bool second_ = false;
};

/// Sum_in l1 (I - c_in)^2 + sum_out l2 (I - c_out)^2 over `domain`.
double chan_vese_energy(const Volume& intensity, std::span<const std::uint8_t> u, double c_in, double c_out,
                        const ContourConfig& cfg, std::span<const std::uint8_t> domain = {});

/// Morphological Chan-Vese refinement of `init` on a normalized image. When
/// `domain` is given the statistics and updates are restricted to it and
/// the output is a subset of it. The label of the output foreground is
/// `label`.
ContourResult active_contour_refine(const Volume& intensity, const Mask& init, const ContourConfig& cfg,
                                    const std::optional<Mask>& domain = std::nullopt,
                                    std::uint8_t label = kTumorLabel);

}  // namespace livseg
