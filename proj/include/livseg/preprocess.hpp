#pragma once

#include <array>
#include <cstdint>

#include "livseg/volume.hpp"

namespace livseg {

struct HuWindow {
    double lo = -150.0;
    double hi = 250.0;

    void validate() const;
    bool operator==(const HuWindow&) const = default;
};

/// Liver task window.
inline constexpr HuWindow kLiverWindow{-150.0, 250.0};
/// Tumor task window.
inline constexpr HuWindow kTumorWindow{-200.0, 250.0};

/// Inclusive voxel box.
struct BoundingBox {
    std::array<int, 3> min{0, 0, 0};
    std::array<int, 3> max{0, 0, 0};

    std::array<int, 3> extent() const { return {max[0] - min[0] + 1, max[1] - min[1] + 1, max[2] - min[2] + 1}; }
    bool operator==(const BoundingBox&) const = default;
};

struct CropMode {
    enum class Kind : std::uint8_t { Center, Random };
    Kind kind = Kind::Center;
    std::uint64_t seed = 0;

    static CropMode center() { return {Kind::Center, 0}; }
    static CropMode random(std::uint64_t seed) { return {Kind::Random, seed}; }
};

/// Where a crop window sits in the source volume and in the output. Along
/// each axis `length` voxels are copied from `src_offset` to `dst_offset`.
struct CropPlan {
    Dims source_dims{1, 1, 1};
    Dims target{1, 1, 1};
    std::array<int, 3> src_offset{0, 0, 0};
    std::array<int, 3> dst_offset{0, 0, 0};
    std::array<int, 3> length{0, 0, 0};
};

/// Reorders storage so axes run (R, A, S); the result has identity orientation.
Volume standardize_orientation(const Volume& v);
Mask standardize_orientation(const Mask& m);

Volume window_and_normalize(const Volume& v, const HuWindow& w);

/// Zeroes every voxel whose label is not liver or tumor.
Volume mask_outside_liver(const Volume& v, const Mask& liver);

/// Tight box over liver/tumor voxels, grown by `margin` and clipped to dims.
BoundingBox liver_bbox(const Mask& liver, int margin = 2);

CropPlan plan_crop(const Dims& source_dims, const BoundingBox& box, const Dims& target, const CropMode& mode);

Volume apply_crop(const Volume& v, const CropPlan& plan);
Mask apply_crop(const Mask& m, const CropPlan& plan);

inline Volume crop_or_pad(const Volume& v, const BoundingBox& box, const Dims& target, const CropMode& mode) {
    return apply_crop(v, plan_crop(v.dims(), box, target, mode));
}
inline Mask crop_or_pad(const Mask& m, const BoundingBox& box, const Dims& target, const CropMode& mode) {
    return apply_crop(m, plan_crop(m.dims(), box, target, mode));
}

/// Places a cropped mask back into a background-filled mask on `full`.
Mask uncrop(const Mask& cropped, const CropPlan& plan, const Grid& full);

/// Settings for one branch of the two-step pipeline.
struct BranchPreprocess {
    HuWindow window = kLiverWindow;
    Dims target{64, 64, 32};
    int bbox_margin = 2;

    bool operator==(const BranchPreprocess&) const = default;
};

struct PreparedInput {
    Volume intensity;  // normalized, target-sized
    CropPlan plan;
    Grid full_grid;    // standardized grid of the source volume
};

/// Whole-volume preparation: orient, window, normalize, centre crop/pad.
PreparedInput prepare_liver_input(const Volume& ct, const BranchPreprocess& cfg);

/// Tumor-branch composition: orient, window, normalize, mask outside the
/// liver, liver bounding box, crop/pad.
PreparedInput prepare_tumor_input(const Volume& ct, const Mask& liver, const BranchPreprocess& cfg,
                                  const CropMode& mode = CropMode::center());

}  // namespace livseg
