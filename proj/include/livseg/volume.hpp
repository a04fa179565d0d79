#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace livseg {

using Dims = std::array<int, 3>;
using Spacing = std::array<double, 3>;

/// Maps storage axes onto anatomical R/A/S. Storage axis i runs along
/// anatomical axis `axis[i]` (0=R, 1=A, 2=S); `flip[i]` means increasing
/// index walks toward L/P/I instead.
struct Orientation {
    std::array<int, 3> axis{0, 1, 2};
    std::array<bool, 3> flip{false, false, false};

    static Orientation identity() { return {}; }
    bool is_identity() const;
    bool valid() const;
    bool operator==(const Orientation&) const = default;
};

/// Shared geometry of volumes and masks. Storage order is x-fastest.
struct Grid {
    Dims dims{1, 1, 1};
    Spacing spacing{1.0, 1.0, 1.0};
    Orientation orientation{};

    std::size_t size() const {
        return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
               static_cast<std::size_t>(dims[2]);
    }
    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(z));
    }
    bool contains(int x, int y, int z) const {
        return x >= 0 && y >= 0 && z >= 0 && x < dims[0] && y < dims[1] && z < dims[2];
    }
    std::array<int, 3> coords(std::size_t i) const {
        const auto nx = static_cast<std::size_t>(dims[0]);
        const auto ny = static_cast<std::size_t>(dims[1]);
        return {static_cast<int>(i % nx), static_cast<int>((i / nx) % ny), static_cast<int>(i / (nx * ny))};
    }

    /// Same dims and orientation, spacing equal to 1e-6.
    bool aligned_with(const Grid& other) const;
    void validate() const;
    bool operator==(const Grid&) const = default;
};

enum class VolumeKind : std::uint8_t { HU, Normalized, Probability };

class Volume {
public:
    Volume() = default;
    Volume(Grid grid, VolumeKind kind, std::vector<float> data);
    /// Zero-filled volume.
    Volume(Grid grid, VolumeKind kind);

    const Grid& grid() const { return grid_; }
    const Dims& dims() const { return grid_.dims; }
    const Spacing& spacing() const { return grid_.spacing; }
    const Orientation& orientation() const { return grid_.orientation; }
    VolumeKind kind() const { return kind_; }
    std::size_t size() const { return data_.size(); }

    std::span<const float> data() const { return data_; }
    float operator[](std::size_t i) const { return data_[i]; }
    float at(int x, int y, int z) const { return data_[grid_.index(x, y, z)]; }

    bool operator==(const Volume&) const = default;

private:
    Grid grid_{};
    VolumeKind kind_ = VolumeKind::HU;
    std::vector<float> data_{};
};

enum class Tissue : std::uint8_t { Background, Liver, Tumor };

using LabelMap = std::map<std::uint8_t, Tissue>;

/// Conventional label values: 0 background, 1 liver, 2 tumor.
inline constexpr std::uint8_t kBackgroundLabel = 0;
inline constexpr std::uint8_t kLiverLabel = 1;
inline constexpr std::uint8_t kTumorLabel = 2;

LabelMap default_label_map();

class Mask {
public:
    Mask() = default;
    Mask(Grid grid, std::vector<std::uint8_t> labels, LabelMap label_map = default_label_map());
    /// All-background mask.
    explicit Mask(Grid grid, LabelMap label_map = default_label_map());

    /// Mask with `label` where `binary[i] != 0`, background elsewhere.
    static Mask from_binary(Grid grid, std::span<const std::uint8_t> binary, std::uint8_t label);

    const Grid& grid() const { return grid_; }
    const Dims& dims() const { return grid_.dims; }
    std::size_t size() const { return labels_.size(); }
    const LabelMap& label_map() const { return label_map_; }

    std::span<const std::uint8_t> labels() const { return labels_; }
    std::uint8_t operator[](std::size_t i) const { return labels_[i]; }
    std::uint8_t at(int x, int y, int z) const { return labels_[grid_.index(x, y, z)]; }

    Tissue tissue(std::size_t i) const;
    bool is_foreground(std::size_t i) const { return tissue(i) != Tissue::Background; }

    /// 0/1 indicator of voxels mapped to `t`.
    std::vector<std::uint8_t> binary(Tissue t) const;
    /// 0/1 indicator of every non-background voxel.
    std::vector<std::uint8_t> foreground() const;
    std::size_t count(Tissue t) const;
    std::size_t count_foreground() const;

    bool operator==(const Mask&) const = default;

private:
    Grid grid_{};
    std::vector<std::uint8_t> labels_{};
    LabelMap label_map_{default_label_map()};
};

void require_aligned(const Grid& a, const Grid& b, const char* what);

}  // namespace livseg
