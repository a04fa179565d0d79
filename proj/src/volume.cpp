#include "livseg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "livseg/error.hpp"

namespace livseg {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::BadMagic: return "BadMagic";
        case Errc::UnsupportedDatatype: return "UnsupportedDatatype";
        case Errc::TruncatedFile: return "TruncatedFile";
        case Errc::NonFinite: return "NonFinite";
        case Errc::BadHeader: return "BadHeader";
        case Errc::IoError: return "IoError";
        case Errc::MissingColumn: return "MissingColumn";
        case Errc::UnknownColumn: return "UnknownColumn";
        case Errc::UnparsableCell: return "UnparsableCell";
        case Errc::KindMismatch: return "KindMismatch";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::EmptyMask: return "EmptyMask";
        case Errc::TooFewSamples: return "TooFewSamples";
        case Errc::OutOfRange: return "OutOfRange";
        case Errc::EmptyRegion: return "EmptyRegion";
        case Errc::DimMismatch: return "DimMismatch";
        case Errc::NonFiniteGradient: return "NonFiniteGradient";
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::InfeasibleSpec: return "InfeasibleSpec";
        case Errc::BadFormat: return "BadFormat";
    }
    return "Unknown";
}

bool Orientation::is_identity() const { return *this == Orientation::identity(); }

bool Orientation::valid() const {
    std::array<bool, 3> seen{};
    for (int a : axis) {
        if (a < 0 || a > 2 || seen[static_cast<std::size_t>(a)]) return false;
        seen[static_cast<std::size_t>(a)] = true;
    }
    return true;
}

bool Grid::aligned_with(const Grid& other) const {
    if (dims != other.dims || orientation != other.orientation) return false;
    for (std::size_t a = 0; a < 3; ++a) {
        if (std::abs(spacing[a] - other.spacing[a]) > 1e-6) return false;
    }
    return true;
}

void Grid::validate() const {
    for (std::size_t a = 0; a < 3; ++a) {
        if (dims[a] < 1) throw Error(Errc::InvalidArgument, "dims must be positive");
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
            throw Error(Errc::InvalidArgument, "spacing must be positive and finite");
        }
    }
    if (!orientation.valid()) throw Error(Errc::InvalidArgument, "orientation is not an axis permutation");
}

void require_aligned(const Grid& a, const Grid& b, const char* what) {
    if (!a.aligned_with(b)) throw Error(Errc::ShapeMismatch, std::string(what) + ": grids are not aligned");
}

Volume::Volume(Grid grid, VolumeKind kind, std::vector<float> data)
    : grid_(grid), kind_(kind), data_(std::move(data)) {
    grid_.validate();
    if (data_.size() != grid_.size()) throw Error(Errc::ShapeMismatch, "data length does not match dims");
    if (kind_ != VolumeKind::HU) {
        for (float v : data_) {
            if (!(v >= 0.0f && v <= 1.0f)) {
                throw Error(Errc::OutOfRange, "normalized/probability volume value outside [0,1]");
            }
        }
    }
}

Volume::Volume(Grid grid, VolumeKind kind) : Volume(grid, kind, std::vector<float>(grid.size(), 0.0f)) {}

LabelMap default_label_map() {
    return {{kBackgroundLabel, Tissue::Background}, {kLiverLabel, Tissue::Liver}, {kTumorLabel, Tissue::Tumor}};
}

Mask::Mask(Grid grid, std::vector<std::uint8_t> labels, LabelMap label_map)
    : grid_(grid), labels_(std::move(labels)), label_map_(std::move(label_map)) {
    grid_.validate();
    if (labels_.size() != grid_.size()) throw Error(Errc::ShapeMismatch, "label length does not match dims");
    std::array<bool, 256> present{};
    for (auto l : labels_) present[l] = true;
    for (std::size_t l = 0; l < present.size(); ++l) {
        if (present[l] && !label_map_.contains(static_cast<std::uint8_t>(l))) {
            throw Error(Errc::InvalidArgument, "label " + std::to_string(l) + " missing from label map");
        }
    }
}

Mask::Mask(Grid grid, LabelMap label_map)
    : Mask(grid, std::vector<std::uint8_t>(grid.size(), kBackgroundLabel), std::move(label_map)) {}

Mask Mask::from_binary(Grid grid, std::span<const std::uint8_t> binary, std::uint8_t label) {
    if (binary.size() != grid.size()) throw Error(Errc::ShapeMismatch, "binary length does not match dims");
    std::vector<std::uint8_t> labels(binary.size());
    std::transform(binary.begin(), binary.end(), labels.begin(),
                   [label](std::uint8_t b) { return b ? label : kBackgroundLabel; });
    return Mask(grid, std::move(labels));
}

Tissue Mask::tissue(std::size_t i) const { return label_map_.at(labels_[i]); }

std::vector<std::uint8_t> Mask::binary(Tissue t) const {
    std::array<std::uint8_t, 256> lut{};
    for (const auto& [label, tissue] : label_map_) lut[label] = tissue == t ? 1 : 0;
    std::vector<std::uint8_t> out(labels_.size());
    std::transform(labels_.begin(), labels_.end(), out.begin(), [&lut](std::uint8_t l) { return lut[l]; });
    return out;
}

std::vector<std::uint8_t> Mask::foreground() const {
    std::array<std::uint8_t, 256> lut{};
    for (const auto& [label, tissue] : label_map_) lut[label] = tissue != Tissue::Background ? 1 : 0;
    std::vector<std::uint8_t> out(labels_.size());
    std::transform(labels_.begin(), labels_.end(), out.begin(), [&lut](std::uint8_t l) { return lut[l]; });
    return out;
}

std::size_t Mask::count(Tissue t) const {
    const auto b = binary(t);
    return static_cast<std::size_t>(std::count(b.begin(), b.end(), std::uint8_t{1}));
}

std::size_t Mask::count_foreground() const {
    const auto b = foreground();
    return static_cast<std::size_t>(std::count(b.begin(), b.end(), std::uint8_t{1}));
}

}  // namespace livseg
