#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "livseg/volume.hpp"

namespace livseg {

/// NIfTI-1 datatype codes accepted by the reader.
enum class NiftiDatatype : std::int16_t {
    UInt8 = 2,
    Int16 = 4,
    Int32 = 8,
    Float32 = 16,
    Float64 = 64,
};

inline constexpr std::size_t kNiftiHeaderSize = 348;
inline constexpr std::size_t kNiftiVoxOffset = 352;

/// Decodes a NIfTI-1 image held in memory. For single-file images ("n+1")
/// `bytes` is the whole file. For header/image pairs ("ni1") `bytes` is the
/// .hdr content and `image` the .img content.
///
/// Every byte string either yields a Volume or throws livseg::Error.
Volume parse_nifti(std::span<const std::byte> bytes,
                   std::optional<std::span<const std::byte>> image = std::nullopt);

/// Single-file float32 NIfTI-1, little-endian, vox_offset 352, sform set
/// from spacing and orientation.
std::vector<std::byte> encode_nifti(const Volume& volume);

Volume read_nifti(const std::filesystem::path& path);
void write_nifti(const Volume& volume, const std::filesystem::path& path);

/// Masks travel as float32 label images.
Volume mask_to_volume(const Mask& mask);
Mask volume_to_mask(const Volume& volume, LabelMap label_map = default_label_map());

inline Mask read_mask_nifti(const std::filesystem::path& path) { return volume_to_mask(read_nifti(path)); }
inline void write_mask_nifti(const Mask& mask, const std::filesystem::path& path) {
    write_nifti(mask_to_volume(mask), path);
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace livseg
