#include "livseg/nifti.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>

#include "livseg/error.hpp"

namespace livseg {
namespace {

// Header field offsets (NIfTI-1, 348 bytes).
constexpr std::size_t kOffSizeofHdr = 0;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffDescrip = 148;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffQuatern = 256;
constexpr std::size_t kOffSrow = 280;
constexpr std::size_t kOffMagic = 344;
constexpr std::size_t kDescripLen = 80;

constexpr std::string_view kKindTag = "livseg kind=";

class HeaderReader {
public:
    HeaderReader(std::span<const std::byte> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

    template <typename T>
    T get(std::size_t offset) const {
        std::array<std::byte, sizeof(T)> raw{};
        std::memcpy(raw.data(), bytes_.data() + offset, sizeof(T));
        if (swap_) std::reverse(raw.begin(), raw.end());
        T v{};
        std::memcpy(&v, raw.data(), sizeof(T));
        return v;
    }

private:
    std::span<const std::byte> bytes_;
    bool swap_;
};

class HeaderWriter {
public:
    explicit HeaderWriter(std::vector<std::byte>& out) : out_(out) {}

    template <typename T>
    void put(std::size_t offset, T v) {
        std::array<std::byte, sizeof(T)> raw{};
        std::memcpy(raw.data(), &v, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
        std::memcpy(out_.data() + offset, raw.data(), sizeof(T));
    }

private:
    std::vector<std::byte>& out_;
};

std::size_t element_size(NiftiDatatype dt) {
    switch (dt) {
        case NiftiDatatype::UInt8: return 1;
        case NiftiDatatype::Int16: return 2;
        case NiftiDatatype::Int32: return 4;
        case NiftiDatatype::Float32: return 4;
        case NiftiDatatype::Float64: return 8;
    }
    return 0;
}

bool known_datatype(std::int16_t code) {
    switch (code) {
        case 2: case 4: case 8: case 16: case 64: return true;
        default: return false;
    }
}

template <typename T>
double load_element(const std::byte* p, bool swap) {
    std::array<std::byte, sizeof(T)> raw{};
    std::memcpy(raw.data(), p, sizeof(T));
    if (swap) std::reverse(raw.begin(), raw.end());
    T v{};
    std::memcpy(&v, raw.data(), sizeof(T));
    return static_cast<double>(v);
}

using Mat3 = std::array<std::array<double, 3>, 3>;

std::optional<Orientation> orientation_from_matrix(const Mat3& m) {
    Orientation o;
    std::array<bool, 3> used{};
    for (int col = 0; col < 3; ++col) {
        int best = -1;
        double best_abs = 0.0;
        for (int row = 0; row < 3; ++row) {
            const double a = std::abs(m[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)]);
            if (std::isfinite(a) && a > best_abs) {
                best_abs = a;
                best = row;
            }
        }
        if (best < 0 || used[static_cast<std::size_t>(best)]) return std::nullopt;
        used[static_cast<std::size_t>(best)] = true;
        o.axis[static_cast<std::size_t>(col)] = best;
        o.flip[static_cast<std::size_t>(col)] = m[static_cast<std::size_t>(best)][static_cast<std::size_t>(col)] < 0.0;
    }
    return o;
}

Mat3 quaternion_matrix(double b, double c, double d, double qfac) {
    double a = 1.0 - (b * b + c * c + d * d);
    if (a < 1e-7) {
        const double s = 1.0 / std::sqrt(b * b + c * c + d * d);
        b *= s;
        c *= s;
        d *= s;
        a = 0.0;
    } else {
        a = std::sqrt(a);
    }
    Mat3 r{{{a * a + b * b - c * c - d * d, 2 * b * c - 2 * a * d, 2 * b * d + 2 * a * c},
            {2 * b * c + 2 * a * d, a * a + c * c - b * b - d * d, 2 * c * d - 2 * a * b},
            {2 * b * d - 2 * a * c, 2 * c * d + 2 * a * b, a * a + d * d - c * c - b * b}}};
    for (auto& row : r) row[2] *= qfac;
    return r;
}

VolumeKind kind_from_descrip(std::string_view descrip, std::span<const float> data) {
    const auto pos = descrip.find(kKindTag);
    if (pos == std::string_view::npos) return VolumeKind::HU;
    const auto value = descrip.substr(pos + kKindTag.size());
    VolumeKind kind = VolumeKind::HU;
    if (value.starts_with("normalized")) kind = VolumeKind::Normalized;
    else if (value.starts_with("probability")) kind = VolumeKind::Probability;
    if (kind != VolumeKind::HU) {
        const bool in_range = std::all_of(data.begin(), data.end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
        if (!in_range) return VolumeKind::HU;
    }
    return kind;
}

const char* kind_name(VolumeKind kind) {
    switch (kind) {
        case VolumeKind::HU: return "hu";
        case VolumeKind::Normalized: return "normalized";
        case VolumeKind::Probability: return "probability";
    }
    return "hu";
}

}  // namespace

Volume parse_nifti(std::span<const std::byte> bytes, std::optional<std::span<const std::byte>> image) {
    if (bytes.size() < kNiftiHeaderSize) throw Error(Errc::TruncatedFile, "file shorter than a NIfTI-1 header");

    const bool pair = std::memcmp(bytes.data() + kOffMagic, "ni1\0", 4) == 0;
    const bool single = std::memcmp(bytes.data() + kOffMagic, "n+1\0", 4) == 0;
    if (!pair && !single) throw Error(Errc::BadMagic, "magic is neither \"n+1\" nor \"ni1\"");

    bool swap = false;
    {
        const HeaderReader native(bytes, false);
        const auto sizeof_hdr = native.get<std::int32_t>(kOffSizeofHdr);
        if (sizeof_hdr != 348) {
            const HeaderReader swapped(bytes, true);
            if (swapped.get<std::int32_t>(kOffSizeofHdr) != 348) {
                throw Error(Errc::BadHeader, "sizeof_hdr is not 348 in either byte order");
            }
            swap = true;
        }
    }
    const HeaderReader h(bytes, swap);

    std::array<std::int16_t, 8> dim{};
    for (std::size_t i = 0; i < 8; ++i) dim[i] = h.get<std::int16_t>(kOffDim + 2 * i);
    if (!(dim[0] == 3 || (dim[0] == 4 && dim[4] == 1))) {
        throw Error(Errc::BadHeader, "only 3D images (or 4D with a single volume) are supported");
    }
    Grid grid;
    for (std::size_t a = 0; a < 3; ++a) {
        if (dim[a + 1] < 1) throw Error(Errc::BadHeader, "non-positive dimension");
        grid.dims[a] = dim[a + 1];
    }

    const auto datatype = h.get<std::int16_t>(kOffDatatype);
    if (!known_datatype(datatype)) {
        throw Error(Errc::UnsupportedDatatype, "datatype code " + std::to_string(datatype));
    }
    const auto dt = static_cast<NiftiDatatype>(datatype);

    std::array<float, 8> pixdim{};
    for (std::size_t i = 0; i < 8; ++i) pixdim[i] = h.get<float>(kOffPixdim + 4 * i);
    for (std::size_t a = 0; a < 3; ++a) {
        const double s = std::abs(static_cast<double>(pixdim[a + 1]));
        if (!(s > 0.0) || !std::isfinite(s)) throw Error(Errc::BadHeader, "voxel spacing must be positive");
        grid.spacing[a] = s;
    }

    const auto sform_code = h.get<std::int16_t>(kOffSformCode);
    const auto qform_code = h.get<std::int16_t>(kOffQformCode);
    std::optional<Orientation> orientation;
    if (sform_code > 0) {
        Mat3 m{};
        for (std::size_t r = 0; r < 3; ++r) {
            for (std::size_t c = 0; c < 3; ++c) m[r][c] = h.get<float>(kOffSrow + 16 * r + 4 * c);
        }
        orientation = orientation_from_matrix(m);
    } else if (qform_code > 0) {
        const double b = h.get<float>(kOffQuatern);
        const double c = h.get<float>(kOffQuatern + 4);
        const double d = h.get<float>(kOffQuatern + 8);
        if (std::isfinite(b) && std::isfinite(c) && std::isfinite(d) && (b * b + c * c + d * d) <= 1.0 + 1e-6) {
            orientation = orientation_from_matrix(quaternion_matrix(b, c, d, pixdim[0] < 0.0f ? -1.0 : 1.0));
        }
    }
    grid.orientation = orientation.value_or(Orientation::identity());

    std::span<const std::byte> payload;
    if (single) {
        const double vox_offset = h.get<float>(kOffVoxOffset);
        if (!std::isfinite(vox_offset) || vox_offset < static_cast<double>(kNiftiHeaderSize) ||
            vox_offset > static_cast<double>(bytes.size()) || vox_offset != std::floor(vox_offset)) {
            throw Error(vox_offset > static_cast<double>(bytes.size()) ? Errc::TruncatedFile : Errc::BadHeader,
                        "invalid vox_offset");
        }
        payload = bytes.subspan(static_cast<std::size_t>(vox_offset));
    } else {
        if (!image) throw Error(Errc::TruncatedFile, "header/image pair without image data");
        const double vox_offset = h.get<float>(kOffVoxOffset);
        if (!std::isfinite(vox_offset) || vox_offset < 0.0 || vox_offset > static_cast<double>(image->size()) ||
            vox_offset != std::floor(vox_offset)) {
            throw Error(Errc::TruncatedFile, "invalid vox_offset for image file");
        }
        payload = image->subspan(static_cast<std::size_t>(vox_offset));
    }

    const std::size_t count = grid.size();
    const std::size_t esize = element_size(dt);
    if (payload.size() / esize < count) throw Error(Errc::TruncatedFile, "voxel data shorter than dims product");

    double slope = h.get<float>(kOffSclSlope);
    double inter = h.get<float>(kOffSclInter);
    const bool scale = std::isfinite(slope) && slope != 0.0;
    if (!scale) {
        slope = 1.0;
        inter = 0.0;
    } else if (!std::isfinite(inter)) {
        throw Error(Errc::NonFinite, "scl_inter is not finite");
    }

    std::vector<float> data(count);
    const std::byte* p = payload.data();
    for (std::size_t i = 0; i < count; ++i, p += esize) {
        double v = 0.0;
        switch (dt) {
            case NiftiDatatype::UInt8: v = load_element<std::uint8_t>(p, swap); break;
            case NiftiDatatype::Int16: v = load_element<std::int16_t>(p, swap); break;
            case NiftiDatatype::Int32: v = load_element<std::int32_t>(p, swap); break;
            case NiftiDatatype::Float32: v = load_element<float>(p, swap); break;
            case NiftiDatatype::Float64: v = load_element<double>(p, swap); break;
        }
        if (scale) v = v * slope + inter;
        const auto f = static_cast<float>(v);
        if (!std::isfinite(v) || !std::isfinite(f)) {
            throw Error(Errc::NonFinite, "non-finite voxel at index " + std::to_string(i));
        }
        data[i] = f;
    }

    std::string descrip(reinterpret_cast<const char*>(bytes.data() + kOffDescrip), kDescripLen);
    descrip.resize(std::strlen(descrip.c_str()));
    const VolumeKind kind = kind_from_descrip(descrip, data);
    return Volume(grid, kind, std::move(data));
}

std::vector<std::byte> encode_nifti(const Volume& volume) {
    const Grid& g = volume.grid();
    std::vector<std::byte> out(kNiftiVoxOffset + 4 * volume.size(), std::byte{0});
    HeaderWriter w(out);
    w.put<std::int32_t>(kOffSizeofHdr, 348);
    w.put<std::int16_t>(kOffDim, 3);
    for (std::size_t a = 0; a < 3; ++a) w.put<std::int16_t>(kOffDim + 2 * (a + 1), static_cast<std::int16_t>(g.dims[a]));
    for (std::size_t a = 4; a < 8; ++a) w.put<std::int16_t>(kOffDim + 2 * a, 1);
    w.put<std::int16_t>(kOffDatatype, static_cast<std::int16_t>(NiftiDatatype::Float32));
    w.put<std::int16_t>(kOffBitpix, 32);
    w.put<float>(kOffPixdim, 1.0f);
    for (std::size_t a = 0; a < 3; ++a) w.put<float>(kOffPixdim + 4 * (a + 1), static_cast<float>(g.spacing[a]));
    for (std::size_t a = 4; a < 8; ++a) w.put<float>(kOffPixdim + 4 * a, 1.0f);
    w.put<float>(kOffVoxOffset, static_cast<float>(kNiftiVoxOffset));
    w.put<float>(kOffSclSlope, 1.0f);
    w.put<float>(kOffSclInter, 0.0f);
    out[kOffXyztUnits] = std::byte{2};  // mm

    const std::string descrip = std::string(kKindTag) + kind_name(volume.kind());
    std::memcpy(out.data() + kOffDescrip, descrip.data(), std::min(descrip.size(), kDescripLen - 1));

    w.put<std::int16_t>(kOffQformCode, 0);
    w.put<std::int16_t>(kOffSformCode, 1);
    for (std::size_t col = 0; col < 3; ++col) {
        const auto row = static_cast<std::size_t>(g.orientation.axis[col]);
        const double sign = g.orientation.flip[col] ? -1.0 : 1.0;
        w.put<float>(kOffSrow + 16 * row + 4 * col, static_cast<float>(sign * g.spacing[col]));
    }
    std::memcpy(out.data() + kOffMagic, "n+1\0", 4);

    std::byte* p = out.data() + kNiftiVoxOffset;
    for (float v : volume.data()) {
        std::array<std::byte, 4> raw{};
        std::memcpy(raw.data(), &v, 4);
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
        std::memcpy(p, raw.data(), 4);
        p += 4;
    }
    return out;
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    if (size < 0) throw Error(Errc::IoError, "cannot size " + path.string());
    in.seekg(0, std::ios::beg);
    std::vector<std::byte> bytes(static_cast<std::size_t>(size));
    in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) throw Error(Errc::IoError, "short read on " + path.string());
    return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::IoError, "write failed on " + path.string());
}

Volume read_nifti(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    if (path.extension() == ".hdr") {
        auto img_path = path;
        img_path.replace_extension(".img");
        const auto image = read_file_bytes(img_path);
        return parse_nifti(bytes, std::span<const std::byte>(image));
    }
    return parse_nifti(bytes);
}

void write_nifti(const Volume& volume, const std::filesystem::path& path) {
    write_file_bytes(path, encode_nifti(volume));
}

Volume mask_to_volume(const Mask& mask) {
    std::vector<float> data(mask.size());
    std::transform(mask.labels().begin(), mask.labels().end(), data.begin(),
                   [](std::uint8_t l) { return static_cast<float>(l); });
    return Volume(mask.grid(), VolumeKind::HU, std::move(data));
}

Mask volume_to_mask(const Volume& volume, LabelMap label_map) {
    std::vector<std::uint8_t> labels(volume.size());
    for (std::size_t i = 0; i < volume.size(); ++i) {
        const float v = volume[i];
        const float r = std::round(v);
        if (r != v || r < 0.0f || r > 255.0f) {
            throw Error(Errc::BadFormat, "label image holds a non-integral or out-of-range value");
        }
        labels[i] = static_cast<std::uint8_t>(r);
    }
    return Mask(volume.grid(), std::move(labels), std::move(label_map));
}

}  // namespace livseg
