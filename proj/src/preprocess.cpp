#include "livseg/preprocess.hpp"

#include <algorithm>
#include <random>

#include "livseg/error.hpp"

namespace livseg {
namespace {

Grid standard_grid(const Grid& g) {
    Grid out;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto a = static_cast<std::size_t>(g.orientation.axis[i]);
        out.dims[a] = g.dims[i];
        out.spacing[a] = g.spacing[i];
    }
    out.orientation = Orientation::identity();
    return out;
}

template <typename T>
std::vector<T> reorder_to_standard(const Grid& g, std::span<const T> in, const Grid& out_grid) {
    std::vector<T> out(in.size());
    std::array<int, 3> idx{};
    std::array<int, 3> dst{};
    for (idx[2] = 0; idx[2] < g.dims[2]; ++idx[2]) {
        for (idx[1] = 0; idx[1] < g.dims[1]; ++idx[1]) {
            for (idx[0] = 0; idx[0] < g.dims[0]; ++idx[0]) {
                for (std::size_t i = 0; i < 3; ++i) {
                    const auto a = static_cast<std::size_t>(g.orientation.axis[i]);
                    dst[a] = g.orientation.flip[i] ? g.dims[i] - 1 - idx[i] : idx[i];
                }
                out[out_grid.index(dst[0], dst[1], dst[2])] = in[g.index(idx[0], idx[1], idx[2])];
            }
        }
    }
    return out;
}

template <typename T>
std::vector<T> crop_data(std::span<const T> in, const Dims& src_dims, const CropPlan& plan, T fill) {
    Grid src;
    src.dims = src_dims;
    Grid dst;
    dst.dims = plan.target;
    std::vector<T> out(dst.size(), fill);
    for (int z = 0; z < plan.length[2]; ++z) {
        for (int y = 0; y < plan.length[1]; ++y) {
            const std::size_t s = src.index(plan.src_offset[0], plan.src_offset[1] + y, plan.src_offset[2] + z);
            const std::size_t d = dst.index(plan.dst_offset[0], plan.dst_offset[1] + y, plan.dst_offset[2] + z);
            std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(s), plan.length[0],
                        out.begin() + static_cast<std::ptrdiff_t>(d));
        }
    }
    return out;
}

Grid cropped_grid(const Grid& g, const CropPlan& plan) {
    if (g.dims != plan.source_dims) throw Error(Errc::ShapeMismatch, "crop plan does not match volume dims");
    Grid out = g;
    out.dims = plan.target;
    return out;
}

}  // namespace

void HuWindow::validate() const {
    if (!(lo < hi)) throw Error(Errc::InvalidArgument, "HU window requires lo < hi");
}

Volume standardize_orientation(const Volume& v) {
    if (v.orientation().is_identity()) return v;
    const Grid out_grid = standard_grid(v.grid());
    return Volume(out_grid, v.kind(), reorder_to_standard<float>(v.grid(), v.data(), out_grid));
}

Mask standardize_orientation(const Mask& m) {
    if (m.grid().orientation.is_identity()) return m;
    const Grid out_grid = standard_grid(m.grid());
    return Mask(out_grid, reorder_to_standard<std::uint8_t>(m.grid(), m.labels(), out_grid), m.label_map());
}

Volume window_and_normalize(const Volume& v, const HuWindow& w) {
    if (v.kind() != VolumeKind::HU) throw Error(Errc::KindMismatch, "windowing expects an HU volume");
    w.validate();
    const double width = w.hi - w.lo;
    std::vector<float> out(v.size());
    std::transform(v.data().begin(), v.data().end(), out.begin(), [&](float x) {
        const double c = std::clamp(static_cast<double>(x), w.lo, w.hi);
        return std::clamp(static_cast<float>((c - w.lo) / width), 0.0f, 1.0f);
    });
    return Volume(v.grid(), VolumeKind::Normalized, std::move(out));
}

Volume mask_outside_liver(const Volume& v, const Mask& liver) {
    require_aligned(v.grid(), liver.grid(), "mask_outside_liver");
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = liver.is_foreground(i) ? v[i] : 0.0f;
    return Volume(v.grid(), v.kind(), std::move(out));
}

BoundingBox liver_bbox(const Mask& liver, int margin) {
    if (margin < 0) throw Error(Errc::InvalidArgument, "negative bounding-box margin");
    const Grid& g = liver.grid();
    BoundingBox box{{g.dims[0], g.dims[1], g.dims[2]}, {-1, -1, -1}};
    bool any = false;
    for (std::size_t i = 0; i < liver.size(); ++i) {
        if (!liver.is_foreground(i)) continue;
        any = true;
        const auto c = g.coords(i);
        for (std::size_t a = 0; a < 3; ++a) {
            box.min[a] = std::min(box.min[a], c[a]);
            box.max[a] = std::max(box.max[a], c[a]);
        }
    }
    if (!any) throw Error(Errc::EmptyMask, "liver mask has no foreground voxel");
    for (std::size_t a = 0; a < 3; ++a) {
        box.min[a] = std::max(0, box.min[a] - margin);
        box.max[a] = std::min(g.dims[a] - 1, box.max[a] + margin);
    }
    return box;
}

CropPlan plan_crop(const Dims& source_dims, const BoundingBox& box, const Dims& target, const CropMode& mode) {
    CropPlan plan;
    plan.source_dims = source_dims;
    plan.target = target;
    std::mt19937_64 rng(mode.seed);
    for (std::size_t a = 0; a < 3; ++a) {
        if (target[a] < 1) throw Error(Errc::InvalidArgument, "crop target must be positive");
        const int lo = std::clamp(box.min[a], 0, source_dims[a] - 1);
        const int hi = std::clamp(box.max[a], lo, source_dims[a] - 1);
        const int extent = hi - lo + 1;
        if (extent > target[a]) {
            const int slack = extent - target[a];
            int offset = slack / 2;
            if (mode.kind == CropMode::Kind::Random) {
                offset = std::uniform_int_distribution<int>(0, slack)(rng);
            }
            plan.src_offset[a] = lo + offset;
            plan.dst_offset[a] = 0;
            plan.length[a] = target[a];
        } else {
            plan.src_offset[a] = lo;
            plan.dst_offset[a] = (target[a] - extent) / 2;
            plan.length[a] = extent;
        }
    }
    return plan;
}

Volume apply_crop(const Volume& v, const CropPlan& plan) {
    return Volume(cropped_grid(v.grid(), plan), v.kind(), crop_data<float>(v.data(), v.dims(), plan, 0.0f));
}

Mask apply_crop(const Mask& m, const CropPlan& plan) {
    return Mask(cropped_grid(m.grid(), plan), crop_data<std::uint8_t>(m.labels(), m.dims(), plan, kBackgroundLabel),
                m.label_map());
}

Mask uncrop(const Mask& cropped, const CropPlan& plan, const Grid& full) {
    if (cropped.dims() != plan.target || full.dims != plan.source_dims) {
        throw Error(Errc::ShapeMismatch, "uncrop: plan does not match the masks");
    }
    std::vector<std::uint8_t> out(full.size(), kBackgroundLabel);
    const Grid& cg = cropped.grid();
    for (int z = 0; z < plan.length[2]; ++z) {
        for (int y = 0; y < plan.length[1]; ++y) {
            for (int x = 0; x < plan.length[0]; ++x) {
                out[full.index(plan.src_offset[0] + x, plan.src_offset[1] + y, plan.src_offset[2] + z)] =
                    cropped[cg.index(plan.dst_offset[0] + x, plan.dst_offset[1] + y, plan.dst_offset[2] + z)];
            }
        }
    }
    return Mask(full, std::move(out), cropped.label_map());
}

PreparedInput prepare_liver_input(const Volume& ct, const BranchPreprocess& cfg) {
    const Volume oriented = standardize_orientation(ct);
    const Volume normalized = window_and_normalize(oriented, cfg.window);
    const Dims& d = oriented.dims();
    const BoundingBox whole{{0, 0, 0}, {d[0] - 1, d[1] - 1, d[2] - 1}};
    const CropPlan plan = plan_crop(d, whole, cfg.target, CropMode::center());
    return {apply_crop(normalized, plan), plan, oriented.grid()};
}

PreparedInput prepare_tumor_input(const Volume& ct, const Mask& liver, const BranchPreprocess& cfg,
                                  const CropMode& mode) {
    const Volume oriented = standardize_orientation(ct);
    const Mask liver_std = standardize_orientation(liver);
    const Volume normalized = window_and_normalize(oriented, cfg.window);
    const Volume masked = mask_outside_liver(normalized, liver_std);
    const BoundingBox box = liver_bbox(liver_std, cfg.bbox_margin);
    const CropPlan plan = plan_crop(oriented.dims(), box, cfg.target, mode);
    return {apply_crop(masked, plan), plan, oriented.grid()};
}

}  // namespace livseg
