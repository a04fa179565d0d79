#include "livseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "filters.hpp"
#include "livseg/clinical.hpp"
#include "livseg/error.hpp"

namespace livseg {
namespace {

enum class Draw { Bernoulli, Binomial6, Uniform1to7, Gamma, Normal };

struct FeatureDraw {
    const char* name;
    Draw draw;
    double a;
    double b;
    /// Expected value and standard deviation of the draw.
    double mean;
    double stddev;
    /// TLVR change per standard deviation of the feature.
    double effect;
};

// Schema order.
const std::array<FeatureDraw, 15>& feature_draws() {
    static const std::array<FeatureDraw, 15> d = {{
        {"T_involvement", Draw::Bernoulli, 0.4, 0, 0.4, std::sqrt(0.24), 0.035},
        {"personal_history_of_cancer", Draw::Bernoulli, 0.2, 0, 0.2, 0.4, 0.005},
        {"lymphnodes", Draw::Bernoulli, 0.3, 0, 0.3, std::sqrt(0.21), 0.010},
        {"CLIP_score", Draw::Binomial6, 0.35, 0, 2.1, std::sqrt(6 * 0.35 * 0.65), 0.020},
        {"TNM", Draw::Uniform1to7, 0, 0, 4.0, 2.0, 0.020},
        {"metastasis", Draw::Bernoulli, 0.2, 0, 0.2, 0.4, 0.015},
        {"evidence_of_cirrhosis", Draw::Bernoulli, 0.6, 0, 0.6, std::sqrt(0.24), 0.008},
        {"alcohol", Draw::Bernoulli, 0.4, 0, 0.4, std::sqrt(0.24), 0.005},
        {"AFP", Draw::Gamma, 2.0, 75.0, 150.0, std::sqrt(2.0) * 75.0, 0.015},
        {"smoking", Draw::Bernoulli, 0.4, 0, 0.4, std::sqrt(0.24), 0.005},
        {"diabetes", Draw::Bernoulli, 0.3, 0, 0.3, std::sqrt(0.21), 0.005},
        {"family_history", Draw::Bernoulli, 0.2, 0, 0.2, 0.4, 0.004},
        {"age", Draw::Normal, 62.0, 9.0, 62.0, 9.0, -0.005},
        {"TTP", Draw::Normal, 14.0, 5.0, 14.0, 5.0, -0.012},
        {"Interval_BL", Draw::Normal, 30.0, 10.0, 30.0, 10.0, 0.004},
    }};
    return d;
}

double ellipsoid_r2(const std::array<double, 3>& c, const std::array<double, 3>& r, double x, double y, double z) {
    const double dx = (x - c[0]) / r[0], dy = (y - c[1]) / r[1], dz = (z - c[2]) / r[2];
    return dx * dx + dy * dy + dz * dz;
}

struct Sphere {
    std::array<double, 3> center;
    double radius;
};

void check_positive(double v, const char* what) {
    if (!(v > 0.0)) throw Error(Errc::InvalidArgument, std::string(what) + " must be positive");
}

}  // namespace

ClinicalGenerator ClinicalGenerator::standard() {
    ClinicalGenerator g;
    for (const auto& f : feature_draws()) {
        g.beta.push_back(f.effect / f.stddev);
        g.reference.push_back(f.mean);
    }
    return g;
}

double ClinicalGenerator::signal(std::span<const double> features) const {
    double s = intercept;
    for (std::size_t k = 0; k < beta.size(); ++k) s += beta[k] * (features[k] - reference[k]);
    return s;
}

std::vector<double> sample_clinical_features(std::mt19937_64& rng) {
    std::vector<double> v;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& f : feature_draws()) {
        switch (f.draw) {
            case Draw::Bernoulli: v.push_back(u(rng) < f.a ? 1.0 : 0.0); break;
            case Draw::Binomial6: {
                int k = 0;
                for (int i = 0; i < 6; ++i) k += u(rng) < f.a;
                v.push_back(k);
                break;
            }
            case Draw::Uniform1to7: v.push_back(1.0 + std::floor(u(rng) * 7.0)); break;
            case Draw::Gamma: v.push_back(std::gamma_distribution<double>(f.a, f.b)(rng)); break;
            case Draw::Normal: v.push_back(std::normal_distribution<double>(f.a, f.b)(rng)); break;
        }
    }
    return v;
}

void PhantomSpec::validate() const {
    for (int d : dims) {
        if (d < 4) throw Error(Errc::InvalidArgument, "phantom dims must be >= 4");
    }
    for (double s : spacing) check_positive(s, "spacing");
    for (double r : liver_radii) check_positive(r, "liver radius");
    if (tumor_count_min < 0 || tumor_count_max < tumor_count_min) {
        throw Error(Errc::InvalidArgument, "tumor count range is invalid");
    }
    check_positive(tumor_radius_min, "tumor radius");
    if (tumor_radius_max < tumor_radius_min) throw Error(Errc::InvalidArgument, "tumor radius range is invalid");
    if (!(tlvr_min > 0.0 && tlvr_max >= tlvr_min && tlvr_max < 1.0)) {
        throw Error(Errc::InvalidArgument, "TLVR range must lie in (0,1)");
    }
    if (!(noise_sigma >= 0.0) || !(blur_sigma >= 0.0)) throw Error(Errc::InvalidArgument, "sigmas must be >= 0");
    const auto n = clinical_schema().size();
    if (clinical.beta.size() != n || clinical.reference.size() != n) {
        throw Error(Errc::InvalidArgument, "clinical generator must cover the schema");
    }
    if (!(clinical.noise_sigma >= 0.0)) throw Error(Errc::InvalidArgument, "clinical noise must be >= 0");
}

PhantomSpec high_contrast_spec() {
    PhantomSpec s;
    s.hu_tumor = 160.0;
    return s;
}

PhantomSpec low_contrast_spec() {
    PhantomSpec s;
    s.hu_tumor = 90.0;
    return s;
}

Phantom generate_phantom(const PhantomSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto& schema = clinical_schema();
    const auto& cg = spec.clinical;

    Grid grid;
    grid.dims = spec.dims;
    grid.spacing = spec.spacing;
    const std::size_t n = grid.size();

    std::vector<std::uint8_t> in_liver(n, 0);
    std::size_t liver_voxels = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = grid.coords(i);
        if (ellipsoid_r2(spec.liver_center, spec.liver_radii, c[0], c[1], c[2]) <= 1.0) {
            in_liver[i] = 1;
            ++liver_voxels;
        }
    }
    if (liver_voxels == 0) throw Error(Errc::InfeasibleSpec, "liver ellipsoid contains no voxels");

    Phantom ph;
    std::vector<double> features = sample_clinical_features(rng);
    const double eps = cg.noise_sigma > 0.0 ? std::normal_distribution<double>(0.0, cg.noise_sigma)(rng) : 0.0;
    const int count =
        std::uniform_int_distribution<int>(spec.tumor_count_min, spec.tumor_count_max)(rng);

    std::vector<std::uint8_t> tumor(n, 0);
    if (count == 0) {
        features = cg.reference;
        ph.model_tlvr = cg.intercept + eps;
    } else {
        const double target = std::clamp(cg.signal(features) + eps, spec.tlvr_min, spec.tlvr_max);
        const double total = target * static_cast<double>(liver_voxels);
        std::vector<double> share(static_cast<std::size_t>(count));
        for (auto& s : share) s = 0.5 + u(rng);
        const double share_sum = std::accumulate(share.begin(), share.end(), 0.0);

        std::vector<Sphere> placed;
        for (int t = 0; t < count; ++t) {
            const double vol = total * share[static_cast<std::size_t>(t)] / share_sum;
            double r = std::clamp(std::cbrt(3.0 * vol / (4.0 * std::numbers::pi)), spec.tumor_radius_min,
                                  spec.tumor_radius_max);
            // Lesions that do not fit shrink towards the minimum radius; the
            // clinical record absorbs the difference.
            bool ok = false;
            for (int attempt = 0; attempt < 2000 && !ok; ++attempt) {
                if (attempt > 0 && attempt % 200 == 0) {
                    if (r <= spec.tumor_radius_min) break;
                    r = std::max(spec.tumor_radius_min, 0.9 * r);
                }
                std::array<double, 3> c{};
                for (std::size_t a = 0; a < 3; ++a) {
                    c[a] = spec.liver_center[a] + (2.0 * u(rng) - 1.0) * spec.liver_radii[a];
                }
                // The sphere must sit inside the ellipsoid with a one-voxel
                // rim of parenchyma, and clear of earlier lesions.
                bool fits = true;
                for (int dz = -static_cast<int>(r) - 1; fits && dz <= static_cast<int>(r) + 1; ++dz) {
                    for (int dy = -static_cast<int>(r) - 1; fits && dy <= static_cast<int>(r) + 1; ++dy) {
                        for (int dx = -static_cast<int>(r) - 1; fits && dx <= static_cast<int>(r) + 1; ++dx) {
                            const double x = std::round(c[0]) + dx, y = std::round(c[1]) + dy,
                                         z = std::round(c[2]) + dz;
                            const double d2 = (x - c[0]) * (x - c[0]) + (y - c[1]) * (y - c[1]) +
                                              (z - c[2]) * (z - c[2]);
                            if (d2 > (r + 1.0) * (r + 1.0)) continue;
                            if (!grid.contains(static_cast<int>(x), static_cast<int>(y), static_cast<int>(z)) ||
                                !in_liver[grid.index(static_cast<int>(x), static_cast<int>(y), static_cast<int>(z))]) {
                                fits = false;
                            }
                        }
                    }
                }
                for (const auto& p : placed) {
                    const double dist = std::hypot(c[0] - p.center[0], c[1] - p.center[1], c[2] - p.center[2]);
                    if (dist < r + p.radius + 2.0) fits = false;
                }
                if (fits) {
                    placed.push_back({c, r});
                    ok = true;
                }
            }
            if (!ok) throw Error(Errc::InfeasibleSpec, "could not place tumor " + std::to_string(t + 1));
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (!in_liver[i]) continue;
            const auto c = grid.coords(i);
            for (const auto& p : placed) {
                const double d2 = (c[0] - p.center[0]) * (c[0] - p.center[0]) +
                                  (c[1] - p.center[1]) * (c[1] - p.center[1]) +
                                  (c[2] - p.center[2]) * (c[2] - p.center[2]);
                if (d2 <= p.radius * p.radius) tumor[i] = 1;
            }
        }
        const double actual = static_cast<double>(std::count(tumor.begin(), tumor.end(), 1)) /
                              static_cast<double>(liver_voxels);
        const auto k = static_cast<std::size_t>(
            std::find(schema.begin(), schema.end(), cg.absorb_feature) - schema.begin());
        if (k >= schema.size() || cg.beta[k] == 0.0) {
            throw Error(Errc::InvalidArgument, "absorbing feature must be in the schema with nonzero weight");
        }
        features[k] += (actual - (cg.signal(features) + eps)) / cg.beta[k];
        ph.model_tlvr = cg.signal(features) + eps;
    }
    ph.tumor_count = count;

    // Tissue map to HU, blur, noise.
    std::vector<double> hu(n);
    std::vector<std::uint8_t> liver_labels(n, kBackgroundLabel), tumor_labels(n, kBackgroundLabel);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = grid.coords(i);
        const double bx = (c[0] - (spec.dims[0] - 1) / 2.0) / (spec.body_radii[0] * spec.dims[0]);
        const double by = (c[1] - (spec.dims[1] - 1) / 2.0) / (spec.body_radii[1] * spec.dims[1]);
        double v = bx * bx + by * by <= 1.0 ? spec.hu_body : spec.hu_air;
        if (spec.spleen && ellipsoid_r2(spec.spleen_center, spec.spleen_radii, c[0], c[1], c[2]) <= 1.0 &&
            !in_liver[i]) {
            v = spec.hu_spleen;
        }
        if (tumor[i]) {
            v = spec.hu_tumor;
            tumor_labels[i] = kTumorLabel;
        } else if (in_liver[i]) {
            v = spec.hu_liver;
            liver_labels[i] = kLiverLabel;
        }
        hu[i] = v;
    }
    if (spec.blur_sigma > 0.0) hu = detail::separable(hu, grid.dims, detail::gaussian_kernel(spec.blur_sigma));
    std::vector<float> data(n);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        data[i] = static_cast<float>(hu[i] + spec.noise_sigma * noise(rng));
    }

    ph.ct = Volume(grid, VolumeKind::HU, std::move(data));
    ph.liver = Mask(grid, std::move(liver_labels));
    ph.tumor = Mask(grid, std::move(tumor_labels));
    ph.record.patient_id = "phantom-" + std::to_string(seed);
    ph.record.values = std::move(features);
    ph.record.missing.assign(schema.size(), false);
    ph.record.tlvr = compute_tlvr(ph.liver, ph.tumor);
    return ph;
}

ClinicalTable generate_clinical_cohort(const ClinicalGenerator& gen, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ClinicalTable t;
    t.features = clinical_schema();
    for (std::size_t i = 0; i < n; ++i) {
        ClinicalRecord r;
        r.patient_id = "cohort-" + std::to_string(i);
        r.values = sample_clinical_features(rng);
        r.missing.assign(r.values.size(), false);
        const double eps = gen.noise_sigma > 0.0 ? std::normal_distribution<double>(0.0, gen.noise_sigma)(rng) : 0.0;
        r.tlvr = gen.signal(r.values) + eps;
        t.records.push_back(std::move(r));
    }
    return t;
}

Mask combine_labels(const Mask& liver, const Mask& tumor) {
    require_aligned(liver.grid(), tumor.grid(), "combine_labels");
    std::vector<std::uint8_t> out(liver.size(), kBackgroundLabel);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (tumor.is_foreground(i)) {
            out[i] = kTumorLabel;
        } else if (liver.is_foreground(i)) {
            out[i] = kLiverLabel;
        }
    }
    return Mask(liver.grid(), std::move(out));
}

namespace {

constexpr int kFaceSteps[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};

}  // namespace

Mask dilate_label(const Mask& m, std::uint8_t label, const Mask& within) {
    require_aligned(m.grid(), within.grid(), "dilate_label");
    const Grid& g = m.grid();
    std::vector<std::uint8_t> out(m.labels().begin(), m.labels().end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (m[i] == label || !within.is_foreground(i)) continue;
        const auto c = g.coords(i);
        for (const auto& s : kFaceSteps) {
            const int x = c[0] + s[0], y = c[1] + s[1], z = c[2] + s[2];
            if (g.contains(x, y, z) && m.at(x, y, z) == label) {
                out[i] = label;
                break;
            }
        }
    }
    return Mask(g, std::move(out), m.label_map());
}

Mask erode_label(const Mask& m, std::uint8_t label) {
    const Grid& g = m.grid();
    std::vector<std::uint8_t> out(m.labels().begin(), m.labels().end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (m[i] != label) continue;
        const auto c = g.coords(i);
        for (const auto& s : kFaceSteps) {
            const int x = c[0] + s[0], y = c[1] + s[1], z = c[2] + s[2];
            if (!g.contains(x, y, z) || m.at(x, y, z) != label) {
                out[i] = kBackgroundLabel;
                break;
            }
        }
    }
    return Mask(g, std::move(out), m.label_map());
}

Mask perturb_label(const Mask& m, std::uint8_t label, const Mask& within, double p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const bool apply = u(rng) < p;
    const bool dilate = u(rng) < 0.5;
    if (!apply) return m;
    return dilate ? dilate_label(m, label, within) : erode_label(m, label);
}

}  // namespace livseg
