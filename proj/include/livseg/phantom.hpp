#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "livseg/clinical_csv.hpp"
#include "livseg/volume.hpp"

namespace livseg {

/// Linear TLVR model used to generate correlated clinical records:
///   tlvr = intercept + sum_k beta_k (f_k - reference_k) + N(0, noise_sigma).
/// Vectors follow clinical_schema() order.
struct ClinicalGenerator {
    double intercept = 0.12;
    std::vector<double> beta;
    std::vector<double> reference;
    double noise_sigma = 0.038;
    /// Continuous feature shifted so that the relation holds exactly for the
    /// voxelized tumor burden.
    std::string absorb_feature = "TTP";

    static ClinicalGenerator standard();
    double signal(std::span<const double> features) const;
};

/// Draws one feature vector in schema order.
std::vector<double> sample_clinical_features(std::mt19937_64& rng);

struct PhantomSpec {
    Dims dims{64, 64, 32};
    Spacing spacing{4.0, 4.0, 6.0};

    /// Body cross-section half-axes as fractions of the x/y extent.
    std::array<double, 2> body_radii{0.46, 0.40};
    /// Liver ellipsoid, centre in voxels and radii in voxels.
    std::array<double, 3> liver_center{24.0, 32.0, 16.0};
    std::array<double, 3> liver_radii{17.0, 14.0, 11.0};
    bool spleen = true;
    std::array<double, 3> spleen_center{50.0, 34.0, 16.0};
    std::array<double, 3> spleen_radii{5.0, 6.0, 5.0};

    int tumor_count_min = 1;
    int tumor_count_max = 2;
    /// Sphere radius bounds in voxels.
    double tumor_radius_min = 2.5;
    double tumor_radius_max = 7.5;
    /// Target TLVR drawn from the clinical model is clamped to this range.
    double tlvr_min = 0.02;
    double tlvr_max = 0.25;

    double hu_air = -1000.0;
    double hu_body = -80.0;
    double hu_liver = 60.0;
    double hu_spleen = 55.0;
    double hu_tumor = 160.0;
    double noise_sigma = 12.0;
    double blur_sigma = 0.7;

    ClinicalGenerator clinical = ClinicalGenerator::standard();

    void validate() const;
};

/// Bright lesions clearly separated from the parenchyma.
PhantomSpec high_contrast_spec();
/// Lesions a few noise standard deviations above the parenchyma.
PhantomSpec low_contrast_spec();

struct Phantom {
    Volume ct;
    /// Liver parenchyma only (label 1); tumor voxels are not included.
    Mask liver;
    /// Tumor voxels (label 2).
    Mask tumor;
    ClinicalRecord record;
    /// Noise-inclusive clinical-model value; equals the mask TLVR whenever
    /// tumors were placed.
    double model_tlvr = 0.0;
    int tumor_count = 0;
};

Phantom generate_phantom(const PhantomSpec& spec, std::uint64_t seed);

/// Records drawn from the same clinical model without images; `tlvr` holds
/// the model value.
ClinicalTable generate_clinical_cohort(const ClinicalGenerator& gen, std::size_t n, std::uint64_t seed);

/// Liver and tumor combined into one label mask.
Mask combine_labels(const Mask& liver, const Mask& tumor);

/// 6-connected radius-1 dilation or erosion of the `label` voxels, restricted
/// to the non-background voxels of `within` for dilation.
Mask dilate_label(const Mask& m, std::uint8_t label, const Mask& within);
Mask erode_label(const Mask& m, std::uint8_t label);

/// With probability `p` the label is dilated or eroded (equal odds).
Mask perturb_label(const Mask& m, std::uint8_t label, const Mask& within, double p, std::mt19937_64& rng);

}  // namespace livseg
