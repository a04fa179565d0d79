#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "livseg/volume.hpp"

namespace livseg {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + tn + fp + fn; }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Binary class-vs-rest counts for voxels mapped to `tissue`.
ConfusionCounts confusion(const Mask& pred, const Mask& gt, Tissue tissue);

/// Empty optional marks a zero denominator.
struct Scores {
    std::optional<double> accuracy;
    std::optional<double> dice;
    std::optional<double> iou;
    std::optional<double> sensitivity;
};

Scores scores(const ConfusionCounts& c);

enum class SizeClass : std::uint8_t { Small, Large, NotApplicable };
enum class SizeCriterion : std::uint8_t { Volume, Diameter };

inline constexpr double kLargeVolumeCm3 = 500.0;
inline constexpr double kLargeDiameterCm = 10.0;

const char* size_class_name(SizeClass c);

/// Voxel count of `tissue` times voxel volume, in cm^3 (spacing in mm).
double tumor_volume_cm3(const Mask& m, Tissue tissue = Tissue::Tumor);
/// Largest axis-aligned extent of `tissue`, in cm.
double max_diameter_cm(const Mask& m, Tissue tissue = Tissue::Tumor);
/// Same on a 0/1 indicator.
double max_diameter_cm(const Grid& grid, std::span<const std::uint8_t> binary);

/// n/a when `value` is zero (no tumor).
SizeClass stratify(double value, SizeCriterion criterion);

struct MetricsReport {
    Scores liver;
    Scores tumor;
    double tumor_volume_cm3 = 0.0;
    double tumor_diameter_cm = 0.0;
    SizeClass size_class = SizeClass::NotApplicable;
};

/// Per-class scores on one volume; the size class is taken from the ground
/// truth tumor.
MetricsReport evaluate(const Mask& pred_liver, const Mask& pred_tumor, const Mask& gt_liver, const Mask& gt_tumor,
                       SizeCriterion criterion = SizeCriterion::Volume);

struct Summary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation, 0 for n < 2
    std::size_t n = 0;
};

/// Mean and sample stddev over the defined values.
Summary summarize(std::span<const std::optional<double>> values);

struct CohortRow {
    std::string method;
    std::string cls;
    Summary accuracy;
    Summary dice;
    Summary sensitivity;
    Summary iou;
};

CohortRow aggregate(const std::string& method, const std::string& cls, std::span<const Scores> per_volume);

/// Header: method,class,accuracy,dice,sensitivity,iou. Cells are
/// "mean ± std" strings by default, or plain means when `means_only`.
inline constexpr const char* kCohortCsvHeader = "method,class,accuracy,dice,sensitivity,iou";
void write_cohort_csv(std::span<const CohortRow> rows, const std::filesystem::path& path, bool means_only = false);
std::string cohort_csv(std::span<const CohortRow> rows, bool means_only = false);

}  // namespace livseg
