#pragma once

#include <optional>
#include <string>
#include <vector>

#include "livseg/clinical_csv.hpp"
#include "livseg/metrics.hpp"
#include "livseg/volume.hpp"

namespace livseg {

struct Lesion {
    double volume_cm3 = 0.0;
    double diameter_cm = 0.0;
    std::size_t voxels = 0;
};

struct DiagnosticReport {
    /// Ordered by volume, largest first.
    std::vector<Lesion> lesions;
    /// Per-lesion diameters, largest first.
    std::vector<double> diameters_cm;
    double tumor_volume_cm3 = 0.0;
    double liver_volume_cm3 = 0.0;
    double tlvr = 0.0;
    SizeClass size_by_volume = SizeClass::NotApplicable;
    SizeClass size_by_diameter = SizeClass::NotApplicable;
    std::optional<std::string> patient_id;

    std::string text;
    std::string json;
};

/// Rule-based summary of a segmentation. Liver voxels that also carry tumor
/// are counted once, as tumor.
DiagnosticReport emit_report(const Mask& liver, const Mask& tumor,
                             const std::optional<ClinicalRecord>& record = std::nullopt);

/// 26-connected components of the foreground voxels, in discovery order.
std::vector<std::vector<std::size_t>> connected_components(const Mask& m);

/// Three significant figures.
std::string format_sig3(double v);

}  // namespace livseg
