#include "livseg/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace livseg {

std::vector<std::vector<std::size_t>> connected_components(const Mask& m) {
    const Grid& g = m.grid();
    std::vector<std::uint8_t> seen(m.size(), 0);
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> stack;
    for (std::size_t seed = 0; seed < m.size(); ++seed) {
        if (seen[seed] || !m.is_foreground(seed)) continue;
        std::vector<std::size_t> comp;
        seen[seed] = 1;
        stack.push_back(seed);
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            comp.push_back(i);
            const auto c = g.coords(i);
            for (int dz = -1; dz <= 1; ++dz) {
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int x = c[0] + dx, y = c[1] + dy, z = c[2] + dz;
                        if (!g.contains(x, y, z)) continue;
                        const std::size_t j = g.index(x, y, z);
                        if (!seen[j] && m.is_foreground(j)) {
                            seen[j] = 1;
                            stack.push_back(j);
                        }
                    }
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
    }
    return out;
}

std::string format_sig3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

namespace {

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

DiagnosticReport emit_report(const Mask& liver, const Mask& tumor, const std::optional<ClinicalRecord>& record) {
    require_aligned(liver.grid(), tumor.grid(), "emit_report");
    const Grid& g = tumor.grid();
    const double voxel_cm3 = g.spacing[0] * g.spacing[1] * g.spacing[2] / 1000.0;

    DiagnosticReport r;
    if (record) r.patient_id = record->patient_id;
    std::vector<std::uint8_t> bin(g.size(), 0);
    for (const auto& comp : connected_components(tumor)) {
        std::fill(bin.begin(), bin.end(), 0);
        for (auto i : comp) bin[i] = 1;
        Lesion l;
        l.voxels = comp.size();
        l.volume_cm3 = static_cast<double>(comp.size()) * voxel_cm3;
        l.diameter_cm = max_diameter_cm(g, bin);
        r.lesions.push_back(l);
    }
    std::stable_sort(r.lesions.begin(), r.lesions.end(),
                     [](const Lesion& a, const Lesion& b) { return a.voxels > b.voxels; });
    for (const auto& l : r.lesions) r.diameters_cm.push_back(l.diameter_cm);
    std::sort(r.diameters_cm.begin(), r.diameters_cm.end(), std::greater<>());

    std::size_t tumor_voxels = 0, liver_only = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (tumor.is_foreground(i)) {
            ++tumor_voxels;
        } else if (liver.is_foreground(i)) {
            ++liver_only;
        }
    }
    r.tumor_volume_cm3 = static_cast<double>(tumor_voxels) * voxel_cm3;
    r.liver_volume_cm3 = static_cast<double>(tumor_voxels + liver_only) * voxel_cm3;
    r.tlvr = tumor_voxels + liver_only == 0
                 ? 0.0
                 : static_cast<double>(tumor_voxels) / static_cast<double>(tumor_voxels + liver_only);
    r.size_by_volume = stratify(r.tumor_volume_cm3, SizeCriterion::Volume);
    r.size_by_diameter = stratify(r.diameters_cm.empty() ? 0.0 : r.diameters_cm.front(), SizeCriterion::Diameter);

    std::ostringstream t;
    t << "Liver tumor summary\n";
    if (r.patient_id) t << "Patient: " << *r.patient_id << '\n';
    t << "Liver volume: " << fixed2(r.liver_volume_cm3) << " cm3\n";
    if (r.lesions.empty()) {
        t << "No lesion detected.\n";
    } else {
        t << "Lesions detected: " << r.lesions.size() << '\n';
        for (std::size_t k = 0; k < r.lesions.size(); ++k) {
            t << "  Lesion " << k + 1 << ": volume " << fixed2(r.lesions[k].volume_cm3) << " cm3, max diameter "
              << fixed2(r.lesions[k].diameter_cm) << " cm\n";
        }
        t << "Largest lesion diameter: " << fixed2(r.diameters_cm.front()) << " cm\n";
        t << "Total tumor volume: " << fixed2(r.tumor_volume_cm3) << " cm3\n";
    }
    t << "Tumor-to-liver volume ratio: " << format_sig3(r.tlvr) << '\n';
    t << "Size class by volume: " << size_class_name(r.size_by_volume) << '\n';
    t << "Size class by diameter: " << size_class_name(r.size_by_diameter) << '\n';
    r.text = t.str();

    nlohmann::ordered_json j;
    j["patient_id"] = r.patient_id ? nlohmann::ordered_json(*r.patient_id) : nlohmann::ordered_json(nullptr);
    j["lesion_count"] = r.lesions.size();
    auto lesions = nlohmann::ordered_json::array();
    for (const auto& l : r.lesions) {
        lesions.push_back({{"volume_cm3", l.volume_cm3}, {"diameter_cm", l.diameter_cm}, {"voxels", l.voxels}});
    }
    j["lesions"] = lesions;
    j["diameters_cm"] = r.diameters_cm;
    j["tumor_volume_cm3"] = r.tumor_volume_cm3;
    j["liver_volume_cm3"] = r.liver_volume_cm3;
    j["tlvr"] = r.tlvr;
    j["tlvr_3sf"] = format_sig3(r.tlvr);
    j["size_class_volume"] = size_class_name(r.size_by_volume);
    j["size_class_diameter"] = size_class_name(r.size_by_diameter);
    r.json = j.dump(2) + "\n";
    return r;
}

}  // namespace livseg
