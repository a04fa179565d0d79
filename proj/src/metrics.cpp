#include "livseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "livseg/error.hpp"

namespace livseg {
namespace {

std::optional<double> ratio(double num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return num / static_cast<double>(den);
}

std::string cell(const Summary& s, bool means_only) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    if (s.n == 0) return "nan";
    os << s.mean;
    if (!means_only) os << " ± " << s.stddev;
    return os.str();
}

}  // namespace

ConfusionCounts confusion(const Mask& pred, const Mask& gt, Tissue tissue) {
    require_aligned(pred.grid(), gt.grid(), "confusion");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred.tissue(i) == tissue;
        const bool g = gt.tissue(i) == tissue;
        if (p && g) {
            ++c.tp;
        } else if (p) {
            ++c.fp;
        } else if (g) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    }
    return c;
}

Scores scores(const ConfusionCounts& c) {
    Scores s;
    s.accuracy = ratio(static_cast<double>(c.tp + c.tn), c.total());
    s.dice = ratio(2.0 * static_cast<double>(c.tp), 2 * c.tp + c.fp + c.fn);
    s.iou = ratio(static_cast<double>(c.tp), c.tp + c.fp + c.fn);
    s.sensitivity = ratio(static_cast<double>(c.tp), c.tp + c.fn);
    return s;
}

const char* size_class_name(SizeClass c) {
    switch (c) {
        case SizeClass::Small: return "small";
        case SizeClass::Large: return "large";
        case SizeClass::NotApplicable: return "n/a";
    }
    return "n/a";
}

double tumor_volume_cm3(const Mask& m, Tissue tissue) {
    const auto& s = m.grid().spacing;
    return static_cast<double>(m.count(tissue)) * s[0] * s[1] * s[2] / 1000.0;
}

double max_diameter_cm(const Grid& g, std::span<const std::uint8_t> binary) {
    std::array<int, 3> lo{g.dims[0], g.dims[1], g.dims[2]};
    std::array<int, 3> hi{-1, -1, -1};
    for (std::size_t i = 0; i < binary.size(); ++i) {
        if (!binary[i]) continue;
        const auto c = g.coords(i);
        for (std::size_t a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], c[a]);
            hi[a] = std::max(hi[a], c[a]);
        }
    }
    if (hi[0] < 0) return 0.0;
    double best = 0.0;
    for (std::size_t a = 0; a < 3; ++a) best = std::max(best, (hi[a] - lo[a] + 1) * g.spacing[a] / 10.0);
    return best;
}

double max_diameter_cm(const Mask& m, Tissue tissue) { return max_diameter_cm(m.grid(), m.binary(tissue)); }

SizeClass stratify(double value, SizeCriterion criterion) {
    if (!(value > 0.0)) return SizeClass::NotApplicable;
    const double threshold = criterion == SizeCriterion::Volume ? kLargeVolumeCm3 : kLargeDiameterCm;
    return value >= threshold ? SizeClass::Large : SizeClass::Small;
}

MetricsReport evaluate(const Mask& pred_liver, const Mask& pred_tumor, const Mask& gt_liver, const Mask& gt_tumor,
                       SizeCriterion criterion) {
    MetricsReport r;
    r.liver = scores(confusion(pred_liver, gt_liver, Tissue::Liver));
    r.tumor = scores(confusion(pred_tumor, gt_tumor, Tissue::Tumor));
    r.tumor_volume_cm3 = tumor_volume_cm3(gt_tumor);
    r.tumor_diameter_cm = max_diameter_cm(gt_tumor);
    r.size_class = stratify(criterion == SizeCriterion::Volume ? r.tumor_volume_cm3 : r.tumor_diameter_cm, criterion);
    return r;
}

Summary summarize(std::span<const std::optional<double>> values) {
    Summary s;
    double sum = 0.0;
    for (const auto& v : values) {
        if (!v) continue;
        sum += *v;
        ++s.n;
    }
    if (s.n == 0) return s;
    s.mean = sum / static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (const auto& v : values) {
            if (v) ss += (*v - s.mean) * (*v - s.mean);
        }
        s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    return s;
}

CohortRow aggregate(const std::string& method, const std::string& cls, std::span<const Scores> per_volume) {
    auto column = [&](auto member) {
        std::vector<std::optional<double>> v;
        v.reserve(per_volume.size());
        for (const auto& s : per_volume) v.push_back(s.*member);
        return summarize(v);
    };
    CohortRow row;
    row.method = method;
    row.cls = cls;
    row.accuracy = column(&Scores::accuracy);
    row.dice = column(&Scores::dice);
    row.sensitivity = column(&Scores::sensitivity);
    row.iou = column(&Scores::iou);
    return row;
}

std::string cohort_csv(std::span<const CohortRow> rows, bool means_only) {
    std::ostringstream os;
    os << kCohortCsvHeader << '\n';
    for (const auto& r : rows) {
        os << r.method << ',' << r.cls << ',' << cell(r.accuracy, means_only) << ',' << cell(r.dice, means_only) << ','
           << cell(r.sensitivity, means_only) << ',' << cell(r.iou, means_only) << '\n';
    }
    return os.str();
}

void write_cohort_csv(std::span<const CohortRow> rows, const std::filesystem::path& path, bool means_only) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot open " + path.string());
    out << cohort_csv(rows, means_only);
}

}  // namespace livseg
