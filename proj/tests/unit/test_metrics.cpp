#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "livseg/error.hpp"
#include "livseg/metrics.hpp"
#include "support.hpp"

using namespace livseg;

namespace {

ConfusionCounts counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
    ConfusionCounts c;
    c.tp = tp;
    c.fp = fp;
    c.fn = fn;
    c.tn = tn;
    return c;
}

/// Tumor block of nx by ny by nz voxels at the origin.
Mask block(Dims dims, Spacing spacing, int nx, int ny, int nz) {
    const Grid g{dims, spacing, {}};
    std::vector<std::uint8_t> l(g.size(), 0);
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) l[g.index(x, y, z)] = kTumorLabel;
    return Mask(g, std::move(l));
}

}  // namespace

TEST_CASE("scores worked example") {
    const Scores s = scores(counts(5, 5, 0, 90));
    CHECK(*s.dice == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(*s.iou == 0.5);
    CHECK(*s.sensitivity == 1.0);
    CHECK(*s.accuracy == 0.95);
}

TEST_CASE("perfect and empty predictions") {
    const Scores p = scores(counts(7, 0, 0, 3));
    CHECK(*p.dice == 1.0);
    CHECK(*p.iou == 1.0);
    CHECK(*p.sensitivity == 1.0);
    CHECK(*p.accuracy == 1.0);

    const Scores e = scores(counts(0, 0, 0, 27));
    CHECK_FALSE(e.dice.has_value());
    CHECK_FALSE(e.iou.has_value());
    CHECK_FALSE(e.sensitivity.has_value());
    CHECK(*e.accuracy == 1.0);

    const Scores miss = scores(counts(0, 3, 0, 5));
    CHECK(*miss.dice == 0.0);
    CHECK_FALSE(miss.sensitivity.has_value());
}

TEST_CASE("confusion matches brute force and dice relates to iou") {
    std::mt19937_64 rng(1);
    for (int k = 0; k < 50; ++k) {
        const Grid g = test::cube(5);
        std::uniform_int_distribution<int> lab(0, 2);
        std::vector<std::uint8_t> a(g.size()), b(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            a[i] = static_cast<std::uint8_t>(lab(rng));
            b[i] = static_cast<std::uint8_t>(lab(rng));
        }
        for (Tissue t : {Tissue::Liver, Tissue::Tumor}) {
            const std::uint8_t code = t == Tissue::Liver ? kLiverLabel : kTumorLabel;
            std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                const bool p = a[i] == code, q = b[i] == code;
                tp += p && q;
                fp += p && !q;
                fn += !p && q;
                tn += !p && !q;
            }
            const ConfusionCounts c = confusion(Mask(g, a), Mask(g, b), t);
            CHECK(c == counts(tp, fp, fn, tn));
            const Scores s = scores(c);
            if (s.dice) {
                CHECK(std::abs(*s.dice - 2.0 * *s.iou / (1.0 + *s.iou)) < 1e-12);
                CHECK(*s.dice == doctest::Approx(2.0 * tp / static_cast<double>(2 * tp + fp + fn)).epsilon(1e-15));
            }
        }
    }
    CHECK_THROWS_AS(confusion(Mask(test::cube(2)), Mask(test::cube(3)), Tissue::Tumor), Error);
}

TEST_CASE("size stratification by volume and diameter") {
    const Mask small = block({10, 10, 10}, {1, 1, 1}, 10, 10, 10);
    CHECK(tumor_volume_cm3(small) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(stratify(tumor_volume_cm3(small), SizeCriterion::Volume) == SizeClass::Small);

    const Mask large = block({10, 10, 10}, {10, 10, 10}, 10, 10, 10);
    CHECK(tumor_volume_cm3(large) == doctest::Approx(1000.0).epsilon(1e-12));
    CHECK(stratify(tumor_volume_cm3(large), SizeCriterion::Volume) == SizeClass::Large);
    CHECK(max_diameter_cm(large) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(stratify(max_diameter_cm(large), SizeCriterion::Diameter) == SizeClass::Large);

    CHECK(stratify(0.0, SizeCriterion::Volume) == SizeClass::NotApplicable);
    CHECK(std::string(size_class_name(SizeClass::NotApplicable)) == "n/a");
    CHECK(std::string(size_class_name(SizeClass::Large)) == "large");
    CHECK(stratify(500.0, SizeCriterion::Volume) == SizeClass::Large);
    CHECK(stratify(499.9, SizeCriterion::Volume) == SizeClass::Small);

    const Mask line = block({20, 4, 4}, {0.5, 1, 3}, 12, 1, 2);
    CHECK(max_diameter_cm(line) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(max_diameter_cm(Mask(test::cube(3))) == 0.0);
}

TEST_CASE("evaluate reports per-class scores and ground-truth size") {
    const Grid g = test::cube(4);
    std::mt19937_64 rng(2);
    const Mask liver = test::random_mask(g, rng, 0.5, kLiverLabel);
    const Mask tumor = test::random_mask(g, rng, 0.2, kTumorLabel);
    const MetricsReport r = evaluate(liver, tumor, liver, Mask(g), SizeCriterion::Volume);
    CHECK(*r.liver.dice == 1.0);
    CHECK(*r.tumor.dice == 0.0);
    CHECK(r.size_class == SizeClass::NotApplicable);
    const MetricsReport t = evaluate(liver, tumor, liver, tumor);
    CHECK(*t.tumor.dice == 1.0);
    CHECK(t.tumor_volume_cm3 == doctest::Approx(tumor.count_foreground() / 1000.0));
}

TEST_CASE("aggregation uses the mean and sample standard deviation over defined values") {
    std::vector<Scores> per;
    for (double d : {0.9, 0.8, 0.7, 0.6}) {
        Scores s;
        s.dice = d;
        s.iou = d / (2.0 - d);
        s.accuracy = 0.99;
        s.sensitivity = d;
        per.push_back(s);
    }
    Scores undefined;
    undefined.accuracy = 1.0;
    per.push_back(undefined);

    const CohortRow row = aggregate("two-step", "tumor", per);
    CHECK(row.dice.n == 4);
    CHECK(row.dice.mean == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(row.dice.stddev == doctest::Approx(std::sqrt(0.05 / 3.0)).epsilon(1e-12));
    CHECK(row.accuracy.n == 5);
    CHECK(row.accuracy.mean == doctest::Approx((4 * 0.99 + 1.0) / 5.0).epsilon(1e-12));

    const std::vector<std::optional<double>> one{0.4};
    const Summary s = summarize(one);
    CHECK(s.mean == 0.4);
    CHECK(s.stddev == 0.0);
    CHECK(summarize(std::vector<std::optional<double>>{}).n == 0);

    const std::vector<CohortRow> rows{row};
    const std::string csv = cohort_csv(rows);
    std::istringstream in(csv);
    std::string header, line;
    std::getline(in, header);
    std::getline(in, line);
    CHECK(header == kCohortCsvHeader);
    CHECK(line.rfind("two-step,tumor,", 0) == 0);
    CHECK(line.find("0.7500 ± 0.1291") != std::string::npos);
    const std::string plain = cohort_csv(rows, true);
    CHECK(plain.find("±") == std::string::npos);

    const auto path = std::filesystem::temp_directory_path() / "livseg_cohort.csv";
    write_cohort_csv(rows, path);
    std::ifstream f(path);
    std::stringstream all;
    all << f.rdbuf();
    CHECK(all.str() == csv);
}
