// Acceptance checks, one PASS/FAIL line per criterion. Tolerances and time
// limits are pinned below and are not configurable.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "clinical_fixture.hpp"
#include "livseg/clinical.hpp"
#include "livseg/error.hpp"
#include "livseg/losses.hpp"
#include "livseg/metrics.hpp"
#include "livseg/nifti.hpp"
#include "livseg/pipeline.hpp"
#include "livseg/postprocess.hpp"
#include "livseg/segmenter.hpp"
#include "nifti_fixture.hpp"
#include "support.hpp"

using namespace livseg;

namespace {

constexpr double kLossGradTol = 1e-5;
constexpr double kEndToEndGradTol = 1e-4;
constexpr double kGradSeconds = 10.0;
constexpr double kDicePerfectTol = 2e-6;
constexpr double kFocalCeTol = 1e-12;
constexpr int kMinInformativeRecovered = 12;
constexpr double kOraclePearsonGap = 0.05;
constexpr double kClinicalSeconds = 30.0;
constexpr double kContourDice = 0.98;
constexpr double kDiceIouTol = 1e-12;
constexpr int kFuzzHeaders = 100000;
constexpr int kMinSeedsHigherLoss = 4;
constexpr double kSmoothingSeconds = 300.0;
constexpr double kAblationSeconds = 900.0;
constexpr double kHighContrastTumorDice = 0.85;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

class Stopwatch {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

double max_grad_error(const std::vector<double>& x, const std::vector<double>& grad,
                      const std::function<double(const std::vector<double>&)>& f) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, test::rel_error(grad[i], test::fd_derivative(f, x, i)));
    return worst;
}

void criterion_1(Outcome& o) {
    Stopwatch sw;
    std::mt19937_64 rng(1001);
    const Grid g = test::cube(4);
    double loss_err = 0.0, e2e_err = 0.0;
    for (int k = 0; k < 100; ++k) {
        const auto p = test::random_probabilities(g.size(), rng, 0.05, 0.95);
        const auto t = test::random_binary(g.size(), rng, 0.35);
        auto region = test::random_binary(g.size(), rng, 0.7);
        region[0] = 1;
        const double r_hat = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const FocalParams fp{2.0};
        const LossWeights w{1.0, 1.0, 0.5};
        loss_err = std::max(loss_err, max_grad_error(p, dice_loss(p, t).grad, [&](const auto& x) { return dice_loss(x, t).value; }));
        loss_err = std::max(loss_err, max_grad_error(p, focal_loss(p, t, fp).grad, [&](const auto& x) { return focal_loss(x, t, fp).value; }));
        loss_err = std::max(loss_err, max_grad_error(p, weak_loss(p, region, r_hat).grad,
                                                     [&](const auto& x) { return weak_loss(x, region, r_hat).value; }));
        loss_err = std::max(loss_err, max_grad_error(p, combined_loss(p, t, region, r_hat, w, fp).grad, [&](const auto& x) {
                                return combined_loss(x, t, region, r_hat, w, fp).total;
                            }));

        TrainingSample s;
        s.features = extract_features(test::random_volume(g, VolumeKind::Normalized, rng));
        s.target = t;
        s.region = region;
        s.r_hat = r_hat;
        std::normal_distribution<double> z(0.0, 0.5);
        std::vector<double> theta(s.features.width + 1);
        for (auto& v : theta) v = z(rng);
        auto params = [](const std::vector<double>& x) { return SegmenterParams{{x.begin(), x.end() - 1}, x.back()}; };
        const auto pg = loss_and_gradient(params(theta), s, w, fp);
        e2e_err = std::max(e2e_err, max_grad_error(theta, pg.grad, [&](const auto& x) {
                               return loss_and_gradient(params(x), s, w, fp).loss.total;
                           }));
    }
    const double secs = sw.seconds();
    o.detail << "loss max rel err " << loss_err << ", end-to-end " << e2e_err << ", " << secs << " s";
    o.require(loss_err < kLossGradTol, "loss gradients");
    o.require(e2e_err < kEndToEndGradTol, "end-to-end gradient");
    o.require(secs < kGradSeconds, "runtime");
}

void criterion_2(Outcome& o) {
    std::mt19937_64 rng(1002);
    double dice_perfect = 0.0, focal_gap = 0.0;
    bool weak_exact = true;
    for (int k = 0; k < 100; ++k) {
        auto t = test::random_binary(64, rng, 0.3);
        t[k % 64] = 1;
        const std::vector<double> p(t.begin(), t.end());
        dice_perfect = std::max(dice_perfect, std::abs(dice_loss(p, t).value));

        const auto q = test::random_probabilities(64, rng);
        double ce = 0.0;
        for (std::size_t i = 0; i < 64; ++i) ce -= t[i] ? std::log(q[i] + kLogGuard) : std::log(1.0 - q[i] + kLogGuard);
        focal_gap = std::max(focal_gap, std::abs(focal_loss(q, t, FocalParams{0.0}).value - ce / 64.0));

        // Binary p with the tumor inside the region.
        auto region = test::random_binary(64, rng, 0.6);
        std::vector<std::uint8_t> tumor(64, 0);
        std::size_t nr = 0, nt = 0;
        for (std::size_t i = 0; i < 64; ++i) {
            if (!region[i]) continue;
            ++nr;
            if (rng() % 3 == 0) {
                tumor[i] = 1;
                ++nt;
            }
        }
        if (nr == 0) continue;
        const std::vector<double> pb(tumor.begin(), tumor.end());
        const double tlvr = static_cast<double>(nt) / static_cast<double>(nr);
        const double r_hat = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        weak_exact = weak_exact && weak_loss(pb, region, r_hat).value == (tlvr - r_hat) * (tlvr - r_hat);
    }
    o.detail << "dice at perfect overlap " << dice_perfect << ", |focal(g=0) - CE| " << focal_gap
             << ", weak identity " << (weak_exact ? "exact" : "inexact");
    o.require(dice_perfect <= kDicePerfectTol, "dice identity");
    o.require(focal_gap <= kFocalCeTol, "focal identity");
    o.require(weak_exact, "weak identity");
}

void criterion_3(Outcome& o) {
    Stopwatch sw;
    int worst_hits = 15;
    double worst_gap = 0.0;
    std::ostringstream per_seed;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto c = test::linear_cohort(seed);
        SelectionOptions opt;
        opt.seed = seed;
        const Selection s = select_features(c.table, c.labels, opt);
        int hits = 0;
        for (const auto& f : s.model.selected_features)
            hits += std::find(c.informative.begin(), c.informative.end(), f) != c.informative.end();
        const double oracle = pearson(c.signal, c.labels);
        const double gap = oracle - s.report.best_cv_pearson;
        worst_hits = std::min(worst_hits, hits);
        worst_gap = std::max(worst_gap, std::abs(gap));
        per_seed << " seed" << seed << "=" << hits << "/15,n*=" << s.report.best_n << ",cv=" << s.report.best_cv_pearson
                 << ",oracle=" << oracle;
    }
    const double secs = sw.seconds();
    o.detail << "min informative recovered " << worst_hits << "/15, max |oracle - CV| " << worst_gap << ", " << secs
             << " s;" << per_seed.str();
    o.require(worst_hits >= kMinInformativeRecovered, "feature recovery");
    o.require(worst_gap <= kOraclePearsonGap, "CV Pearson gap");
    o.require(secs < kClinicalSeconds, "runtime");
}

void criterion_4(Outcome& o) {
    std::mt19937_64 rng(1004);
    int lc_match = 0, fh_match = 0, idem = 0;
    for (int k = 0; k < 50; ++k) {
        const double density = 0.1 + 0.8 * (k % 10) / 10.0;
        const Mask m = test::random_mask(test::cube(16), rng, density);
        const Mask lc = largest_component(m, kTumorLabel);
        const Mask fh = fill_holes(m, kTumorLabel);
        lc_match += lc == test::oracle_largest_component(m, kTumorLabel);
        fh_match += fh == test::oracle_fill_holes(m, kTumorLabel);
        idem += largest_component(lc, kTumorLabel) == lc && fill_holes(fh, kTumorLabel) == fh;
    }
    o.detail << "largest_component " << lc_match << "/50, fill_holes " << fh_match << "/50, idempotent " << idem << "/50";
    o.require(lc_match == 50 && fh_match == 50, "oracle agreement");
    o.require(idem == 50, "idempotence");
}

std::vector<std::uint8_t> disk(const Grid& g, double cx, double cy, double r) {
    std::vector<std::uint8_t> u(g.size(), 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto c = g.coords(i);
        u[i] = (c[0] - cx) * (c[0] - cx) + (c[1] - cy) * (c[1] - cy) <= r * r;
    }
    return u;
}

Volume two_level(const Grid& g, const std::vector<std::uint8_t>& u, double in, double out, double sigma,
                 std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, sigma);
    std::vector<float> d(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        d[i] = static_cast<float>(std::clamp((u[i] ? in : out) + (sigma > 0 ? n(rng) : 0.0), 0.0, 1.0));
    }
    return Volume(g, VolumeKind::Normalized, std::move(d));
}

/// Replays the refinement loop and checks the attachment energy at every step.
bool energy_monotone(const Volume& img, std::vector<std::uint8_t> u, const ContourConfig& cfg, int& steps) {
    CurvatureCycle curvature;
    for (int it = 0; it < cfg.iterations; ++it) {
        const auto m = region_means(img, u);
        if (m.n_inside == 0 || m.n_outside == 0) return true;
        const auto next = attachment_step(img, u, m, cfg);
        ++steps;
        if (chan_vese_energy(img, next, m.inside, m.outside, cfg) > chan_vese_energy(img, u, m.inside, m.outside, cfg)) {
            return false;
        }
        u = next;
        for (int s = 0; s < cfg.smoothing_passes; ++s) u = curvature(img.grid(), u);
    }
    return true;
}

void criterion_5(Outcome& o) {
    std::mt19937_64 rng(1005);
    const Grid g{{32, 32, 4}, {1, 1, 1}, {}};
    const auto truth = disk(g, 15.5, 15.5, 8);
    const Volume noisy = two_level(g, truth, 0.8, 0.2, 0.05, rng);
    const auto init = disk(g, 15.5, 15.5, 10);
    const ContourConfig cfg{10, 1.0, 1.0, 1};
    const auto r = active_contour_refine(noisy, Mask::from_binary(g, init, kTumorLabel), cfg);
    const double dice = test::binary_dice(r.mask.foreground(), truth);

    const Volume binary = two_level(g, truth, 1.0, 0.0, 0.0, rng);
    const Mask truth_mask = Mask::from_binary(g, truth, kTumorLabel);
    const bool fixed = active_contour_refine(binary, truth_mask, ContourConfig{10, 1.0, 1.0, 0}).mask == truth_mask;

    int steps = 0, fixtures = 0;
    bool monotone = energy_monotone(noisy, init, cfg, steps) && energy_monotone(binary, truth, cfg, steps);
    fixtures += 2;
    for (int k = 0; k < 48; ++k) {
        const Grid h{{12, 10, 3}, {1, 1, 1}, {}};
        const Volume img = test::random_volume(h, VolumeKind::Normalized, rng);
        const ContourConfig c{5, 0.5 + (k % 4) * 0.5, 1.0, k % 2};
        monotone = energy_monotone(img, test::random_binary(h.size(), rng, 0.2 + 0.1 * (k % 6)), c, steps) && monotone;
        ++fixtures;
    }
    o.detail << "noisy disk Dice " << dice << ", binary fixed point " << (fixed ? "exact" : "broken")
             << ", energy non-increasing on " << fixtures << " fixtures / " << steps << " steps: "
             << (monotone ? "yes" : "no");
    o.require(dice >= kContourDice, "noisy disk");
    o.require(fixed, "fixed point");
    o.require(monotone, "energy");
}

void criterion_6(Outcome& o) {
    std::mt19937_64 rng(1006);
    int matches = 0;
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        const Grid g = test::cube(8);
        const Mask a = test::random_mask(g, rng, 0.1 + 0.015 * k);
        const Mask b = test::random_mask(g, rng, 0.8 - 0.015 * k);
        std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const bool p = a[i] == kTumorLabel, t = b[i] == kTumorLabel;
            tp += p && t;
            fp += p && !t;
            fn += !p && t;
            tn += !p && !t;
        }
        const Scores s = scores(confusion(a, b, Tissue::Tumor));
        const double n = static_cast<double>(g.size());
        const bool ok = s.accuracy && s.dice && s.iou && s.sensitivity &&
                        *s.accuracy == static_cast<double>(tp + tn) / n &&
                        *s.dice == 2.0 * tp / static_cast<double>(2 * tp + fp + fn) &&
                        *s.iou == static_cast<double>(tp) / static_cast<double>(tp + fp + fn) &&
                        *s.sensitivity == static_cast<double>(tp) / static_cast<double>(tp + fn);
        matches += ok;
        if (s.dice && s.iou) worst = std::max(worst, std::abs(*s.dice - 2.0 * *s.iou / (1.0 + *s.iou)));
    }
    o.detail << "brute-force agreement " << matches << "/50, max |dice - 2iou/(1+iou)| " << worst;
    o.require(matches == 50, "confusion scores");
    o.require(worst <= kDiceIouTol, "dice/iou identity");
}

void criterion_7(Outcome& o) {
    std::mt19937_64 rng(1007);
    Grid g{{7, 5, 3}, {0.7, 0.7, 2.5}, {}};
    g.orientation.flip = {true, false, true};
    const Volume v = test::random_volume(g, VolumeKind::HU, rng, -1000.0, 1000.0);
    const Volume back = parse_nifti(encode_nifti(v));
    bool exact = back.dims() == v.dims() && back.orientation() == v.orientation() &&
                 std::memcmp(back.data().data(), v.data().data(), 4 * v.size()) == 0;
    for (int a = 0; a < 3; ++a) exact = exact && std::abs(back.spacing()[a] - v.spacing()[a]) <= 1e-6;

    std::vector<std::int16_t> raw(60);
    for (auto& x : raw) x = static_cast<std::int16_t>(static_cast<int>(rng() % 4000) - 2000);
    test::RawNifti le(false), be(true);
    for (auto* f : {&le, &be}) f->dims(5, 4, 3).datatype(4, 16).spacing(0.8f, 0.9f, 3.0f).scaling(1.5f, -10.0f).data(raw);
    const Volume lv = parse_nifti(le.bytes()), bv = parse_nifti(be.bytes());
    const bool swapped = lv == bv && lv.at(1, 0, 0) == static_cast<float>(1.5 * raw[1] - 10.0);

    test::RawNifti base;
    base.dims(3, 2, 2).datatype(16, 32).data(std::vector<float>(12, 1.0f));
    std::uniform_int_distribution<int> byte(0, 255);
    int parsed = 0, rejected = 0, foreign = 0;
    for (int trial = 0; trial < kFuzzHeaders; ++trial) {
        std::vector<std::byte> bytes;
        if (trial % 4 == 0) {
            bytes.resize(348 + rng() % 200);
            for (auto& b : bytes) b = static_cast<std::byte>(byte(rng));
        } else {
            bytes = base.bytes();
            const int flips = 1 + static_cast<int>(rng() % 16);
            for (int k = 0; k < flips; ++k) {
                // Most flips land in the header, where the fields live.
                const auto pos = static_cast<std::size_t>(rng() % (k % 3 == 0 ? bytes.size() : 348));
                bytes[pos] = static_cast<std::byte>(byte(rng));
            }
            if (trial % 5 == 0) bytes.resize(static_cast<std::size_t>(rng() % (bytes.size() + 1)));
        }
        try {
            (void)parse_nifti(bytes);
            ++parsed;
        } catch (const Error&) {
            ++rejected;
        } catch (...) {
            ++foreign;
        }
    }
    o.detail << "round trip " << (exact ? "bit-exact" : "differs") << ", byte-swapped twin "
             << (swapped ? "identical" : "differs") << ", fuzz " << kFuzzHeaders << " headers: " << parsed
             << " parsed, " << rejected << " typed errors, " << foreign << " other exceptions";
    o.require(exact, "round trip");
    o.require(swapped, "byte order");
    o.require(foreign == 0, "fuzz");
}

void criterion_8(Outcome& o) {
    Stopwatch sw;
    const SmoothingSummary s = run_smoothing_experiment(SmoothingConfig{});
    const double secs = sw.seconds();
    o.detail << "mean final val Dice without " << s.mean_final_val_without << ", with " << s.mean_final_val_with
             << "; higher final training loss on " << s.seeds_with_higher_final_loss << "/" << s.runs.size()
             << " seeds; " << secs << " s";
    o.require(s.mean_final_val_with >= s.mean_final_val_without, "validation Dice with weak term >= without");
    o.require(s.seeds_with_higher_final_loss >= kMinSeedsHigherLoss, "final training loss");
    o.require(secs < kSmoothingSeconds, "runtime");
}

void criterion_9(Outcome& o) {
    Stopwatch sw;
    const AblationResult r = run_ablation(AblationConfig{});
    const double secs = sw.seconds();
    const auto& d = r.mean_tumor_dice;
    const double a = d[1], b = d[2], c = d[3], dd = d[4];
    o.detail << "mean tumor Dice multi-class " << d[0] << ", A " << a << ", B " << b << ", C " << c << ", D " << dd
             << "; " << secs << " s";
    o.require(dd >= c, "D >= C");
    o.require(c >= a, "C >= A");
    o.require(b >= a, "B >= A");
    o.require(secs < kAblationSeconds, "runtime");
}

void criterion_10(Outcome& o) {
    PipelineConfig pc = PipelineConfig::desk_scale();
    pc.seed = 7;
    const PhantomSpec spec = high_contrast_spec();
    const auto items = generate_dataset(spec, 14, 7);
    const std::span<const Phantom> all(items);
    const auto tr = all.subspan(0, 8), va = all.subspan(8, 2), te = all.subspan(10);
    const LinearModel clinical = fit_weak_label_model(spec.clinical, 400, 7).model;
    std::vector<double> r_hat;
    for (const auto& p : tr) r_hat.push_back(weak_label(clinical, p.record));
    const SegmenterParams liver = train_liver_model(tr, va, pc).params;
    const SegmenterParams tumor = train_tumor_model(tr, va, r_hat, pc).params;

    double dice = 0.0;
    bool independent = true;
    std::mt19937_64 rng(1010);
    for (const auto& p : te) {
        const TwoStepResult res = run_two_step(p.ct, liver, tumor, pc);
        dice += evaluate_phantom(res, p).tumor.dice.value_or(0.0);
        Phantom corrupted = p;
        for (auto& v : corrupted.record.values) v = std::normal_distribution<double>(0.0, 1e6)(rng);
        std::fill(corrupted.record.missing.begin(), corrupted.record.missing.end(), true);
        corrupted.record.tlvr = 0.5;
        const TwoStepResult again = run_two_step(corrupted.ct, liver, tumor, pc);
        independent = independent && again.liver == res.liver && again.tumor == res.tumor;
    }
    dice /= static_cast<double>(te.size());

    SegmenterParams none = SegmenterParams::zeros(liver.weights.size());
    none.bias = -50.0;
    const TwoStepResult empty = run_two_step(te.front().ct, none, tumor, pc);
    const bool guard = empty.tumor.count_foreground() == 0 && empty.warnings.size() == 1;

    o.detail << "high-contrast mean tumor Dice " << dice << ", empty-liver guard " << (guard ? "ok" : "broken")
             << ", clinical corruption " << (independent ? "no effect" : "changed output");
    o.require(dice >= kHighContrastTumorDice, "tumor Dice");
    o.require(guard, "empty-liver guard");
    o.require(independent, "clinical independence");
}

const std::map<int, std::pair<const char*, void (*)(Outcome&)>>& criteria() {
    static const std::map<int, std::pair<const char*, void (*)(Outcome&)>> c = {
        {1, {"gradient checks", criterion_1}},
        {2, {"loss identities", criterion_2}},
        {3, {"clinical recovery", criterion_3}},
        {4, {"connected-component oracles", criterion_4}},
        {5, {"active contour", criterion_5}},
        {6, {"metrics", criterion_6}},
        {7, {"NIfTI", criterion_7}},
        {8, {"weak-term training curves", criterion_8}},
        {9, {"ablation ordering", criterion_9}},
        {10, {"pipeline sanity", criterion_10}},
    };
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--criterion" && i + 1 < argc) which.push_back(std::stoi(argv[++i]));
    }
    if (which.empty()) {
        for (const auto& [n, _] : criteria()) which.push_back(n);
    }
    int failures = 0;
    for (int n : which) {
        const auto it = criteria().find(n);
        if (it == criteria().end()) {
            std::cerr << "unknown criterion " << n << '\n';
            return 2;
        }
        Outcome o;
        try {
            it->second.second(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " [exception: " << e.what() << "]";
        }
        std::cout << "Criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " (" << it->second.first << ") "
                  << o.detail.str() << std::endl;
        failures += !o.pass;
    }
    return failures == 0 ? 0 : 1;
}
