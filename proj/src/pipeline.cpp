#include "livseg/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "livseg/error.hpp"
#include "livseg/postprocess.hpp"
#include "livseg/preprocess.hpp"

namespace livseg {
namespace {

Mask whole_liver(const Phantom& p) {
    return Mask::from_binary(p.liver.grid(), combine_labels(p.liver, p.tumor).foreground(), kLiverLabel);
}

Mask intersect(const Mask& a, const Mask& within, std::uint8_t label) {
    std::vector<std::uint8_t> out(a.size(), 0);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.is_foreground(i) && within.is_foreground(i);
    return Mask::from_binary(a.grid(), out, label);
}

std::vector<TrainingSample> liver_samples(std::span<const Phantom> items, const PipelineConfig& cfg) {
    std::vector<TrainingSample> out;
    out.reserve(items.size());
    for (const auto& p : items) out.push_back(make_liver_sample(p.ct, whole_liver(p), cfg));
    return out;
}

double mean_of(std::span<const double> v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

Mask segment_liver(const Volume& ct, const SegmenterParams& liver_params, const PipelineConfig& cfg) {
    const PreparedInput prep = prepare_liver_input(ct, cfg.liver);
    const FeatureStack fs = extract_features(prep.intensity, {.include_y = true});
    const Mask crop = predict(liver_params, fs, prep.intensity.grid(), cfg.threshold, kLiverLabel);
    Mask liver = uncrop(crop, prep.plan, prep.full_grid);
    if (cfg.liver_largest_component) liver = largest_component(liver, kLiverLabel);
    if (cfg.liver_fill_holes) liver = fill_holes(liver, kLiverLabel);
    return liver;
}

Mask segment_tumor(const Volume& ct, const Mask& liver, const SegmenterParams& tumor_params,
                   const PipelineConfig& cfg) {
    const PreparedInput prep = prepare_tumor_input(ct, liver, cfg.tumor, CropMode::center());
    const Mask liver_std = standardize_orientation(liver);
    const Mask domain = apply_crop(liver_std, prep.plan);
    const FeatureStack fs = extract_features(prep.intensity);
    Mask crop = predict(tumor_params, fs, prep.intensity.grid(), cfg.threshold, kTumorLabel);
    crop = intersect(crop, domain, kTumorLabel);
    if (cfg.tumor_contour && cfg.contour.iterations > 0) {
        crop = active_contour_refine(prep.intensity, crop, cfg.contour, domain, kTumorLabel).mask;
    }
    return intersect(uncrop(crop, prep.plan, prep.full_grid), liver_std, kTumorLabel);
}

TwoStepResult run_two_step(const Volume& ct, const SegmenterParams& liver_params, const SegmenterParams& tumor_params,
                           const PipelineConfig& cfg) {
    TwoStepResult r;
    r.liver = segment_liver(ct, liver_params, cfg);
    if (r.liver.count_foreground() == 0) {
        r.warnings.emplace_back("empty liver prediction: tumor branch skipped");
        r.tumor = Mask(r.liver.grid());
        return r;
    }
    r.tumor = segment_tumor(ct, r.liver, tumor_params, cfg);
    return r;
}

TrainingSample make_liver_sample(const Volume& ct, const Mask& liver, const PipelineConfig& cfg) {
    const PreparedInput prep = prepare_liver_input(ct, cfg.liver);
    TrainingSample s;
    s.features = extract_features(prep.intensity, {.include_y = true});
    s.target = apply_crop(standardize_orientation(liver), prep.plan).foreground();
    return s;
}

TrainingSample make_tumor_sample(const Volume& ct, const Mask& liver, const Mask& tumor_target, double r_hat,
                                 const PipelineConfig& cfg, const CropMode& mode) {
    const PreparedInput prep = prepare_tumor_input(ct, liver, cfg.tumor, mode);
    TrainingSample s;
    s.features = extract_features(prep.intensity);
    s.target = apply_crop(standardize_orientation(tumor_target), prep.plan).foreground();
    s.region = apply_crop(standardize_orientation(liver), prep.plan).foreground();
    s.r_hat = r_hat;
    return s;
}

std::vector<Phantom> generate_dataset(const PhantomSpec& spec, std::size_t n, std::uint64_t seed) {
    std::vector<Phantom> out;
    out.reserve(n);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) out.push_back(generate_phantom(spec, rng()));
    return out;
}

Selection fit_weak_label_model(const ClinicalGenerator& gen, std::size_t cohort_size, std::uint64_t seed) {
    const ClinicalTable cohort = generate_clinical_cohort(gen, cohort_size, seed);
    std::vector<double> labels;
    labels.reserve(cohort.records.size());
    for (const auto& r : cohort.records) labels.push_back(*r.tlvr);
    SelectionOptions opt;
    opt.seed = seed;
    return select_features(cohort, labels, opt);
}

double weak_label(const LinearModel& model, const ClinicalRecord& record) {
    return predict_tlvr(model, clinical_schema(), record);
}

TrainResult train_liver_model(std::span<const Phantom> train_items, std::span<const Phantom> val,
                              const PipelineConfig& cfg) {
    const auto train_set = liver_samples(train_items, cfg);
    const auto val_set = liver_samples(val, cfg);
    return train(train_set, val_set, liver_train_config(cfg));
}

std::vector<Mask> noisy_tumor_labels(std::span<const Phantom> items, double p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Mask> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(perturb_label(it.tumor, kTumorLabel, whole_liver(it), p, rng));
    return out;
}

TrainResult train_tumor_model(std::span<const Phantom> train_items, std::span<const Phantom> val,
                              std::span<const double> r_hat, const PipelineConfig& cfg, std::span<const Mask> targets) {
    if (r_hat.size() != train_items.size() || (!targets.empty() && targets.size() != train_items.size())) {
        throw Error(Errc::InvalidArgument, "one weak label and target per training item");
    }
    std::vector<TrainingSample> train_set;
    std::mt19937_64 crop_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    for (std::size_t i = 0; i < train_items.size(); ++i) {
        const auto& p = train_items[i];
        const CropMode mode = cfg.random_train_crops ? CropMode::random(crop_rng()) : CropMode::center();
        train_set.push_back(
            make_tumor_sample(p.ct, whole_liver(p), targets.empty() ? p.tumor : targets[i], r_hat[i], cfg, mode));
    }
    std::vector<TrainingSample> val_set;
    for (const auto& p : val) val_set.push_back(make_tumor_sample(p.ct, whole_liver(p), p.tumor, 0.0, cfg));
    return train(train_set, val_set, tumor_train_config(cfg));
}

SoftmaxParams train_multiclass_model(std::span<const Phantom> train_items, const PipelineConfig& cfg) {
    std::vector<MulticlassSample> set;
    for (const auto& p : train_items) {
        const PreparedInput prep = prepare_liver_input(p.ct, cfg.liver);
        MulticlassSample s;
        s.features = extract_features(prep.intensity, {.include_y = true});
        const Mask labels = apply_crop(standardize_orientation(combine_labels(p.liver, p.tumor)), prep.plan);
        s.labels.assign(labels.labels().begin(), labels.labels().end());
        set.push_back(std::move(s));
    }
    return train_multiclass(set, 3, liver_train_config(cfg));
}

TwoStepResult run_multiclass(const Volume& ct, const SoftmaxParams& params, const PipelineConfig& cfg) {
    const PreparedInput prep = prepare_liver_input(ct, cfg.liver);
    const FeatureStack fs = extract_features(prep.intensity, {.include_y = true});
    const auto labels = predict_multiclass(params, fs);
    std::vector<std::uint8_t> liver(labels.size()), tumor(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        liver[i] = labels[i] != 0;
        tumor[i] = labels[i] == kTumorLabel;
    }
    const Grid& cg = prep.intensity.grid();
    TwoStepResult r;
    r.liver = uncrop(Mask::from_binary(cg, liver, kLiverLabel), prep.plan, prep.full_grid);
    r.tumor = uncrop(Mask::from_binary(cg, tumor, kTumorLabel), prep.plan, prep.full_grid);
    return r;
}

MetricsReport evaluate_phantom(const TwoStepResult& pred, const Phantom& truth) {
    const Mask gt_liver = standardize_orientation(whole_liver(truth));
    const Mask gt_tumor = standardize_orientation(truth.tumor);
    return evaluate(pred.liver, pred.tumor, gt_liver, gt_tumor);
}

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Multiclass: return "multi-class";
        case Variant::TwoStep: return "two-step";
        case Variant::TwoStepSmoothing: return "two-step + smoothing";
        case Variant::TwoStepContour: return "two-step + contour adjust";
        case Variant::TwoStepBoth: return "two-step + contour adjust + smoothing";
    }
    return "?";
}

AblationResult run_ablation(const AblationConfig& cfg) {
    if (cfg.n_train < 2 || cfg.n_test < 2) throw Error(Errc::TooFewSamples, "ablation needs >= 2 train and test items");
    std::array<std::vector<Scores>, 5> liver_scores, tumor_scores;
    AblationResult result;
    for (std::uint64_t seed : cfg.seeds) {
        PipelineConfig pc = cfg.pipeline;
        pc.seed = seed;
        const auto items = generate_dataset(cfg.spec, cfg.n_train + cfg.n_val + cfg.n_test, seed);
        const std::span<const Phantom> all(items);
        const auto train_items = all.subspan(0, cfg.n_train);
        const auto val_items = all.subspan(cfg.n_train, cfg.n_val);
        const auto test_items = all.subspan(cfg.n_train + cfg.n_val);

        const auto weak = fit_weak_label_model(cfg.spec.clinical, cfg.cohort_size, seed);
        std::vector<double> r_hat;
        for (const auto& p : train_items) r_hat.push_back(weak_label(weak.model, p.record));
        const auto targets = noisy_tumor_labels(train_items, cfg.label_noise, seed);

        const auto liver_model = train_liver_model(train_items, val_items, pc).params;
        PipelineConfig plain = pc;
        plain.tumor_loss.weak = 0.0;
        PipelineConfig smooth = pc;
        smooth.tumor_loss.weak = cfg.lambda_weak;
        const auto tumor_plain = train_tumor_model(train_items, val_items, r_hat, plain, targets).params;
        const auto tumor_smooth = train_tumor_model(train_items, val_items, r_hat, smooth, targets).params;
        const auto multi = train_multiclass_model(train_items, pc);

        for (std::size_t v = 0; v < kAllVariants.size(); ++v) {
            const Variant variant = kAllVariants[v];
            PipelineConfig run = pc;
            run.tumor_contour = variant == Variant::TwoStepContour || variant == Variant::TwoStepBoth;
            const bool smoothed = variant == Variant::TwoStepSmoothing || variant == Variant::TwoStepBoth;
            std::vector<double> dice;
            for (const auto& p : test_items) {
                const TwoStepResult pred = variant == Variant::Multiclass
                                               ? run_multiclass(p.ct, multi, run)
                                               : run_two_step(p.ct, liver_model, smoothed ? tumor_smooth : tumor_plain,
                                                              run);
                const MetricsReport m = evaluate_phantom(pred, p);
                liver_scores[v].push_back(m.liver);
                tumor_scores[v].push_back(m.tumor);
                dice.push_back(m.tumor.dice.value_or(0.0));
            }
            result.seed_tumor_dice[v].push_back(mean_of(dice));
        }
    }
    for (std::size_t v = 0; v < kAllVariants.size(); ++v) {
        result.rows.push_back(aggregate(variant_name(kAllVariants[v]), "liver", liver_scores[v]));
        result.rows.push_back(aggregate(variant_name(kAllVariants[v]), "tumor", tumor_scores[v]));
        result.mean_tumor_dice[v] = mean_of(result.seed_tumor_dice[v]);
    }
    return result;
}

void write_ablation_outputs(const AblationResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_cohort_csv(result.rows, dir / "ablation.csv");
    std::ofstream out(dir / "ablation_seeds.csv", std::ios::trunc | std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write ablation_seeds.csv");
    out << "method,seed_index,tumor_dice\n" << std::setprecision(10);
    for (std::size_t v = 0; v < kAllVariants.size(); ++v) {
        for (std::size_t s = 0; s < result.seed_tumor_dice[v].size(); ++s) {
            out << variant_name(kAllVariants[v]) << ',' << s << ',' << result.seed_tumor_dice[v][s] << '\n';
        }
    }
}

SmoothingSummary run_smoothing_experiment(const SmoothingConfig& cfg) {
    if (cfg.n_train == 0 || cfg.n_train > 8) throw Error(Errc::InvalidArgument, "training split must hold 1..8 items");
    if (cfg.n_val == 0) throw Error(Errc::TooFewSamples, "validation split is empty");
    SmoothingSummary summary;
    std::vector<double> val_without, val_with;
    for (std::uint64_t seed : cfg.seeds) {
        PipelineConfig pc = cfg.pipeline;
        pc.seed = seed;
        const auto items = generate_dataset(cfg.spec, cfg.n_train + cfg.n_val, seed);
        const std::span<const Phantom> all(items);
        const auto train_items = all.subspan(0, cfg.n_train);
        const auto val_items = all.subspan(cfg.n_train);
        const auto weak = fit_weak_label_model(cfg.spec.clinical, cfg.cohort_size, seed);
        std::vector<double> r_hat;
        for (const auto& p : train_items) r_hat.push_back(weak_label(weak.model, p.record));
        const auto targets = noisy_tumor_labels(train_items, cfg.label_noise, seed);

        SmoothingRun run;
        run.seed = seed;
        PipelineConfig a = pc;
        a.tumor_loss.weak = 0.0;
        PipelineConfig b = pc;
        b.tumor_loss.weak = cfg.lambda_weak;
        run.without = train_tumor_model(train_items, val_items, r_hat, a, targets).curves;
        run.with = train_tumor_model(train_items, val_items, r_hat, b, targets).curves;
        val_without.push_back(run.without.epochs.back().val_dice);
        val_with.push_back(run.with.epochs.back().val_dice);
        if (run.with.epochs.back().total >= run.without.epochs.back().total) ++summary.seeds_with_higher_final_loss;
        summary.runs.push_back(std::move(run));
    }
    summary.mean_final_val_without = mean_of(val_without);
    summary.mean_final_val_with = mean_of(val_with);
    summary.val_claim = summary.mean_final_val_with >= summary.mean_final_val_without;
    const auto needed = static_cast<int>(cfg.seeds.size()) - std::min<int>(1, static_cast<int>(cfg.seeds.size()) / 5);
    summary.loss_claim = summary.seeds_with_higher_final_loss >= needed;
    return summary;
}

void write_smoothing_outputs(const SmoothingSummary& summary, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& run : summary.runs) {
        write_curves_csv(run.without, dir / ("curves_seed" + std::to_string(run.seed) + "_lw0.csv"));
        write_curves_csv(run.with, dir / ("curves_seed" + std::to_string(run.seed) + "_lw.csv"));
    }
    std::ofstream out(dir / "summary.txt", std::ios::trunc | std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write summary.txt");
    out << std::setprecision(6);
    out << "mean_final_val_dice_without " << summary.mean_final_val_without << '\n';
    out << "mean_final_val_dice_with " << summary.mean_final_val_with << '\n';
    out << "seeds_with_higher_final_loss " << summary.seeds_with_higher_final_loss << " of " << summary.runs.size()
        << '\n';
    out << "validation_claim " << (summary.val_claim ? "holds" : "fails") << '\n';
    out << "loss_claim " << (summary.loss_claim ? "holds" : "fails") << '\n';
}

}  // namespace livseg
