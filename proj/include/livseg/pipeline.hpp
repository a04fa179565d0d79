#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "livseg/clinical.hpp"
#include "livseg/config.hpp"
#include "livseg/metrics.hpp"
#include "livseg/phantom.hpp"
#include "livseg/segmenter.hpp"

namespace livseg {

struct TwoStepResult {
    /// Whole-liver region (label 1) on the standardized grid of the input.
    Mask liver;
    /// Tumor (label 2), a subset of `liver`.
    Mask tumor;
    std::vector<std::string> warnings;
};

/// Global branch only: window, predict, largest component, fill holes.
Mask segment_liver(const Volume& ct, const SegmenterParams& liver_params, const PipelineConfig& cfg);

/// Local branch on a given liver mask (predicted, or the ground truth in
/// training mode). The tumor is returned on the full standardized grid.
Mask segment_tumor(const Volume& ct, const Mask& liver, const SegmenterParams& tumor_params,
                   const PipelineConfig& cfg);

/// Two-step inference. Only images and trained parameters go in; an empty
/// liver prediction yields an empty tumor mask and a warning.
TwoStepResult run_two_step(const Volume& ct, const SegmenterParams& liver_params, const SegmenterParams& tumor_params,
                           const PipelineConfig& cfg);

/// Training samples in the coordinates the branches predict in.
TrainingSample make_liver_sample(const Volume& ct, const Mask& whole_liver, const PipelineConfig& cfg);
TrainingSample make_tumor_sample(const Volume& ct, const Mask& whole_liver, const Mask& tumor_target, double r_hat,
                                 const PipelineConfig& cfg, const CropMode& mode = CropMode::center());

std::vector<Phantom> generate_dataset(const PhantomSpec& spec, std::size_t n, std::uint64_t seed);

/// Fits the weak-label model on a synthetic clinical cohort with feature
/// selection.
Selection fit_weak_label_model(const ClinicalGenerator& gen, std::size_t cohort_size, std::uint64_t seed);
double weak_label(const LinearModel& model, const ClinicalRecord& record);

TrainResult train_liver_model(std::span<const Phantom> train, std::span<const Phantom> val,
                              const PipelineConfig& cfg);

/// `targets` replaces the ground-truth tumors (e.g. with noisy labels) when
/// non-empty; validation always scores against the ground truth.
TrainResult train_tumor_model(std::span<const Phantom> train, std::span<const Phantom> val,
                              std::span<const double> r_hat, const PipelineConfig& cfg,
                              std::span<const Mask> targets = {});

/// Tumor targets with random radius-1 dilation or erosion.
std::vector<Mask> noisy_tumor_labels(std::span<const Phantom> items, double p, std::uint64_t seed);

SoftmaxParams train_multiclass_model(std::span<const Phantom> train, const PipelineConfig& cfg);
TwoStepResult run_multiclass(const Volume& ct, const SoftmaxParams& params, const PipelineConfig& cfg);

/// Scores where the liver class is the whole liver (parenchyma plus tumor).
MetricsReport evaluate_phantom(const TwoStepResult& pred, const Phantom& truth);

enum class Variant : std::uint8_t { Multiclass, TwoStep, TwoStepSmoothing, TwoStepContour, TwoStepBoth };
inline constexpr std::array<Variant, 5> kAllVariants = {Variant::Multiclass, Variant::TwoStep,
                                                        Variant::TwoStepSmoothing, Variant::TwoStepContour,
                                                        Variant::TwoStepBoth};
const char* variant_name(Variant v);

struct AblationConfig {
    PhantomSpec spec = low_contrast_spec();
    std::size_t n_train = 8;
    std::size_t n_val = 2;
    std::size_t n_test = 6;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    double label_noise = 0.5;
    double lambda_weak = 0.5;
    std::size_t cohort_size = 400;
    PipelineConfig pipeline = PipelineConfig::desk_scale();
};

struct AblationResult {
    /// Two rows (liver, tumor) per variant, pooled over seeds and test volumes.
    std::vector<CohortRow> rows;
    /// mean_tumor_dice[v][s]: mean test tumor Dice of variant v for seed s.
    std::array<std::vector<double>, 5> seed_tumor_dice;
    std::array<double, 5> mean_tumor_dice{};
};

AblationResult run_ablation(const AblationConfig& cfg);
void write_ablation_outputs(const AblationResult& result, const std::filesystem::path& dir);

struct SmoothingConfig {
    PhantomSpec spec = low_contrast_spec();
    std::size_t n_train = 6;
    std::size_t n_val = 4;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    double label_noise = 0.5;
    double lambda_weak = 0.5;
    std::size_t cohort_size = 400;
    PipelineConfig pipeline = PipelineConfig::desk_scale();
};

struct SmoothingRun {
    std::uint64_t seed = 0;
    TrainingCurves without;  // lambda_w = 0
    TrainingCurves with;     // lambda_w = lambda_weak
};

struct SmoothingSummary {
    std::vector<SmoothingRun> runs;
    double mean_final_val_without = 0.0;
    double mean_final_val_with = 0.0;
    /// Seeds on which the regularized run ends with the higher training loss.
    int seeds_with_higher_final_loss = 0;
    bool val_claim = false;
    bool loss_claim = false;
};

SmoothingSummary run_smoothing_experiment(const SmoothingConfig& cfg);
void write_smoothing_outputs(const SmoothingSummary& summary, const std::filesystem::path& dir);

}  // namespace livseg
