#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "livseg/losses.hpp"
#include "livseg/volume.hpp"

namespace livseg {

/// Per-voxel feature vectors, voxel-major. The base layout is
///   0 intensity, 1 box mean r=1, 2 box mean r=2, 3 box variance r=2,
///   4 Gaussian sigma=1, 5 Gaussian sigma=2, 6 x coordinate, 7 z coordinate
/// with an optional 8 y coordinate. Coordinates are scaled to [0, 1].
struct FeatureStack {
    std::size_t voxels = 0;
    std::size_t width = 0;
    std::vector<double> values;

    std::span<const double> row(std::size_t i) const { return {values.data() + i * width, width}; }
    double at(std::size_t voxel, std::size_t feature) const { return values[voxel * width + feature]; }
};

inline constexpr std::size_t kBaseFeatureCount = 8;

struct FeatureOptions {
    bool include_y = false;
};

/// Neighbourhood features use edge replication at the borders.
FeatureStack extract_features(const Volume& normalized, const FeatureOptions& options = {});

struct SegmenterParams {
    std::vector<double> weights;
    double bias = 0.0;

    static SegmenterParams zeros(std::size_t width) { return {std::vector<double>(width, 0.0), 0.0}; }
    std::size_t size() const { return weights.size() + 1; }
    bool operator==(const SegmenterParams&) const = default;
};

double sigmoid(double z);

/// p_i = sigmoid(w . f_i + b).
std::vector<double> forward(const SegmenterParams& params, const FeatureStack& features);
Volume forward_volume(const SegmenterParams& params, const FeatureStack& features, const Grid& grid);

/// `label` where p >= threshold, background elsewhere.
Mask threshold_mask(std::span<const double> p, const Grid& grid, double threshold, std::uint8_t label);
Mask predict(const SegmenterParams& params, const FeatureStack& features, const Grid& grid, double threshold = 0.5,
             std::uint8_t label = kTumorLabel);

struct OptimizerSettings {
    double learning_rate = 1e-4;
    double weight_decay = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    bool operator==(const OptimizerSettings&) const = default;
};

struct OptimizerState {
    std::int64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;
    OptimizerSettings settings{};
    std::int64_t total_steps = 1;

    static OptimizerState create(std::size_t n_params, const OptimizerSettings& settings, std::int64_t total_steps);
    /// Cosine-annealed rate for the current step.
    double learning_rate() const;
};

/// base * (1 + cos(pi * t / T)) / 2, with t clamped to [0, T].
double cosine_lr(double base, std::int64_t t, std::int64_t total);

/// Adam update with decoupled weight decay applied to every parameter
/// (weights first, bias last in `grad`).
void adam_update(SegmenterParams& params, OptimizerState& opt, std::span<const double> grad);

struct TrainingSample {
    FeatureStack features;
    std::vector<std::uint8_t> target;
    /// Liver-plus-tumor voxels for the weak term.
    std::vector<std::uint8_t> region;
    double r_hat = 0.0;
};

struct ParamGradient {
    LossBundle loss;
    /// d total / d(weights..., bias).
    std::vector<double> grad;
};

ParamGradient loss_and_gradient(const SegmenterParams& params, const TrainingSample& sample, const LossWeights& w,
                                const FocalParams& fp);

/// One optimisation step in place; returns the loss before the update.
LossBundle train_step(SegmenterParams& params, OptimizerState& opt, const TrainingSample& sample,
                      const LossWeights& w, const FocalParams& fp);

struct EpochRecord {
    int epoch = 0;
    double total = 0.0;
    double dice = 0.0;
    double focal = 0.0;
    double weak = 0.0;
    double val_dice = 0.0;
};

struct TrainingCurves {
    std::vector<EpochRecord> epochs;
};

struct TrainConfig {
    int epochs = 150;
    std::uint64_t seed = 0;
    LossWeights weights{};
    FocalParams focal{};
    OptimizerSettings optimizer{};
    double threshold = 0.5;
    /// Optimise in z-scored feature space (statistics pooled over the
    /// training voxels) and fold the scaling back into the returned
    /// parameters. Raw intensity features span a narrow range, which leaves
    /// Adam badly conditioned without it.
    bool standardize_features = true;
};

struct TrainResult {
    /// Parameters of the epoch with the best validation Dice (final epoch
    /// when there is no validation data).
    SegmenterParams params;
    SegmenterParams final_params;
    int best_epoch = 0;
    TrainingCurves curves;
};

/// Per-feature affine map f' = (f - mean) / scale.
struct FeatureScaling {
    std::vector<double> mean;
    std::vector<double> scale;
};

/// Pooled over all voxels; constant features get scale 1.
FeatureScaling fit_scaling(std::span<const TrainingSample> samples);
FeatureStack apply_scaling(const FeatureStack& features, const FeatureScaling& scaling);
/// Parameters acting on scaled features expressed on raw features, and back.
SegmenterParams unscale_params(const SegmenterParams& scaled, const FeatureScaling& scaling);
SegmenterParams scale_params(const SegmenterParams& raw, const FeatureScaling& scaling);

/// Hard Dice of thresholded predictions averaged over samples whose Dice is
/// defined.
double mean_hard_dice(const SegmenterParams& params, std::span<const TrainingSample> samples, double threshold);

TrainResult train(std::span<const TrainingSample> dataset, std::span<const TrainingSample> validation,
                  const TrainConfig& cfg, SegmenterParams init = {});

void write_curves_csv(const TrainingCurves& curves, const std::filesystem::path& path);

/// Versioned little-endian blob: magic "LVSG", u32 version, u32 F,
/// F float64 weights, float64 bias.
std::vector<std::byte> encode_params(const SegmenterParams& params);
SegmenterParams decode_params(std::span<const std::byte> bytes);
void save_params(const SegmenterParams& params, const std::filesystem::path& path);
SegmenterParams load_params(const std::filesystem::path& path);

/// Softmax logistic over K classes, used as the single-model baseline.
struct SoftmaxParams {
    std::size_t classes = 3;
    std::size_t width = 0;
    std::vector<double> weights;  // classes x width, row-major
    std::vector<double> bias;     // classes

    static SoftmaxParams zeros(std::size_t classes, std::size_t width);
};

struct MulticlassSample {
    FeatureStack features;
    std::vector<std::uint8_t> labels;  // 0..classes-1
};

SoftmaxParams train_multiclass(std::span<const MulticlassSample> dataset, std::size_t classes, const TrainConfig& cfg);
std::vector<std::uint8_t> predict_multiclass(const SoftmaxParams& params, const FeatureStack& features);

}  // namespace livseg
