#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "livseg/clinical_csv.hpp"
#include "livseg/volume.hpp"

namespace livseg {

/// Tumor voxels over liver-plus-tumor voxels; non-background voxels of each
/// mask are counted independently. 0 when both are empty.
double compute_tlvr(const Mask& liver, const Mask& tumor);

/// Same ratio read from a single label mask (liver and tumor classes).
double compute_tlvr(const Mask& labels);

struct TlvrLabel {
    std::string patient_id;
    double r_true = 0.0;
    double r_hat = 0.0;
};

/// Ordinary least squares on standardized features with an intercept.
struct LinearModel {
    std::vector<std::string> selected_features;
    /// Per standardized feature.
    std::vector<double> coefficients;
    /// Equals the training-label mean because features are centered.
    double intercept = 0.0;
    /// Training-split statistics; `means` doubles as the imputation value.
    std::vector<double> means;
    std::vector<double> stddevs;
    /// Requested features that were constant on the training split.
    std::vector<std::string> dropped;

    /// Coefficients and intercept on the raw feature scale.
    std::vector<double> original_coefficients() const;
    double original_intercept() const;
};

inline constexpr double kRidgeJitter = 1e-8;

/// Fits on `features` (all table features when empty). Missing values are
/// mean-imputed from this training set.
LinearModel fit_linear(const ClinicalTable& table, std::span<const double> labels,
                       const std::vector<std::string>& features = {});

/// Fit restricted to the given record rows.
LinearModel fit_linear(const ClinicalTable& table, std::span<const double> labels,
                       std::span<const std::size_t> rows, const std::vector<std::string>& features);

/// Linear predictor without clamping.
double predict_raw(const LinearModel& model, const std::vector<std::string>& schema, const ClinicalRecord& record);

/// Weak-label prediction, clamped to [0, 1].
double predict_tlvr(const LinearModel& model, const std::vector<std::string>& schema, const ClinicalRecord& record);

double pearson(std::span<const double> a, std::span<const double> b);

struct SelectionOptions {
    int k_folds = 5;
    /// Candidate feature counts; empty means 1..(number of usable features).
    std::vector<int> n_grid{};
    std::uint64_t seed = 0;
};

struct SelectionPoint {
    int n = 0;
    double cv_pearson = 0.0;
};

struct SelectionReport {
    /// Features ordered by |standardized coefficient| of the full fit.
    std::vector<std::string> ranking;
    std::vector<double> ranking_scores;
    std::vector<SelectionPoint> curve;
    int best_n = 0;
    double best_cv_pearson = 0.0;
    bool informative = false;
    /// Out-of-fold predictions of the chosen feature count, by record.
    std::vector<double> oof_predictions;
    std::vector<int> folds;
};

struct Selection {
    LinearModel model;
    SelectionReport report;
};

/// Below this cross-validated correlation the model is reported as carrying
/// no usable signal.
inline constexpr double kMinInformativePearson = 0.3;

/// CV correlations closer than this count as tied.
inline constexpr double kSelectionTieTolerance = 1e-9;

std::vector<int> fold_assignment(std::size_t n, int k_folds, std::uint64_t seed);

/// Ranks features by the full fit, picks the feature count maximizing the
/// k-fold out-of-fold Pearson correlation (ties to the smaller count) and
/// refits on all records.
Selection select_features(const ClinicalTable& table, std::span<const double> labels,
                          const SelectionOptions& options = {});

/// Out-of-fold raw predictions for the given features and folds. Every
/// fold's statistics come from its own training rows.
std::vector<double> cross_validated_predictions(const ClinicalTable& table, std::span<const double> labels,
                                                const std::vector<std::string>& features,
                                                std::span<const int> folds, int k_folds);

void write_selection_curve_csv(const SelectionReport& report, const std::filesystem::path& path);
void write_coefficients_csv(const LinearModel& model, const std::filesystem::path& path);

/// Plain-text model file: one `key value...` line per field.
void save_linear_model(const LinearModel& model, const std::filesystem::path& path);
LinearModel load_linear_model(const std::filesystem::path& path);

}  // namespace livseg
