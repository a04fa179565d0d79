#include "livseg/clinical.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "livseg/error.hpp"

namespace livseg {

double compute_tlvr(const Mask& liver, const Mask& tumor) {
    require_aligned(liver.grid(), tumor.grid(), "compute_tlvr");
    const auto l = static_cast<double>(liver.count_foreground());
    const auto t = static_cast<double>(tumor.count_foreground());
    if (l + t == 0.0) return 0.0;
    return t / (l + t);
}

double compute_tlvr(const Mask& labels) {
    const auto l = static_cast<double>(labels.count(Tissue::Liver));
    const auto t = static_cast<double>(labels.count(Tissue::Tumor));
    if (l + t == 0.0) return 0.0;
    return t / (l + t);
}

std::vector<double> LinearModel::original_coefficients() const {
    std::vector<double> out(coefficients.size());
    for (std::size_t j = 0; j < coefficients.size(); ++j) out[j] = coefficients[j] / stddevs[j];
    return out;
}

double LinearModel::original_intercept() const {
    double b = intercept;
    for (std::size_t j = 0; j < coefficients.size(); ++j) b -= coefficients[j] * means[j] / stddevs[j];
    return b;
}

namespace {

std::vector<std::size_t> resolve(const std::vector<std::string>& schema, const std::vector<std::string>& names) {
    std::vector<std::size_t> idx;
    idx.reserve(names.size());
    for (const auto& n : names) {
        const auto it = std::find(schema.begin(), schema.end(), n);
        if (it == schema.end()) throw Error(Errc::MissingColumn, "feature " + n + " not in schema");
        idx.push_back(static_cast<std::size_t>(it - schema.begin()));
    }
    return idx;
}

}  // namespace

LinearModel fit_linear(const ClinicalTable& table, std::span<const double> labels,
                       std::span<const std::size_t> rows, const std::vector<std::string>& features) {
    if (labels.size() != table.records.size()) {
        throw Error(Errc::ShapeMismatch, "labels and records differ in length");
    }
    if (rows.size() < 2) throw Error(Errc::TooFewSamples, "linear fit needs at least two records");
    const std::vector<std::string>& requested = features.empty() ? table.features : features;
    const auto cols = resolve(table.features, requested);
    const auto n = static_cast<double>(rows.size());

    double y_mean = 0.0;
    for (auto r : rows) y_mean += labels[r];
    y_mean /= n;

    LinearModel model;
    model.intercept = y_mean;
    std::vector<std::size_t> kept;
    for (std::size_t k = 0; k < cols.size(); ++k) {
        const auto c = cols[k];
        double sum = 0.0;
        std::size_t observed = 0;
        for (auto r : rows) {
            const auto& rec = table.records[r];
            if (!rec.missing[c]) {
                sum += rec.values[c];
                ++observed;
            }
        }
        const double mean = observed ? sum / static_cast<double>(observed) : 0.0;
        double ss = 0.0;
        for (auto r : rows) {
            const auto& rec = table.records[r];
            const double v = rec.missing[c] ? mean : rec.values[c];
            ss += (v - mean) * (v - mean);
        }
        const double sd = std::sqrt(ss / n);
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
            model.dropped.push_back(requested[k]);
            continue;
        }
        kept.push_back(k);
        model.selected_features.push_back(requested[k]);
        model.means.push_back(mean);
        model.stddevs.push_back(sd);
    }

    const auto p = static_cast<Eigen::Index>(kept.size());
    if (p == 0) return model;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), p);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& rec = table.records[rows[i]];
        y(static_cast<Eigen::Index>(i)) = labels[rows[i]] - y_mean;
        for (Eigen::Index j = 0; j < p; ++j) {
            const auto c = cols[kept[static_cast<std::size_t>(j)]];
            const double mean = model.means[static_cast<std::size_t>(j)];
            const double v = rec.missing[c] ? mean : rec.values[c];
            x(static_cast<Eigen::Index>(i), j) = (v - mean) / model.stddevs[static_cast<std::size_t>(j)];
        }
    }
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += kRidgeJitter;
    const Eigen::VectorXd beta = gram.ldlt().solve(x.transpose() * y);
    model.coefficients.assign(beta.data(), beta.data() + beta.size());
    return model;
}

LinearModel fit_linear(const ClinicalTable& table, std::span<const double> labels,
                       const std::vector<std::string>& features) {
    std::vector<std::size_t> rows(table.records.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return fit_linear(table, labels, rows, features);
}

double predict_raw(const LinearModel& model, const std::vector<std::string>& schema, const ClinicalRecord& record) {
    const auto cols = resolve(schema, model.selected_features);
    double z = model.intercept;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        const auto c = cols[j];
        const double v = record.missing[c] ? model.means[j] : record.values[c];
        z += model.coefficients[j] * (v - model.means[j]) / model.stddevs[j];
    }
    return z;
}

double predict_tlvr(const LinearModel& model, const std::vector<std::string>& schema, const ClinicalRecord& record) {
    return std::clamp(predict_raw(model, schema, record), 0.0, 1.0);
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(Errc::ShapeMismatch, "pearson: length mismatch");
    if (a.empty()) return 0.0;
    const auto n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

std::vector<int> fold_assignment(std::size_t n, int k_folds, std::uint64_t seed) {
    if (k_folds < 2) throw Error(Errc::InvalidArgument, "need at least two folds");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> folds(n);
    for (std::size_t i = 0; i < n; ++i) folds[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k_folds));
    return folds;
}

std::vector<double> cross_validated_predictions(const ClinicalTable& table, std::span<const double> labels,
                                                const std::vector<std::string>& features,
                                                std::span<const int> folds, int k_folds) {
    std::vector<double> oof(table.records.size(), 0.0);
    for (int f = 0; f < k_folds; ++f) {
        std::vector<std::size_t> train;
        std::vector<std::size_t> test;
        for (std::size_t i = 0; i < folds.size(); ++i) (folds[i] == f ? test : train).push_back(i);
        if (test.empty()) continue;
        const LinearModel m = fit_linear(table, labels, train, features);
        for (auto i : test) oof[i] = predict_raw(m, table.features, table.records[i]);
    }
    return oof;
}

Selection select_features(const ClinicalTable& table, std::span<const double> labels,
                          const SelectionOptions& options) {
    const std::size_t n = table.records.size();
    if (options.k_folds < 2) throw Error(Errc::InvalidArgument, "need at least two folds");
    if (n < static_cast<std::size_t>(options.k_folds)) {
        throw Error(Errc::TooFewSamples, "fewer records than folds");
    }
    const LinearModel full = fit_linear(table, labels);

    std::vector<std::size_t> order(full.selected_features.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(full.coefficients[a]) > std::abs(full.coefficients[b]);
    });

    SelectionReport report;
    for (auto j : order) {
        report.ranking.push_back(full.selected_features[j]);
        report.ranking_scores.push_back(std::abs(full.coefficients[j]));
    }
    for (const auto& d : full.dropped) {
        report.ranking.push_back(d);
        report.ranking_scores.push_back(0.0);
    }

    std::vector<int> grid = options.n_grid;
    const int usable = static_cast<int>(full.selected_features.size());
    if (grid.empty()) {
        for (int k = 1; k <= usable; ++k) grid.push_back(k);
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    report.folds = fold_assignment(n, options.k_folds, options.seed);
    std::vector<double> labels_vec(labels.begin(), labels.end());
    for (int k : grid) {
        if (k < 1 || k > usable) continue;
        const std::vector<std::string> top(report.ranking.begin(), report.ranking.begin() + k);
        auto oof = cross_validated_predictions(table, labels, top, report.folds, options.k_folds);
        const double r = pearson(labels_vec, oof);
        report.curve.push_back({k, r});
        if (report.best_n == 0 || r > report.best_cv_pearson + kSelectionTieTolerance) {
            report.best_n = k;
            report.best_cv_pearson = r;
            report.oof_predictions = std::move(oof);
        }
    }

    Selection out;
    if (report.best_n > 0) {
        const std::vector<std::string> top(report.ranking.begin(), report.ranking.begin() + report.best_n);
        out.model = fit_linear(table, labels, top);
    } else {
        out.model = full;
    }
    report.informative = report.best_cv_pearson >= kMinInformativePearson;
    out.report = std::move(report);
    return out;
}

void write_selection_curve_csv(const SelectionReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + path.string());
    out << "n,cv_pearson\n" << std::setprecision(10);
    for (const auto& p : report.curve) out << p.n << ',' << p.cv_pearson << '\n';
}

void write_coefficients_csv(const LinearModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + path.string());
    out << "feature,coefficient\n" << std::setprecision(10);
    for (std::size_t j = 0; j < model.selected_features.size(); ++j) {
        out << csv_escape(model.selected_features[j]) << ',' << model.coefficients[j] << '\n';
    }
}

void save_linear_model(const LinearModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + path.string());
    out << std::setprecision(17);
    out << "livseg-linear-model 1\n";
    out << "intercept " << model.intercept << '\n';
    for (std::size_t j = 0; j < model.selected_features.size(); ++j) {
        out << "feature " << model.selected_features[j] << ' ' << model.coefficients[j] << ' ' << model.means[j]
            << ' ' << model.stddevs[j] << '\n';
    }
    for (const auto& d : model.dropped) out << "dropped " << d << '\n';
}

LinearModel load_linear_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "livseg-linear-model 1") {
        throw Error(Errc::BadFormat, path.string() + " is not a linear model file");
    }
    LinearModel model;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "intercept") {
            ls >> model.intercept;
        } else if (key == "feature") {
            std::string name;
            double c = 0.0, m = 0.0, s = 0.0;
            ls >> name >> c >> m >> s;
            model.selected_features.push_back(name);
            model.coefficients.push_back(c);
            model.means.push_back(m);
            model.stddevs.push_back(s);
        } else if (key == "dropped") {
            std::string name;
            ls >> name;
            model.dropped.push_back(name);
        } else {
            throw Error(Errc::BadFormat, "unknown model key " + key);
        }
        if (ls.fail()) throw Error(Errc::BadFormat, "malformed model line: " + line);
    }
    return model;
}

}  // namespace livseg
