#include "livseg/segmenter.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <random>

#include "filters.hpp"
#include "livseg/error.hpp"
#include "livseg/nifti.hpp"

namespace livseg {
namespace {

double coord(int i, int n) { return n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0; }

template <typename T>
void put_le(std::vector<std::byte>& out, T v) {
    std::array<std::byte, sizeof(T)> raw{};
    std::memcpy(raw.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    out.insert(out.end(), raw.begin(), raw.end());
}

template <typename T>
T get_le(std::span<const std::byte> bytes, std::size_t offset) {
    std::array<std::byte, sizeof(T)> raw{};
    std::memcpy(raw.data(), bytes.data() + offset, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    T v{};
    std::memcpy(&v, raw.data(), sizeof(T));
    return v;
}

constexpr std::uint32_t kParamsVersion = 1;

}  // namespace

FeatureStack extract_features(const Volume& normalized, const FeatureOptions& options) {
    if (normalized.kind() != VolumeKind::Normalized) {
        throw Error(Errc::KindMismatch, "features are extracted from normalized volumes");
    }
    const Dims& d = normalized.dims();
    const std::vector<double> intensity(normalized.data().begin(), normalized.data().end());
    std::vector<double> squared(intensity.size());
    std::transform(intensity.begin(), intensity.end(), squared.begin(), [](double v) { return v * v; });

    const auto box1 = detail::separable(intensity, d, detail::box_kernel(1));
    const auto box2 = detail::separable(intensity, d, detail::box_kernel(2));
    const auto box2_sq = detail::separable(squared, d, detail::box_kernel(2));
    const auto gauss1 = detail::separable(intensity, d, detail::gaussian_kernel(1.0));
    const auto gauss2 = detail::separable(intensity, d, detail::gaussian_kernel(2.0));

    FeatureStack fs;
    fs.voxels = intensity.size();
    fs.width = kBaseFeatureCount + (options.include_y ? 1 : 0);
    fs.values.resize(fs.voxels * fs.width);
    const Grid& g = normalized.grid();
    for (std::size_t i = 0; i < fs.voxels; ++i) {
        const auto c = g.coords(i);
        double* row = fs.values.data() + i * fs.width;
        row[0] = intensity[i];
        row[1] = box1[i];
        row[2] = box2[i];
        row[3] = std::max(0.0, box2_sq[i] - box2[i] * box2[i]);
        row[4] = gauss1[i];
        row[5] = gauss2[i];
        row[6] = coord(c[0], d[0]);
        row[7] = coord(c[2], d[2]);
        if (options.include_y) row[8] = coord(c[1], d[1]);
    }
    return fs;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::vector<double> forward(const SegmenterParams& params, const FeatureStack& features) {
    if (params.weights.size() != features.width) {
        throw Error(Errc::DimMismatch, "parameter width does not match feature width");
    }
    std::vector<double> p(features.voxels);
    for (std::size_t i = 0; i < features.voxels; ++i) {
        const double* f = features.values.data() + i * features.width;
        double z = params.bias;
        for (std::size_t j = 0; j < features.width; ++j) z += params.weights[j] * f[j];
        p[i] = sigmoid(z);
    }
    return p;
}

Volume forward_volume(const SegmenterParams& params, const FeatureStack& features, const Grid& grid) {
    const auto p = forward(params, features);
    if (p.size() != grid.size()) throw Error(Errc::ShapeMismatch, "feature stack does not match grid");
    std::vector<float> data(p.size());
    std::transform(p.begin(), p.end(), data.begin(), [](double v) { return static_cast<float>(v); });
    return Volume(grid, VolumeKind::Probability, std::move(data));
}

Mask threshold_mask(std::span<const double> p, const Grid& grid, double threshold, std::uint8_t label) {
    if (p.size() != grid.size()) throw Error(Errc::ShapeMismatch, "probabilities do not match grid");
    std::vector<std::uint8_t> labels(p.size());
    std::transform(p.begin(), p.end(), labels.begin(),
                   [&](double v) { return v >= threshold ? label : kBackgroundLabel; });
    return Mask(grid, std::move(labels));
}

Mask predict(const SegmenterParams& params, const FeatureStack& features, const Grid& grid, double threshold,
             std::uint8_t label) {
    return threshold_mask(forward(params, features), grid, threshold, label);
}

OptimizerState OptimizerState::create(std::size_t n_params, const OptimizerSettings& settings,
                                      std::int64_t total_steps) {
    OptimizerState s;
    s.m.assign(n_params, 0.0);
    s.v.assign(n_params, 0.0);
    s.settings = settings;
    s.total_steps = std::max<std::int64_t>(1, total_steps);
    return s;
}

double cosine_lr(double base, std::int64_t t, std::int64_t total) {
    const std::int64_t T = std::max<std::int64_t>(1, total);
    const double frac = static_cast<double>(std::clamp<std::int64_t>(t, 0, T)) / static_cast<double>(T);
    return base * (1.0 + std::cos(std::numbers::pi * frac)) / 2.0;
}

double OptimizerState::learning_rate() const { return cosine_lr(settings.learning_rate, step, total_steps); }

void adam_update(SegmenterParams& params, OptimizerState& opt, std::span<const double> grad) {
    const std::size_t n = params.size();
    if (grad.size() != n || opt.m.size() != n || opt.v.size() != n) {
        throw Error(Errc::DimMismatch, "optimizer state does not match parameters");
    }
    for (double g : grad) {
        if (!std::isfinite(g)) throw Error(Errc::NonFiniteGradient, "non-finite gradient at step " + std::to_string(opt.step));
    }
    const auto& s = opt.settings;
    const double lr = opt.learning_rate();
    const double t = static_cast<double>(opt.step + 1);
    const double c1 = 1.0 - std::pow(s.beta1, t);
    const double c2 = 1.0 - std::pow(s.beta2, t);
    for (std::size_t j = 0; j < n; ++j) {
        opt.m[j] = s.beta1 * opt.m[j] + (1.0 - s.beta1) * grad[j];
        opt.v[j] = s.beta2 * opt.v[j] + (1.0 - s.beta2) * grad[j] * grad[j];
        const double m_hat = opt.m[j] / c1;
        const double v_hat = opt.v[j] / c2;
        double& theta = j + 1 < n ? params.weights[j] : params.bias;
        theta -= lr * (m_hat / (std::sqrt(v_hat) + s.eps) + s.weight_decay * theta);
    }
    ++opt.step;
}

ParamGradient loss_and_gradient(const SegmenterParams& params, const TrainingSample& sample, const LossWeights& w,
                                const FocalParams& fp) {
    if (sample.target.size() != sample.features.voxels) {
        throw Error(Errc::ShapeMismatch, "target does not match feature stack");
    }
    const auto p = forward(params, sample.features);
    ParamGradient out;
    out.loss = combined_loss(p, sample.target, sample.region, sample.r_hat, w, fp);
    const std::size_t width = sample.features.width;
    out.grad.assign(width + 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double dz = out.loss.grad[i] * p[i] * (1.0 - p[i]);
        if (dz == 0.0) continue;
        const double* f = sample.features.values.data() + i * width;
        for (std::size_t j = 0; j < width; ++j) out.grad[j] += dz * f[j];
        out.grad[width] += dz;
    }
    return out;
}

LossBundle train_step(SegmenterParams& params, OptimizerState& opt, const TrainingSample& sample,
                      const LossWeights& w, const FocalParams& fp) {
    auto pg = loss_and_gradient(params, sample, w, fp);
    adam_update(params, opt, pg.grad);
    return std::move(pg.loss);
}

double mean_hard_dice(const SegmenterParams& params, std::span<const TrainingSample> samples, double threshold) {
    double sum = 0.0;
    int count = 0;
    for (const auto& s : samples) {
        const auto p = forward(params, s.features);
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const bool pred = p[i] >= threshold;
            const bool truth = s.target[i] != 0;
            tp += pred && truth;
            fp += pred && !truth;
            fn += !pred && truth;
        }
        const std::size_t den = 2 * tp + fp + fn;
        if (den == 0) continue;
        sum += 2.0 * static_cast<double>(tp) / static_cast<double>(den);
        ++count;
    }
    return count ? sum / count : 0.0;
}

namespace {

FeatureScaling pooled_scaling(const std::vector<const FeatureStack*>& stacks) {
    if (stacks.empty()) throw Error(Errc::TooFewSamples, "scaling needs at least one sample");
    const std::size_t width = stacks.front()->width;
    std::vector<double> sum(width, 0.0), sum_sq(width, 0.0);
    double count = 0.0;
    for (const auto* fs : stacks) {
        if (fs->width != width) throw Error(Errc::DimMismatch, "samples differ in feature width");
        for (std::size_t i = 0; i < fs->voxels; ++i) {
            const double* f = fs->values.data() + i * width;
            for (std::size_t j = 0; j < width; ++j) {
                sum[j] += f[j];
                sum_sq[j] += f[j] * f[j];
            }
        }
        count += static_cast<double>(fs->voxels);
    }
    if (count == 0.0) throw Error(Errc::TooFewSamples, "scaling needs at least one voxel");
    FeatureScaling sc;
    sc.mean.resize(width);
    sc.scale.resize(width);
    for (std::size_t j = 0; j < width; ++j) {
        sc.mean[j] = sum[j] / count;
        const double var = std::max(0.0, sum_sq[j] / count - sc.mean[j] * sc.mean[j]);
        const double sd = std::sqrt(var);
        sc.scale[j] = sd > 1e-12 ? sd : 1.0;
    }
    return sc;
}

}  // namespace

FeatureScaling fit_scaling(std::span<const TrainingSample> samples) {
    std::vector<const FeatureStack*> stacks;
    for (const auto& s : samples) stacks.push_back(&s.features);
    return pooled_scaling(stacks);
}

FeatureStack apply_scaling(const FeatureStack& features, const FeatureScaling& sc) {
    if (sc.mean.size() != features.width) throw Error(Errc::DimMismatch, "scaling width mismatch");
    FeatureStack out = features;
    for (std::size_t i = 0; i < out.voxels; ++i) {
        double* f = out.values.data() + i * out.width;
        for (std::size_t j = 0; j < out.width; ++j) f[j] = (f[j] - sc.mean[j]) / sc.scale[j];
    }
    return out;
}

SegmenterParams unscale_params(const SegmenterParams& scaled, const FeatureScaling& sc) {
    SegmenterParams raw = scaled;
    for (std::size_t j = 0; j < raw.weights.size(); ++j) {
        raw.weights[j] = scaled.weights[j] / sc.scale[j];
        raw.bias -= raw.weights[j] * sc.mean[j];
    }
    return raw;
}

SegmenterParams scale_params(const SegmenterParams& raw, const FeatureScaling& sc) {
    SegmenterParams scaled = raw;
    for (std::size_t j = 0; j < raw.weights.size(); ++j) {
        scaled.weights[j] = raw.weights[j] * sc.scale[j];
        scaled.bias += raw.weights[j] * sc.mean[j];
    }
    return scaled;
}

namespace {

TrainResult train_loop(std::span<const TrainingSample> dataset, std::span<const TrainingSample> validation,
                       const TrainConfig& cfg, SegmenterParams params) {
    const std::int64_t total_steps = static_cast<std::int64_t>(cfg.epochs) * static_cast<std::int64_t>(dataset.size());
    OptimizerState opt = OptimizerState::create(params.size(), cfg.optimizer, total_steps);

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    result.params = params;
    double best = -1.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        EpochRecord rec;
        rec.epoch = epoch + 1;
        for (auto idx : order) {
            const auto loss = train_step(params, opt, dataset[idx], cfg.weights, cfg.focal);
            rec.total += loss.total;
            rec.dice += loss.dice;
            rec.focal += loss.focal;
            rec.weak += loss.weak;
        }
        const auto n = static_cast<double>(dataset.size());
        rec.total /= n;
        rec.dice /= n;
        rec.focal /= n;
        rec.weak /= n;
        const bool has_val = !validation.empty();
        rec.val_dice = mean_hard_dice(params, has_val ? validation : dataset, cfg.threshold);
        if (has_val && rec.val_dice > best) {
            best = rec.val_dice;
            result.params = params;
            result.best_epoch = rec.epoch;
        }
        result.curves.epochs.push_back(rec);
    }
    result.final_params = params;
    if (validation.empty()) {
        result.params = params;
        result.best_epoch = cfg.epochs;
    }
    return result;
}

std::vector<TrainingSample> scaled_copy(std::span<const TrainingSample> samples, const FeatureScaling& sc) {
    std::vector<TrainingSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        TrainingSample t = s;
        t.features = apply_scaling(s.features, sc);
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

TrainResult train(std::span<const TrainingSample> dataset, std::span<const TrainingSample> validation,
                  const TrainConfig& cfg, SegmenterParams init) {
    if (dataset.empty()) throw Error(Errc::TooFewSamples, "training needs at least one sample");
    cfg.weights.validate();
    cfg.focal.validate();
    const std::size_t width = dataset.front().features.width;
    SegmenterParams params = init.weights.empty() ? SegmenterParams::zeros(width) : std::move(init);
    if (params.weights.size() != width) throw Error(Errc::DimMismatch, "initial parameters do not match features");
    if (!cfg.standardize_features) return train_loop(dataset, validation, cfg, std::move(params));

    const FeatureScaling sc = fit_scaling(dataset);
    const auto train_set = scaled_copy(dataset, sc);
    const auto val_set = scaled_copy(validation, sc);
    TrainResult r = train_loop(train_set, val_set, cfg, scale_params(params, sc));
    r.params = unscale_params(r.params, sc);
    r.final_params = unscale_params(r.final_params, sc);
    return r;
}

void write_curves_csv(const TrainingCurves& curves, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + path.string());
    out << "epoch,total,dice,focal,weak,val_dice\n" << std::setprecision(10);
    for (const auto& e : curves.epochs) {
        out << e.epoch << ',' << e.total << ',' << e.dice << ',' << e.focal << ',' << e.weak << ',' << e.val_dice
            << '\n';
    }
}

std::vector<std::byte> encode_params(const SegmenterParams& params) {
    std::vector<std::byte> out;
    for (char c : {'L', 'V', 'S', 'G'}) out.push_back(static_cast<std::byte>(c));
    put_le<std::uint32_t>(out, kParamsVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.weights.size()));
    for (double w : params.weights) put_le<double>(out, w);
    put_le<double>(out, params.bias);
    return out;
}

SegmenterParams decode_params(std::span<const std::byte> bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "LVSG", 4) != 0) {
        throw Error(Errc::BadMagic, "not a segmenter parameter blob");
    }
    const auto version = get_le<std::uint32_t>(bytes, 4);
    if (version != kParamsVersion) throw Error(Errc::BadFormat, "unsupported parameter blob version");
    const auto width = get_le<std::uint32_t>(bytes, 8);
    if (bytes.size() != 12 + 8 * (static_cast<std::size_t>(width) + 1)) {
        throw Error(Errc::TruncatedFile, "parameter blob length does not match its width");
    }
    SegmenterParams p;
    p.weights.resize(width);
    for (std::size_t j = 0; j < width; ++j) p.weights[j] = get_le<double>(bytes, 12 + 8 * j);
    p.bias = get_le<double>(bytes, 12 + 8 * static_cast<std::size_t>(width));
    return p;
}

void save_params(const SegmenterParams& params, const std::filesystem::path& path) {
    write_file_bytes(path, encode_params(params));
}

SegmenterParams load_params(const std::filesystem::path& path) { return decode_params(read_file_bytes(path)); }

SoftmaxParams SoftmaxParams::zeros(std::size_t classes, std::size_t width) {
    SoftmaxParams p;
    p.classes = classes;
    p.width = width;
    p.weights.assign(classes * width, 0.0);
    p.bias.assign(classes, 0.0);
    return p;
}

namespace {

void softmax_scores(const SoftmaxParams& params, const double* f, std::vector<double>& prob) {
    double max_z = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < params.classes; ++k) {
        double z = params.bias[k];
        const double* w = params.weights.data() + k * params.width;
        for (std::size_t j = 0; j < params.width; ++j) z += w[j] * f[j];
        prob[k] = z;
        max_z = std::max(max_z, z);
    }
    double sum = 0.0;
    for (auto& z : prob) {
        z = std::exp(z - max_z);
        sum += z;
    }
    for (auto& z : prob) z /= sum;
}

}  // namespace

SoftmaxParams train_multiclass(std::span<const MulticlassSample> dataset, std::size_t classes, const TrainConfig& cfg) {
    if (dataset.empty()) throw Error(Errc::TooFewSamples, "training needs at least one sample");
    const std::size_t width = dataset.front().features.width;
    SoftmaxParams params = SoftmaxParams::zeros(classes, width);
    const std::size_t n_params = classes * (width + 1);
    const std::int64_t total_steps = static_cast<std::int64_t>(cfg.epochs) * static_cast<std::int64_t>(dataset.size());
    OptimizerState opt = OptimizerState::create(n_params, cfg.optimizer, total_steps);

    // Adam over the flattened (weights, biases) vector.
    SegmenterParams flat = SegmenterParams::zeros(n_params - 1);
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    FeatureScaling sc{std::vector<double>(width, 0.0), std::vector<double>(width, 1.0)};
    if (cfg.standardize_features) {
        std::vector<const FeatureStack*> stacks;
        for (const auto& s : dataset) stacks.push_back(&s.features);
        sc = pooled_scaling(stacks);
    }
    std::vector<double> prob(classes);
    std::vector<double> grad(n_params);
    std::vector<double> f(width);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (auto idx : order) {
            const auto& s = dataset[idx];
            std::fill(grad.begin(), grad.end(), 0.0);
            const double inv_n = 1.0 / static_cast<double>(s.features.voxels);
            if (s.features.width != width || s.labels.size() != s.features.voxels) {
                throw Error(Errc::DimMismatch, "multiclass sample shape mismatch");
            }
            for (std::size_t i = 0; i < s.features.voxels; ++i) {
                const double* raw = s.features.values.data() + i * width;
                for (std::size_t j = 0; j < width; ++j) f[j] = (raw[j] - sc.mean[j]) / sc.scale[j];
                softmax_scores(params, f.data(), prob);
                for (std::size_t k = 0; k < classes; ++k) {
                    const double d = (prob[k] - (s.labels[i] == k ? 1.0 : 0.0)) * inv_n;
                    double* gw = grad.data() + k * width;
                    for (std::size_t j = 0; j < width; ++j) gw[j] += d * f[j];
                    grad[classes * width + k] += d;
                }
            }
            // flat layout: weights[0..KW) then biases[KW..KW+K), last entry in `bias`.
            adam_update(flat, opt, grad);
            for (std::size_t q = 0; q < classes * width; ++q) params.weights[q] = flat.weights[q];
            for (std::size_t k = 0; k + 1 < classes; ++k) params.bias[k] = flat.weights[classes * width + k];
            params.bias[classes - 1] = flat.bias;
        }
    }
    for (std::size_t k = 0; k < classes; ++k) {
        double* w = params.weights.data() + k * width;
        for (std::size_t j = 0; j < width; ++j) {
            w[j] /= sc.scale[j];
            params.bias[k] -= w[j] * sc.mean[j];
        }
    }
    return params;
}

std::vector<std::uint8_t> predict_multiclass(const SoftmaxParams& params, const FeatureStack& features) {
    if (features.width != params.width) throw Error(Errc::DimMismatch, "feature width mismatch");
    std::vector<std::uint8_t> out(features.voxels);
    std::vector<double> prob(params.classes);
    for (std::size_t i = 0; i < features.voxels; ++i) {
        softmax_scores(params, features.values.data() + i * features.width, prob);
        out[i] = static_cast<std::uint8_t>(std::max_element(prob.begin(), prob.end()) - prob.begin());
    }
    return out;
}

}  // namespace livseg
