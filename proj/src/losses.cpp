#include "livseg/losses.hpp"

#include <cmath>

#include "livseg/error.hpp"

namespace livseg {
namespace {

void check_inputs(std::span<const double> p, std::span<const std::uint8_t> g) {
    if (p.size() != g.size()) throw Error(Errc::ShapeMismatch, "prediction and target differ in length");
    if (p.empty()) throw Error(Errc::ShapeMismatch, "empty prediction");
    for (double v : p) {
        if (!(v >= -1e-9 && v <= 1.0 + 1e-9)) throw Error(Errc::OutOfRange, "probability outside [0,1]");
    }
}

std::vector<double> to_double(const Volume& v) { return {v.data().begin(), v.data().end()}; }

}  // namespace

void LossWeights::validate() const {
    if (!(focal >= 0.0) || !(dice >= 0.0) || !(weak >= 0.0)) {
        throw Error(Errc::InvalidArgument, "loss weights must be non-negative");
    }
    if (focal == 0.0 && dice == 0.0 && weak == 0.0) {
        throw Error(Errc::InvalidArgument, "at least one loss weight must be positive");
    }
}

void FocalParams::validate() const {
    if (!(gamma >= 0.0)) throw Error(Errc::InvalidArgument, "focal gamma must be >= 0");
}

LossValue dice_loss(std::span<const double> p, std::span<const std::uint8_t> g) {
    check_inputs(p, g);
    double spg = 0.0, spp = 0.0, sgg = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i] ? 1.0 : 0.0;
        spg += p[i] * gi;
        spp += p[i] * p[i];
        sgg += gi;
    }
    const double num = 2.0 * spg + kDiceSmoothing;
    const double den = spp + sgg + kDiceSmoothing;
    LossValue out;
    out.value = 1.0 - num / den;
    out.grad.resize(p.size());
    const double den2 = den * den;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i] ? 1.0 : 0.0;
        out.grad[i] = -(2.0 * gi * den - num * 2.0 * p[i]) / den2;
    }
    return out;
}

LossValue focal_loss(std::span<const double> p, std::span<const std::uint8_t> g, const FocalParams& fp) {
    check_inputs(p, g);
    fp.validate();
    const double inv_n = 1.0 / static_cast<double>(p.size());
    const double gamma = fp.gamma;
    LossValue out;
    out.grad.resize(p.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool pos = g[i] != 0;
        const double pt = pos ? p[i] : 1.0 - p[i];
        const double q = 1.0 - pt;
        const double log_pt = std::log(pt + kLogGuard);
        const double mod = gamma == 0.0 ? 1.0 : std::pow(q, gamma);
        sum += mod * log_pt;
        // d/dpt of -(1-pt)^gamma log(pt + delta)
        double d_mod = 0.0;
        if (gamma != 0.0 && q > 0.0) d_mod = gamma * std::pow(q, gamma - 1.0);
        const double d_term = d_mod * log_pt - mod / (pt + kLogGuard);
        out.grad[i] = inv_n * (pos ? d_term : -d_term);
    }
    out.value = -sum * inv_n;
    return out;
}

LossValue weak_loss(std::span<const double> p, std::span<const std::uint8_t> region, double r_hat) {
    check_inputs(p, region);
    if (!(r_hat >= 0.0 && r_hat <= 1.0)) throw Error(Errc::OutOfRange, "weak label outside [0,1]");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (region[i]) {
            sum += p[i];
            ++count;
        }
    }
    if (count == 0) throw Error(Errc::EmptyRegion, "weak loss needs a nonempty liver region");
    const double n = static_cast<double>(count);
    const double diff = sum / n - r_hat;
    LossValue out;
    out.value = diff * diff;
    out.grad.assign(p.size(), 0.0);
    const double g = 2.0 * diff / n;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (region[i]) out.grad[i] = g;
    }
    return out;
}

LossBundle combined_loss(std::span<const double> p, std::span<const std::uint8_t> g,
                         std::span<const std::uint8_t> region, double r_hat, const LossWeights& w,
                         const FocalParams& fp) {
    w.validate();
    check_inputs(p, g);
    LossBundle out;
    out.grad.assign(p.size(), 0.0);
    auto accumulate = [&](double weight, const LossValue& term) {
        for (std::size_t i = 0; i < p.size(); ++i) out.grad[i] += weight * term.grad[i];
    };
    if (w.focal > 0.0) {
        const auto f = focal_loss(p, g, fp);
        out.focal = f.value;
        accumulate(w.focal, f);
    }
    if (w.dice > 0.0) {
        const auto d = dice_loss(p, g);
        out.dice = d.value;
        accumulate(w.dice, d);
    }
    if (w.weak > 0.0) {
        const auto k = weak_loss(p, region, r_hat);
        out.weak = k.value;
        accumulate(w.weak, k);
    }
    out.total = w.focal * out.focal + w.dice * out.dice + w.weak * out.weak;
    return out;
}

LossValue dice_loss(const Volume& p, const Mask& g) {
    require_aligned(p.grid(), g.grid(), "dice_loss");
    return dice_loss(to_double(p), g.foreground());
}

LossValue focal_loss(const Volume& p, const Mask& g, const FocalParams& fp) {
    require_aligned(p.grid(), g.grid(), "focal_loss");
    return focal_loss(to_double(p), g.foreground(), fp);
}

LossValue weak_loss(const Volume& p, const Mask& region, double r_hat) {
    require_aligned(p.grid(), region.grid(), "weak_loss");
    return weak_loss(to_double(p), region.foreground(), r_hat);
}

LossBundle combined_loss(const Volume& p, const Mask& g, const Mask& region, double r_hat, const LossWeights& w,
                         const FocalParams& fp) {
    require_aligned(p.grid(), g.grid(), "combined_loss");
    require_aligned(p.grid(), region.grid(), "combined_loss");
    return combined_loss(to_double(p), g.foreground(), region.foreground(), r_hat, w, fp);
}

}  // namespace livseg
