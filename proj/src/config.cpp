#include "livseg/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "livseg/error.hpp"

namespace livseg {
namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw Error(Errc::BadFormat, "config key " + key + ": not a number: " + s);
    }
    return v;
}

long long parse_int(const std::string& key, const std::string& s) {
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw Error(Errc::BadFormat, "config key " + key + ": not an integer: " + s);
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw Error(Errc::BadFormat, "config key " + key + ": not a boolean: " + s);
}

Dims parse_dims(const std::string& key, const std::string& s) {
    Dims d{};
    std::stringstream ss(s);
    std::string part;
    std::size_t i = 0;
    while (std::getline(ss, part, ',')) {
        if (i >= 3) break;
        d[i++] = static_cast<int>(parse_int(key, trim(part)));
    }
    if (i != 3 || std::getline(ss, part, ',')) throw Error(Errc::BadFormat, "config key " + key + ": expected x,y,z");
    return d;
}

std::string fmt_dims(const Dims& d) {
    return std::to_string(d[0]) + "," + std::to_string(d[1]) + "," + std::to_string(d[2]);
}

struct Key {
    std::string name;
    std::function<std::string(const PipelineConfig&)> get;
    std::function<void(PipelineConfig&, const std::string&)> set;
};

Key real(std::string name, double PipelineConfig::*outer) {
    return {name, [outer](const PipelineConfig& c) { return fmt(c.*outer); },
            [outer, name](PipelineConfig& c, const std::string& v) { c.*outer = parse_double(name, v); }};
}

template <typename S>
Key real(std::string name, S PipelineConfig::*outer, double S::*inner) {
    return {name, [=](const PipelineConfig& c) { return fmt(c.*outer.*inner); },
            [=](PipelineConfig& c, const std::string& v) { c.*outer.*inner = parse_double(name, v); }};
}

Key window(std::string name, BranchPreprocess PipelineConfig::*branch, double HuWindow::*bound) {
    return {name, [=](const PipelineConfig& c) { return fmt((c.*branch).window.*bound); },
            [=](PipelineConfig& c, const std::string& v) { (c.*branch).window.*bound = parse_double(name, v); }};
}

Key dims(std::string name, BranchPreprocess PipelineConfig::*branch) {
    return {name, [=](const PipelineConfig& c) { return fmt_dims((c.*branch).target); },
            [=](PipelineConfig& c, const std::string& v) { (c.*branch).target = parse_dims(name, v); }};
}

Key margin(std::string name, BranchPreprocess PipelineConfig::*branch) {
    return {name, [=](const PipelineConfig& c) { return std::to_string((c.*branch).bbox_margin); },
            [=](PipelineConfig& c, const std::string& v) {
                (c.*branch).bbox_margin = static_cast<int>(parse_int(name, v));
            }};
}

Key flag(std::string name, bool PipelineConfig::*member) {
    return {name, [=](const PipelineConfig& c) { return std::string(c.*member ? "true" : "false"); },
            [=](PipelineConfig& c, const std::string& v) { c.*member = parse_bool(name, v); }};
}

Key text(std::string name, std::string PipelineConfig::*member) {
    return {name, [=](const PipelineConfig& c) { return c.*member; },
            [=](PipelineConfig& c, const std::string& v) { c.*member = v; }};
}

const std::vector<Key>& keys() {
    static const std::vector<Key> k = [] {
        std::vector<Key> v;
        v.push_back(window("liver.hu_lo", &PipelineConfig::liver, &HuWindow::lo));
        v.push_back(window("liver.hu_hi", &PipelineConfig::liver, &HuWindow::hi));
        v.push_back(dims("liver.target", &PipelineConfig::liver));
        v.push_back(margin("liver.bbox_margin", &PipelineConfig::liver));
        v.push_back(flag("liver.largest_component", &PipelineConfig::liver_largest_component));
        v.push_back(flag("liver.fill_holes", &PipelineConfig::liver_fill_holes));
        v.push_back(window("tumor.hu_lo", &PipelineConfig::tumor, &HuWindow::lo));
        v.push_back(window("tumor.hu_hi", &PipelineConfig::tumor, &HuWindow::hi));
        v.push_back(dims("tumor.target", &PipelineConfig::tumor));
        v.push_back(margin("tumor.bbox_margin", &PipelineConfig::tumor));
        v.push_back(flag("tumor.contour", &PipelineConfig::tumor_contour));
        v.push_back({"contour.iterations",
                     [](const PipelineConfig& c) { return std::to_string(c.contour.iterations); },
                     [](PipelineConfig& c, const std::string& s) {
                         c.contour.iterations = static_cast<int>(parse_int("contour.iterations", s));
                     }});
        v.push_back(real("contour.lambda1", &PipelineConfig::contour, &ContourConfig::lambda1));
        v.push_back(real("contour.lambda2", &PipelineConfig::contour, &ContourConfig::lambda2));
        v.push_back({"contour.smoothing_passes",
                     [](const PipelineConfig& c) { return std::to_string(c.contour.smoothing_passes); },
                     [](PipelineConfig& c, const std::string& s) {
                         c.contour.smoothing_passes = static_cast<int>(parse_int("contour.smoothing_passes", s));
                     }});
        v.push_back(real("liver.loss.focal", &PipelineConfig::liver_loss, &LossWeights::focal));
        v.push_back(real("liver.loss.dice", &PipelineConfig::liver_loss, &LossWeights::dice));
        v.push_back(real("liver.loss.weak", &PipelineConfig::liver_loss, &LossWeights::weak));
        v.push_back(real("tumor.loss.focal", &PipelineConfig::tumor_loss, &LossWeights::focal));
        v.push_back(real("tumor.loss.dice", &PipelineConfig::tumor_loss, &LossWeights::dice));
        v.push_back(real("tumor.loss.weak", &PipelineConfig::tumor_loss, &LossWeights::weak));
        v.push_back(real("focal.gamma", &PipelineConfig::focal, &FocalParams::gamma));
        v.push_back(real("optim.learning_rate", &PipelineConfig::optimizer, &OptimizerSettings::learning_rate));
        v.push_back(real("optim.weight_decay", &PipelineConfig::optimizer, &OptimizerSettings::weight_decay));
        v.push_back(real("optim.beta1", &PipelineConfig::optimizer, &OptimizerSettings::beta1));
        v.push_back(real("optim.beta2", &PipelineConfig::optimizer, &OptimizerSettings::beta2));
        v.push_back(real("optim.eps", &PipelineConfig::optimizer, &OptimizerSettings::eps));
        v.push_back({"train.epochs", [](const PipelineConfig& c) { return std::to_string(c.epochs); },
                     [](PipelineConfig& c, const std::string& s) {
                         c.epochs = static_cast<int>(parse_int("train.epochs", s));
                     }});
        v.push_back(real("train.threshold", &PipelineConfig::threshold));
        v.push_back(flag("train.random_crops", &PipelineConfig::random_train_crops));
        v.push_back({"seed", [](const PipelineConfig& c) { return std::to_string(c.seed); },
                     [](PipelineConfig& c, const std::string& s) {
                         c.seed = static_cast<std::uint64_t>(parse_int("seed", s));
                     }});
        v.push_back(text("paths.data", &PipelineConfig::data_dir));
        v.push_back(text("paths.out", &PipelineConfig::out_dir));
        return v;
    }();
    return k;
}

}  // namespace

PipelineConfig PipelineConfig::full_scale() { return PipelineConfig{}; }

PipelineConfig PipelineConfig::desk_scale() {
    PipelineConfig c;
    c.liver.target = {64, 64, 32};
    c.tumor.target = {48, 48, 24};
    c.optimizer.learning_rate = 1.0;
    return c;
}

void PipelineConfig::validate() const {
    liver.window.validate();
    tumor.window.validate();
    for (const auto* b : {&liver, &tumor}) {
        for (int t : b->target) {
            if (t < 1) throw Error(Errc::InvalidArgument, "crop targets must be positive");
        }
        if (b->bbox_margin < 0) throw Error(Errc::InvalidArgument, "bbox margin must be >= 0");
    }
    contour.validate();
    liver_loss.validate();
    tumor_loss.validate();
    focal.validate();
    const auto& o = optimizer;
    if (!(o.learning_rate > 0.0) || !(o.weight_decay >= 0.0) || !(o.beta1 >= 0.0 && o.beta1 < 1.0) ||
        !(o.beta2 >= 0.0 && o.beta2 < 1.0) || !(o.eps > 0.0)) {
        throw Error(Errc::InvalidArgument, "optimizer settings out of range");
    }
    if (epochs < 1) throw Error(Errc::InvalidArgument, "epochs must be >= 1");
    if (!(threshold > 0.0 && threshold < 1.0)) throw Error(Errc::InvalidArgument, "threshold must lie in (0,1)");
}

PipelineConfig parse_config(std::istream& in, const PipelineConfig& base) {
    PipelineConfig cfg = base;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw Error(Errc::BadFormat, "config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        bool found = false;
        for (const auto& k : keys()) {
            if (k.name == key) {
                k.set(cfg, value);
                found = true;
                break;
            }
        }
        if (!found) throw Error(Errc::BadFormat, "config line " + std::to_string(lineno) + ": unknown key " + key);
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path, const PipelineConfig& base) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    return parse_config(in, base);
}

std::string serialize_config(const PipelineConfig& cfg) {
    std::string out;
    for (const auto& k : keys()) out += k.name + " = " + k.get(cfg) + "\n";
    return out;
}

void save_config(const PipelineConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot open " + path.string());
    out << serialize_config(cfg);
}

namespace {

TrainConfig base_train_config(const PipelineConfig& cfg) {
    TrainConfig t;
    t.epochs = cfg.epochs;
    t.seed = cfg.seed;
    t.focal = cfg.focal;
    t.optimizer = cfg.optimizer;
    t.threshold = cfg.threshold;
    return t;
}

}  // namespace

TrainConfig liver_train_config(const PipelineConfig& cfg) {
    TrainConfig t = base_train_config(cfg);
    t.weights = cfg.liver_loss;
    return t;
}

TrainConfig tumor_train_config(const PipelineConfig& cfg) {
    TrainConfig t = base_train_config(cfg);
    t.weights = cfg.tumor_loss;
    t.seed = cfg.seed + 1;
    return t;
}

}  // namespace livseg
