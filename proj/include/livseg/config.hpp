#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "livseg/losses.hpp"
#include "livseg/postprocess.hpp"
#include "livseg/preprocess.hpp"
#include "livseg/segmenter.hpp"

namespace livseg {

struct PipelineConfig {
    BranchPreprocess liver{kLiverWindow, {512, 512, 16}, 2};
    BranchPreprocess tumor{kTumorWindow, {256, 256, 32}, 2};

    bool liver_largest_component = true;
    bool liver_fill_holes = true;
    bool tumor_contour = true;
    ContourConfig contour{};

    LossWeights liver_loss{1.0, 1.0, 0.0};
    LossWeights tumor_loss{1.0, 1.0, 0.5};
    FocalParams focal{};
    OptimizerSettings optimizer{};
    int epochs = 150;
    double threshold = 0.5;
    /// Random crop placement during tumor training.
    bool random_train_crops = false;

    std::uint64_t seed = 0;
    std::string data_dir = "data";
    std::string out_dir = "out";

    /// Full-resolution hyperparameters (512x512 liver and 256x256 tumor crops).
    static PipelineConfig full_scale();
    /// Same structure scaled to 64x64x32 phantoms and a per-voxel model.
    static PipelineConfig desk_scale();

    void validate() const;
    bool operator==(const PipelineConfig&) const = default;
};

/// Flat `key = value` text; `#` starts a comment. Keys not present keep the
/// values of `base`.
PipelineConfig parse_config(std::istream& in, const PipelineConfig& base = PipelineConfig::desk_scale());
PipelineConfig load_config(const std::filesystem::path& path,
                           const PipelineConfig& base = PipelineConfig::desk_scale());
std::string serialize_config(const PipelineConfig& cfg);
void save_config(const PipelineConfig& cfg, const std::filesystem::path& path);

TrainConfig liver_train_config(const PipelineConfig& cfg);
TrainConfig tumor_train_config(const PipelineConfig& cfg);

}  // namespace livseg
