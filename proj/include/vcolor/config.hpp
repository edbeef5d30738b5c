#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace vcolor {

struct LossWeights {
    double l1 = 0.5;
    double perceptual = 0.05;
    double temporal = 3.0;
    double adversarial = 0.2;
    double smooth = 4.0;
};

/// Ablation switches matching the rows of the component study.
struct Ablation {
    bool no_transformer_branch = false;
    bool single_head = false;
    bool no_linkage = false;

    bool operator==(const Ablation&) const = default;
};

/// Every knob of the model, the losses and the training loop.
///
/// Defaults are the desk-scale configuration. `tiny()` shrinks channel
/// widths so that the training experiments fit a single CPU core; the
/// architecture (taps, heads, block counts, losses) is unchanged.
///
/// Two values are interpretations rather than documented facts: `tau`
/// (softmax temperature of the colour warp) takes the listed gamma = 0.01,
/// and `alpha` (initial weight of the augmented head) takes the listed
/// alpha = 0.75.
struct PipelineConfig {
    std::string preset = "desk";
    std::int64_t seed = 0;

    // Geometry.
    std::int64_t width = 96;
    std::int64_t height = 64;
    std::int64_t block_size = 2;
    std::int64_t max_clip_length = 20;

    // Feature extractor.
    std::int64_t c_low = 128;
    std::int64_t c_high = 256;
    std::int64_t backbone_high_depth = 2;
    std::string backbone_padding = "zeros";
    std::string low_taps = "relu1_2,relu2_3";
    std::string high_taps = "relu3_3,relu3_19";

    // CNN-Transformer blocks.
    std::int64_t d_model = 96;
    std::int64_t corr_heads = 6;
    std::int64_t other_heads = 4;
    std::int64_t ct_blocks = 3;
    std::int64_t ffn_mult = 2;
    bool pos_every_block = true;

    // Fusion and non-local heads.
    std::int64_t fuse_channels = 512;
    std::int64_t residual_blocks = 3;
    std::int64_t head_channels = 256;
    double tau = 0.01;
    double alpha = 0.75;

    // Colorization network.
    std::int64_t colorizer_base = 32;
    std::int64_t colorizer_ct_blocks = 3;

    // Losses.
    LossWeights weights;
    double smooth_sigma = 0.1;
    std::int64_t disc_channels = 32;
    std::int64_t perceptual_channels = 16;
    bool perceptual_enabled = true;
    bool adversarial_enabled = true;

    // Optimisation.
    double beta1 = 0.5;
    double beta2 = 0.999;
    double weight_decay = 1e-4;
    double lr_discriminator = 1e-3;
    double lr_backbone = 1e-5;
    double lr_others = 1e-4;
    std::int64_t epochs = 10;
    std::int64_t decay_epoch_1 = 4;
    std::int64_t decay_epoch_2 = 8;
    std::int64_t steps = 0;  // 0: epochs * dataset size
    std::int64_t checkpoint_every = 0;
    std::int64_t log_every = 10;

    // Flow consistency thresholds.
    double occlusion_ratio = 0.01;
    double occlusion_offset = 0.5;

    double we_scale = 100.0;

    Ablation ablation;

    static PipelineConfig desk();
    static PipelineConfig tiny();

    void validate() const;

    /// Flat `key = value` dump; `parse_config` reads it back exactly.
    std::string to_text() const;
};

/// Parse a flat key-value config. A `preset` key, if present, is applied
/// first regardless of its position. Unknown keys and ill-typed values
/// raise ErrorCategory::Config.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Apply `key=value` overrides on top of an existing config. A `preset`
/// naming a different preset first replaces the whole base.
void apply_overrides(PipelineConfig& cfg, const std::map<std::string, std::string>& kv);

/// Parses "WxH" into (width, height).
std::pair<std::int64_t, std::int64_t> parse_resize(const std::string& s);

/// lr multiplier for a 0-based epoch index: 1, then /10 from decay_epoch_1,
/// then /100 from decay_epoch_2.
double lr_factor(const PipelineConfig& cfg, std::int64_t epoch);

}  // namespace vcolor
