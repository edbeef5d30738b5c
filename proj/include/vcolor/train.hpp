#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <vector>

#include <torch/torch.h>

#include "vcolor/config.hpp"
#include "vcolor/data.hpp"
#include "vcolor/losses.hpp"
#include "vcolor/pipeline.hpp"

namespace vcolor {

struct StepStats {
    std::int64_t step = 0;
    std::int64_t epoch = 0;
    double total = 0, l1 = 0, perceptual = 0, temporal = 0, adversarial = 0, smooth = 0;
    double discriminator = 0;
};

/// Per-clip tensors prepared once for training.
struct TrainingClip {
    torch::Tensor lab;    // [T,3,H,W]
    torch::Tensor rgb;    // [T,3,H,W]
    torch::Tensor flows;  // [T-1,2,H,W] target-grid displacement
    torch::Tensor masks;  // [T-1,H,W]

    static TrainingClip from(const Clip& clip, torch::Dtype dtype = torch::kFloat32);
    std::int64_t frames() const { return lab.size(0); }
    TrainingClip window(std::int64_t start, std::int64_t length) const;
};

/// Generator forward over one clip with the first frame as reference.
/// Returns the predicted chrominance [T,2,H,W].
torch::Tensor predict_clip(VideoColorizer& model, const TrainingClip& clip, std::int64_t block_size);

/// Generator-side loss components for a predicted clip (adversarial term
/// excluded; it needs the discriminator).
LossComponents clip_losses(const TrainingClip& clip, const torch::Tensor& ab_pred, const PipelineConfig& cfg,
                           PerceptualNet* perceptual);

/// Alternating LSGAN / AdamW training. Losses are accumulated over each
/// whole clip before a single update of each network.
class Trainer {
public:
    explicit Trainer(const PipelineConfig& cfg, std::optional<VideoColorizer> model = std::nullopt);

    StepStats step(const TrainingClip& clip, std::int64_t step_index, std::int64_t epoch);

    struct Options {
        std::filesystem::path out_dir;  // empty: no files written
        std::int64_t steps = 0;         // 0: config.steps or epochs * dataset size
        std::function<void(const StepStats&)> on_step;
    };
    std::vector<StepStats> train(const std::vector<Clip>& dataset, const Options& options);

    /// Applies the step schedule for `epoch` to every optimizer group.
    void set_epoch(std::int64_t epoch);
    double current_lr_others() const;
    double current_lr_discriminator() const;
    std::size_t generator_groups() const { return gen_opt_->param_groups().size(); }

    VideoColorizer& model() { return model_; }
    PatchDiscriminator& discriminator() { return discriminator_; }
    const PipelineConfig& config() const { return cfg_; }

    void save(const std::filesystem::path& path, std::int64_t step);

private:
    PipelineConfig cfg_;
    VideoColorizer model_{nullptr};
    PatchDiscriminator discriminator_{nullptr};
    PerceptualNet perceptual_{nullptr};
    std::unique_ptr<torch::optim::AdamW> gen_opt_;
    std::unique_ptr<torch::optim::AdamW> disc_opt_;
    std::vector<double> gen_base_lr_;
    std::mt19937_64 rng_;
};

}  // namespace vcolor
