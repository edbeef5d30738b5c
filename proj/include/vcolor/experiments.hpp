#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "vcolor/config.hpp"
#include "vcolor/data.hpp"
#include "vcolor/pipeline.hpp"

namespace vcolor {

struct ClipMetrics {
    std::int64_t frames = 0;
    std::optional<double> psnr;  // needs ground truth
    double color = 0.0;
    std::optional<double> we;  // needs flows
    std::vector<double> psnr_per_frame;
    std::vector<double> color_per_frame;
    std::vector<double> we_per_pair;
    double seconds_per_frame = 0.0;
};

/// Metrics of already colorized RGB frames. `gt` may be empty; `flows` and
/// `masks` (one per consecutive pair) may be empty.
ClipMetrics evaluate_frames(const std::vector<torch::Tensor>& pred_rgb, const std::vector<torch::Tensor>& gt_rgb,
                            const std::vector<torch::Tensor>& flows, const std::vector<torch::Tensor>& masks,
                            double we_scale);

/// Colorizes the grayscale version of `clip` with its first ground-truth
/// frame as the exemplar and scores the result against the clip.
ClipMetrics evaluate_clip(VideoColorizer& model, const Clip& clip, std::int64_t block_size, double we_scale,
                          std::vector<torch::Tensor>* out_rgb = nullptr);

/// Mean of each metric over several clips; per-frame arrays concatenated.
ClipMetrics average_metrics(const std::vector<ClipMetrics>& parts);

/// Ablation variants, from most reduced to the full model.
const std::vector<std::string>& ablation_variants();
/// Throws a usage error naming the valid variants for unknown names.
Ablation ablation_from_name(const std::string& name);

struct AblationRow {
    std::string variant;
    ClipMetrics metrics;
};

/// Evaluates `model` on each clip with the wiring of `variant`.
AblationRow run_ablation(VideoColorizer& model, const std::string& variant, const std::vector<Clip>& clips,
                         std::int64_t block_size, double we_scale);

struct SweepRow {
    std::int64_t block_size = 0;
    ClipMetrics metrics;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double psnr_spread = 0.0;  // max - min over rows
};

/// Runs inference with block sizes `sizes` on one clip.
SweepResult block_size_sweep(VideoColorizer& model, const Clip& clip, const std::vector<std::int64_t>& sizes,
                             double we_scale);

// JSON reports; layouts are described in docs/schemas.
nlohmann::json metrics_json(const ClipMetrics& m);
nlohmann::json eval_report(const ClipMetrics& m);
nlohmann::json colorize_report(const ClipMetrics& m, std::int64_t block_size, const PipelineConfig& cfg);
nlohmann::json ablation_report(const std::vector<AblationRow>& rows);
nlohmann::json sweep_report(const SweepResult& result);

}  // namespace vcolor
