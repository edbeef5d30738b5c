#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace vcolor {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE) on [0,1] images; identical inputs give kPsnrCap.
double psnr(const torch::Tensor& pred_rgb, const torch::Tensor& gt_rgb);

/// Hasler-Suesstrunk colourfulness of a [3,H,W] image in [0,1], computed on
/// the 0-255 scale with population statistics.
double colorfulness(const torch::Tensor& rgb);

struct WarpErrorResult {
    double mean = 0.0;
    std::vector<double> per_pair;
};

/// Mean over consecutive pairs of the masked L1 between warp(frame[t-1])
/// and frame[t], normalised by (visible pixels x channels) and multiplied
/// by `scale`. Pairs with an empty mask contribute 0. `flows[t-1]` and
/// `masks[t-1]` describe the pair (t-1, t).
WarpErrorResult warp_error(const std::vector<torch::Tensor>& frames, const std::vector<torch::Tensor>& flows,
                           const std::vector<torch::Tensor>& masks, double scale = 100.0);

/// FID/LPIPS are delegated to an external command. `command` is run with
/// the two directories appended and must print a single number on stdout.
/// Returns nullopt when no command is configured or it fails.
std::optional<double> external_metric(const std::string& command, const std::filesystem::path& pred_dir,
                                      const std::filesystem::path& gt_dir);

}  // namespace vcolor
