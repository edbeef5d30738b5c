#pragma once

#include <filesystem>

#include <torch/torch.h>

namespace vcolor {

enum class FlowDirection { Forward, Backward };

/// Pixel displacement field (u = x offset, v = y offset).
struct FlowField {
    torch::Tensor uv;  // [2,H,W]
    FlowDirection direction = FlowDirection::Forward;

    std::int64_t height() const { return uv.size(1); }
    std::int64_t width() const { return uv.size(2); }
};

/// 1 = visible / consistent, 0 = occluded. [H,W] float.
struct OcclusionMask {
    torch::Tensor mask;
};

inline constexpr float kFloMagic = 202021.25f;

/// Bilinear lookup of `image` ([C,H,W] or [B,C,H,W]) at fractional pixel
/// coordinates (`x`, `y` broadcastable to [H,W] or [B,H,W]). Coordinates
/// are clamped to the border. Integer coordinates reproduce pixels exactly.
torch::Tensor bilinear_sample(const torch::Tensor& image, const torch::Tensor& x, const torch::Tensor& y);

/// mask = 0 where |w + b(p+w)|^2 > ratio (|w|^2 + |b(p+w)|^2) + offset,
/// with w = primary flow and b = the opposite-direction flow sampled at the
/// position the primary flow points to. The mask lives on the grid of the
/// primary flow.
OcclusionMask occlusion_mask(const FlowField& primary, const FlowField& opposite, double ratio = 0.01,
                             double offset = 0.5);

/// Constant displacement (dx,dy) forward and (-dx,-dy) backward.
std::pair<FlowField, FlowField> synth_flow_translate(std::int64_t height, std::int64_t width, double dx, double dy);

/// Middlebury .flo: float magic 202021.25, int32 width, int32 height, then
/// row-major interleaved (u,v) float32, all little-endian.
FlowField load_flow(const std::filesystem::path& path, FlowDirection direction = FlowDirection::Forward);
void save_flow(const std::filesystem::path& path, const FlowField& flow);

/// Scales a flow field to a new resolution: bilinear resize of both
/// components, u multiplied by W'/W and v by H'/H.
FlowField resize_flow(const FlowField& flow, std::int64_t height, std::int64_t width);

void check_flow(const FlowField& flow);

}  // namespace vcolor
