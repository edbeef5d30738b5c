#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "vcolor/colorspace.hpp"
#include "vcolor/flow.hpp"

namespace vcolor {

/// A sequence of frames with optional per-pair motion. Entry k of
/// `forward`, `backward` and `masks` describes the pair (k, k+1): forward
/// lives on the grid of frame k, backward and the mask on frame k+1.
struct Clip {
    std::string name;
    std::vector<torch::Tensor> rgb;  // [3,H,W] in [0,1]
    std::vector<FlowField> forward;
    std::vector<FlowField> backward;
    std::vector<torch::Tensor> masks;  // [H,W], 1 = visible

    std::size_t size() const { return rgb.size(); }
    bool has_flows() const { return !forward.empty() || !backward.empty(); }
    std::int64_t height() const { return rgb.front().size(1); }
    std::int64_t width() const { return rgb.front().size(2); }

    /// Displacements for `warp_by_flow`, one per pair, on the grid of the
    /// later frame: -backward when available, otherwise the forward field.
    std::vector<torch::Tensor> warp_flows() const;
    /// Masks per pair; all ones when none were supplied.
    std::vector<torch::Tensor> pair_masks() const;

    std::vector<LabFrame> lab() const;
    std::vector<LabFrame> gray() const;
};

// Image I/O through OpenCV. Tensors are [3,H,W] RGB in [0,1].
torch::Tensor read_rgb(const std::filesystem::path& path);
void write_rgb(const std::filesystem::path& path, const torch::Tensor& rgb);
torch::Tensor read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const torch::Tensor& mask);
torch::Tensor resize_rgb(const torch::Tensor& rgb, std::int64_t width, std::int64_t height);

/// Image files (png/jpg/jpeg/bmp) in `dir`, sorted by name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

/// Loads a frame directory. Motion is read from `flows_dir` (or from `dir`
/// itself when empty): `%05d.flo` forward fields, optional `%05d_bwd.flo`
/// backward fields and `%05d.png` masks. Frames and flows are resized to
/// `resize` (width, height) when given, with flow vectors scaled by the
/// resize ratio.
Clip load_clip(const std::filesystem::path& dir,
               std::optional<std::pair<std::int64_t, std::int64_t>> resize = std::nullopt,
               const std::filesystem::path& flows_dir = {});

/// Writes `<dir>/frames/%05d.png` and `<dir>/flows/{%05d.flo,%05d_bwd.flo,%05d.png}`.
void write_clip(const std::filesystem::path& dir, const Clip& clip);

/// Every subdirectory of `root` that contains a `frames/` directory, sorted.
std::vector<Clip> load_dataset(const std::filesystem::path& root,
                               std::optional<std::pair<std::int64_t, std::int64_t>> resize = std::nullopt);

struct SynthOptions {
    std::int64_t max_shape_speed = 3;
    std::int64_t max_pan_speed = 1;
    double texture_amplitude = 0.06;
};

/// Rigidly translating coloured rectangles and discs over a textured
/// background that pans with the camera. All displacements are integers,
/// so the returned flows are exact and the masks mark exactly the pixels
/// whose surface was not visible at the same spot in the previous frame.
Clip synth_clip(std::uint64_t seed, std::int64_t frames, std::int64_t height, std::int64_t width,
                std::int64_t n_shapes, const SynthOptions& options = {});

}  // namespace vcolor
