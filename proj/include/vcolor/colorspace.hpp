#pragma once

#include <torch/torch.h>

namespace vcolor {

/// One frame in normalised CIELAB.
///
/// `l` is [H,W] with L in [0,100] mapped to [-1,1]; `ab` is [2,H,W] with the
/// CIELAB a,b channels divided by 110.
struct LabFrame {
    torch::Tensor l;
    torch::Tensor ab;

    std::int64_t height() const { return l.size(0); }
    std::int64_t width() const { return l.size(1); }

    /// [3,H,W] stack (l, a, b).
    torch::Tensor stacked() const;
    static LabFrame from_stacked(const torch::Tensor& lab);
};

inline constexpr double kAbScale = 110.0;

/// Tensor-level conversions on [..., 3, H, W] tensors, differentiable.
/// Inputs to `rgb_to_lab_tensor` are sRGB in [0,1]; its output holds the
/// normalised (l, a, b) channels. `lab_to_rgb_tensor` clamps to [0,1].
torch::Tensor rgb_to_lab_tensor(const torch::Tensor& rgb);
torch::Tensor lab_to_rgb_tensor(const torch::Tensor& lab);

/// `image` is [3,H,W] sRGB in [0,1]. Non-finite values are rejected.
LabFrame rgb_to_lab(const torch::Tensor& image);
torch::Tensor lab_to_rgb(const LabFrame& frame);

LabFrame grayscale_of(const LabFrame& frame);

/// Throws ErrorCategory::Shape / NonFinite if the frame breaks the
/// LabFrame invariants (shared H×W, finite, within [-1,1]).
void check_lab_frame(const LabFrame& frame);

}  // namespace vcolor
