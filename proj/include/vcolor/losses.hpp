#pragma once

#include <string>
#include <utility>

#include <torch/torch.h>

#include "vcolor/config.hpp"
#include "vcolor/flow.hpp"

namespace vcolor {

/// Mean absolute difference.
torch::Tensor l1_loss(const torch::Tensor& pred, const torch::Tensor& target);

/// Output of the masked temporal kernel shared by the temporal loss and
/// the warp-error metric.
struct MaskedL1 {
    torch::Tensor abs_sum;   // sum |mask*(warped - current)|
    torch::Tensor mask_sum;  // number of visible pixels
    std::int64_t channels = 0;
    std::int64_t elements = 0;  // numel of `current`
};

/// Backward bilinear warp: out(p) = frame(p - flow(p)), border-clamped.
/// `flow` is the forward displacement (t-1 -> t) expressed on the target
/// grid. Accepts [C,H,W] or [B,C,H,W] frames with [2,H,W] or [B,2,H,W] flow.
torch::Tensor warp_by_flow(const torch::Tensor& frame, const torch::Tensor& flow);

MaskedL1 masked_warp_l1(const torch::Tensor& prev, const torch::Tensor& cur, const torch::Tensor& flow,
                        const torch::Tensor& mask);

/// L1 between mask*warp(prev) and mask*cur, divided by cur.numel().
torch::Tensor temporal_loss(const torch::Tensor& ab_prev, const torch::Tensor& ab_cur, const torch::Tensor& flow,
                            const torch::Tensor& mask);

/// Luminance-guided total variation:
///   mean_x |d_x ab| exp(-|d_x l| / sigma) + mean_y |d_y ab| exp(-|d_y l| / sigma)
/// `ab` is [...,2,H,W], `l` is [...,1,H,W].
torch::Tensor smooth_loss(const torch::Tensor& ab, const torch::Tensor& l, double sigma);

/// Least-squares GAN objectives on raw discriminator outputs.
torch::Tensor lsgan_generator_loss(const torch::Tensor& d_fake);
torch::Tensor lsgan_discriminator_loss(const torch::Tensor& d_real, const torch::Tensor& d_fake);

/// Patch discriminator on (l, a, b) stacks: three stride-2 conv blocks and
/// a 3x3 scoring conv; outputs raw patch scores.
class PatchDiscriminatorImpl : public torch::nn::Module {
public:
    explicit PatchDiscriminatorImpl(std::int64_t channels);
    torch::Tensor forward(const torch::Tensor& lab);

    torch::nn::Conv2d score{nullptr};

private:
    torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

struct AdversarialLosses {
    torch::Tensor generator;
    torch::Tensor discriminator;
};

/// g = mean (D(pred)-1)^2; d = mean (D(real)-1)^2 + mean D(pred.detach())^2.
AdversarialLosses adversarial_loss(const torch::Tensor& pred_lab, const torch::Tensor& real_lab,
                                   PatchDiscriminator& discriminator);

/// Frozen VGG-style extractor exposing a `relu5_2` tap. Weights are drawn
/// from a dedicated generator so every instance with the same seed is
/// identical; parameters never require grad.
class PerceptualNetImpl : public torch::nn::Module {
public:
    PerceptualNetImpl(std::int64_t base_channels, std::uint64_t seed = 1234);

    /// `rgb` is [B,3,H,W] in [0,1]; ImageNet normalisation is applied.
    torch::Tensor relu5_2(const torch::Tensor& rgb);

private:
    std::vector<torch::nn::Sequential> stages_;
};
TORCH_MODULE(PerceptualNet);

/// Mean squared difference of relu5_2 activations.
torch::Tensor perceptual_loss(const torch::Tensor& pred_rgb, const torch::Tensor& target_rgb, PerceptualNet& net);

struct LossComponents {
    torch::Tensor l1, perceptual, temporal, adversarial, smooth;
};

/// Weighted sum. Undefined components count as zero; a non-finite
/// component raises ErrorCategory::NonFinite naming the component.
torch::Tensor total_loss(const LossComponents& c, const LossWeights& w);

}  // namespace vcolor
