#pragma once

#include <vector>

#include <torch/torch.h>

#include "vcolor/colorspace.hpp"
#include "vcolor/config.hpp"
#include "vcolor/correspondence.hpp"
#include "vcolor/ctblock.hpp"

namespace vcolor {

inline constexpr std::int64_t kColorizerInputChannels = 10;

/// Per-frame guidance stack at full resolution:
/// W1 (2) | S1 (1) | W2 (2) | S2 (1) | frame l (1) | reference lab (3).
struct ColorizerInput {
    torch::Tensor guidance;  // [N,10,H,W]
    TokenGrid ho;            // (N+1)*h*w tokens, reference last
};

/// Upsamples the quarter-resolution guidance bilinearly and concatenates it
/// with the block luminance and the broadcast reference.
ColorizerInput make_colorizer_input(const CorrelationOutputs& heads, const torch::Tensor& block_l,
                                    const LabFrame& reference, const TokenGrid& ho);

/// Three-level encoder/decoder with skip connections and CNN-Transformer
/// blocks at the H/8 bottleneck. The transformer branch is seeded from the
/// frame tokens of ho, average-pooled to the bottleneck grid.
class ColorizerImpl : public torch::nn::Module {
public:
    explicit ColorizerImpl(const PipelineConfig& cfg);

    /// Returns [N,2,H,W] chrominance strictly inside (-1,1).
    torch::Tensor forward(const ColorizerInput& input);

    CtStack bottleneck{nullptr};

private:
    torch::nn::Sequential stem_{nullptr}, enc1_{nullptr}, enc2_{nullptr}, enc3_{nullptr};
    torch::nn::Sequential dec3_{nullptr}, dec2_{nullptr}, dec1_{nullptr};
    torch::nn::Conv2d out_{nullptr};
    std::int64_t d_model_;
};
TORCH_MODULE(Colorizer);

/// Keeps the luminance bit-exact and attaches the predicted chrominance.
std::vector<LabFrame> assemble_lab(const torch::Tensor& block_l, const torch::Tensor& ab_out);

}  // namespace vcolor
