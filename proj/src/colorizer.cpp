#include "vcolor/colorizer.hpp"

#include "vcolor/error.hpp"

namespace vcolor {

namespace F = torch::nn::functional;

namespace {

// tanh saturates to exactly 1 in float; the scale keeps outputs strictly
// inside (-1,1).
constexpr double kOutputScale = 1.0 - 1.0 / (1 << 20);

torch::nn::Sequential conv_block(std::int64_t in, std::int64_t out, std::int64_t stride) {
    using namespace torch::nn;
    return Sequential(Conv2d(Conv2dOptions(in, out, 3).stride(stride).padding(1)),
                      InstanceNorm2d(InstanceNorm2dOptions(out).affine(true)), ReLU(),
                      Conv2d(Conv2dOptions(out, out, 3).padding(1)),
                      InstanceNorm2d(InstanceNorm2dOptions(out).affine(true)), ReLU());
}

torch::Tensor upsample_to(const torch::Tensor& x, std::int64_t h, std::int64_t w) {
    return F::interpolate(x, F::InterpolateFuncOptions()
                                 .size(std::vector<std::int64_t>{h, w})
                                 .mode(torch::kBilinear)
                                 .align_corners(false));
}

}  // namespace

ColorizerInput make_colorizer_input(const CorrelationOutputs& heads, const torch::Tensor& block_l,
                                    const LabFrame& reference, const TokenGrid& ho) {
    require(block_l.dim() == 4 && block_l.size(1) == 1, ErrorCategory::Shape, "block luminance must be [N,1,H,W]");
    const auto n = block_l.size(0), H = block_l.size(2), W = block_l.size(3);
    require(reference.height() == H && reference.width() == W, ErrorCategory::Shape,
            "reference size does not match the block");
    require(heads.vanilla.warped_ab.size(0) == n && heads.augmented.warped_ab.size(0) == n, ErrorCategory::Shape,
            "guidance frame count does not match the block");
    auto ref = reference.stacked().unsqueeze(0).expand({n, 3, H, W});
    auto guidance = torch::cat({upsample_to(heads.vanilla.warped_ab, H, W), upsample_to(heads.vanilla.similarity, H, W),
                                upsample_to(heads.augmented.warped_ab, H, W),
                                upsample_to(heads.augmented.similarity, H, W), block_l, ref},
                               1);
    return ColorizerInput{guidance, ho};
}

ColorizerImpl::ColorizerImpl(const PipelineConfig& cfg) : d_model_(cfg.d_model) {
    const auto b = cfg.colorizer_base;
    stem_ = register_module("stem", conv_block(kColorizerInputChannels, b, 1));
    enc1_ = register_module("enc1", conv_block(b, b, 2));
    enc2_ = register_module("enc2", conv_block(b, 2 * b, 2));
    enc3_ = register_module("enc3", conv_block(2 * b, 4 * b, 2));

    CtStackOptions stack;
    stack.block = CtBlockOptions{4 * b, cfg.d_model, cfg.other_heads, cfg.ffn_mult};
    stack.count = cfg.colorizer_ct_blocks;
    stack.pos_every_block = cfg.pos_every_block;
    bottleneck = register_module("bottleneck", CtStack(stack));
    bottleneck->transformer_enabled = !cfg.ablation.no_transformer_branch;

    dec3_ = register_module("dec3", conv_block(4 * b + 2 * b, 2 * b, 1));
    dec2_ = register_module("dec2", conv_block(2 * b + b, b, 1));
    dec1_ = register_module("dec1", conv_block(b + b, b, 1));
    out_ = register_module("out", torch::nn::Conv2d(torch::nn::Conv2dOptions(b, 2, 3).padding(1)));
}

torch::Tensor ColorizerImpl::forward(const ColorizerInput& input) {
    const auto& x = input.guidance;
    require(x.dim() == 4 && x.size(1) == kColorizerInputChannels, ErrorCategory::Shape,
            "colorizer input must be [N,10,H,W], got " + std::string(c10::str(x.sizes())));
    const auto n = x.size(0), H = x.size(2), W = x.size(3);
    require(H % 8 == 0 && W % 8 == 0, ErrorCategory::Shape, "colorizer needs H and W divisible by 8");

    auto s0 = stem_->forward(x);    // H
    auto s1 = enc1_->forward(s0);   // H/2
    auto s2 = enc2_->forward(s1);   // H/4
    auto s3 = enc3_->forward(s2);   // H/8

    const auto& ho = input.ho;
    require(ho.images == n + 1 && ho.h * 4 == H && ho.w * 4 == W && ho.dim() == d_model_, ErrorCategory::Shape,
            "ho tokens do not match the block layout");
    auto frame_tokens = to_map(ho).slice(0, 0, n);
    auto pooled = F::avg_pool2d(frame_tokens, F::AvgPool2dFuncOptions(2));
    auto [bottleneck_out, unused] = bottleneck->forward(s3, to_tokens(pooled));
    (void)unused;

    auto d3 = dec3_->forward(torch::cat({upsample_to(bottleneck_out, s2.size(2), s2.size(3)), s2}, 1));
    auto d2 = dec2_->forward(torch::cat({upsample_to(d3, s1.size(2), s1.size(3)), s1}, 1));
    auto d1 = dec1_->forward(torch::cat({upsample_to(d2, s0.size(2), s0.size(3)), s0}, 1));
    return torch::tanh(out_->forward(d1)) * kOutputScale;
}

std::vector<LabFrame> assemble_lab(const torch::Tensor& block_l, const torch::Tensor& ab_out) {
    require(block_l.dim() == 4 && ab_out.dim() == 4 && block_l.size(0) == ab_out.size(0) && ab_out.size(1) == 2 &&
                block_l.size(2) == ab_out.size(2) && block_l.size(3) == ab_out.size(3),
            ErrorCategory::Shape,
            "assemble_lab shape mismatch: " + std::string(c10::str(block_l.sizes())) + " vs " +
                std::string(c10::str(ab_out.sizes())));
    std::vector<LabFrame> out;
    out.reserve(block_l.size(0));
    for (std::int64_t i = 0; i < block_l.size(0); ++i) out.push_back(LabFrame{block_l[i][0], ab_out[i]});
    return out;
}

}  // namespace vcolor
