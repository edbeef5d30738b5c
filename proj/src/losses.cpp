#include "vcolor/losses.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>

#include "vcolor/error.hpp"

namespace vcolor {

namespace {

void same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    require(a.sizes() == b.sizes(), ErrorCategory::Shape,
            std::string(what) + ": shape mismatch " + std::string(c10::str(a.sizes())) + " vs " +
                std::string(c10::str(b.sizes())));
}

}  // namespace

torch::Tensor l1_loss(const torch::Tensor& pred, const torch::Tensor& target) {
    same_shape(pred, target, "l1_loss");
    return (pred - target).abs().mean();
}

torch::Tensor warp_by_flow(const torch::Tensor& frame, const torch::Tensor& flow) {
    const bool batched = frame.dim() == 4;
    require(frame.dim() == 3 || batched, ErrorCategory::Shape, "warp_by_flow expects [C,H,W] or [B,C,H,W]");
    require(flow.dim() == frame.dim() && flow.size(-3) == 2 && flow.size(-1) == frame.size(-1) &&
                flow.size(-2) == frame.size(-2),
            ErrorCategory::Shape, "flow must be [(B,)2,H,W] matching the frame");
    require(torch::isfinite(flow).all().item<bool>(), ErrorCategory::NonFinite, "flow contains non-finite values");
    const auto H = frame.size(-2), W = frame.size(-1);
    auto opts = flow.options();
    auto xs = torch::arange(W, opts).view({1, W}).expand({H, W});
    auto ys = torch::arange(H, opts).view({H, 1}).expand({H, W});
    auto u = flow.select(-3, 0);
    auto v = flow.select(-3, 1);
    return bilinear_sample(frame, (xs - u).to(frame.dtype()), (ys - v).to(frame.dtype()));
}

MaskedL1 masked_warp_l1(const torch::Tensor& prev, const torch::Tensor& cur, const torch::Tensor& flow,
                        const torch::Tensor& mask) {
    same_shape(prev, cur, "masked_warp_l1");
    require(mask.size(-1) == cur.size(-1) && mask.size(-2) == cur.size(-2), ErrorCategory::Shape,
            "mask must be [(B,)H,W] matching the frames");
    auto warped = warp_by_flow(prev, flow);
    auto m = mask.to(cur.dtype()).unsqueeze(-3);  // broadcast over channels
    auto diff = (m * warped - m * cur).abs();
    return MaskedL1{diff.sum(), mask.to(cur.dtype()).sum(), cur.size(-3), cur.numel()};
}

torch::Tensor temporal_loss(const torch::Tensor& ab_prev, const torch::Tensor& ab_cur, const torch::Tensor& flow,
                            const torch::Tensor& mask) {
    auto k = masked_warp_l1(ab_prev, ab_cur, flow, mask);
    return k.abs_sum / static_cast<double>(k.elements);
}

torch::Tensor smooth_loss(const torch::Tensor& ab, const torch::Tensor& l, double sigma) {
    require(ab.dim() >= 3 && ab.size(-3) == 2 && l.size(-3) == 1 && ab.size(-1) == l.size(-1) &&
                ab.size(-2) == l.size(-2),
            ErrorCategory::Shape, "smooth_loss expects ab [...,2,H,W] and l [...,1,H,W]");
    const auto W = ab.size(-1), H = ab.size(-2);
    torch::Tensor total = torch::zeros({}, ab.options());
    if (W > 1) {
        auto dab = (ab.narrow(-1, 1, W - 1) - ab.narrow(-1, 0, W - 1)).abs();
        auto dl = (l.narrow(-1, 1, W - 1) - l.narrow(-1, 0, W - 1)).abs();
        total = total + (dab * torch::exp(-dl / sigma)).mean();
    }
    if (H > 1) {
        auto dab = (ab.narrow(-2, 1, H - 1) - ab.narrow(-2, 0, H - 1)).abs();
        auto dl = (l.narrow(-2, 1, H - 1) - l.narrow(-2, 0, H - 1)).abs();
        total = total + (dab * torch::exp(-dl / sigma)).mean();
    }
    return total;
}

torch::Tensor lsgan_generator_loss(const torch::Tensor& d_fake) { return (d_fake - 1).pow(2).mean(); }

torch::Tensor lsgan_discriminator_loss(const torch::Tensor& d_real, const torch::Tensor& d_fake) {
    return (d_real - 1).pow(2).mean() + d_fake.pow(2).mean();
}

// ---------------------------------------------------------------------------

PatchDiscriminatorImpl::PatchDiscriminatorImpl(std::int64_t c) {
    using namespace torch::nn;
    auto lrelu = [] { return LeakyReLU(LeakyReLUOptions().negative_slope(0.2)); };
    body_ = register_module(
        "body", Sequential(Conv2d(Conv2dOptions(3, c, 4).stride(2).padding(1)), lrelu(),
                           Conv2d(Conv2dOptions(c, 2 * c, 4).stride(2).padding(1)),
                           InstanceNorm2d(InstanceNorm2dOptions(2 * c).affine(true)), lrelu(),
                           Conv2d(Conv2dOptions(2 * c, 4 * c, 4).stride(2).padding(1)),
                           InstanceNorm2d(InstanceNorm2dOptions(4 * c).affine(true)), lrelu()));
    score = register_module("score", Conv2d(Conv2dOptions(4 * c, 1, 3).padding(1)));
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& lab) {
    require(lab.dim() == 4 && lab.size(1) == 3, ErrorCategory::Shape, "discriminator expects [B,3,H,W]");
    return score->forward(body_->forward(lab));
}

AdversarialLosses adversarial_loss(const torch::Tensor& pred_lab, const torch::Tensor& real_lab,
                                   PatchDiscriminator& discriminator) {
    same_shape(pred_lab, real_lab, "adversarial_loss");
    auto g = lsgan_generator_loss(discriminator->forward(pred_lab));
    auto d = lsgan_discriminator_loss(discriminator->forward(real_lab), discriminator->forward(pred_lab.detach()));
    return {g, d};
}

// ---------------------------------------------------------------------------

PerceptualNetImpl::PerceptualNetImpl(std::int64_t base, std::uint64_t seed) {
    using namespace torch::nn;
    const std::int64_t widths[5] = {base, 2 * base, 4 * base, 8 * base, 8 * base};
    std::int64_t in = 3;
    for (int s = 0; s < 5; ++s) {
        Sequential stage;
        if (s > 0) stage->push_back(MaxPool2d(MaxPool2dOptions(2).ceil_mode(true)));
        stage->push_back(Conv2d(Conv2dOptions(in, widths[s], 3).padding(1)));
        stage->push_back(ReLU());
        stage->push_back(Conv2d(Conv2dOptions(widths[s], widths[s], 3).padding(1)));
        stage->push_back(ReLU());
        stages_.push_back(register_module("stage" + std::to_string(s + 1), stage));
        in = widths[s];
    }

    auto gen = at::detail::createCPUGenerator(seed);
    torch::NoGradGuard no_grad;
    for (auto& p : named_parameters(true)) {
        auto& t = p.value();
        if (t.dim() == 4) {
            const double fan_in = static_cast<double>(t.size(1) * t.size(2) * t.size(3));
            t.copy_(torch::randn(t.sizes(), gen, t.options()) * std::sqrt(2.0 / fan_in));
        } else {
            t.zero_();
        }
        t.set_requires_grad(false);
    }
}

torch::Tensor PerceptualNetImpl::relu5_2(const torch::Tensor& rgb) {
    require(rgb.dim() == 4 && rgb.size(1) == 3, ErrorCategory::Shape, "perceptual net expects [B,3,H,W]");
    auto mean = torch::tensor({0.485, 0.456, 0.406}, rgb.options()).view({1, 3, 1, 1});
    auto stdv = torch::tensor({0.229, 0.224, 0.225}, rgb.options()).view({1, 3, 1, 1});
    auto x = (rgb - mean) / stdv;
    for (auto& s : stages_) x = s->forward(x);
    return x;
}

torch::Tensor perceptual_loss(const torch::Tensor& pred_rgb, const torch::Tensor& target_rgb, PerceptualNet& net) {
    same_shape(pred_rgb, target_rgb, "perceptual_loss");
    return (net->relu5_2(pred_rgb) - net->relu5_2(target_rgb)).pow(2).mean();
}

torch::Tensor total_loss(const LossComponents& c, const LossWeights& w) {
    const std::pair<const char*, std::pair<const torch::Tensor*, double>> terms[] = {
        {"l1", {&c.l1, w.l1}},
        {"perceptual", {&c.perceptual, w.perceptual}},
        {"temporal", {&c.temporal, w.temporal}},
        {"adversarial", {&c.adversarial, w.adversarial}},
        {"smooth", {&c.smooth, w.smooth}},
    };
    torch::Tensor total;
    for (const auto& [name, term] : terms) {
        const auto& [t, weight] = term;
        if (!t->defined()) continue;
        require(torch::isfinite(*t).all().item<bool>(), ErrorCategory::NonFinite,
                std::string("loss component '") + name + "' is not finite");
        auto weighted = *t * weight;
        total = total.defined() ? total + weighted : weighted;
    }
    return total.defined() ? total : torch::zeros({});
}

}  // namespace vcolor
