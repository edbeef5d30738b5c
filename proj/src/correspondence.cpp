#include "vcolor/correspondence.hpp"

#include "vcolor/error.hpp"

namespace vcolor {

namespace F = torch::nn::functional;

torch::Tensor correlation(const torch::Tensor& f_block, const torch::Tensor& f_reference) {
    require(f_block.dim() == 2 && f_reference.dim() == 2 && f_block.size(1) == f_reference.size(1),
            ErrorCategory::Shape,
            "correlation needs [*,C] features with equal C, got " + std::string(c10::str(f_block.sizes())) + " and " +
                std::string(c10::str(f_reference.sizes())));
    auto normalize = [](const torch::Tensor& f) {
        auto centred = f - f.mean(0, true);
        auto norm = centred.norm(2, 1, true);
        auto nonzero = norm > 0;
        // Guard the division so flat rows yield exact zeros (and zero grads).
        auto safe = torch::where(nonzero, norm, torch::ones_like(norm));
        return torch::where(nonzero, centred / safe, torch::zeros_like(centred));
    };
    return torch::matmul(normalize(f_block), normalize(f_reference).t());
}

torch::Tensor warp_colors(const torch::Tensor& m, const torch::Tensor& ref_ab, double tau, std::int64_t n,
                          std::int64_t h, std::int64_t w) {
    require(tau > 0, ErrorCategory::Config, "tau must be > 0");
    require(ref_ab.dim() == 3 && ref_ab.size(0) == 2 && ref_ab.size(1) * ref_ab.size(2) == m.size(1),
            ErrorCategory::Shape, "reference ab must be [2,h,w] matching the correlation columns");
    auto weights = torch::softmax(m * (1.0 / tau), 1);                 // [N*h*w, h*w]
    auto colors = ref_ab.reshape({2, -1}).t();                  // [h*w, 2]
    auto warped = torch::matmul(weights, colors);               // [N*h*w, 2]
    return warped.reshape({n, h, w, 2}).permute({0, 3, 1, 2}).contiguous();
}

torch::Tensor similarity_map(const torch::Tensor& m, std::int64_t n, std::int64_t h, std::int64_t w) {
    return std::get<0>(m.max(1)).reshape({n, 1, h, w});
}

HeadOutputs run_head(const HeadFeature& head, const torch::Tensor& ref_ab_small, double tau, std::int64_t n,
                     std::int64_t h, std::int64_t w) {
    require(head.f_block.size(0) == n * h * w && head.f_reference.size(0) == h * w, ErrorCategory::Shape,
            "head feature rows do not match N,h,w");
    auto m = correlation(head.f_block, head.f_reference);
    return HeadOutputs{m, warp_colors(m, ref_ab_small, tau, n, h, w), similarity_map(m, n, h, w)};
}

// ---------------------------------------------------------------------------

HeadProjectionImpl::HeadProjectionImpl(std::int64_t fuse_channels, std::int64_t c_high, std::int64_t head_channels,
                                       double alpha) {
    vanilla_ = register_module("vanilla", torch::nn::Conv2d(torch::nn::Conv2dOptions(fuse_channels, head_channels, 1)));
    augmented_ =
        register_module("augmented", torch::nn::Conv2d(torch::nn::Conv2dOptions(fuse_channels, head_channels, 1)));
    high_ = register_module("high", torch::nn::Conv2d(torch::nn::Conv2dOptions(c_high, head_channels, 1)));
    augment_scale = register_parameter("augment_scale", torch::full({1}, alpha));
}

std::pair<HeadFeature, HeadFeature> HeadProjectionImpl::forward(const torch::Tensor& r_prime,
                                                                const torch::Tensor& r_high_aug) {
    require(r_prime.dim() == 4 && r_high_aug.dim() == 4 && r_prime.size(0) == r_high_aug.size(0) &&
                r_prime.size(2) == r_high_aug.size(2) && r_prime.size(3) == r_high_aug.size(3),
            ErrorCategory::Shape,
            "head projection inputs disagree: " + std::string(c10::str(r_prime.sizes())) + " vs " +
                std::string(c10::str(r_high_aug.sizes())));
    const auto images = r_prime.size(0);
    const auto n = images - 1;
    require(n >= 1, ErrorCategory::Shape, "head projection needs at least one frame plus the reference");
    const auto hw = r_prime.size(2) * r_prime.size(3);

    auto split = [&](const torch::Tensor& map, int id) {
        auto flat = to_tokens(map).tokens;
        return HeadFeature{flat.slice(0, 0, n * hw), flat.slice(0, n * hw, images * hw), id};
    };
    auto v = vanilla_->forward(r_prime);
    auto a = augmented_->forward(r_prime) + augment_scale * high_->forward(r_high_aug);
    return {split(v, 1), split(a, 2)};
}

// ---------------------------------------------------------------------------

CorrespondenceNetImpl::CorrespondenceNetImpl(const PipelineConfig& cfg) : tau(cfg.tau) {
    backbone = register_module("backbone", FeatureExtractor(BackboneOptions::from(cfg)));
    tokenizer = register_module("tokenizer", torch::nn::Linear(cfg.c_high, cfg.d_model));
    CtStackOptions stack;
    stack.block = CtBlockOptions{cfg.c_high, cfg.d_model, cfg.corr_heads, cfg.ffn_mult};
    stack.count = cfg.ct_blocks;
    stack.pos_every_block = cfg.pos_every_block;
    augment = register_module("augment", CtStack(stack));
    augment->transformer_enabled = !cfg.ablation.no_transformer_branch;
    fuse = register_module("fuse", Fuse(cfg.c_high, cfg.c_low, cfg.fuse_channels, cfg.residual_blocks));
    heads = register_module("heads", HeadProjection(cfg.fuse_channels, cfg.c_high, cfg.head_channels, cfg.alpha));
    single_head = cfg.ablation.single_head;
}

FeatureSet CorrespondenceNetImpl::encode(const torch::Tensor& block_l, const torch::Tensor& ref_l) {
    require(block_l.dim() == 4 && block_l.size(1) == 1, ErrorCategory::Shape, "block luminance must be [N,1,H,W]");
    require(ref_l.dim() == 3 && ref_l.size(0) == 1 && ref_l.size(1) == block_l.size(2) &&
                ref_l.size(2) == block_l.size(3),
            ErrorCategory::Shape,
            "reference luminance " + std::string(c10::str(ref_l.sizes())) + " does not match frames " +
                std::string(c10::str(block_l.sizes())));
    return backbone->forward(torch::cat({block_l, ref_l.unsqueeze(0)}, 0));
}

TokenGrid CorrespondenceNetImpl::high_tokens(const FeatureSet& features) {
    auto grid = to_tokens(features.r_high);
    grid.tokens = tokenizer->forward(grid.tokens);
    return grid;
}

CorrespondenceResult CorrespondenceNetImpl::forward(const FeatureSet& features, const torch::Tensor& ref_ab,
                                                    const std::optional<TokenGrid>& hi) {
    const auto n = features.images() - 1, h = features.h(), w = features.w();
    TokenGrid tokens = hi ? *hi : high_tokens(features);
    auto [r_high_aug, ho] = augment->forward(features.r_high, tokens);
    auto r_prime = fuse->forward(r_high_aug, features.r_low);
    auto [f1, f2] = heads->forward(r_prime, r_high_aug);

    require(ref_ab.dim() == 3 && ref_ab.size(0) == 2, ErrorCategory::Shape, "reference ab must be [2,H,W]");
    auto ref_small =
        F::interpolate(ref_ab.unsqueeze(0), F::InterpolateFuncOptions().size(std::vector<std::int64_t>{h, w}).mode(
                                                torch::kArea))
            .squeeze(0);

    CorrespondenceResult result;
    result.heads.vanilla = run_head(f1, ref_small, tau, n, h, w);
    result.heads.augmented = single_head ? result.heads.vanilla : run_head(f2, ref_small, tau, n, h, w);
    result.ho = ho;
    result.features = features;
    result.r_high_aug = r_high_aug;
    return result;
}

CorrespondenceResult CorrespondenceNetImpl::forward(const torch::Tensor& block_l, const LabFrame& reference,
                                                    const std::optional<TokenGrid>& hi) {
    return forward(encode(block_l, reference.l.unsqueeze(0)), reference.ab, hi);
}

}  // namespace vcolor
