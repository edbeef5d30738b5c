#include "vcolor/backbone.hpp"

#include "vcolor/checkpoint.hpp"
#include "vcolor/error.hpp"

namespace vcolor {

namespace F = torch::nn::functional;

BackboneOptions BackboneOptions::from(const PipelineConfig& cfg) {
    return BackboneOptions{cfg.c_low, cfg.c_high, cfg.backbone_high_depth, cfg.backbone_padding == "circular"};
}

FeatureExtractorImpl::FeatureExtractorImpl(BackboneOptions options) : options_(options) {
    const auto lo = options_.c_low / 2;
    const auto hi = options_.c_high / 2;

    stage1_ = torch::nn::Sequential(conv(3, lo, 1), torch::nn::ReLU(), conv(lo, lo, 1), torch::nn::ReLU());
    stage2_ = torch::nn::Sequential(conv(lo, lo, 2), torch::nn::ReLU(), conv(lo, lo, 1), torch::nn::ReLU());
    stage3_ = torch::nn::Sequential(conv(lo, hi, 2), torch::nn::ReLU(), conv(hi, hi, 1), torch::nn::ReLU());
    stage4_ = torch::nn::Sequential(conv(hi, hi, 2), torch::nn::ReLU());
    for (std::int64_t i = 1; i < options_.high_depth; ++i) {
        stage4_->push_back(conv(hi, hi, 1));
        stage4_->push_back(torch::nn::ReLU());
    }
    register_module("stage1", stage1_);
    register_module("stage2", stage2_);
    register_module("stage3", stage3_);
    register_module("stage4", stage4_);
}

torch::nn::Conv2d FeatureExtractorImpl::conv(std::int64_t in, std::int64_t out, std::int64_t stride) {
    auto opts = torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1);
    if (options_.circular_padding) opts.padding_mode(torch::kCircular);
    return torch::nn::Conv2d(opts);
}

FeatureSet FeatureExtractorImpl::forward(const torch::Tensor& l) {
    require(l.dim() == 4 && l.size(1) == 1, ErrorCategory::Shape,
            "feature extractor expects [I,1,H,W], got " + std::string(c10::str(l.sizes())));
    const auto H = l.size(2), W = l.size(3);
    const std::vector<std::int64_t> quarter{(H + 3) / 4, (W + 3) / 4};

    auto resample = [&](const torch::Tensor& t) {
        if (t.size(2) == quarter[0] && t.size(3) == quarter[1]) return t;
        return F::interpolate(t, F::InterpolateFuncOptions().size(quarter).mode(torch::kBilinear).align_corners(false));
    };

    auto x = l.expand({-1, 3, -1, -1});
    auto t1 = stage1_->forward(x);
    auto t2 = stage2_->forward(t1);
    auto t3 = stage3_->forward(t2);
    auto t4 = stage4_->forward(t3);
    return FeatureSet{torch::cat({resample(t1), resample(t2)}, 1), torch::cat({resample(t3), resample(t4)}, 1)};
}

void FeatureExtractorImpl::save(const std::filesystem::path& path) const {
    Checkpoint ckpt;
    export_module(*this, "backbone.", ckpt.tensors);
    ckpt.meta["kind"] = "backbone";
    ckpt.meta["c_low"] = std::to_string(options_.c_low);
    ckpt.meta["c_high"] = std::to_string(options_.c_high);
    save_checkpoint(path, ckpt);
}

void FeatureExtractorImpl::load_pretrained(const std::filesystem::path& path) {
    require(std::filesystem::exists(path), ErrorCategory::Io, "pretrained weights not found: " + path.string());
    auto ckpt = load_checkpoint(path);
    import_module(*this, "backbone.", ckpt.tensors);
    pretrained_ = true;
}

}  // namespace vcolor
