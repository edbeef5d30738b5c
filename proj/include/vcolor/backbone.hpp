#pragma once

#include <filesystem>

#include <torch/torch.h>

#include "vcolor/config.hpp"

namespace vcolor {

/// Low- and high-level features for N block frames plus the reference,
/// all at quarter resolution. Image index N (the last) is the reference.
struct FeatureSet {
    torch::Tensor r_low;   // [N+1, C_low, h, w]
    torch::Tensor r_high;  // [N+1, C_high, h, w]

    std::int64_t images() const { return r_low.size(0); }
    std::int64_t h() const { return r_low.size(2); }
    std::int64_t w() const { return r_low.size(3); }
};

struct BackboneOptions {
    std::int64_t c_low = 128;
    std::int64_t c_high = 256;
    std::int64_t high_depth = 2;
    bool circular_padding = false;

    static BackboneOptions from(const PipelineConfig& cfg);
};

/// Strided convolutional trunk with four taps. Taps 1-2 (full and half
/// resolution) form R_low, taps 3-4 (quarter and eighth resolution) form
/// R_high; each tap is bilinearly resampled to ceil(H/4) x ceil(W/4)
/// before concatenation. Each tap carries half of its group's channels.
class FeatureExtractorImpl : public torch::nn::Module {
public:
    explicit FeatureExtractorImpl(BackboneOptions options);

    /// `l` is [I,1,H,W] luminance, replicated to three input channels.
    FeatureSet forward(const torch::Tensor& l);

    const BackboneOptions& options() const { return options_; }
    bool pretrained() const { return pretrained_; }

    /// Writes the trunk parameters as a checkpoint container.
    void save(const std::filesystem::path& path) const;
    /// Replaces the parameters from a file written by `save` (or any
    /// checkpoint whose "backbone." tensors match). Marks the extractor as
    /// pretrained.
    void load_pretrained(const std::filesystem::path& path);
    void set_pretrained(bool v) { pretrained_ = v; }

private:
    torch::nn::Conv2d conv(std::int64_t in, std::int64_t out, std::int64_t stride);

    BackboneOptions options_;
    bool pretrained_ = false;
    torch::nn::Sequential stage1_{nullptr}, stage2_{nullptr}, stage3_{nullptr}, stage4_{nullptr};
};
TORCH_MODULE(FeatureExtractor);

}  // namespace vcolor
