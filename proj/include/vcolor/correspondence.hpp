#pragma once

#include <optional>

#include <torch/torch.h>

#include "vcolor/backbone.hpp"
#include "vcolor/colorspace.hpp"
#include "vcolor/config.hpp"
#include "vcolor/ctblock.hpp"
#include "vcolor/tokens.hpp"

namespace vcolor {

/// Flattened head features, split into block frames and reference.
struct HeadFeature {
    torch::Tensor f_block;      // [N*h*w, C]
    torch::Tensor f_reference;  // [h*w, C]
    int head = 1;
};

struct HeadOutputs {
    torch::Tensor correlation;  // [N*h*w, h*w], entries in [-1,1]
    torch::Tensor warped_ab;    // [N,2,h,w]
    torch::Tensor similarity;   // [N,1,h,w]
};

struct CorrelationOutputs {
    HeadOutputs vanilla;    // head 1
    HeadOutputs augmented;  // head 2
};

/// Mean-centred cosine similarity between every block row and every
/// reference row; means are taken over all rows of each set. Rows whose
/// centred norm is zero correlate as 0 with everything.
torch::Tensor correlation(const torch::Tensor& f_block, const torch::Tensor& f_reference);

/// [N*h*w] rows of softmax(M/tau) applied to the reference chrominance
/// `ref_ab` ([2,h,w]); result reshaped to [N,2,h,w].
torch::Tensor warp_colors(const torch::Tensor& m, const torch::Tensor& ref_ab, double tau, std::int64_t n,
                          std::int64_t h, std::int64_t w);

/// Row-wise max of M reshaped to [N,1,h,w].
torch::Tensor similarity_map(const torch::Tensor& m, std::int64_t n, std::int64_t h, std::int64_t w);

/// correlation + warp + similarity for one head.
HeadOutputs run_head(const HeadFeature& head, const torch::Tensor& ref_ab_small, double tau, std::int64_t n,
                     std::int64_t h, std::int64_t w);

/// Two 1x1 projections of R' to `head_channels`. The second head adds
/// `scale * project(r_high_aug)`, where `scale` is a learnable scalar
/// initialised to alpha.
class HeadProjectionImpl : public torch::nn::Module {
public:
    HeadProjectionImpl(std::int64_t fuse_channels, std::int64_t c_high, std::int64_t head_channels, double alpha);

    std::pair<HeadFeature, HeadFeature> forward(const torch::Tensor& r_prime, const torch::Tensor& r_high_aug);

    torch::Tensor augment_scale;

private:
    torch::nn::Conv2d vanilla_{nullptr}, augmented_{nullptr}, high_{nullptr};
};
TORCH_MODULE(HeadProjection);

struct CorrespondenceResult {
    CorrelationOutputs heads;
    TokenGrid ho;
    FeatureSet features;
    torch::Tensor r_high_aug;
};

/// Feature extraction, CNN-Transformer augmentation of R_high, fusion and
/// the double-head non-local warp.
class CorrespondenceNetImpl : public torch::nn::Module {
public:
    explicit CorrespondenceNetImpl(const PipelineConfig& cfg);

    /// `block_l` is [N,1,H,W], `ref_l` is [1,H,W]. The reference is
    /// appended as the last image.
    FeatureSet encode(const torch::Tensor& block_l, const torch::Tensor& ref_l);

    /// Token form of R_high (projected to d_model): the linkage query input.
    TokenGrid high_tokens(const FeatureSet& features);

    /// `hi` carries the linkage query result; pass std::nullopt for the
    /// first block of a video (hi = R_high tokens).
    CorrespondenceResult forward(const FeatureSet& features, const torch::Tensor& ref_ab,
                                 const std::optional<TokenGrid>& hi);

    /// Convenience composition of encode and forward.
    CorrespondenceResult forward(const torch::Tensor& block_l, const LabFrame& reference,
                                 const std::optional<TokenGrid>& hi);

    FeatureExtractor backbone{nullptr};
    torch::nn::Linear tokenizer{nullptr};
    CtStack augment{nullptr};
    Fuse fuse{nullptr};
    HeadProjection heads{nullptr};

    double tau;
    bool single_head = false;
};
TORCH_MODULE(CorrespondenceNet);

}  // namespace vcolor
