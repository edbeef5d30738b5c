#pragma once

#include <utility>

#include <torch/torch.h>

#include "vcolor/tokens.hpp"

namespace vcolor {

/// 3D sine embedding over (image, row, column). Each axis gets d_model/3
/// features of interleaved sin/cos at frequencies 10000^(-2k/(d_model/3)),
/// evaluated at the 0-based integer index. Axis order: image, row, column.
/// Returns [n_images*h*w, d_model] in TokenGrid row order.
torch::Tensor position_embedding_3d(std::int64_t n_images, std::int64_t h, std::int64_t w, std::int64_t d_model,
                                    torch::TensorOptions options = {});

struct AttentionResult {
    torch::Tensor out;      // [Tq, d]
    torch::Tensor weights;  // [heads, Tq, Tk], rows sum to 1
};

class MultiHeadAttentionImpl : public torch::nn::Module {
public:
    MultiHeadAttentionImpl(std::int64_t d_model, std::int64_t heads);

    /// `weights` is left undefined unless requested.
    AttentionResult forward(const torch::Tensor& query, const torch::Tensor& key, const torch::Tensor& value,
                            bool need_weights = true);

    torch::nn::Linear out_proj{nullptr};

private:
    std::int64_t d_model_, heads_;
    torch::nn::Linear q_proj_{nullptr}, k_proj_{nullptr}, v_proj_{nullptr};
};
TORCH_MODULE(MultiHeadAttention);

struct CtBlockOptions {
    std::int64_t channels = 256;
    std::int64_t d_model = 96;
    std::int64_t heads = 6;
    std::int64_t ffn_mult = 2;
};

/// One parallel CNN/Transformer block.
///
///   f       = conv-IN-relu-conv-IN(cnn_in)
///   t       = tok_in + flatten(cnn_to_tok(f))
///   t       = t + MHA(LN(t)+pos, LN(t)+pos, LN(t))
///   tok_out = t + FFN(LN(t))
///   cnn_out = relu(cnn_in + f + tok_to_cnn(reshape(tok_out)))
///
/// With the transformer branch disabled, tok_out = tok_in and the
/// tok_to_cnn term is dropped.
class CtBlockImpl : public torch::nn::Module {
public:
    explicit CtBlockImpl(CtBlockOptions options);

    std::pair<torch::Tensor, TokenGrid> forward(const torch::Tensor& cnn_in, const TokenGrid& tok_in,
                                                const torch::Tensor& pos, bool transformer_enabled = true);

    /// Same as forward but also returns the attention weights.
    std::pair<std::pair<torch::Tensor, TokenGrid>, torch::Tensor> forward_with_attention(
        const torch::Tensor& cnn_in, const TokenGrid& tok_in, const torch::Tensor& pos);

    /// CNN branch alone, equivalent to a plain residual conv block.
    torch::Tensor cnn_only(const torch::Tensor& cnn_in);

    void zero_cross_projections();
    void zero_token_output_projections();

    const CtBlockOptions& options() const { return options_; }

private:
    torch::Tensor convs(const torch::Tensor& x);
    std::pair<std::pair<torch::Tensor, TokenGrid>, torch::Tensor> run(const torch::Tensor& cnn_in,
                                                                      const TokenGrid& tok_in,
                                                                      const torch::Tensor& pos, bool need_weights);

    CtBlockOptions options_;
    torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
    torch::nn::InstanceNorm2d norm1_{nullptr}, norm2_{nullptr};
    torch::nn::Conv2d cnn_to_tok_{nullptr}, tok_to_cnn_{nullptr};
    torch::nn::LayerNorm ln_attn_{nullptr}, ln_ffn_{nullptr};
    MultiHeadAttention attn_{nullptr};
    torch::nn::Linear ffn1_{nullptr}, ffn2_{nullptr};
};
TORCH_MODULE(CtBlock);

struct CtStackOptions {
    CtBlockOptions block;
    std::int64_t count = 3;
    bool pos_every_block = true;
};

/// A chain of CtBlocks sharing one position embedding.
class CtStackImpl : public torch::nn::Module {
public:
    explicit CtStackImpl(CtStackOptions options);

    std::pair<torch::Tensor, TokenGrid> forward(const torch::Tensor& cnn_in, const TokenGrid& tok_in);

    /// Disables every transformer branch: tokens pass through unchanged
    /// and the CNN path runs alone.
    bool transformer_enabled = true;

    CtBlock block(std::size_t i) const { return blocks_.at(i); }
    std::size_t size() const { return blocks_.size(); }

private:
    CtStackOptions options_;
    std::vector<CtBlock> blocks_;
};
TORCH_MODULE(CtStack);

class ResidualBlockImpl : public torch::nn::Module {
public:
    explicit ResidualBlockImpl(std::int64_t channels);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
    torch::nn::InstanceNorm2d norm1_{nullptr}, norm2_{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Combines the augmented high-level map with R_low: 1x1 projection of the
/// channel concatenation followed by `depth` residual blocks.
class FuseImpl : public torch::nn::Module {
public:
    FuseImpl(std::int64_t c_high, std::int64_t c_low, std::int64_t out_channels, std::int64_t depth);
    torch::Tensor forward(const torch::Tensor& r_high_aug, const torch::Tensor& r_low);

private:
    torch::nn::Conv2d proj_{nullptr};
    torch::nn::Sequential blocks_{nullptr};
};
TORCH_MODULE(Fuse);

}  // namespace vcolor
