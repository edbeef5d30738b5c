#pragma once

#include <optional>

#include <torch/torch.h>

#include "vcolor/tokens.hpp"

namespace vcolor {

/// Cross-block memory. Empty until the first store; afterwards `info` keeps
/// the token count of the first stored block for the rest of the video.
struct LinkageState {
    std::optional<torch::Tensor> info;  // [T, d_model]
    std::int64_t last_block = -1;

    bool empty() const { return !info.has_value(); }
};

/// softmax(q k^T / sqrt(d)) v for a single head, returning the weights too.
std::pair<torch::Tensor, torch::Tensor> scaled_attention(const torch::Tensor& q, const torch::Tensor& k,
                                                         const torch::Tensor& v);

/// Query side of the memory plus its residual feed-forward layers. Store
/// and reset are parameter-free.
class LinkageImpl : public torch::nn::Module {
public:
    LinkageImpl(std::int64_t d_model, std::int64_t ffn_mult);

    /// Empty state: returns `r_high_tokens` untouched. Otherwise
    ///   x  = r + softmax(r i^T / sqrt(d)) i
    ///   hi = x + FFN(x)
    TokenGrid query(const TokenGrid& r_high_tokens, const LinkageState& state);

    /// Attention term alone (before the residual layers).
    torch::Tensor attention_term(const torch::Tensor& r_high_tokens, const torch::Tensor& info) const;

    torch::Tensor residual_layers(const torch::Tensor& x);

    /// Empty: i = ho. Otherwise i = i + softmax(i ho^T / sqrt(d)) ho.
    static LinkageState store(const LinkageState& state, const TokenGrid& ho, std::int64_t block_index);
    static LinkageState reset() { return {}; }

    std::int64_t d_model() const { return d_model_; }

private:
    std::int64_t d_model_;
    torch::nn::Linear ffn1_{nullptr}, ffn2_{nullptr};
};
TORCH_MODULE(Linkage);

}  // namespace vcolor
