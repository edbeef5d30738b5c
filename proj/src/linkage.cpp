#include "vcolor/linkage.hpp"

#include <cmath>

#include "vcolor/error.hpp"

namespace vcolor {

std::pair<torch::Tensor, torch::Tensor> scaled_attention(const torch::Tensor& q, const torch::Tensor& k,
                                                         const torch::Tensor& v) {
    const double d = static_cast<double>(q.size(1));
    auto weights = torch::softmax(torch::matmul(q, k.t()) / std::sqrt(d), 1);
    return {torch::matmul(weights, v), weights};
}

LinkageImpl::LinkageImpl(std::int64_t d_model, std::int64_t ffn_mult) : d_model_(d_model) {
    ffn1_ = register_module("ffn1", torch::nn::Linear(d_model, d_model * ffn_mult));
    ffn2_ = register_module("ffn2", torch::nn::Linear(d_model * ffn_mult, d_model));
}

torch::Tensor LinkageImpl::attention_term(const torch::Tensor& r_high_tokens, const torch::Tensor& info) const {
    return scaled_attention(r_high_tokens, info, info).first;
}

torch::Tensor LinkageImpl::residual_layers(const torch::Tensor& x) {
    return x + ffn2_->forward(torch::relu(ffn1_->forward(x)));
}

TokenGrid LinkageImpl::query(const TokenGrid& r_high_tokens, const LinkageState& state) {
    if (state.empty()) return r_high_tokens;
    const auto& info = *state.info;
    require(r_high_tokens.dim() == d_model_ && info.size(1) == d_model_, ErrorCategory::Shape,
            "linkage query width mismatch: tokens " + std::to_string(r_high_tokens.dim()) + ", memory " +
                std::to_string(info.size(1)) + ", d_model " + std::to_string(d_model_));
    auto x = r_high_tokens.tokens + attention_term(r_high_tokens.tokens, info);
    return TokenGrid{residual_layers(x), r_high_tokens.images, r_high_tokens.h, r_high_tokens.w};
}

LinkageState LinkageImpl::store(const LinkageState& state, const TokenGrid& ho, std::int64_t block_index) {
    require(ho.tokens.defined() && ho.tokens.dim() == 2, ErrorCategory::Shape, "linkage store expects [T,d] tokens");
    if (state.empty()) return LinkageState{ho.tokens, block_index};
    const auto& info = *state.info;
    require(info.size(1) == ho.dim(), ErrorCategory::Shape,
            "linkage store width mismatch: memory " + std::to_string(info.size(1)) + ", tokens " +
                std::to_string(ho.dim()));
    return LinkageState{info + scaled_attention(info, ho.tokens, ho.tokens).first, block_index};
}

}  // namespace vcolor
