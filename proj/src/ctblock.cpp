#include "vcolor/ctblock.hpp"

#include <cmath>

#include "vcolor/error.hpp"

namespace vcolor {

namespace {

torch::nn::Conv2d conv3x3(std::int64_t in, std::int64_t out) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1));
}

torch::nn::Conv2d conv1x1(std::int64_t in, std::int64_t out) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1));
}

torch::nn::InstanceNorm2d inorm(std::int64_t c) {
    return torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(c).affine(true));
}

}  // namespace

torch::Tensor position_embedding_3d(std::int64_t n_images, std::int64_t h, std::int64_t w, std::int64_t d_model,
                                    torch::TensorOptions options) {
    require(d_model > 0 && d_model % 6 == 0, ErrorCategory::Shape,
            "position embedding needs d_model divisible by 6, got " + std::to_string(d_model));
    require(n_images > 0 && h > 0 && w > 0, ErrorCategory::Shape, "position embedding needs a non-empty grid");
    const auto per_axis = d_model / 3;
    auto f64 = torch::TensorOptions().dtype(torch::kFloat64);

    // Feature i uses frequency index i/2; even features are sin, odd are cos.
    auto idx = torch::arange(per_axis, f64);
    auto inv_freq = torch::pow(10000.0, -2.0 * torch::floor(idx / 2) / static_cast<double>(per_axis));
    auto is_sin = (torch::arange(per_axis) % 2 == 0);

    auto axis = [&](std::int64_t n) {
        auto angles = torch::arange(n, f64).unsqueeze(1) * inv_freq.unsqueeze(0);  // [n, per_axis]
        return torch::where(is_sin.unsqueeze(0), torch::sin(angles), torch::cos(angles));
    };
    auto pt = axis(n_images).view({n_images, 1, 1, per_axis}).expand({n_images, h, w, per_axis});
    auto py = axis(h).view({1, h, 1, per_axis}).expand({n_images, h, w, per_axis});
    auto px = axis(w).view({1, 1, w, per_axis}).expand({n_images, h, w, per_axis});
    auto pe = torch::cat({pt, py, px}, 3).reshape({n_images * h * w, d_model});
    auto dtype = options.has_dtype() ? options.dtype() : caffe2::TypeMeta::Make<float>();
    return pe.to(torch::TensorOptions().dtype(dtype).device(options.device()));
}

// ---------------------------------------------------------------------------

MultiHeadAttentionImpl::MultiHeadAttentionImpl(std::int64_t d_model, std::int64_t heads)
    : d_model_(d_model), heads_(heads) {
    require(heads > 0 && d_model % heads == 0, ErrorCategory::Config,
            "d_model " + std::to_string(d_model) + " not divisible by heads " + std::to_string(heads));
    q_proj_ = register_module("q_proj", torch::nn::Linear(d_model, d_model));
    k_proj_ = register_module("k_proj", torch::nn::Linear(d_model, d_model));
    v_proj_ = register_module("v_proj", torch::nn::Linear(d_model, d_model));
    out_proj = register_module("out_proj", torch::nn::Linear(d_model, d_model));
}

AttentionResult MultiHeadAttentionImpl::forward(const torch::Tensor& query, const torch::Tensor& key,
                                                const torch::Tensor& value, bool need_weights) {
    const auto tq = query.size(0), tk = key.size(0);
    const auto dh = d_model_ / heads_;
    auto split = [&](const torch::Tensor& x, std::int64_t t) { return x.view({t, heads_, dh}).transpose(0, 1); };
    auto q = split(q_proj_->forward(query), tq);
    auto k = split(k_proj_->forward(key), tk);
    auto v = split(v_proj_->forward(value), tk);
    if (!need_weights) {
        // Fused kernel; same result without materialising the weights.
        auto mixed = at::scaled_dot_product_attention(q.unsqueeze(0), k.unsqueeze(0), v.unsqueeze(0)).squeeze(0);
        return {out_proj->forward(mixed.transpose(0, 1).reshape({tq, d_model_})), torch::Tensor()};
    }
    auto weights = torch::softmax(torch::matmul(q * (1.0 / std::sqrt(static_cast<double>(dh))), k.transpose(1, 2)), -1);
    auto mixed = torch::matmul(weights, v).transpose(0, 1).reshape({tq, d_model_});
    return {out_proj->forward(mixed), weights};
}

// ---------------------------------------------------------------------------

CtBlockImpl::CtBlockImpl(CtBlockOptions options) : options_(options) {
    const auto c = options_.channels, d = options_.d_model;
    conv1_ = register_module("conv1", conv3x3(c, c));
    norm1_ = register_module("norm1", inorm(c));
    conv2_ = register_module("conv2", conv3x3(c, c));
    norm2_ = register_module("norm2", inorm(c));
    cnn_to_tok_ = register_module("cnn_to_tok", conv1x1(c, d));
    tok_to_cnn_ = register_module("tok_to_cnn", conv1x1(d, c));
    ln_attn_ = register_module("ln_attn", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
    attn_ = register_module("attn", MultiHeadAttention(d, options_.heads));
    ln_ffn_ = register_module("ln_ffn", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
    ffn1_ = register_module("ffn1", torch::nn::Linear(d, d * options_.ffn_mult));
    ffn2_ = register_module("ffn2", torch::nn::Linear(d * options_.ffn_mult, d));
}

torch::Tensor CtBlockImpl::convs(const torch::Tensor& x) {
    return norm2_->forward(conv2_->forward(torch::relu(norm1_->forward(conv1_->forward(x)))));
}

torch::Tensor CtBlockImpl::cnn_only(const torch::Tensor& cnn_in) { return torch::relu(cnn_in + convs(cnn_in)); }

std::pair<std::pair<torch::Tensor, TokenGrid>, torch::Tensor> CtBlockImpl::forward_with_attention(
    const torch::Tensor& cnn_in, const TokenGrid& tok_in, const torch::Tensor& pos) {
    return run(cnn_in, tok_in, pos, true);
}

std::pair<std::pair<torch::Tensor, TokenGrid>, torch::Tensor> CtBlockImpl::run(const torch::Tensor& cnn_in,
                                                                              const TokenGrid& tok_in,
                                                                              const torch::Tensor& pos,
                                                                              bool need_weights) {
    require(cnn_in.dim() == 4 && cnn_in.size(1) == options_.channels, ErrorCategory::Shape,
            "ct_block cnn input must be [I," + std::to_string(options_.channels) + ",h,w], got " +
                std::string(c10::str(cnn_in.sizes())));
    const TokenGrid layout{torch::Tensor(), cnn_in.size(0), cnn_in.size(2), cnn_in.size(3)};
    require(tok_in.same_layout(layout) && tok_in.tokens.size(0) == tok_in.count(), ErrorCategory::Shape,
            "ct_block token layout (" + std::to_string(tok_in.images) + "," + std::to_string(tok_in.h) + "," +
                std::to_string(tok_in.w) + ") does not match cnn input " + std::string(c10::str(cnn_in.sizes())));
    require(tok_in.dim() == options_.d_model, ErrorCategory::Shape, "ct_block token width != d_model");

    auto f = convs(cnn_in);
    auto t = tok_in.tokens + to_tokens(cnn_to_tok_->forward(f)).tokens;
    auto normed = ln_attn_->forward(t);
    auto qk = pos.defined() ? normed + pos : normed;
    auto attn = attn_->forward(qk, qk, normed, need_weights);
    t = t + attn.out;
    t = t + ffn2_->forward(torch::relu(ffn1_->forward(ln_ffn_->forward(t))));
    TokenGrid tok_out{t, tok_in.images, tok_in.h, tok_in.w};
    auto cnn_out = torch::relu(cnn_in + f + tok_to_cnn_->forward(to_map(tok_out)));
    return {{cnn_out, tok_out}, attn.weights};
}

std::pair<torch::Tensor, TokenGrid> CtBlockImpl::forward(const torch::Tensor& cnn_in, const TokenGrid& tok_in,
                                                         const torch::Tensor& pos, bool transformer_enabled) {
    if (!transformer_enabled) return {cnn_only(cnn_in), tok_in};
    return run(cnn_in, tok_in, pos, false).first;
}

void CtBlockImpl::zero_cross_projections() {
    torch::NoGradGuard g;
    for (auto* m : {&cnn_to_tok_, &tok_to_cnn_}) {
        (*m)->weight.zero_();
        (*m)->bias.zero_();
    }
}

void CtBlockImpl::zero_token_output_projections() {
    torch::NoGradGuard g;
    cnn_to_tok_->weight.zero_();
    cnn_to_tok_->bias.zero_();
    attn_->out_proj->weight.zero_();
    attn_->out_proj->bias.zero_();
    ffn2_->weight.zero_();
    ffn2_->bias.zero_();
}

// ---------------------------------------------------------------------------

CtStackImpl::CtStackImpl(CtStackOptions options) : options_(options) {
    for (std::int64_t i = 0; i < options_.count; ++i)
        blocks_.push_back(register_module("block" + std::to_string(i), CtBlock(options_.block)));
}

std::pair<torch::Tensor, TokenGrid> CtStackImpl::forward(const torch::Tensor& cnn_in, const TokenGrid& tok_in) {
    torch::Tensor pos;
    if (transformer_enabled)
        pos = position_embedding_3d(tok_in.images, tok_in.h, tok_in.w, options_.block.d_model,
                                    torch::TensorOptions().dtype(cnn_in.dtype()).device(cnn_in.device()));
    auto cnn = cnn_in;
    auto tok = tok_in;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const bool with_pos = options_.pos_every_block || i == 0;
        std::tie(cnn, tok) = blocks_[i]->forward(cnn, tok, with_pos ? pos : torch::Tensor(), transformer_enabled);
    }
    return {cnn, tok};
}

// ---------------------------------------------------------------------------

ResidualBlockImpl::ResidualBlockImpl(std::int64_t channels) {
    conv1_ = register_module("conv1", conv3x3(channels, channels));
    norm1_ = register_module("norm1", inorm(channels));
    conv2_ = register_module("conv2", conv3x3(channels, channels));
    norm2_ = register_module("norm2", inorm(channels));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
    auto y = norm2_->forward(conv2_->forward(torch::relu(norm1_->forward(conv1_->forward(x)))));
    return torch::relu(x + y);
}

FuseImpl::FuseImpl(std::int64_t c_high, std::int64_t c_low, std::int64_t out_channels, std::int64_t depth) {
    proj_ = register_module("proj", conv1x1(c_high + c_low, out_channels));
    blocks_ = register_module("blocks", torch::nn::Sequential());
    for (std::int64_t i = 0; i < depth; ++i) blocks_->push_back(ResidualBlock(out_channels));
}

torch::Tensor FuseImpl::forward(const torch::Tensor& r_high_aug, const torch::Tensor& r_low) {
    require(r_high_aug.dim() == 4 && r_low.dim() == 4 && r_high_aug.size(0) == r_low.size(0) &&
                r_high_aug.size(2) == r_low.size(2) && r_high_aug.size(3) == r_low.size(3),
            ErrorCategory::Shape,
            "fuse inputs disagree: " + std::string(c10::str(r_high_aug.sizes())) + " vs " +
                std::string(c10::str(r_low.sizes())));
    auto x = proj_->forward(torch::cat({r_high_aug, r_low}, 1));
    return blocks_->is_empty() ? x : blocks_->forward(x);
}

}  // namespace vcolor
