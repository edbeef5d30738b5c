#pragma once

#include <torch/torch.h>

namespace vcolor {

/// Token form of a stack of feature maps: rows are ordered image-major,
/// then row, then column, i.e. T = images * h * w.
struct TokenGrid {
    torch::Tensor tokens;  // [T, d_model]
    std::int64_t images = 0;
    std::int64_t h = 0;
    std::int64_t w = 0;

    std::int64_t count() const { return images * h * w; }
    std::int64_t dim() const { return tokens.size(1); }
    bool same_layout(const TokenGrid& o) const { return images == o.images && h == o.h && w == o.w; }
};

/// [I,C,h,w] -> TokenGrid with d_model = C.
TokenGrid to_tokens(const torch::Tensor& map);
/// TokenGrid -> [I,d,h,w].
torch::Tensor to_map(const TokenGrid& grid);

/// Throws ErrorCategory::Shape unless `grid.tokens` is [count, *] and finite.
void check_token_grid(const TokenGrid& grid);

}  // namespace vcolor
