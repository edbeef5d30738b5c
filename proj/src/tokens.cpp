#include "vcolor/tokens.hpp"

#include "vcolor/error.hpp"

namespace vcolor {

TokenGrid to_tokens(const torch::Tensor& map) {
    require(map.dim() == 4, ErrorCategory::Shape, "to_tokens expects [I,C,h,w]");
    const auto I = map.size(0), C = map.size(1), h = map.size(2), w = map.size(3);
    return TokenGrid{map.permute({0, 2, 3, 1}).reshape({I * h * w, C}), I, h, w};
}

torch::Tensor to_map(const TokenGrid& grid) {
    return grid.tokens.reshape({grid.images, grid.h, grid.w, grid.dim()}).permute({0, 3, 1, 2}).contiguous();
}

void check_token_grid(const TokenGrid& grid) {
    require(grid.tokens.defined() && grid.tokens.dim() == 2, ErrorCategory::Shape, "token grid must be [T,d]");
    require(grid.tokens.size(0) == grid.count(), ErrorCategory::Shape,
            "token count " + std::to_string(grid.tokens.size(0)) + " != images*h*w = " +
                std::to_string(grid.count()));
    require(torch::isfinite(grid.tokens).all().item<bool>(), ErrorCategory::NonFinite,
            "token grid contains non-finite values");
}

}  // namespace vcolor
