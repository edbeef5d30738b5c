#include "vcolor/flow.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "vcolor/error.hpp"

namespace vcolor {

namespace F = torch::nn::functional;

static_assert(std::endian::native == std::endian::little, ".flo I/O assumes a little-endian host");

torch::Tensor bilinear_sample(const torch::Tensor& image, const torch::Tensor& x, const torch::Tensor& y) {
    const bool batched = image.dim() == 4;
    require(image.dim() == 3 || batched, ErrorCategory::Shape, "bilinear_sample expects [C,H,W] or [B,C,H,W]");
    auto img = batched ? image : image.unsqueeze(0);
    const auto B = img.size(0), C = img.size(1), H = img.size(2), W = img.size(3);

    auto xs = x.clamp(0, W - 1).expand({B, H, W});
    auto ys = y.clamp(0, H - 1).expand({B, H, W});
    auto x0 = xs.floor();
    auto y0 = ys.floor();
    auto wx = (xs - x0).unsqueeze(1);
    auto wy = (ys - y0).unsqueeze(1);
    auto x0i = x0.to(torch::kLong);
    auto y0i = y0.to(torch::kLong);
    auto x1i = (x0i + 1).clamp_max(W - 1);
    auto y1i = (y0i + 1).clamp_max(H - 1);

    auto flat = img.reshape({B, C, H * W});
    auto gather = [&](const torch::Tensor& yi, const torch::Tensor& xi) {
        auto idx = (yi * W + xi).reshape({B, 1, H * W}).expand({B, C, H * W});
        return flat.gather(2, idx).reshape({B, C, H, W});
    };
    auto top = gather(y0i, x0i) * (1 - wx) + gather(y0i, x1i) * wx;
    auto bottom = gather(y1i, x0i) * (1 - wx) + gather(y1i, x1i) * wx;
    auto out = top * (1 - wy) + bottom * wy;
    return batched ? out : out.squeeze(0);
}

namespace {

std::pair<torch::Tensor, torch::Tensor> pixel_grid(std::int64_t H, std::int64_t W, torch::TensorOptions opts) {
    auto ys = torch::arange(H, opts).view({H, 1}).expand({H, W});
    auto xs = torch::arange(W, opts).view({1, W}).expand({H, W});
    return {xs, ys};
}

}  // namespace

OcclusionMask occlusion_mask(const FlowField& primary, const FlowField& opposite, double ratio, double offset) {
    check_flow(primary);
    check_flow(opposite);
    require(primary.uv.sizes() == opposite.uv.sizes(), ErrorCategory::Shape, "occlusion_mask needs matching flows");
    const auto H = primary.height(), W = primary.width();
    auto w = primary.uv.to(torch::kFloat64);
    auto [xs, ys] = pixel_grid(H, W, w.options());
    auto back = bilinear_sample(opposite.uv.to(torch::kFloat64), xs + w[0], ys + w[1]);
    auto sum_sq = (w + back).pow(2).sum(0);
    auto mag = w.pow(2).sum(0) + back.pow(2).sum(0);
    auto inconsistent = sum_sq > ratio * mag + offset;
    return OcclusionMask{(~inconsistent).to(torch::kFloat32)};
}

std::pair<FlowField, FlowField> synth_flow_translate(std::int64_t height, std::int64_t width, double dx, double dy) {
    require(std::abs(dx) < std::min(height, width) / 2.0 && std::abs(dy) < std::min(height, width) / 2.0,
            ErrorCategory::Shape, "translation must be below half the smaller frame side");
    auto make = [&](double u, double v, FlowDirection dir) {
        auto uv = torch::empty({2, height, width});
        uv[0].fill_(u);
        uv[1].fill_(v);
        return FlowField{uv, dir};
    };
    return {make(dx, dy, FlowDirection::Forward), make(-dx, -dy, FlowDirection::Backward)};
}

FlowField load_flow(const std::filesystem::path& path, FlowDirection direction) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorCategory::Io, "cannot open flow file " + path.string());
    auto read_exact = [&](void* dst, std::size_t n, std::size_t offset, const char* what) {
        f.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(f.gcount()) != n)
            fail(ErrorCategory::Format, path.string() + ": truncated at byte offset " +
                                            std::to_string(offset + static_cast<std::size_t>(f.gcount())) +
                                            " while reading " + what);
    };
    float magic = 0;
    std::int32_t w = 0, h = 0;
    read_exact(&magic, 4, 0, "magic");
    if (magic != kFloMagic)
        fail(ErrorCategory::Format, path.string() + ": bad magic at byte offset 0, expected 202021.25");
    read_exact(&w, 4, 4, "width");
    read_exact(&h, 4, 8, "height");
    if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16))
        fail(ErrorCategory::Format, path.string() + ": implausible dimensions at byte offset 4");

    const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 2;
    std::vector<float> data(count);
    read_exact(data.data(), count * sizeof(float), 12, "flow data");
    auto interleaved = torch::from_blob(data.data(), {h, w, 2}, torch::kFloat32).clone();
    return FlowField{interleaved.permute({2, 0, 1}).contiguous(), direction};
}

void save_flow(const std::filesystem::path& path, const FlowField& flow) {
    require(flow.uv.dim() == 3 && flow.uv.size(0) == 2, ErrorCategory::Shape, "flow must be [2,H,W]");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCategory::Io, "cannot write flow file " + path.string());
    const std::int32_t w = static_cast<std::int32_t>(flow.width());
    const std::int32_t h = static_cast<std::int32_t>(flow.height());
    auto interleaved = flow.uv.to(torch::kFloat32).permute({1, 2, 0}).contiguous();
    f.write(reinterpret_cast<const char*>(&kFloMagic), 4);
    f.write(reinterpret_cast<const char*>(&w), 4);
    f.write(reinterpret_cast<const char*>(&h), 4);
    f.write(reinterpret_cast<const char*>(interleaved.data_ptr<float>()),
            static_cast<std::streamsize>(interleaved.numel() * sizeof(float)));
    if (!f) fail(ErrorCategory::Io, "short write on flow file " + path.string());
}

FlowField resize_flow(const FlowField& flow, std::int64_t height, std::int64_t width) {
    check_flow(flow);
    if (height == flow.height() && width == flow.width()) return flow;
    auto resized = F::interpolate(flow.uv.unsqueeze(0), F::InterpolateFuncOptions()
                                                            .size(std::vector<std::int64_t>{height, width})
                                                            .mode(torch::kBilinear)
                                                            .align_corners(false))
                       .squeeze(0);
    auto scale = torch::tensor({static_cast<double>(width) / flow.width(), static_cast<double>(height) / flow.height()},
                               resized.options())
                     .view({2, 1, 1});
    return FlowField{resized * scale, flow.direction};
}

void check_flow(const FlowField& flow) {
    require(flow.uv.defined() && flow.uv.dim() == 3 && flow.uv.size(0) == 2, ErrorCategory::Shape,
            "flow must be [2,H,W]");
    require(torch::isfinite(flow.uv).all().item<bool>(), ErrorCategory::NonFinite, "flow contains non-finite values");
}

}  // namespace vcolor
