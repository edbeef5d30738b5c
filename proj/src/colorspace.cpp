#include "vcolor/colorspace.hpp"

#include "vcolor/error.hpp"

namespace vcolor {

namespace {

// sRGB primaries, D65 white.
constexpr double kRgbToXyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};
constexpr double kXyzToRgb[3][3] = {
    {3.2404542, -1.5371385, -0.4985314},
    {-0.9692660, 1.8760108, 0.0415560},
    {0.0556434, -0.2040259, 1.0572252},
};
constexpr double kWhite[3] = {0.95047, 1.0, 1.08883};
constexpr double kDelta = 6.0 / 29.0;

torch::Tensor mix(const torch::Tensor& c, const double (&m)[3][3], int row) {
    const auto dim = c.dim() - 3;
    return c.select(dim, 0) * m[row][0] + c.select(dim, 1) * m[row][1] + c.select(dim, 2) * m[row][2];
}

torch::Tensor lab_f(const torch::Tensor& t) {
    constexpr double d3 = kDelta * kDelta * kDelta;
    auto cube = t.clamp_min(d3).pow(1.0 / 3.0);
    auto lin = t / (3 * kDelta * kDelta) + 4.0 / 29.0;
    return torch::where(t > d3, cube, lin);
}

torch::Tensor lab_f_inv(const torch::Tensor& f) {
    auto cube = f.pow(3);
    auto lin = 3 * kDelta * kDelta * (f - 4.0 / 29.0);
    return torch::where(f > kDelta, cube, lin);
}

torch::Tensor srgb_to_linear(const torch::Tensor& c) {
    auto hi = ((c.clamp_min(0.04045) + 0.055) / 1.055).pow(2.4);
    return torch::where(c > 0.04045, hi, c / 12.92);
}

torch::Tensor linear_to_srgb(const torch::Tensor& c) {
    auto hi = 1.055 * c.clamp_min(0.0031308).pow(1.0 / 2.4) - 0.055;
    return torch::where(c > 0.0031308, hi, c * 12.92);
}

void check_rgb(const torch::Tensor& image) {
    require(image.dim() == 3 && image.size(0) == 3, ErrorCategory::Shape,
            "rgb image must be [3,H,W], got " + std::string(c10::str(image.sizes())));
    require(torch::isfinite(image).all().item<bool>(), ErrorCategory::NonFinite,
            "rgb image contains non-finite values");
}

}  // namespace

torch::Tensor LabFrame::stacked() const { return torch::cat({l.unsqueeze(0), ab}, 0); }

LabFrame LabFrame::from_stacked(const torch::Tensor& lab) {
    return LabFrame{lab.select(0, 0).contiguous(), lab.slice(0, 1, 3).contiguous()};
}

torch::Tensor rgb_to_lab_tensor(const torch::Tensor& rgb) {
    const auto dim = rgb.dim() - 3;
    auto lin = srgb_to_linear(rgb);
    auto fx = lab_f(mix(lin, kRgbToXyz, 0) / kWhite[0]);
    auto fy = lab_f(mix(lin, kRgbToXyz, 1) / kWhite[1]);
    auto fz = lab_f(mix(lin, kRgbToXyz, 2) / kWhite[2]);
    auto L = 116.0 * fy - 16.0;
    auto a = 500.0 * (fx - fy);
    auto b = 200.0 * (fy - fz);
    return torch::stack({L / 50.0 - 1.0, a / kAbScale, b / kAbScale}, dim);
}

torch::Tensor lab_to_rgb_tensor(const torch::Tensor& lab) {
    const auto dim = lab.dim() - 3;
    auto L = (lab.select(dim, 0) + 1.0) * 50.0;
    auto a = lab.select(dim, 1) * kAbScale;
    auto b = lab.select(dim, 2) * kAbScale;
    auto fy = (L + 16.0) / 116.0;
    auto fx = fy + a / 500.0;
    auto fz = fy - b / 200.0;
    auto xyz = torch::stack({lab_f_inv(fx) * kWhite[0], lab_f_inv(fy) * kWhite[1], lab_f_inv(fz) * kWhite[2]}, dim);
    auto lin = torch::stack({mix(xyz, kXyzToRgb, 0), mix(xyz, kXyzToRgb, 1), mix(xyz, kXyzToRgb, 2)}, dim);
    return linear_to_srgb(lin.clamp(0.0, 1.0)).clamp(0.0, 1.0);
}

LabFrame rgb_to_lab(const torch::Tensor& image) {
    check_rgb(image);
    auto lab = rgb_to_lab_tensor(image.clamp(0.0, 1.0));
    auto frame = LabFrame::from_stacked(lab);
    frame.l = frame.l.clamp(-1.0, 1.0);
    frame.ab = frame.ab.clamp(-1.0, 1.0);
    return frame;
}

torch::Tensor lab_to_rgb(const LabFrame& frame) { return lab_to_rgb_tensor(frame.stacked()); }

LabFrame grayscale_of(const LabFrame& frame) { return LabFrame{frame.l.clone(), torch::zeros_like(frame.ab)}; }

void check_lab_frame(const LabFrame& frame) {
    require(frame.l.defined() && frame.ab.defined(), ErrorCategory::Shape, "LabFrame has undefined channels");
    require(frame.l.dim() == 2, ErrorCategory::Shape, "LabFrame.l must be [H,W]");
    require(frame.ab.dim() == 3 && frame.ab.size(0) == 2 && frame.ab.size(1) == frame.l.size(0) &&
                frame.ab.size(2) == frame.l.size(1),
            ErrorCategory::Shape, "LabFrame.ab must be [2,H,W] matching l");
    const bool finite = torch::isfinite(frame.l).all().item<bool>() && torch::isfinite(frame.ab).all().item<bool>();
    require(finite, ErrorCategory::NonFinite, "LabFrame contains non-finite values");
    const bool bounded = frame.l.abs().max().item<double>() <= 1.0 && frame.ab.abs().max().item<double>() <= 1.0;
    require(bounded, ErrorCategory::Shape, "LabFrame values outside [-1,1]");
}

}  // namespace vcolor
