#include "vcolor/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <memory>

#include "vcolor/error.hpp"
#include "vcolor/losses.hpp"

namespace vcolor {

double psnr(const torch::Tensor& pred_rgb, const torch::Tensor& gt_rgb) {
    require(pred_rgb.sizes() == gt_rgb.sizes(), ErrorCategory::Shape,
            "psnr: shape mismatch " + std::string(c10::str(pred_rgb.sizes())) + " vs " +
                std::string(c10::str(gt_rgb.sizes())));
    const double mse = (pred_rgb.to(torch::kFloat64) - gt_rgb.to(torch::kFloat64)).pow(2).mean().item<double>();
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double colorfulness(const torch::Tensor& rgb) {
    require(rgb.dim() == 3 && rgb.size(0) == 3, ErrorCategory::Shape, "colorfulness expects [3,H,W]");
    auto c = rgb.to(torch::kFloat64) * 255.0;
    auto rg = c[0] - c[1];
    auto yb = 0.5 * (c[0] + c[1]) - c[2];
    const double s_rg = rg.std(/*unbiased=*/false).item<double>();
    const double s_yb = yb.std(false).item<double>();
    const double m_rg = rg.mean().item<double>();
    const double m_yb = yb.mean().item<double>();
    return std::sqrt(s_rg * s_rg + s_yb * s_yb) + 0.3 * std::sqrt(m_rg * m_rg + m_yb * m_yb);
}

WarpErrorResult warp_error(const std::vector<torch::Tensor>& frames, const std::vector<torch::Tensor>& flows,
                           const std::vector<torch::Tensor>& masks, double scale) {
    require(!frames.empty(), ErrorCategory::Shape, "warp_error needs at least one frame");
    require(flows.size() + 1 == frames.size() && masks.size() == flows.size(), ErrorCategory::Shape,
            "warp_error needs T frames and T-1 flows/masks; got " + std::to_string(frames.size()) + ", " +
                std::to_string(flows.size()) + ", " + std::to_string(masks.size()));
    WarpErrorResult result;
    for (std::size_t t = 1; t < frames.size(); ++t) {
        torch::NoGradGuard g;
        auto prev = frames[t - 1].to(torch::kFloat64);
        auto cur = frames[t].to(torch::kFloat64);
        auto k = masked_warp_l1(prev, cur, flows[t - 1].to(torch::kFloat64), masks[t - 1]);
        const double visible = k.mask_sum.item<double>();
        const double value =
            visible > 0 ? scale * k.abs_sum.item<double>() / (visible * static_cast<double>(k.channels)) : 0.0;
        result.per_pair.push_back(value);
    }
    double sum = 0;
    for (double v : result.per_pair) sum += v;
    result.mean = result.per_pair.empty() ? 0.0 : sum / static_cast<double>(result.per_pair.size());
    return result;
}

std::optional<double> external_metric(const std::string& command, const std::filesystem::path& pred_dir,
                                      const std::filesystem::path& gt_dir) {
    if (command.empty()) return std::nullopt;
    const std::string full = command + " '" + pred_dir.string() + "' '" + gt_dir.string() + "'";
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(full.c_str(), "r"), pclose);
    if (!pipe) return std::nullopt;
    char buf[128] = {};
    if (!std::fgets(buf, sizeof buf, pipe.get())) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(buf, &end);
    if (end == buf || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace vcolor
