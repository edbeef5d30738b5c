#include "vcolor/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "vcolor/error.hpp"
#include "vcolor/metrics.hpp"

namespace vcolor {

using nlohmann::json;

namespace {

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

ClipMetrics evaluate_frames(const std::vector<torch::Tensor>& pred_rgb, const std::vector<torch::Tensor>& gt_rgb,
                            const std::vector<torch::Tensor>& flows, const std::vector<torch::Tensor>& masks,
                            double we_scale) {
    require(!pred_rgb.empty(), ErrorCategory::Usage, "no frames to evaluate");
    require(gt_rgb.empty() || gt_rgb.size() == pred_rgb.size(), ErrorCategory::Shape,
            "prediction has " + std::to_string(pred_rgb.size()) + " frames, ground truth " +
                std::to_string(gt_rgb.size()));
    ClipMetrics m;
    m.frames = static_cast<std::int64_t>(pred_rgb.size());
    for (std::size_t i = 0; i < pred_rgb.size(); ++i) {
        m.color_per_frame.push_back(colorfulness(pred_rgb[i]));
        if (!gt_rgb.empty()) {
            require(gt_rgb[i].sizes() == pred_rgb[i].sizes(), ErrorCategory::Shape,
                    "frame " + std::to_string(i) + ": prediction and ground truth sizes differ");
            m.psnr_per_frame.push_back(psnr(pred_rgb[i], gt_rgb[i]));
        }
    }
    m.color = mean_of(m.color_per_frame);
    if (!gt_rgb.empty()) m.psnr = mean_of(m.psnr_per_frame);
    if (!flows.empty() && pred_rgb.size() > 1) {
        auto we = warp_error(pred_rgb, flows, masks, we_scale);
        m.we = we.mean;
        m.we_per_pair = we.per_pair;
    }
    return m;
}

ClipMetrics evaluate_clip(VideoColorizer& model, const Clip& clip, std::int64_t block_size, double we_scale,
                          std::vector<torch::Tensor>* out_rgb) {
    const auto lab = clip.lab();
    const auto gray = clip.gray();
    const auto t0 = std::chrono::steady_clock::now();
    const auto pred = colorize_video(model, gray, lab.front(), block_size);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<torch::Tensor> rgb;
    for (const auto& f : pred) rgb.push_back(lab_to_rgb(f));
    std::vector<torch::Tensor> flows, masks;
    if (clip.has_flows()) {
        flows = clip.warp_flows();
        masks = clip.pair_masks();
    }
    auto m = evaluate_frames(rgb, clip.rgb, flows, masks, we_scale);
    m.seconds_per_frame = seconds / static_cast<double>(pred.size());
    if (out_rgb) *out_rgb = std::move(rgb);
    return m;
}

ClipMetrics average_metrics(const std::vector<ClipMetrics>& parts) {
    require(!parts.empty(), ErrorCategory::Usage, "no metrics to average");
    ClipMetrics out;
    std::vector<double> psnrs, colors, wes, durations;
    for (const auto& p : parts) {
        out.frames += p.frames;
        if (p.psnr) psnrs.push_back(*p.psnr);
        colors.push_back(p.color);
        if (p.we) wes.push_back(*p.we);
        durations.push_back(p.seconds_per_frame);
        out.psnr_per_frame.insert(out.psnr_per_frame.end(), p.psnr_per_frame.begin(), p.psnr_per_frame.end());
        out.color_per_frame.insert(out.color_per_frame.end(), p.color_per_frame.begin(), p.color_per_frame.end());
        out.we_per_pair.insert(out.we_per_pair.end(), p.we_per_pair.begin(), p.we_per_pair.end());
    }
    if (!psnrs.empty()) out.psnr = mean_of(psnrs);
    out.color = mean_of(colors);
    if (!wes.empty()) out.we = mean_of(wes);
    out.seconds_per_frame = mean_of(durations);
    return out;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& ablation_variants() {
    static const std::vector<std::string> names{"no_transformer_branch+no_linkage", "single_head", "no_linkage",
                                                "full"};
    return names;
}

Ablation ablation_from_name(const std::string& name) {
    Ablation a;
    if (name == "full") return a;
    if (name == "no_linkage") {
        a.no_linkage = true;
        return a;
    }
    if (name == "single_head") {
        a.single_head = true;
        return a;
    }
    if (name == "no_transformer_branch+no_linkage") {
        a.no_transformer_branch = true;
        a.no_linkage = true;
        return a;
    }
    std::string valid;
    for (const auto& v : ablation_variants()) valid += (valid.empty() ? "" : ", ") + v;
    fail(ErrorCategory::Usage, "unknown ablation variant '" + name + "' (valid: " + valid + ")");
}

AblationRow run_ablation(VideoColorizer& model, const std::string& variant, const std::vector<Clip>& clips,
                         std::int64_t block_size, double we_scale) {
    const auto previous = model->ablation();
    model->set_ablation(ablation_from_name(variant));
    std::vector<ClipMetrics> parts;
    try {
        for (const auto& c : clips) parts.push_back(evaluate_clip(model, c, block_size, we_scale));
    } catch (...) {
        model->set_ablation(previous);
        throw;
    }
    model->set_ablation(previous);
    return AblationRow{variant, average_metrics(parts)};
}

SweepResult block_size_sweep(VideoColorizer& model, const Clip& clip, const std::vector<std::int64_t>& sizes,
                             double we_scale) {
    require(!sizes.empty(), ErrorCategory::Usage, "no block sizes to sweep");
    SweepResult r;
    double lo = INFINITY, hi = -INFINITY;
    for (auto n : sizes) {
        auto m = evaluate_clip(model, clip, n, we_scale);
        if (m.psnr) {
            lo = std::min(lo, *m.psnr);
            hi = std::max(hi, *m.psnr);
        }
        r.rows.push_back({n, std::move(m)});
    }
    r.psnr_spread = hi >= lo ? hi - lo : 0.0;
    return r;
}

// ---------------------------------------------------------------------------

json metrics_json(const ClipMetrics& m) {
    return json{{"fid", nullptr}, {"lpips", nullptr}, {"psnr", nullable(m.psnr)}, {"color", m.color},
                {"we", nullable(m.we)}};
}

json eval_report(const ClipMetrics& m) {
    return json{{"kind", "eval"},
                {"frames", m.frames},
                {"metrics", metrics_json(m)},
                {"per_frame", {{"psnr", m.psnr_per_frame}, {"color", m.color_per_frame}}},
                {"per_pair", {{"we", m.we_per_pair}}}};
}

json colorize_report(const ClipMetrics& m, std::int64_t block_size, const PipelineConfig& cfg) {
    auto j = eval_report(m);
    j["kind"] = "colorize";
    j["block_size"] = block_size;
    j["seconds_per_frame"] = m.seconds_per_frame;
    j["config"] = cfg.to_text();
    return j;
}

json ablation_report(const std::vector<AblationRow>& rows) {
    json out{{"kind", "ablation"}, {"rows", json::array()}};
    for (const auto& r : rows) {
        auto row = metrics_json(r.metrics);
        row["variant"] = r.variant;
        row["frames"] = r.metrics.frames;
        out["rows"].push_back(row);
    }
    return out;
}

json sweep_report(const SweepResult& result) {
    json out{{"kind", "sweep"}, {"rows", json::array()}, {"psnr_spread", result.psnr_spread}};
    for (const auto& r : result.rows) {
        auto row = metrics_json(r.metrics);
        row["n"] = r.block_size;
        row["frames"] = r.metrics.frames;
        row["dur"] = r.metrics.seconds_per_frame;
        out["rows"].push_back(row);
    }
    return out;
}

}  // namespace vcolor
