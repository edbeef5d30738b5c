// Command-line front end: synthetic data, training, inference, evaluation,
// ablation and block-size sweeps.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <torch/torch.h>

#include "vcolor/config.hpp"
#include "vcolor/data.hpp"
#include "vcolor/error.hpp"
#include "vcolor/experiments.hpp"
#include "vcolor/pipeline.hpp"
#include "vcolor/train.hpp"

namespace fs = std::filesystem;
using namespace vcolor;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::int64_t> seed;
    std::optional<std::int64_t> block_size;
    std::string resize;
    std::string ablate;
    std::string out;
    std::string checkpoint;
    std::string frames;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "flat key = value config file");
    cmd->add_option("--set", c.sets, "config override key=value (repeatable)");
    cmd->add_option("--seed", c.seed, "global seed");
    cmd->add_option("--block-size", c.block_size, "frames per block");
    cmd->add_option("--resize", c.resize, "processing size WxH");
    cmd->add_option("--out", c.out, "output directory");
}

int exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Usage: return 2;
        case ErrorCategory::Config: return 3;
        case ErrorCategory::Io: return 4;
        case ErrorCategory::Format: return 5;
        case ErrorCategory::Shape: return 6;
        case ErrorCategory::NonFinite: return 7;
        case ErrorCategory::Checkpoint: return 8;
        case ErrorCategory::Internal: return 9;
    }
    return 9;
}

/// Config file, then --set overrides, then dedicated flags.
PipelineConfig effective_config(const Common& c, const PipelineConfig& base) {
    PipelineConfig cfg = c.config.empty() ? base : load_config(c.config);
    std::map<std::string, std::string> kv;
    for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        require(eq != std::string::npos, ErrorCategory::Usage, "--set expects key=value, got '" + s + "'");
        kv[s.substr(0, eq)] = s.substr(eq + 1);
    }
    if (c.seed) kv["seed"] = std::to_string(*c.seed);
    if (c.block_size) kv["block_size"] = std::to_string(*c.block_size);
    if (!c.resize.empty()) kv["resize"] = c.resize;
    apply_overrides(cfg, kv);
    if (!c.ablate.empty()) {
        const auto a = ablation_from_name(c.ablate);
        cfg.ablation = a;
    }
    cfg.validate();
    return cfg;
}

void prepare_out(const Common& c, const PipelineConfig& cfg) {
    require(!c.out.empty(), ErrorCategory::Usage, "--out is required");
    fs::create_directories(c.out);
    std::ofstream(fs::path(c.out) / "config.txt") << cfg.to_text();
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream f(path);
    require(static_cast<bool>(f), ErrorCategory::Io, "cannot write " + path.string());
    f << j.dump(2) << '\n';
}

std::pair<std::int64_t, std::int64_t> size_of(const PipelineConfig& cfg) { return {cfg.width, cfg.height}; }

/// A clip directory is either a frame folder or a folder with frames/ and
/// an optional flows/ subfolder.
Clip load_any_clip(const fs::path& dir, std::optional<std::pair<std::int64_t, std::int64_t>> resize,
                   const fs::path& flows = {}) {
    if (fs::is_directory(dir / "frames")) {
        auto clip = load_clip(dir / "frames", resize, flows.empty() ? dir / "flows" : flows);
        clip.name = dir.filename().string();
        return clip;
    }
    return load_clip(dir, resize, flows);
}

std::vector<Clip> load_any_dataset(const fs::path& root, std::pair<std::int64_t, std::int64_t> size) {
    if (fs::is_directory(root / "frames")) return {load_any_clip(root, size)};
    return load_dataset(root, size);
}

VideoColorizer model_for(const Common& c, PipelineConfig& cfg) {
    if (c.checkpoint.empty()) {
        std::clog << "warning: no --checkpoint given; using an untrained model (seed " << cfg.seed << ")\n";
        torch::manual_seed(static_cast<std::uint64_t>(cfg.seed));
        VideoColorizer m(cfg);
        m->set_ablation(cfg.ablation);
        return m;
    }
    auto bundle = load_model(c.checkpoint);
    // Geometry and wiring flags come from the command line, weights from the file.
    bundle.model->set_ablation(cfg.ablation);
    return bundle.model;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Common& c, std::int64_t clips, std::int64_t length, std::int64_t shapes, std::int64_t pan) {
    auto cfg = effective_config(c, PipelineConfig::desk());
    prepare_out(c, cfg);
    require(clips >= 1 && length >= 1 && shapes >= 0, ErrorCategory::Usage, "synth-data needs positive sizes");
    SynthOptions opts;
    opts.max_pan_speed = pan;
    for (std::int64_t k = 0; k < clips; ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "clip_%03lld", static_cast<long long>(k));
        auto clip = synth_clip(static_cast<std::uint64_t>(cfg.seed) * 1000003ULL + static_cast<std::uint64_t>(k),
                               length, cfg.height, cfg.width, shapes, opts);
        write_clip(fs::path(c.out) / name, clip);
    }
    std::cout << "wrote " << clips << " clips of " << length << " frames (" << cfg.width << "x" << cfg.height
              << ") to " << c.out << '\n';
    return 0;
}

int cmd_train(const Common& c, std::int64_t steps) {
    auto cfg = effective_config(c, PipelineConfig::desk());
    prepare_out(c, cfg);
    require(!c.frames.empty(), ErrorCategory::Usage, "train needs --frames DATASET");
    auto data = load_any_dataset(c.frames, size_of(cfg));
    std::optional<VideoColorizer> init;
    if (!c.checkpoint.empty()) init = load_model(c.checkpoint).model;
    Trainer trainer(cfg, init);
    trainer.model()->set_ablation(cfg.ablation);
    const auto t0 = std::chrono::steady_clock::now();
    auto history = trainer.train(data, {c.out, steps, {}});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "trained " << history.size() << " steps in " << secs << " s; final total loss "
              << history.back().total << "; checkpoint " << (fs::path(c.out) / "model.ckpt").string() << '\n';
    return 0;
}

int cmd_colorize(const Common& c, const std::string& reference) {
    require(!reference.empty(), ErrorCategory::Usage, "colorize needs --reference IMAGE (the exemplar is mandatory)");
    require(!c.frames.empty(), ErrorCategory::Usage, "colorize needs --frames DIR");
    auto cfg = effective_config(c, c.checkpoint.empty() ? PipelineConfig::desk() : load_model(c.checkpoint).config);
    prepare_out(c, cfg);

    std::optional<std::pair<std::int64_t, std::int64_t>> resize;
    if (!c.resize.empty()) resize = parse_resize(c.resize);
    const auto images = list_images(c.frames);
    require(!images.empty(), ErrorCategory::Io, "no images in " + c.frames);
    std::vector<LabFrame> gray;
    for (const auto& p : images) {
        auto rgb = read_rgb(p);
        if (resize) rgb = resize_rgb(rgb, resize->first, resize->second);
        gray.push_back(grayscale_of(rgb_to_lab(rgb)));
    }
    const auto H = gray.front().height(), W = gray.front().width();
    auto ref_rgb = read_rgb(reference);
    if (ref_rgb.size(1) != H || ref_rgb.size(2) != W) ref_rgb = resize_rgb(ref_rgb, W, H);

    auto model = model_for(c, cfg);
    const auto t0 = std::chrono::steady_clock::now();
    auto out = colorize_video(model, gray, rgb_to_lab(ref_rgb), cfg.block_size);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<torch::Tensor> rgb;
    for (std::size_t i = 0; i < out.size(); ++i) {
        rgb.push_back(lab_to_rgb(out[i]));
        char name[32];
        std::snprintf(name, sizeof name, "%05zu.png", i);
        write_rgb(fs::path(c.out) / name, rgb.back());
    }
    auto m = evaluate_frames(rgb, {}, {}, {}, cfg.we_scale);
    m.seconds_per_frame = secs / static_cast<double>(out.size());
    write_json(fs::path(c.out) / "report.json", colorize_report(m, cfg.block_size, cfg));
    std::cout << "colorized " << out.size() << " frames into " << c.out << '\n';
    return 0;
}

int cmd_eval(const Common& c, const std::string& gt, const std::string& flows) {
    require(!c.frames.empty(), ErrorCategory::Usage, "eval needs --frames DIR");
    auto cfg = effective_config(c, PipelineConfig::desk());
    std::vector<torch::Tensor> pred;
    for (const auto& p : list_images(c.frames)) pred.push_back(read_rgb(p));
    require(!pred.empty(), ErrorCategory::Io, "no images in " + c.frames);
    const auto H = pred.front().size(1), W = pred.front().size(2);

    std::vector<torch::Tensor> gt_rgb, fl, masks;
    if (!gt.empty()) {
        auto gclip = load_any_clip(gt, std::make_pair(W, H));
        gt_rgb = gclip.rgb;
        if (gclip.has_flows()) {
            fl = gclip.warp_flows();
            masks = gclip.pair_masks();
        }
    }
    if (!flows.empty()) {
        // Flows are read alongside a frame folder of the right length.
        Clip motion = load_clip(c.frames, std::nullopt, flows);
        require(motion.has_flows(), ErrorCategory::Io, "no .flo files in " + flows);
        fl = motion.warp_flows();
        masks = motion.pair_masks();
    }
    auto m = evaluate_frames(pred, gt_rgb, fl, masks, cfg.we_scale);
    auto report = eval_report(m);
    if (!c.out.empty()) {
        prepare_out(c, cfg);
        write_json(fs::path(c.out) / "report.json", report);
    }
    std::cout << report.dump(2) << '\n';
    return 0;
}

int cmd_ablate(Common c) {
    require(!c.frames.empty(), ErrorCategory::Usage, "ablate needs --frames DATASET");
    const std::string only = c.ablate;
    c.ablate.clear();  // the variant is applied per row below
    auto cfg = effective_config(c, c.checkpoint.empty() ? PipelineConfig::desk() : load_model(c.checkpoint).config);
    prepare_out(c, cfg);
    auto clips = load_any_dataset(c.frames, size_of(cfg));
    auto model = model_for(c, cfg);
    std::vector<std::string> variants = only.empty() ? ablation_variants() : std::vector<std::string>{only};
    std::vector<AblationRow> rows;
    for (const auto& v : variants) rows.push_back(run_ablation(model, v, clips, cfg.block_size, cfg.we_scale));
    auto report = ablation_report(rows);
    write_json(fs::path(c.out) / "report.json", report);
    std::cout << report.dump(2) << '\n';
    return 0;
}

int cmd_sweep(const Common& c, std::int64_t max_n) {
    require(!c.frames.empty(), ErrorCategory::Usage, "sweep-n needs --frames CLIP");
    require(max_n >= 1, ErrorCategory::Usage, "--max-n must be >= 1");
    auto cfg = effective_config(c, c.checkpoint.empty() ? PipelineConfig::desk() : load_model(c.checkpoint).config);
    prepare_out(c, cfg);
    auto clip = load_any_clip(c.frames, size_of(cfg));
    auto model = model_for(c, cfg);
    std::vector<std::int64_t> sizes;
    for (std::int64_t n = 1; n <= max_n; ++n) sizes.push_back(n);
    auto result = block_size_sweep(model, clip, sizes, cfg.we_scale);
    auto report = sweep_report(result);
    write_json(fs::path(c.out) / "report.json", report);
    std::cout << report.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exemplar-based video colorization"};
    app.require_subcommand(1);
    torch::set_num_threads(1);

    Common c;
    std::int64_t clips = 10, length = 8, shapes = 3, pan = 1, steps = 0, max_n = 6;
    std::string reference, gt, flows;

    auto* synth = app.add_subcommand("synth-data", "write a synthetic moving-shapes dataset");
    add_common(synth, c);
    synth->add_option("--clips", clips, "number of clips");
    synth->add_option("--length", length, "frames per clip");
    synth->add_option("--shapes", shapes, "shapes per clip");
    synth->add_option("--pan", pan, "max camera pan speed (px/frame)");

    auto* train = app.add_subcommand("train", "train on a dataset of clips");
    add_common(train, c);
    train->add_option("--frames", c.frames, "dataset root or single clip directory");
    train->add_option("--checkpoint", c.checkpoint, "initial weights");
    train->add_option("--steps", steps, "number of steps (overrides config)");
    train->add_option("--ablate", c.ablate, "train an ablated variant");

    auto* colorize = app.add_subcommand("colorize", "colorize a frame directory from one exemplar");
    add_common(colorize, c);
    colorize->add_option("--frames", c.frames, "directory of frames");
    colorize->add_option("--reference", reference, "colour exemplar image");
    colorize->add_option("--checkpoint", c.checkpoint, "trained model");
    colorize->add_option("--ablate", c.ablate, "run with a component disabled");

    auto* eval = app.add_subcommand("eval", "score colorized frames");
    add_common(eval, c);
    eval->add_option("--frames", c.frames, "colorized frames");
    eval->add_option("--gt", gt, "ground-truth frames (or clip directory with flows/)");
    eval->add_option("--flows", flows, "directory of .flo files and masks for the frames");

    auto* ablate = app.add_subcommand("ablate", "component study table");
    add_common(ablate, c);
    ablate->add_option("--frames", c.frames, "dataset root or clip directory");
    ablate->add_option("--checkpoint", c.checkpoint, "trained model");
    ablate->add_option("--ablate", c.ablate, "single variant (default: all)");

    auto* sweep = app.add_subcommand("sweep-n", "block-size sweep");
    add_common(sweep, c);
    sweep->add_option("--frames", c.frames, "clip directory");
    sweep->add_option("--checkpoint", c.checkpoint, "trained model");
    sweep->add_option("--max-n", max_n, "largest block size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "usage: " << e.what() << '\n';
        return exit_code(ErrorCategory::Usage);
    }

    try {
        if (synth->parsed()) return cmd_synth(c, clips, length, shapes, pan);
        if (train->parsed()) return cmd_train(c, steps);
        if (colorize->parsed()) return cmd_colorize(c, reference);
        if (eval->parsed()) return cmd_eval(c, gt, flows);
        if (ablate->parsed()) return cmd_ablate(c);
        if (sweep->parsed()) return cmd_sweep(c, max_n);
    } catch (const Error& e) {
        std::cerr << category_name(e.category()) << ": " << e.what() << '\n';
        return exit_code(e.category());
    } catch (const c10::Error& e) {
        std::cerr << "internal: " << e.what_without_backtrace() << '\n';
        return exit_code(ErrorCategory::Internal);
    } catch (const std::exception& e) {
        std::cerr << "internal: " << e.what() << '\n';
        return exit_code(ErrorCategory::Internal);
    }
    return exit_code(ErrorCategory::Internal);
}
