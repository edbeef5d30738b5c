#include "vcolor/train.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>

#include "vcolor/checkpoint.hpp"
#include "vcolor/error.hpp"

namespace vcolor {

TrainingClip TrainingClip::from(const Clip& clip, torch::Dtype dtype) {
    require(clip.size() >= 1, ErrorCategory::Shape, "training clip is empty");
    TrainingClip tc;
    std::vector<torch::Tensor> labs;
    for (const auto& f : clip.lab()) labs.push_back(f.stacked());
    tc.lab = torch::stack(labs).to(dtype);
    tc.rgb = torch::stack(clip.rgb).to(dtype);
    if (clip.size() > 1) {
        tc.flows = torch::stack(clip.warp_flows()).to(dtype);
        tc.masks = torch::stack(clip.pair_masks()).to(dtype);
    }
    return tc;
}

TrainingClip TrainingClip::window(std::int64_t start, std::int64_t length) const {
    TrainingClip w;
    w.lab = lab.narrow(0, start, length);
    w.rgb = rgb.narrow(0, start, length);
    if (length > 1 && flows.defined()) {
        w.flows = flows.narrow(0, start, length - 1);
        w.masks = masks.narrow(0, start, length - 1);
    }
    return w;
}

torch::Tensor predict_clip(VideoColorizer& model, const TrainingClip& clip, std::int64_t block_size) {
    const LabFrame reference = LabFrame::from_stacked(clip.lab[0]);
    auto l = clip.lab.slice(1, 0, 1);
    LinkageState state;
    std::vector<torch::Tensor> parts;
    const auto blocks = split_into_blocks(static_cast<std::size_t>(clip.frames()), block_size);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        auto block_l = l.narrow(0, static_cast<std::int64_t>(blocks[b].start), static_cast<std::int64_t>(blocks[b].count));
        parts.push_back(model->forward_block(block_l, reference, state, static_cast<std::int64_t>(b)).ab);
    }
    return torch::cat(parts, 0);
}

LossComponents clip_losses(const TrainingClip& clip, const torch::Tensor& ab_pred, const PipelineConfig& cfg,
                           PerceptualNet* perceptual) {
    LossComponents c;
    auto l = clip.lab.slice(1, 0, 1);
    auto ab_gt = clip.lab.slice(1, 1, 3);
    c.l1 = vcolor::l1_loss(ab_pred, ab_gt);
    if (perceptual && cfg.perceptual_enabled)
        c.perceptual = perceptual_loss(lab_to_rgb_tensor(torch::cat({l, ab_pred}, 1)), clip.rgb, *perceptual);
    if (clip.frames() > 1 && clip.flows.defined()) {
        const auto T = clip.frames();
        // Batched over all consecutive pairs; equals the mean of per-pair losses.
        c.temporal = temporal_loss(ab_pred.narrow(0, 0, T - 1), ab_pred.narrow(0, 1, T - 1), clip.flows, clip.masks);
    }
    c.smooth = smooth_loss(ab_pred, l, cfg.smooth_sigma);
    return c;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(const PipelineConfig& cfg, std::optional<VideoColorizer> model)
    : cfg_(cfg), rng_(static_cast<std::uint64_t>(cfg.seed) ^ 0xC0FFEEULL) {
    cfg_.validate();
    torch::manual_seed(static_cast<std::uint64_t>(cfg_.seed));
    model_ = model ? *model : VideoColorizer(cfg_);
    discriminator_ = PatchDiscriminator(cfg_.disc_channels);
    perceptual_ = PerceptualNet(cfg_.perceptual_channels, static_cast<std::uint64_t>(cfg_.seed) + 7);

    using torch::optim::AdamWOptions;
    auto opts = [&](double lr) {
        auto o = std::make_unique<AdamWOptions>(lr);
        o->betas({cfg_.beta1, cfg_.beta2}).weight_decay(cfg_.weight_decay);
        return o;
    };
    std::vector<torch::optim::OptimizerParamGroup> groups;
    if (model_->correspondence->backbone->pretrained()) {
        groups.emplace_back(model_->backbone_parameters(), opts(cfg_.lr_backbone));
        groups.emplace_back(model_->other_parameters(), opts(cfg_.lr_others));
        gen_base_lr_ = {cfg_.lr_backbone, cfg_.lr_others};
    } else {
        groups.emplace_back(model_->parameters(), opts(cfg_.lr_others));
        gen_base_lr_ = {cfg_.lr_others};
    }
    gen_opt_ = std::make_unique<torch::optim::AdamW>(std::move(groups), AdamWOptions(cfg_.lr_others));
    disc_opt_ = std::make_unique<torch::optim::AdamW>(
        discriminator_->parameters(),
        AdamWOptions(cfg_.lr_discriminator).betas({cfg_.beta1, cfg_.beta2}).weight_decay(cfg_.weight_decay));
}

void Trainer::set_epoch(std::int64_t epoch) {
    const double f = lr_factor(cfg_, epoch);
    auto& groups = gen_opt_->param_groups();
    for (std::size_t i = 0; i < groups.size(); ++i)
        static_cast<torch::optim::AdamWOptions&>(groups[i].options()).lr(gen_base_lr_[i] * f);
    for (auto& g : disc_opt_->param_groups())
        static_cast<torch::optim::AdamWOptions&>(g.options()).lr(cfg_.lr_discriminator * f);
}

double Trainer::current_lr_others() const {
    return static_cast<const torch::optim::AdamWOptions&>(gen_opt_->param_groups().back().options()).get_lr();
}

double Trainer::current_lr_discriminator() const {
    return static_cast<const torch::optim::AdamWOptions&>(disc_opt_->param_groups().front().options()).get_lr();
}

StepStats Trainer::step(const TrainingClip& clip, std::int64_t step_index, std::int64_t epoch) {
    model_->train();
    StepStats stats;
    stats.step = step_index;
    stats.epoch = epoch;

    auto ab_pred = predict_clip(model_, clip, cfg_.block_size);
    auto comps = clip_losses(clip, ab_pred, cfg_, &perceptual_);
    auto l = clip.lab.slice(1, 0, 1);
    auto pred_lab = torch::cat({l, ab_pred}, 1);

    const bool adversarial = cfg_.adversarial_enabled && cfg_.weights.adversarial > 0;
    if (adversarial) {
        auto d_loss = lsgan_discriminator_loss(discriminator_->forward(clip.lab), discriminator_->forward(pred_lab.detach()));
        require(torch::isfinite(d_loss).item<bool>(), ErrorCategory::NonFinite,
                "step " + std::to_string(step_index) + ": loss component 'discriminator' is not finite");
        disc_opt_->zero_grad();
        d_loss.backward();
        disc_opt_->step();
        stats.discriminator = d_loss.item<double>();
        comps.adversarial = lsgan_generator_loss(discriminator_->forward(pred_lab));
    }

    torch::Tensor total;
    try {
        total = total_loss(comps, cfg_.weights);
    } catch (const Error& e) {
        fail(e.category(), "step " + std::to_string(step_index) + ": " + e.what());
    }
    gen_opt_->zero_grad();
    total.backward();
    gen_opt_->step();

    auto value = [](const torch::Tensor& t) { return t.defined() ? t.item<double>() : 0.0; };
    stats.total = total.item<double>();
    stats.l1 = value(comps.l1);
    stats.perceptual = value(comps.perceptual);
    stats.temporal = value(comps.temporal);
    stats.adversarial = value(comps.adversarial);
    stats.smooth = value(comps.smooth);
    return stats;
}

std::vector<StepStats> Trainer::train(const std::vector<Clip>& dataset, const Options& options) {
    require(!dataset.empty(), ErrorCategory::Usage, "training dataset is empty");
    std::vector<TrainingClip> clips;
    for (const auto& c : dataset) {
        require(c.height() % 8 == 0 && c.width() % 8 == 0, ErrorCategory::Shape,
                "training clip '" + c.name + "' is " + std::to_string(c.width()) + "x" + std::to_string(c.height()) +
                    "; training sizes must be divisible by 8");
        clips.push_back(TrainingClip::from(c));
    }

    const auto per_epoch = static_cast<std::int64_t>(clips.size());
    const std::int64_t steps =
        options.steps > 0 ? options.steps : (cfg_.steps > 0 ? cfg_.steps : cfg_.epochs * per_epoch);

    std::ofstream curve;
    if (!options.out_dir.empty()) {
        std::filesystem::create_directories(options.out_dir);
        std::ofstream(options.out_dir / "config.txt") << cfg_.to_text();
        curve.open(options.out_dir / "loss.csv");
        curve << "step,epoch,total,l1,perceptual,temporal,adversarial,smooth,discriminator\n";
    }

    std::vector<StepStats> history;
    std::vector<std::size_t> order;
    for (std::int64_t s = 0; s < steps; ++s) {
        const auto pos = static_cast<std::size_t>(s % per_epoch);
        if (pos == 0) {
            order.resize(clips.size());
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng_);
        }
        const auto epoch = s / per_epoch;
        set_epoch(epoch);

        const auto& full = clips[order[pos]];
        const auto len = std::min<std::int64_t>(full.frames(), cfg_.max_clip_length);
        const auto start =
            std::uniform_int_distribution<std::int64_t>(0, full.frames() - len)(rng_);
        auto stats = step(full.window(start, len), s, epoch);
        history.push_back(stats);

        if (curve.is_open())
            curve << stats.step << ',' << stats.epoch << ',' << stats.total << ',' << stats.l1 << ','
                  << stats.perceptual << ',' << stats.temporal << ',' << stats.adversarial << ',' << stats.smooth
                  << ',' << stats.discriminator << '\n';
        if (cfg_.log_every > 0 && (s % cfg_.log_every == 0 || s + 1 == steps))
            std::clog << "train step=" << s << " epoch=" << epoch << std::setprecision(5) << " total=" << stats.total
                      << " l1=" << stats.l1 << " perc=" << stats.perceptual << " temp=" << stats.temporal
                      << " adv=" << stats.adversarial << " smooth=" << stats.smooth << " d=" << stats.discriminator
                      << '\n';
        if (options.on_step) options.on_step(stats);
        if (!options.out_dir.empty() && cfg_.checkpoint_every > 0 && (s + 1) % cfg_.checkpoint_every == 0)
            save(options.out_dir / ("step_" + std::to_string(s + 1) + ".ckpt"), s + 1);
    }
    if (!options.out_dir.empty()) save(options.out_dir / "model.ckpt", steps);
    return history;
}

void Trainer::save(const std::filesystem::path& path, std::int64_t step) {
    save_model(path, model_, cfg_, discriminator_.get(), nullptr, {{"step", std::to_string(step)}});
}

}  // namespace vcolor
