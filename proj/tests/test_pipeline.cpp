#include "doctest_torch.hpp"

#include "helpers.hpp"
#include "vcolor/data.hpp"
#include "vcolor/experiments.hpp"
#include "vcolor/metrics.hpp"
#include "vcolor/pipeline.hpp"
#include "vcolor/train.hpp"

using namespace vcolor;

namespace {

std::vector<LabFrame> gray_frames(const Clip& clip) { return clip.gray(); }

double ab_diff(const std::vector<LabFrame>& a, const std::vector<LabFrame>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i].ab - b[i].ab).abs().max().item<double>());
    return m;
}

}  // namespace

TEST_SUITE("pipeline") {
    TEST_CASE("block splitting") {
        CHECK((split_into_blocks(5, 2) == std::vector<BlockRange>{{0, 2}, {2, 2}, {4, 1}}));
        CHECK((split_into_blocks(4, 2) == std::vector<BlockRange>{{0, 2}, {2, 2}}));
        CHECK((split_into_blocks(3, 8) == std::vector<BlockRange>{{0, 3}}));
        CHECK(split_into_blocks(3, 1).size() == 3);
        CHECK_THROWS_CATEGORY(split_into_blocks(0, 2), ErrorCategory::Usage);
        CHECK_THROWS_CATEGORY(split_into_blocks(4, 0), ErrorCategory::Config);
    }

    TEST_CASE("inference keeps luminance and is deterministic") {
        torch::manual_seed(0);
        auto cfg = testing::small_config();
        VideoColorizer model(cfg);
        auto clip = synth_clip(1, 5, 16, 32, 2);
        auto lab = clip.lab();
        auto a = colorize_video(model, gray_frames(clip), lab[0], 2);
        auto b = colorize_video(model, gray_frames(clip), lab[0], 2);
        REQUIRE(a.size() == 5);
        CHECK(ab_diff(a, b) == 0.0);
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(torch::equal(a[i].l, clip.gray()[i].l));
            CHECK(a[i].ab.abs().max().item<double>() < 1.0);
        }
    }

    TEST_CASE("odd sizes are padded and cropped") {
        torch::manual_seed(1);
        VideoColorizer model(testing::small_config());
        auto clip = synth_clip(2, 3, 19, 27, 1);
        auto out = colorize_video(model, clip.gray(), clip.lab()[0], 2);
        CHECK(out[2].ab.sizes() == torch::IntArrayRef({2, 19, 27}));
        CHECK_THROWS_CATEGORY(colorize_video(model, synth_clip(2, 2, 16, 32, 1).gray(), clip.lab()[0], 2),
                              ErrorCategory::Shape);
    }

    TEST_CASE("no_linkage equals a reset before every block") {
        torch::manual_seed(2);
        auto cfg = testing::small_config();
        VideoColorizer model(cfg);
        auto clip = synth_clip(3, 6, 16, 32, 2);
        auto lab = clip.lab();
        Ablation off;
        off.no_linkage = true;
        model->set_ablation(off);
        auto ablated = colorize_video(model, clip.gray(), lab[0], 2);
        model->set_ablation({});

        torch::NoGradGuard g;
        model->eval();
        double worst = 0;
        for (const auto& r : split_into_blocks(6, 2)) {
            auto block = torch::stack({clip.gray()[r.start].l, clip.gray()[r.start + 1].l}).unsqueeze(1);
            auto state = LinkageImpl::reset();
            auto ab = model->forward_block(block, lab[0], state, 0).ab;
            for (std::size_t i = 0; i < 2; ++i)
                worst = std::max(worst, (ab[static_cast<long>(i)] - ablated[r.start + i].ab).abs().max().item<double>());
        }
        CHECK(worst == 0.0);

        auto linked = colorize_video(model, clip.gray(), lab[0], 2);
        CHECK(ab_diff({linked[0], linked[1]}, {ablated[0], ablated[1]}) == 0.0);
        CHECK(ab_diff({linked[4], linked[5]}, {ablated[4], ablated[5]}) > 0.0);
    }

    TEST_CASE("earlier blocks never see later frames") {
        torch::manual_seed(3);
        VideoColorizer model(testing::small_config());
        auto clip = synth_clip(4, 6, 16, 32, 2);
        auto gray = clip.gray();
        auto base = colorize_video(model, gray, clip.lab()[0], 2);
        gray[5].l = gray[5].l.flip({1});
        auto changed = colorize_video(model, gray, clip.lab()[0], 2);
        CHECK(ab_diff({base.begin(), base.begin() + 4}, {changed.begin(), changed.begin() + 4}) == 0.0);
        CHECK(ab_diff({base[5]}, {changed[5]}) > 0.0);
    }

    TEST_CASE("trainer learning-rate schedule and groups") {
        auto cfg = testing::small_config();
        Trainer plain(cfg);
        CHECK(plain.generator_groups() == 1);
        plain.set_epoch(0);
        CHECK(plain.current_lr_others() == doctest::Approx(cfg.lr_others));
        plain.set_epoch(cfg.decay_epoch_1);
        CHECK(plain.current_lr_others() == doctest::Approx(cfg.lr_others / 10));
        plain.set_epoch(cfg.decay_epoch_2 + 1);
        CHECK(plain.current_lr_others() == doctest::Approx(cfg.lr_others / 100));
        CHECK(plain.current_lr_discriminator() == doctest::Approx(cfg.lr_discriminator / 100));

        VideoColorizer pre(cfg);
        pre->correspondence->backbone->set_pretrained(true);
        Trainer with_backbone(cfg, pre);
        CHECK(with_backbone.generator_groups() == 2);
    }

    TEST_CASE("a few training steps beat the grey baseline on one clip") {
        torch::manual_seed(4);
        auto cfg = testing::small_config();
        cfg.lr_others = 2e-3;
        cfg.decay_epoch_1 = cfg.decay_epoch_2 = 1 << 20;
        cfg.adversarial_enabled = false;
        auto clip = synth_clip(5, 4, 16, 32, 2);
        Trainer trainer(cfg);
        auto tc = TrainingClip::from(clip);
        for (int s = 0; s < 60; ++s) trainer.step(tc, s, 0);

        auto lab = clip.lab();
        auto pred = colorize_video(trainer.model(), clip.gray(), lab[0], 2);
        double trained = 0, grey = 0;
        for (std::size_t i = 0; i < 4; ++i) {
            trained += psnr(lab_to_rgb(pred[i]), clip.rgb[i]);
            grey += psnr(lab_to_rgb(clip.gray()[i]), clip.rgb[i]);
        }
        CHECK(trained > grey);
    }

    TEST_CASE("checkpoint round trip reproduces metrics") {
        torch::manual_seed(5);
        auto cfg = testing::small_config();
        cfg.adversarial_enabled = false;
        Trainer trainer(cfg);
        auto clip = synth_clip(6, 4, 16, 32, 2);
        trainer.step(TrainingClip::from(clip), 0, 0);
        auto dir = testing::temp_dir("ckpt");
        trainer.save(dir / "m.ckpt", 1);
        auto bundle = load_model(dir / "m.ckpt");
        CHECK(bundle.meta.at("step") == "1");
        auto a = evaluate_clip(trainer.model(), clip, 2, 100.0);
        auto b = evaluate_clip(bundle.model, clip, 2, 100.0);
        CHECK(*a.psnr == *b.psnr);
        CHECK(*a.we == *b.we);
        CHECK(a.color == b.color);
        CHECK_THROWS_CATEGORY(load_model(dir / "missing.ckpt"), ErrorCategory::Io);
    }

    TEST_CASE("non-finite loss names the step and the component") {
        auto cfg = testing::small_config();
        cfg.adversarial_enabled = false;
        Trainer trainer(cfg);
        auto tc = TrainingClip::from(synth_clip(7, 3, 16, 32, 1));
        tc.masks[0][3][3] = std::numeric_limits<float>::quiet_NaN();
        try {
            trainer.step(tc, 17, 0);
            FAIL("expected NonFinite");
        } catch (const Error& e) {
            CHECK(e.category() == ErrorCategory::NonFinite);
            const std::string msg = e.what();
            CHECK(msg.find("step 17") != std::string::npos);
            CHECK(msg.find("temporal") != std::string::npos);
        }
        auto bad_flow = TrainingClip::from(synth_clip(7, 3, 16, 32, 1));
        bad_flow.flows[0][0][3][3] = std::numeric_limits<float>::infinity();
        CHECK_THROWS_CATEGORY(trainer.step(bad_flow, 18, 0), ErrorCategory::NonFinite);
    }

    TEST_CASE("config ablation reaches the submodules") {
        auto cfg = testing::small_config();
        cfg.ablation.single_head = true;
        cfg.ablation.no_transformer_branch = true;
        VideoColorizer model(cfg);
        CHECK(model->correspondence->single_head);
        CHECK_FALSE(model->correspondence->augment->transformer_enabled);
        CHECK_FALSE(model->colorizer->bottleneck->transformer_enabled);
    }

    TEST_CASE("ablation names") {
        CHECK(ablation_from_name("full") == Ablation{});
        CHECK(ablation_from_name("no_transformer_branch+no_linkage").no_transformer_branch);
        CHECK_THROWS_CATEGORY(ablation_from_name("bogus"), ErrorCategory::Usage);
    }
}

#ifdef VCOLOR_CLI_PATH
#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

TEST_SUITE("cli") {
    TEST_CASE("usage errors exit with code 2") {
        auto dir = testing::temp_dir("cli");
        const std::string cli = VCOLOR_CLI_PATH;
        const auto err = dir / "stderr.txt";
        const std::string cmd = cli + " colorize --frames " + dir.string() + " --out " + (dir / "o").string() +
                                " 2> " + err.string();
        const int status = std::system(cmd.c_str());
        REQUIRE(WIFEXITED(status));
        CHECK(WEXITSTATUS(status) == 2);
        std::ifstream in(err);
        std::string line;
        std::getline(in, line);
        CHECK(line.rfind("usage", 0) == 0);

        const int bad = std::system((cli + " train --set nonsense=1 --out " + (dir / "t").string() + " 2>/dev/null").c_str());
        CHECK(WEXITSTATUS(bad) == 3);
    }
}
#endif
