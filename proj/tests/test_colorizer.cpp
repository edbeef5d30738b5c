#include "doctest_torch.hpp"

#include "helpers.hpp"
#include "oracles.hpp"
#include "vcolor/colorizer.hpp"
#include "vcolor/correspondence.hpp"

using namespace vcolor;

namespace {

ColorizerInput random_input(const PipelineConfig& cfg, std::int64_t n, double scale = 1.0) {
    const auto H = cfg.height, W = cfg.width;
    ColorizerInput in;
    in.guidance = torch::randn({n, kColorizerInputChannels, H, W}) * scale;
    in.ho = TokenGrid{torch::randn({(n + 1) * (H / 4) * (W / 4), cfg.d_model}), n + 1, H / 4, W / 4};
    return in;
}

}  // namespace

TEST_SUITE("colorizer") {
    TEST_CASE("output shape and strict tanh range") {
        torch::manual_seed(0);
        auto cfg = testing::small_config();
        Colorizer net(cfg);
        auto out = net->forward(random_input(cfg, 2));
        CHECK(out.sizes() == torch::IntArrayRef({2, 2, cfg.height, cfg.width}));
        auto extreme = net->forward(random_input(cfg, 1, 1e4));
        CHECK(extreme.abs().max().item<double>() < 1.0);
    }

    TEST_CASE("desk geometry: N=2 at 96x64") {
        torch::manual_seed(1);
        auto cfg = testing::small_config();
        cfg.width = 96;
        cfg.height = 64;
        Colorizer net(cfg);
        CHECK(net->forward(random_input(cfg, 2)).sizes() == torch::IntArrayRef({2, 2, 64, 96}));
    }

    TEST_CASE("input assembly has ten channels per frame") {
        torch::manual_seed(2);
        auto cfg = testing::small_config();
        CorrespondenceNet corr(cfg);
        auto ref = rgb_to_lab(testing::rand_rgb(cfg.height, cfg.width));
        auto block = torch::rand({2, 1, cfg.height, cfg.width}) * 2 - 1;
        auto c = corr->forward(block, ref, std::nullopt);
        auto in = make_colorizer_input(c.heads, block, ref, c.ho);
        CHECK(in.guidance.sizes() == torch::IntArrayRef({2, 10, cfg.height, cfg.width}));
        CHECK(torch::equal(in.guidance.select(1, 6), block.select(1, 0)));
        CHECK(torch::equal(in.guidance[1].slice(0, 7, 10), ref.stacked()));
    }

    TEST_CASE("assemble_lab keeps luminance bit-exact") {
        auto l = torch::rand({3, 1, 8, 8}) * 2 - 1;
        auto frames = assemble_lab(l, torch::zeros({3, 2, 8, 8}));
        REQUIRE(frames.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(torch::equal(frames[i].l, l[static_cast<long>(i)][0]));
            CHECK(frames[i].ab.abs().max().item<double>() == 0.0);
        }
    }

    TEST_CASE("finite-difference gradient at float64 on 16x16") {
        torch::manual_seed(3);
        auto cfg = testing::small_config();
        cfg.width = 16;
        cfg.height = 16;
        Colorizer net(cfg);
        net->to(torch::kFloat64);
        auto in = random_input(cfg, 1);
        in.guidance = in.guidance.to(torch::kFloat64);
        in.ho.tokens = in.ho.tokens.to(torch::kFloat64);
        auto target = torch::rand({1, 2, 16, 16}, torch::kFloat64) - 0.5;
        auto params = net->named_parameters();
        for (const char* name : {"out.bias", "bottleneck.block0.tok_to_cnn.bias"}) {
            auto p = params[name];
            auto loss = (net->forward(in) - target).pow(2).mean();
            auto analytic = torch::autograd::grad({loss}, {p})[0];
            auto numeric = oracle::numeric_grad(
                [&](const torch::Tensor& v) {
                    torch::NoGradGuard g;
                    auto saved = p.detach().clone();
                    p.detach().copy_(v);
                    const double r = (net->forward(in) - target).pow(2).mean().item<double>();
                    p.detach().copy_(saved);
                    return r;
                },
                p, 1e-6);
            CHECK_MESSAGE(oracle::rel_err(analytic, numeric) < 1e-3, name);
        }
    }

    TEST_CASE("sizes not divisible by 8 are rejected") {
        auto cfg = testing::small_config();
        Colorizer net(cfg);
        auto in = random_input(cfg, 1);
        in.guidance = in.guidance.slice(2, 0, 12);
        CHECK_THROWS_CATEGORY(net->forward(in), ErrorCategory::Shape);
    }
}
