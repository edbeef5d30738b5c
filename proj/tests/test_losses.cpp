#include "doctest_torch.hpp"

#include "helpers.hpp"
#include "oracles.hpp"
#include "vcolor/losses.hpp"

using namespace vcolor;

namespace {

auto f64() { return torch::TensorOptions().dtype(torch::kFloat64); }

torch::Tensor constant_flow(std::int64_t h, std::int64_t w, double u, double v) {
    auto f = torch::empty({2, h, w}, f64());
    f[0].fill_(u);
    f[1].fill_(v);
    return f;
}

}  // namespace

TEST_SUITE("losses") {
    TEST_CASE("l1 and perceptual basics") {
        auto a = torch::rand({2, 2, 8, 8});
        CHECK(vcolor::l1_loss(a, a).item<double>() == 0.0);
        CHECK(vcolor::l1_loss(torch::zeros({4}), torch::full({4}, 0.25)).item<double>() == doctest::Approx(0.25));
        CHECK_THROWS_CATEGORY(vcolor::l1_loss(a, torch::rand({2, 2, 8, 4})), ErrorCategory::Shape);

        PerceptualNet net(4), twin(4);
        auto x = torch::rand({1, 3, 32, 32});
        CHECK(perceptual_loss(x, x, net).item<double>() == 0.0);
        auto y = torch::rand({1, 3, 32, 32});
        CHECK(perceptual_loss(x, y, net).item<double>() > 0.0);
        CHECK(perceptual_loss(x, y, net).item<double>() == perceptual_loss(x, y, twin).item<double>());
        for (const auto& p : net->parameters()) CHECK_FALSE(p.requires_grad());
    }

    TEST_CASE("warp: zero flow is the identity") {
        auto img = torch::rand({2, 6, 9}, f64());
        CHECK(torch::equal(warp_by_flow(img, torch::zeros({2, 6, 9}, f64())), img));
    }

    TEST_CASE("warp: integer shift of a ramp") {
        auto ramp = torch::arange(10, f64()).view({1, 1, 10}).expand({1, 4, 10}).contiguous();
        auto out = warp_by_flow(ramp, constant_flow(4, 10, 2, 0));
        for (int x = 2; x < 10; ++x) CHECK(out[0][1][x].item<double>() == x - 2);
        CHECK(out[0][1][0].item<double>() == 0.0);  // clamped border
    }

    TEST_CASE("warp: half-pixel shift of a step edge interpolates") {
        auto step = torch::zeros({1, 3, 6}, f64());
        step.narrow(2, 3, 3).fill_(1.0);
        auto out = warp_by_flow(step, constant_flow(3, 6, 0.5, 0));
        CHECK(out[0][0][3].item<double>() == doctest::Approx(0.5));
        CHECK(out[0][0][2].item<double>() == 0.0);
        CHECK(out[0][0][4].item<double>() == 1.0);
    }

    TEST_CASE("warp and masked kernel match the scalar oracle") {
        torch::manual_seed(0);
        for (int rep = 0; rep < 5; ++rep) {
            auto prev = torch::rand({2, 7, 9}, f64()), cur = torch::rand({2, 7, 9}, f64());
            auto flow = torch::randn({2, 7, 9}, f64()) * 3;
            auto mask = (torch::rand({7, 9}) > 0.3).to(torch::kFloat64);
            auto w = warp_by_flow(prev, flow);
            auto ow = oracle::warp_by_flow(oracle::to_image(prev), oracle::to_image(flow));
            CHECK(oracle::max_abs_diff({oracle::to_vec(w)}, {ow.v}) < 1e-12);

            auto k = masked_warp_l1(prev, cur, flow, mask);
            auto [s, m] = oracle::masked_warp_l1(oracle::to_image(prev), oracle::to_image(cur), oracle::to_image(flow),
                                                 oracle::to_vec(mask));
            CHECK(k.abs_sum.item<double>() == doctest::Approx(s).epsilon(1e-10));
            CHECK(k.mask_sum.item<double>() == m);
            CHECK(temporal_loss(prev, cur, flow, mask).item<double>() == doctest::Approx(s / (2 * 7 * 9)));
        }
    }

    TEST_CASE("temporal loss special cases") {
        auto ab = torch::rand({2, 8, 8}, f64());
        auto ones = torch::ones({8, 8}, f64());
        auto zero_flow = torch::zeros({2, 8, 8}, f64());
        CHECK(temporal_loss(ab, ab, zero_flow, ones).item<double>() == 0.0);
        CHECK(temporal_loss(ab, torch::rand({2, 8, 8}, f64()), zero_flow, torch::zeros({8, 8}, f64())).item<double>() ==
              0.0);

        // Content moved right by 1; the true flow explains it outside the entering column.
        auto shifted = torch::roll(ab, {1}, {2});
        auto mask = ones.clone();
        mask.select(1, 0).zero_();
        CHECK(temporal_loss(ab, shifted, constant_flow(8, 8, 1, 0), mask).item<double>() < 1e-12);
        CHECK(temporal_loss(ab, shifted, zero_flow, mask).item<double>() > 1e-3);
    }

    TEST_CASE("lsgan objectives") {
        CHECK(lsgan_generator_loss(torch::ones({1, 1, 4, 4})).item<double>() == 0.0);
        CHECK(lsgan_generator_loss(torch::zeros({1, 1, 4, 4})).item<double>() == 1.0);
        auto half = torch::full({1, 1, 4, 4}, 0.5);
        CHECK(lsgan_discriminator_loss(half, half).item<double>() == doctest::Approx(0.5));
        CHECK(lsgan_discriminator_loss(torch::ones({3}), torch::zeros({3})).item<double>() == 0.0);

        torch::manual_seed(1);
        PatchDiscriminator d(8);
        auto pred = torch::rand({2, 3, 32, 32}, torch::requires_grad());
        auto real = torch::rand({2, 3, 32, 32});
        auto scores = d->forward(real);
        CHECK(scores.size(0) == 2);
        CHECK(scores.size(1) == 1);
        auto adv = adversarial_loss(pred, real, d);
        adv.generator.backward();
        REQUIRE(pred.grad().defined());
        CHECK(pred.grad().abs().sum().item<double>() > 0.0);
        // The discriminator term only sees detached predictions.
        auto pred2 = torch::rand({2, 3, 32, 32}, torch::requires_grad());
        auto adv2 = adversarial_loss(pred2, real, d);
        CHECK_FALSE(adv2.discriminator.grad_fn() == nullptr);
        auto g = torch::autograd::grad({adv2.discriminator}, {pred2}, {}, std::nullopt, false, true);
        CHECK_FALSE(g[0].defined());
    }

    TEST_CASE("smooth loss") {
        auto l = torch::rand({1, 8, 8}, f64());
        CHECK(smooth_loss(torch::full({2, 8, 8}, 0.3, f64()), l, 0.1).item<double>() == 0.0);

        // A colour edge on a luminance edge costs less than one on flat luminance.
        auto ab = torch::zeros({2, 8, 8}, f64());
        ab.narrow(2, 4, 4).fill_(0.5);
        auto flat = torch::zeros({1, 8, 8}, f64());
        auto edge = flat.clone();
        edge.narrow(2, 4, 4).fill_(1.0);
        CHECK(smooth_loss(ab, edge, 0.1).item<double>() < smooth_loss(ab, flat, 0.1).item<double>() * 1e-3);

        torch::manual_seed(2);
        auto rab = torch::rand({2, 5, 7}, f64()), rl = torch::rand({1, 5, 7}, f64());
        CHECK(smooth_loss(rab, rl, 0.2).item<double>() ==
              doctest::Approx(oracle::smooth_loss(oracle::to_image(rab), oracle::to_image(rl), 0.2)).epsilon(1e-12));
        CHECK_THROWS_CATEGORY(smooth_loss(rab, torch::rand({1, 5, 6}, f64()), 0.2), ErrorCategory::Shape);
    }

    TEST_CASE("total loss weighting") {
        LossWeights w;
        LossComponents zero{torch::zeros({}), torch::zeros({}), torch::zeros({}), torch::zeros({}), torch::zeros({})};
        CHECK(total_loss(zero, w).item<double>() == 0.0);
        LossComponents ones{torch::ones({}), torch::ones({}), torch::ones({}), torch::ones({}), torch::ones({})};
        CHECK(total_loss(ones, w).item<double>() == doctest::Approx(0.5 + 0.05 + 3.0 + 0.2 + 4.0));
        CHECK(total_loss(LossComponents{}, w).item<double>() == 0.0);

        auto bad = ones;
        bad.temporal = torch::full({}, std::numeric_limits<double>::quiet_NaN());
        try {
            total_loss(bad, w);
            FAIL("expected NonFinite");
        } catch (const Error& e) {
            CHECK(e.category() == ErrorCategory::NonFinite);
            CHECK(std::string(e.what()).find("temporal") != std::string::npos);
        }

        std::vector<torch::Tensor> xs;
        for (int i = 0; i < 5; ++i) xs.push_back(torch::rand({}, torch::requires_grad()));
        LossComponents c{xs[0] * xs[0], xs[1] * 2, xs[2].exp(), xs[3], xs[4] * xs[4]};
        total_loss(c, w).backward();
        CHECK(xs[0].grad().item<double>() == doctest::Approx(w.l1 * 2 * xs[0].item<double>()));
        CHECK(xs[1].grad().item<double>() == doctest::Approx(w.perceptual * 2));
        CHECK(xs[2].grad().item<double>() == doctest::Approx(w.temporal * std::exp(xs[2].item<double>())));
        CHECK(xs[3].grad().item<double>() == doctest::Approx(w.adversarial));
        CHECK(xs[4].grad().item<double>() == doctest::Approx(w.smooth * 2 * xs[4].item<double>()));
    }
}
