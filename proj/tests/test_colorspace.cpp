#include "doctest_torch.hpp"

#include "helpers.hpp"
#include "vcolor/colorspace.hpp"

using namespace vcolor;

TEST_SUITE("colorspace") {
    TEST_CASE("white and black sit on the achromatic axis") {
        auto white = rgb_to_lab(torch::ones({3, 2, 2}));
        CHECK(white.l.min().item<double>() == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(white.ab.abs().max().item<double>() < 1e-4);
        auto black = rgb_to_lab(torch::zeros({3, 2, 2}));
        CHECK(black.l.max().item<double>() == doctest::Approx(-1.0).epsilon(1e-6));
        CHECK(black.ab.abs().max().item<double>() < 1e-6);
    }

    TEST_CASE("known CIELAB value of sRGB red") {
        // Reference D65 values: L=53.2408, a=80.0925, b=67.2032.
        auto img = torch::zeros({3, 1, 1}, torch::kFloat64);
        img[0] = 1.0;
        auto lab = rgb_to_lab_tensor(img);
        CHECK((lab[0][0][0].item<double>() + 1.0) * 50.0 == doctest::Approx(53.2408).epsilon(1e-4));
        CHECK(lab[1][0][0].item<double>() * kAbScale == doctest::Approx(80.0925).epsilon(1e-4));
        CHECK(lab[2][0][0].item<double>() * kAbScale == doctest::Approx(67.2032).epsilon(1e-4));
    }

    TEST_CASE("lab_to_rgb of the extremes") {
        LabFrame w{torch::ones({2, 2}), torch::zeros({2, 2, 2})};
        CHECK((lab_to_rgb(w) - 1.0).abs().max().item<double>() < 1.0 / 255);
        LabFrame b{-torch::ones({2, 2}), torch::zeros({2, 2, 2})};
        CHECK(lab_to_rgb(b).abs().max().item<double>() < 1.0 / 255);
    }

    TEST_CASE("round trip over an RGB grid stays within 1/255") {
        const int n = 17;
        auto g = torch::linspace(0, 1, n);
        auto r = g.view({n, 1, 1}).expand({n, n, n}).reshape({1, n * n, n});
        auto gg = g.view({1, n, 1}).expand({n, n, n}).reshape({1, n * n, n});
        auto b = g.view({1, 1, n}).expand({n, n, n}).reshape({1, n * n, n});
        auto img = torch::cat({r, gg, b}, 0);
        auto back = lab_to_rgb(rgb_to_lab(img));
        CHECK((back - img).abs().max().item<double>() < 1.0 / 255);
    }

    TEST_CASE("random in-gamut Lab round trips through RGB") {
        torch::manual_seed(3);
        auto rgb = torch::rand({3, 16, 16}, torch::kFloat64);
        auto lab = rgb_to_lab(rgb);
        auto again = rgb_to_lab(lab_to_rgb(lab));
        CHECK((lab_to_rgb(again) - rgb).abs().max().item<double>() < 1.0 / 255);
    }

    TEST_CASE("grey pixels have negligible chroma") {
        auto v = torch::rand({1, 8, 8});
        auto f = rgb_to_lab(v.expand({3, 8, 8}).contiguous());
        CHECK(f.ab.abs().max().item<double>() < 0.01);
    }

    TEST_CASE("grayscale_of keeps l exactly and zeroes ab") {
        auto f = rgb_to_lab(testing::rand_rgb(6, 5));
        auto g = grayscale_of(f);
        CHECK(torch::equal(g.l, f.l));
        CHECK(g.ab.abs().max().item<double>() == 0.0);
        auto gg = grayscale_of(g);
        CHECK(torch::equal(gg.l, g.l));
        CHECK(torch::equal(gg.ab, g.ab));
    }

    TEST_CASE("LabFrame invariants hold for converted images") {
        auto f = rgb_to_lab(testing::rand_rgb(7, 9));
        CHECK_NOTHROW(check_lab_frame(f));
        CHECK(f.l.abs().max().item<double>() <= 1.0);
        CHECK(f.ab.abs().max().item<double>() <= 1.0);
    }

    TEST_CASE("non-finite input is rejected") {
        auto img = testing::rand_rgb(4, 4);
        img[1][2][2] = std::nan("");
        CHECK_THROWS_CATEGORY(rgb_to_lab(img), ErrorCategory::NonFinite);
    }
}
