#include "doctest_torch.hpp"

#include "helpers.hpp"
#include "oracles.hpp"
#include "vcolor/ctblock.hpp"

using namespace vcolor;

namespace {

CtBlockOptions opts(std::int64_t c = 8, std::int64_t d = 12, std::int64_t heads = 4) { return {c, d, heads, 2}; }

TokenGrid random_tokens(std::int64_t images, std::int64_t h, std::int64_t w, std::int64_t d) {
    return TokenGrid{torch::randn({images * h * w, d}), images, h, w};
}

}  // namespace

TEST_SUITE("ctblock") {
    TEST_CASE("position embedding at the origin is sin 0 / cos 1") {
        auto pe = position_embedding_3d(2, 3, 4, 12);
        CHECK(pe.sizes() == torch::IntArrayRef({24, 12}));
        auto origin = pe[0];
        for (int i = 0; i < 12; ++i) CHECK(origin[i].item<double>() == (i % 2 == 0 ? 0.0 : 1.0));
        CHECK(pe.abs().max().item<double>() <= 1.0);
    }

    TEST_CASE("a time-only difference only touches the temporal sub-band") {
        const std::int64_t h = 3, w = 4, d = 18;
        auto pe = position_embedding_3d(3, h, w, d);
        auto a = pe[1 * w + 2], b = pe[2 * h * w + 1 * w + 2];  // (0,1,2) vs (2,1,2)
        auto diff = (a - b).abs();
        CHECK(diff.slice(0, 0, d / 3).max().item<double>() > 0.1);
        CHECK(diff.slice(0, d / 3, d).max().item<double>() == 0.0);
    }

    TEST_CASE("embedding similarity decays with spatial distance") {
        // 1x8x8 grid, d_model 96: dot products fall monotonically out to
        // distance 4 and never reach the self-similarity.
        auto pe = position_embedding_3d(1, 8, 8, 96).to(torch::kFloat64);
        for (int axis = 0; axis < 2; ++axis) {
            std::vector<double> sim;
            for (int dist = 0; dist < 8; ++dist) {
                const int idx = axis == 0 ? dist * 8 : dist;
                sim.push_back(pe[0].dot(pe[idx]).item<double>());
            }
            for (int k = 1; k <= 4; ++k) CHECK(sim[k] < sim[k - 1]);
            for (int k = 1; k < 8; ++k) CHECK(sim[k] < sim[0]);
        }
    }

    TEST_CASE("invalid embedding width is rejected") {
        CHECK_THROWS_CATEGORY(position_embedding_3d(1, 2, 2, 10), ErrorCategory::Shape);
    }

    TEST_CASE("attention rows sum to one on a hand-sized instance") {
        torch::manual_seed(0);
        CtBlock block(opts(8, 12, 4));
        auto cnn = torch::randn({1, 8, 2, 2});
        auto tok = random_tokens(1, 2, 2, 12);
        auto pos = position_embedding_3d(1, 2, 2, 12);
        auto [out, weights] = block->forward_with_attention(cnn, tok, pos);
        CHECK(weights.sizes() == torch::IntArrayRef({4, 4, 4}));
        CHECK((weights.sum(-1) - 1).abs().max().item<double>() < 1e-6);
        CHECK(out.first.sizes() == cnn.sizes());
        CHECK(out.second.tokens.sizes() == tok.tokens.sizes());
    }

    TEST_CASE("fused attention path matches the explicit one") {
        torch::manual_seed(1);
        CtBlock block(opts());
        auto cnn = torch::randn({3, 8, 2, 3});
        auto tok = random_tokens(3, 2, 3, 12);
        auto pos = position_embedding_3d(3, 2, 3, 12);
        auto fast = block->forward(cnn, tok, pos);
        auto slow = block->forward_with_attention(cnn, tok, pos).first;
        CHECK(torch::allclose(fast.first, slow.first, 1e-5, 1e-5));
        CHECK(torch::allclose(fast.second.tokens, slow.second.tokens, 1e-5, 1e-5));
    }

    TEST_CASE("zero cross projections reduce the CNN branch to a residual block") {
        torch::manual_seed(2);
        CtBlock block(opts());
        block->zero_cross_projections();
        auto cnn = torch::randn({2, 8, 3, 3});
        auto t1 = random_tokens(2, 3, 3, 12), t2 = random_tokens(2, 3, 3, 12);
        auto pos = position_embedding_3d(2, 3, 3, 12);
        auto a = block->forward(cnn, t1, pos).first;
        auto b = block->forward(cnn, t2, pos).first;
        CHECK(torch::equal(a, b));
        CHECK(torch::allclose(a, block->cnn_only(cnn), 1e-6, 1e-6));
    }

    TEST_CASE("zeroed output projections make the token path the identity") {
        torch::manual_seed(3);
        CtStack stack(CtStackOptions{opts(), 3, true});
        for (std::size_t i = 0; i < stack->size(); ++i) stack->block(i)->zero_token_output_projections();
        auto tok = random_tokens(2, 3, 3, 12);
        auto [cnn, out] = stack->forward(torch::randn({2, 8, 3, 3}), tok);
        CHECK(torch::equal(out.tokens, tok.tokens));
    }

    TEST_CASE("frame permutation with matching embeddings permutes the outputs") {
        torch::manual_seed(4);
        CtBlock block(opts());
        const std::int64_t h = 2, w = 3, hw = h * w;
        auto cnn = torch::randn({3, 8, h, w});
        auto tok = random_tokens(3, h, w, 12);
        auto pos = position_embedding_3d(3, h, w, 12);
        auto perm = torch::tensor({1, 0, 2});
        auto tok_perm = torch::cat({tok.tokens.slice(0, hw, 2 * hw), tok.tokens.slice(0, 0, hw), tok.tokens.slice(0, 2 * hw)});
        auto pos_perm = torch::cat({pos.slice(0, hw, 2 * hw), pos.slice(0, 0, hw), pos.slice(0, 2 * hw)});
        auto a = block->forward(cnn, tok, pos);
        auto b = block->forward(cnn.index_select(0, perm), TokenGrid{tok_perm, 3, h, w}, pos_perm);
        CHECK(torch::allclose(a.first.index_select(0, perm), b.first, 1e-5, 1e-5));
        auto a_tok = a.second.tokens;
        auto a_perm = torch::cat({a_tok.slice(0, hw, 2 * hw), a_tok.slice(0, 0, hw), a_tok.slice(0, 2 * hw)});
        CHECK(torch::allclose(a_perm, b.second.tokens, 1e-5, 1e-5));
    }

    TEST_CASE("layout mismatch is rejected") {
        CtBlock block(opts());
        auto tok = random_tokens(2, 3, 3, 12);
        CHECK_THROWS_CATEGORY(block->forward(torch::randn({2, 8, 3, 4}), tok, torch::Tensor()), ErrorCategory::Shape);
        CHECK_THROWS_CATEGORY(block->forward(torch::randn({2, 6, 3, 3}), tok, torch::Tensor()), ErrorCategory::Shape);
    }

    TEST_CASE("stack: deterministic, shape preserving, CNN-only when ablated") {
        torch::manual_seed(5);
        CtStack stack(CtStackOptions{opts(), 3, true});
        auto cnn = torch::randn({3, 8, 2, 4});
        auto tok = random_tokens(3, 2, 4, 12);
        auto a = stack->forward(cnn, tok);
        auto b = stack->forward(cnn, tok);
        CHECK(torch::equal(a.first, b.first));
        CHECK(torch::equal(a.second.tokens, b.second.tokens));
        CHECK(a.first.sizes() == cnn.sizes());

        stack->transformer_enabled = false;
        auto c = stack->forward(cnn, tok);
        auto expect = cnn;
        for (std::size_t i = 0; i < stack->size(); ++i) expect = stack->block(i)->cnn_only(expect);
        CHECK(torch::equal(c.first, expect));
        CHECK(torch::equal(c.second.tokens, tok.tokens));
    }

    TEST_CASE("fuse: shape, degenerate input, finite-difference gradient") {
        torch::manual_seed(6);
        Fuse fuse(16, 8, 32, 3);
        auto hi = torch::randn({3, 16, 16, 24});
        auto out = fuse->forward(hi, torch::randn({3, 8, 16, 24}));
        CHECK(out.sizes() == torch::IntArrayRef({3, 32, 16, 24}));
        auto zero_low = fuse->forward(hi, torch::zeros({3, 8, 16, 24}));
        CHECK(torch::isfinite(zero_low).all().item<bool>());
        CHECK_THROWS_CATEGORY(fuse->forward(hi, torch::randn({3, 8, 8, 24})), ErrorCategory::Shape);

        Fuse small(4, 2, 4, 1);
        small->to(torch::kFloat64);
        auto x_hi = torch::randn({1, 4, 3, 3}, torch::kFloat64);
        auto x_lo = torch::randn({1, 2, 3, 3}, torch::kFloat64);
        auto probe = torch::randn({1, 4, 3, 3}, torch::kFloat64);
        auto weight = small->named_parameters()["proj.weight"];
        auto loss = (small->forward(x_hi, x_lo) * probe).sum();
        auto analytic = torch::autograd::grad({loss}, {weight})[0];
        auto numeric = oracle::numeric_grad(
            [&](const torch::Tensor& wv) {
                torch::NoGradGuard g;
                auto saved = weight.detach().clone();
                weight.detach().copy_(wv);
                const double v = (small->forward(x_hi, x_lo) * probe).sum().item<double>();
                weight.detach().copy_(saved);
                return v;
            },
            weight);
        CHECK(oracle::rel_err(analytic, numeric) < 1e-3);
    }
}
