#include "doctest_torch.hpp"

#include "helpers.hpp"
#include "oracles.hpp"
#include "vcolor/linkage.hpp"

using namespace vcolor;

namespace {

auto f64() { return torch::TensorOptions().dtype(torch::kFloat64); }

TokenGrid grid(const torch::Tensor& t) { return TokenGrid{t, 1, 1, t.size(0)}; }

oracle::Mat query_oracle(Linkage& link, const torch::Tensor& r, const torch::Tensor& info) {
    auto p = link->named_parameters();
    auto x = oracle::add(oracle::to_mat(r), oracle::attention(oracle::to_mat(r), oracle::to_mat(info), oracle::to_mat(info)));
    return oracle::residual_ffn(x, oracle::to_mat(p["ffn1.weight"]), oracle::to_vec(p["ffn1.bias"]),
                                oracle::to_mat(p["ffn2.weight"]), oracle::to_vec(p["ffn2.bias"]));
}

}  // namespace

TEST_SUITE("linkage") {
    TEST_CASE("empty state: query is the identity, store copies") {
        Linkage link(12, 2);
        auto r = torch::randn({6, 12});
        auto hi = link->query(grid(r), LinkageImpl::reset());
        CHECK(hi.tokens.data_ptr() == r.data_ptr());
        auto ho = torch::randn({6, 12});
        auto s = LinkageImpl::store({}, grid(ho), 0);
        REQUIRE_FALSE(s.empty());
        CHECK(torch::equal(*s.info, ho));
        CHECK(s.last_block == 0);
    }

    TEST_CASE("zero information gives a zero attention term") {
        torch::manual_seed(0);
        Linkage link(12, 2);
        auto r = torch::randn({5, 12});
        CHECK(link->attention_term(r, torch::zeros({7, 12})).abs().max().item<double>() == 0.0);
        LinkageState zero{torch::zeros({7, 12}), 0};
        CHECK(torch::allclose(link->query(grid(r), zero).tokens, link->residual_layers(r)));
    }

    TEST_CASE("query and store match brute-force attention") {
        torch::manual_seed(1);
        Linkage link(6, 2);
        link->to(torch::kFloat64);
        for (int rep = 0; rep < 10; ++rep) {
            auto r = torch::randn({4, 6}, f64()), info = torch::randn({4, 6}, f64()), ho = torch::randn({4, 6}, f64());
            auto hi = link->query(grid(r), LinkageState{info, 0});
            CHECK(oracle::max_abs_diff(oracle::to_mat(hi.tokens), query_oracle(link, r, info)) < 1e-6);
            auto s = LinkageImpl::store(LinkageState{info, 0}, grid(ho), 1);
            auto expect = oracle::add(oracle::to_mat(info),
                                      oracle::attention(oracle::to_mat(info), oracle::to_mat(ho), oracle::to_mat(ho)));
            CHECK(oracle::max_abs_diff(oracle::to_mat(*s.info), expect) < 1e-6);
        }
    }

    TEST_CASE("zero hidden state leaves the memory unchanged") {
        auto info = torch::randn({5, 12});
        auto s = LinkageImpl::store(LinkageState{info, 0}, grid(torch::zeros({5, 12})), 1);
        CHECK(torch::equal(*s.info, info));
    }

    TEST_CASE("attention rows are stochastic") {
        auto [out, w] = scaled_attention(torch::randn({9, 12}), torch::randn({4, 12}), torch::randn({4, 12}));
        CHECK((w.sum(1) - 1).abs().max().item<double>() < 1e-5);
    }

    TEST_CASE("memory size does not grow with the video") {
        Linkage link(12, 2);
        LinkageState s;
        for (std::int64_t t = 0; t < 6; ++t) {
            const std::int64_t tokens = (t % 3 + 1) * 8;  // blocks of varying length
            s = LinkageImpl::store(s, grid(torch::randn({tokens, 12})), t);
            CHECK(s.info->sizes() == torch::IntArrayRef({8, 12}));
            CHECK(link->query(grid(torch::randn({tokens, 12})), s).tokens.size(0) == tokens);
        }
    }

    TEST_CASE("reset is idempotent and width mismatch is rejected") {
        auto a = LinkageImpl::reset(), b = LinkageImpl::reset();
        CHECK(a.empty());
        CHECK(b.empty());
        Linkage link(12, 2);
        CHECK_THROWS_CATEGORY(link->query(grid(torch::randn({3, 12})), LinkageState{torch::randn({3, 6}), 0}),
                              ErrorCategory::Shape);
        CHECK_THROWS_CATEGORY(LinkageImpl::store(LinkageState{torch::randn({3, 12}), 0}, grid(torch::randn({3, 6})), 1),
                              ErrorCategory::Shape);
    }
}
