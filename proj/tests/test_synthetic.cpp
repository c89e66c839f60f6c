// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "tcd/error.hpp"
#include "tcd/synth_fixtures.hpp"
#include "tcd/synthetic_model.hpp"

using namespace tcd;

namespace {

SyntheticModelConfig small_config() {
    SyntheticModelConfig c;
    c.seed = 7;
    c.num_layers = 6;
    c.vocab = Vocabulary::with_angle_specials({"<s>", "</s>", "a", "b", "c"});
    return c;
}

DecodeContext ctx(std::string question, std::vector<TokenId> prefix = {}) {
    return DecodeContext{"x", nullptr, std::move(question), std::move(prefix)};
}

}  // namespace

TEST_CASE("base values match frozen splitmix64 outputs") {
    CHECK(synthetic_base_value(0, 0, 1, 0) == -0.6295928008245082);
    CHECK(synthetic_base_value(7, 0, 1, 0) == -0.9342101762492616);
    CHECK(synthetic_base_value(7, 3, 32, 15) == -0.3093138872384249);
    CHECK(synthetic_base_value(123456789, 1, 5, 66) == -0.3048225740899184);
}

TEST_CASE("base values stay in range and differ across keys") {
    double lo = 0.0, hi = 0.0;
    for (std::uint32_t step = 0; step < 4; ++step) {
        for (std::size_t l = 1; l <= 20; ++l) {
            for (TokenId t = 0; t < 50; ++t) {
                const double v = synthetic_base_value(3, step, l, t);
                REQUIRE(v >= -2.0);
                REQUIRE(v <= 2.0);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    }
    CHECK(lo < -1.0);
    CHECK(hi > 1.0);
    CHECK(synthetic_base_value(3, 0, 1, 0) != synthetic_base_value(4, 0, 1, 0));
    CHECK(synthetic_base_value(3, 0, 1, 0) != synthetic_base_value(3, 1, 1, 0));
}

TEST_CASE("steps are deterministic and scaled") {
    auto c = small_config();
    const SyntheticModel m(c);
    const auto s = m.step(ctx("q", {2}));
    CHECK(s == m.step(ctx("q", {2})));
    CHECK(s.step_index() == 1);
    CHECK(s.row(3)[4] == static_cast<float>(0.5 * synthetic_base_value(7, 1, 3, 4)));
    c.base_scale = 0.0;
    const auto flat = SyntheticModel(c).step(ctx("q"));
    for (float v : flat.data()) CHECK(v == 0.0f);
}

TEST_CASE("injections apply from their layer upward") {
    auto c = small_config();
    c.base_scale = 0.0;
    c.injections.push_back({4, 3, 5.0, "dog", std::nullopt});
    const SyntheticModel m(c);
    const auto hit = m.step(ctx("is there a dog?"));
    for (std::size_t l = 1; l <= 6; ++l) CHECK(hit.row(l)[3] == (l >= 4 ? 5.0f : 0.0f));
    const auto miss = m.step(ctx("is there a cat?"));
    for (float v : miss.data()) CHECK(v == 0.0f);
}

TEST_CASE("step-limited injections and prior biases") {
    auto c = small_config();
    c.base_scale = 0.0;
    c.injections.push_back({2, 2, 1.0, "", 1});
    c.prior_bias.push_back({4, -3.0, std::nullopt});
    SUBCASE("mature-only prior") {
        const SyntheticModel m(c);
        const auto s0 = m.step(ctx("q"));
        CHECK(s0.row(6)[2] == 0.0f);
        CHECK(s0.row(6)[4] == -3.0f);
        CHECK(s0.row(5)[4] == 0.0f);
        const auto s1 = m.step(ctx("q", {0}));
        CHECK(s1.row(2)[2] == 1.0f);
        CHECK(s1.row(1)[2] == 0.0f);
    }
    SUBCASE("deep prior") {
        c.prior_depth = 3;
        const auto s = SyntheticModel(c).step(ctx("q"));
        CHECK(s.row(2)[4] == 0.0f);
        CHECK(s.row(3)[4] == -3.0f);
    }
}

TEST_CASE("configuration is validated") {
    auto c = small_config();
    c.num_layers = 1;
    CHECK_THROWS_AS(SyntheticModel{c}, ConfigError);
    c = small_config();
    c.injections.push_back({7, 0, 1.0, "", std::nullopt});
    CHECK_THROWS_WITH_AS(SyntheticModel{c}, doctest::Contains("injections.layer"), ConfigError);
    c = small_config();
    c.injections.push_back({1, 9, 1.0, "", std::nullopt});
    CHECK_THROWS_AS(SyntheticModel{c}, DomainError);
    c = small_config();
    c.prior_depth = 9;
    CHECK_THROWS_AS(SyntheticModel{c}, ConfigError);
    c = small_config();
    c.base_scale = -1.0;
    CHECK_THROWS_AS(SyntheticModel{c}, ConfigError);
    CHECK_THROWS_AS(SyntheticModel(small_config()).step(ctx("q", {5})), DomainError);
}

TEST_CASE("fixture vocabulary layout") {
    const auto v = synthetic_vocabulary();
    CHECK(v.size() == 67);
    CHECK(v.find("8") == TokenId{15});
    CHECK(v.find("yes") == TokenId{3});
    CHECK(v.find("</s>") == TokenId{1});
    CHECK(v.special_ids() == std::vector<TokenId>{0, 1, 2});
    CHECK(synthetic_objects().size() == 16);
}
