// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "tcd/error.hpp"
#include "tcd/watermark.hpp"
#include "test_util.hpp"

using namespace tcd;

namespace {

WatermarkSpec spec_with(ImageBuffer wm, double alpha = kDefaultOpacity) {
    WatermarkSpec s;
    s.image = std::move(wm);
    s.alpha = alpha;
    return s;
}

ImageBuffer random_image(std::mt19937_64& rng, std::uint32_t w, std::uint32_t h, std::uint32_t c) {
    std::vector<std::uint8_t> data(static_cast<std::size_t>(w) * h * c);
    for (auto& v : data) v = static_cast<std::uint8_t>(rng());
    return ImageBuffer(w, h, c, std::move(data));
}

}  // namespace

TEST_CASE("defaults") {
    const WatermarkSpec s;
    CHECK(s.alpha == 0.8);
    CHECK(s.anchor_x == 0.9);
    CHECK(s.anchor_y == 0.9);
    CHECK(s.scale == 1.0);
    CHECK(s.blend == BlendMode::additive);
    CHECK(s.probe_question == "What is the last captcha number in the image?");
    CHECK(s.expected_answer == "8");
}

TEST_CASE("golden 100x100 black base with a 10x10 watermark of 100") {
    const ImageBuffer base(100, 100, 3, std::uint8_t{0});
    const auto spec = spec_with(ImageBuffer(10, 10, 3, std::uint8_t{100}));
    const auto place = place_watermark(100, 100, 10, 10, spec);
    CHECK(place.anchor_x == 90);
    CHECK(place.anchor_y == 90);
    CHECK(place.x0 == 85);
    CHECK(place.x1 == 95);
    CHECK(place.y0 == 85);
    CHECK(place.y1 == 95);
    CHECK(place.shrink_iterations == 0);

    const ImageBuffer out = embed_watermark(base, spec);
    for (std::uint32_t y = 0; y < 100; ++y) {
        for (std::uint32_t x = 0; x < 100; ++x) {
            const std::uint8_t want = (x >= 85 && x < 95 && y >= 85 && y < 95) ? 80 : 0;
            for (std::uint32_t c = 0; c < 3; ++c) REQUIRE(out.at(x, y, c) == want);
        }
    }
}

TEST_CASE("boundary shrink follows the halving rule") {
    WatermarkSpec spec;
    // anchor 18 in a 20px image: 10 -> min(5, 10) = 5 -> min(2, 15) = 2.
    auto p = place_watermark(20, 20, 10, 10, spec);
    CHECK(p.wm_width == 2);
    CHECK(p.wm_height == 2);
    CHECK(p.shrink_iterations == 2);
    CHECK(p.x0 == 17);
    CHECK(p.x1 == 19);

    // anchor 4 in a 5px image: 8 -> max(1, min(4, -3)) = 1.
    p = place_watermark(5, 5, 8, 8, spec);
    CHECK(p.wm_width == 1);
    CHECK(p.x0 == 4);
    CHECK(p.x1 == 5);

    // Only the offending axis shrinks.
    p = place_watermark(100, 20, 10, 10, spec);
    CHECK(p.wm_width == 10);
    CHECK(p.wm_height == 2);
}

TEST_CASE("scale and top-left clipping") {
    WatermarkSpec spec;
    spec.scale = 2.0;
    auto p = place_watermark(200, 200, 10, 10, spec);
    CHECK(p.wm_width == 20);
    CHECK(p.x0 == 170);
    CHECK(p.x1 == 190);

    spec.scale = 1.0;
    spec.anchor_x = spec.anchor_y = 0.01;
    p = place_watermark(100, 100, 10, 10, spec);
    CHECK(p.anchor_x == 1);
    CHECK(p.left == -4);
    CHECK(p.x0 == 0);
    CHECK(p.x1 == 6);

    spec.scale = 0.01;
    p = place_watermark(100, 100, 10, 10, spec);
    CHECK(p.wm_width == 1);
}

TEST_CASE("nearest-neighbour resize samples pixel centres") {
    const ImageBuffer src(2, 1, 3, std::vector<std::uint8_t>{10, 10, 10, 20, 20, 20});
    const ImageBuffer up = resize_nearest(src, 4, 1);
    CHECK(up.at(0, 0, 0) == 10);
    CHECK(up.at(1, 0, 0) == 10);
    CHECK(up.at(2, 0, 0) == 20);
    CHECK(up.at(3, 0, 0) == 20);
    CHECK(resize_nearest(up, 2, 1) == src);
}

TEST_CASE("blending rounds half away from zero and clamps") {
    const ImageBuffer base(1, 1, 3, std::vector<std::uint8_t>{0, 250, 7});
    WatermarkSpec spec = spec_with(ImageBuffer(1, 1, 3, std::vector<std::uint8_t>{1, 100, 3}), 0.5);
    spec.anchor_x = spec.anchor_y = 1.0;
    const ImageBuffer out = embed_watermark(base, spec);
    CHECK(out.at(0, 0, 0) == 1);    // 0.5 -> 1
    CHECK(out.at(0, 0, 1) == 255);  // 300 -> 255
    CHECK(out.at(0, 0, 2) == 9);    // 8.5 -> 9

    spec.blend = BlendMode::convex;
    const ImageBuffer convex = embed_watermark(base, spec);
    CHECK(convex.at(0, 0, 1) == 175);
    CHECK(convex.at(0, 0, 2) == 5);
}

TEST_CASE("RGBA watermark alpha scales the opacity") {
    const ImageBuffer base(4, 4, 3, std::uint8_t{0});
    std::vector<std::uint8_t> px{200, 200, 200, 255, 200, 200, 200, 0};
    WatermarkSpec spec = spec_with(ImageBuffer(2, 1, 4, px), 0.5);
    const auto out = embed_watermark(base, spec);
    const auto p = place_watermark(4, 4, 2, 1, spec);
    CHECK(out.at(p.x0, p.y0, 0) == 100);
    CHECK(out.at(p.x0 + 1, p.y0, 0) == 0);

    CHECK_THROWS_AS(embed_watermark(ImageBuffer(4, 4, 4, std::uint8_t{0}), spec_with(ImageBuffer(2, 2, 3))),
                    FormatError);
    CHECK_NOTHROW(embed_watermark(ImageBuffer(4, 4, 4, std::uint8_t{0}), spec));
}

TEST_CASE("zero opacity is the identity") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 20; ++i) {
        const auto base = random_image(rng, 1 + rng() % 64, 1 + rng() % 64, 3);
        const auto wm = random_image(rng, 1 + rng() % 32, 1 + rng() % 32, 3 + rng() % 2);
        CHECK(embed_watermark(base, spec_with(wm, 0.0)) == base);
    }
}

TEST_CASE("pixels outside the overlay rectangle are untouched") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> frac(0.05, 1.0);
    for (int i = 0; i < 100; ++i) {
        const auto base = random_image(rng, 1 + rng() % 48, 1 + rng() % 48, 3);
        WatermarkSpec spec = spec_with(random_image(rng, 1 + rng() % 40, 1 + rng() % 40, 3), frac(rng));
        spec.anchor_x = frac(rng);
        spec.anchor_y = frac(rng);
        spec.scale = 0.25 + 2.0 * frac(rng);
        const auto out = embed_watermark(base, spec);
        const auto p = place_watermark(base.width(), base.height(), spec.image.width(), spec.image.height(), spec);
        CHECK(p.x1 <= base.width());
        CHECK(p.y1 <= base.height());
        for (std::uint32_t y = 0; y < base.height(); ++y) {
            for (std::uint32_t x = 0; x < base.width(); ++x) {
                if (p.contains(x, y)) continue;
                for (std::uint32_t c = 0; c < 3; ++c) REQUIRE(out.at(x, y, c) == base.at(x, y, c));
            }
        }
    }
}

TEST_CASE("white watermark brightens monotonically with opacity") {
    std::mt19937_64 rng(7);
    const auto base = random_image(rng, 30, 30, 3);
    const ImageBuffer white(8, 8, 3, std::uint8_t{255});
    for (auto blend : {BlendMode::additive, BlendMode::convex}) {
        ImageBuffer prev = base;
        for (int step = 0; step <= 20; ++step) {
            WatermarkSpec spec = spec_with(white, step / 20.0);
            spec.blend = blend;
            const auto out = embed_watermark(base, spec);
            for (std::size_t i = 0; i < out.data().size(); ++i) REQUIRE(out.data()[i] >= prev.data()[i]);
            prev = out;
        }
    }
}

TEST_CASE("spec validation") {
    WatermarkSpec s;
    s.alpha = 1.5;
    CHECK_THROWS_AS(s.validate(), ParameterError);
    s = WatermarkSpec{};
    s.anchor_x = 0.0;
    CHECK_THROWS_AS(s.validate(), ParameterError);
    s = WatermarkSpec{};
    s.scale = 0.0;
    CHECK_THROWS_AS(s.validate(), ParameterError);
    s = WatermarkSpec{};
    s.expected_answer.clear();
    CHECK_THROWS_AS(s.validate(), ParameterError);
    CHECK_THROWS_AS(embed_watermark(ImageBuffer(), spec_with(ImageBuffer(1, 1, 3))), DimensionError);
}

TEST_CASE("CAPTCHA fixture composites into the bottom-right corner") {
    const ImageBuffer captcha = load_image(tcd::test::fixture("captcha_f6ww8.png"));
    REQUIRE(captcha.width() == 60);
    REQUIRE(captcha.height() == 20);
    const ImageBuffer base(336, 336, 3, std::uint8_t{0});
    const auto spec = spec_with(captcha);
    const auto p = place_watermark(336, 336, 60, 20, spec);
    CHECK(p.x0 == 272);
    CHECK(p.x1 == 332);
    CHECK(p.y0 == 292);
    CHECK(p.y1 == 312);
    const auto out = embed_watermark(base, spec);
    for (std::uint32_t y = 0; y < 20; ++y) {
        for (std::uint32_t x = 0; x < 60; ++x) {
            const auto want = static_cast<std::uint8_t>(std::round(0.8 * captcha.at(x, y, 0)));
            REQUIRE(out.at(272 + x, 292 + y, 0) == want);
        }
    }
}
