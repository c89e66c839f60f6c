// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "tcd/error.hpp"
#include "tcd/image.hpp"
#include "test_util.hpp"

using namespace tcd;
using tcd::test::fixture;

namespace {

std::vector<std::uint8_t> rgb_at(const ImageBuffer& img, std::uint32_t x, std::uint32_t y) {
    return {img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)};
}

using Px = std::vector<std::uint8_t>;

}  // namespace

TEST_CASE("PNG fixture corners") {
    const ImageBuffer img = load_image(fixture("corners.png"));
    REQUIRE(img.width() == 5);
    REQUIRE(img.height() == 4);
    REQUIRE(img.channels() == 3);
    CHECK(rgb_at(img, 0, 0) == Px{255, 0, 0});
    CHECK(rgb_at(img, 4, 0) == Px{0, 255, 0});
    CHECK(rgb_at(img, 0, 3) == Px{0, 0, 255});
    CHECK(rgb_at(img, 4, 3) == Px{255, 255, 255});
    CHECK(rgb_at(img, 2, 2) == Px{10, 20, 30});
}

TEST_CASE("RGBA PNG keeps its alpha channel") {
    const ImageBuffer img = load_image(fixture("alpha.png"));
    REQUIRE(img.channels() == 4);
    CHECK(img.at(0, 0, 3) == 128);
    CHECK(img.at(2, 1, 0) == 200);
    CHECK(img.at(2, 1, 3) == 0);
}

TEST_CASE("P6 fixture round-trips byte for byte") {
    const auto original = tcd::test::read_bytes(fixture("tiny.ppm"));
    const ImageBuffer img = load_image(fixture("tiny.ppm"));
    REQUIRE(img.width() == 2);
    CHECK(rgb_at(img, 1, 0) == Px{0, 255, 0});
    CHECK(rgb_at(img, 1, 1) == Px{255, 255, 255});

    tcd::test::TempDir dir;
    save_image(img, dir / "copy.ppm");
    const auto saved = tcd::test::read_bytes(dir / "copy.ppm");
    // The fixture carries a header comment; the raster payload must match.
    const std::size_t raster = 2 * 2 * 3;
    REQUIRE(saved.size() >= raster);
    CHECK(std::equal(saved.end() - raster, saved.end(), original.end() - raster));
    CHECK(load_image(dir / "copy.ppm") == img);
}

TEST_CASE("PNG save and load is lossless") {
    tcd::test::TempDir dir;
    for (std::uint32_t channels : {3u, 4u}) {
        std::vector<std::uint8_t> data(7 * 5 * channels);
        for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<std::uint8_t>(i * 37 + 11);
        const ImageBuffer img(7, 5, channels, data);
        save_image(img, dir / "x.png");
        CHECK(load_image(dir / "x.png") == img);
        CHECK(decode_png(encode_png(img)) == img);
    }
}

TEST_CASE("degenerate and unsupported files") {
    tcd::test::TempDir dir;
    tcd::test::write_bytes(dir / "empty.png", {});
    CHECK_THROWS_AS(load_image(dir / "empty.png"), TruncatedError);
    tcd::test::write_bytes(dir / "x.gif", {'G', 'I', 'F', '8', '9', 'a', 0, 0});
    CHECK_THROWS_AS(load_image(dir / "x.gif"), FormatError);
    CHECK_THROWS_AS(load_image(dir / "missing.png"), IoError);

    const std::string p3 = "P3\n1 1\n255\n0 0 0\n";
    CHECK_THROWS_AS(decode_ppm(std::vector<std::uint8_t>(p3.begin(), p3.end())), FormatError);
    const std::string deep = "P6\n1 1\n65535\n\0\0\0\0\0\0";
    CHECK_THROWS_AS(decode_ppm(std::vector<std::uint8_t>(deep.begin(), deep.end())), FormatError);
    const std::string short_raster = "P6\n2 2\n255\nabc";
    CHECK_THROWS_AS(decode_ppm(std::vector<std::uint8_t>(short_raster.begin(), short_raster.end())),
                    TruncatedError);
    const std::string huge = "P6\n100000 100000\n255\n";
    CHECK_THROWS_WITH_AS(decode_ppm(std::vector<std::uint8_t>(huge.begin(), huge.end())),
                         doctest::Contains("overflow"), FormatError);

    auto png = encode_png(ImageBuffer(4, 4, 3, std::uint8_t{9}));
    png.resize(png.size() / 2);
    CHECK_THROWS_AS(decode_png(png), DataError);
}

TEST_CASE("image buffers validate their shape") {
    CHECK_THROWS_AS(ImageBuffer(0, 1, 3, std::vector<std::uint8_t>{}), DimensionError);
    CHECK_THROWS_AS(ImageBuffer(1, 1, 2, std::vector<std::uint8_t>{0, 0}), FormatError);
    CHECK_THROWS_AS(ImageBuffer(2, 1, 3, std::vector<std::uint8_t>{0, 0, 0}), DimensionError);
    CHECK_THROWS_AS(encode_ppm(ImageBuffer(1, 1, 4, std::uint8_t{0})), FormatError);
}
