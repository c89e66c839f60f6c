// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcd/watermark.hpp"

#include <algorithm>
#include <cmath>

#include "tcd/error.hpp"

namespace tcd {

namespace {

constexpr int kMaxShrinkIterations = 32;

// Absorbs representation error in products such as 0.9 * 70.
constexpr double kAnchorSlack = 1e-9;

std::uint32_t anchor_pixel(double fraction, std::uint32_t extent) {
    const auto p = static_cast<std::int64_t>(std::floor(fraction * extent + kAnchorSlack));
    return static_cast<std::uint32_t>(std::clamp<std::int64_t>(p, 0, std::int64_t{extent} - 1));
}

// One step of the boundary loop for a single axis:
// d_w <- min(d_w / 2, d_o - d_w), never below one pixel.
std::int64_t shrink(std::int64_t wm, std::int64_t base) {
    return std::max<std::int64_t>(1, std::min(wm / 2, base - wm));
}

std::uint8_t to_u8(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

}  // namespace

void WatermarkSpec::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in [0, 1]");
    if (!(anchor_x > 0.0 && anchor_x <= 1.0)) throw ParameterError("anchor x fraction must lie in (0, 1]");
    if (!(anchor_y > 0.0 && anchor_y <= 1.0)) throw ParameterError("anchor y fraction must lie in (0, 1]");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ParameterError("scale must be positive");
    if (expected_answer.empty()) throw ParameterError("expected_answer must not be empty");
}

OverlayPlacement place_watermark(std::uint32_t base_width, std::uint32_t base_height,
                                 std::uint32_t wm_width, std::uint32_t wm_height, const WatermarkSpec& spec) {
    spec.validate();
    if (base_width == 0 || base_height == 0 || wm_width == 0 || wm_height == 0) {
        throw DimensionError("watermark placement needs non-empty images");
    }
    OverlayPlacement out;
    out.anchor_x = anchor_pixel(spec.anchor_x, base_width);
    out.anchor_y = anchor_pixel(spec.anchor_y, base_height);

    std::int64_t w = std::max<std::int64_t>(1, std::llround(wm_width * spec.scale));
    std::int64_t h = std::max<std::int64_t>(1, std::llround(wm_height * spec.scale));
    const std::int64_t bw = base_width, bh = base_height;
    const std::int64_t cx = out.anchor_x, cy = out.anchor_y;

    // Centre at the anchor; shrink whichever extent crosses the right or
    // bottom border. Compared in doubled units to keep the halves exact.
    while (2 * cx + w > 2 * bw || 2 * cy + h > 2 * bh) {
        if (++out.shrink_iterations > kMaxShrinkIterations) {
            throw CompositionError("watermark does not fit inside the image after shrinking");
        }
        if (2 * cx + w > 2 * bw) w = shrink(w, bw);
        if (2 * cy + h > 2 * bh) h = shrink(h, bh);
    }

    out.wm_width = static_cast<std::uint32_t>(w);
    out.wm_height = static_cast<std::uint32_t>(h);
    out.left = cx - w / 2;
    out.top = cy - h / 2;
    out.x0 = static_cast<std::uint32_t>(std::max<std::int64_t>(0, out.left));
    out.y0 = static_cast<std::uint32_t>(std::max<std::int64_t>(0, out.top));
    out.x1 = static_cast<std::uint32_t>(std::min(bw, out.left + w));
    out.y1 = static_cast<std::uint32_t>(std::min(bh, out.top + h));
    return out;
}

ImageBuffer resize_nearest(const ImageBuffer& src, std::uint32_t width, std::uint32_t height) {
    if (src.width() == width && src.height() == height) return src;
    ImageBuffer dst(width, height, src.channels());
    for (std::uint32_t y = 0; y < height; ++y) {
        const auto sy = static_cast<std::uint32_t>((2ull * y + 1) * src.height() / (2ull * height));
        for (std::uint32_t x = 0; x < width; ++x) {
            const auto sx = static_cast<std::uint32_t>((2ull * x + 1) * src.width() / (2ull * width));
            for (std::uint32_t c = 0; c < src.channels(); ++c) dst.at(x, y, c) = src.at(sx, sy, c);
        }
    }
    return dst;
}

ImageBuffer embed_watermark(const ImageBuffer& original, const WatermarkSpec& spec) {
    spec.validate();
    if (original.empty() || spec.image.empty()) throw DimensionError("watermark compositing needs two images");
    const bool wm_alpha = spec.image.channels() == 4;
    if (original.channels() == 4 && !wm_alpha) {
        throw FormatError("RGB watermark cannot be composited over an RGBA image");
    }

    const auto place = place_watermark(original.width(), original.height(), spec.image.width(),
                                       spec.image.height(), spec);
    const ImageBuffer wm = resize_nearest(spec.image, place.wm_width, place.wm_height);

    ImageBuffer out = original;
    if (spec.alpha == 0.0) return out;

    for (std::uint32_t y = place.y0; y < place.y1; ++y) {
        const auto wy = static_cast<std::uint32_t>(y - place.top);
        for (std::uint32_t x = place.x0; x < place.x1; ++x) {
            const auto wx = static_cast<std::uint32_t>(x - place.left);
            const double a = wm_alpha ? spec.alpha * (wm.at(wx, wy, 3) / 255.0) : spec.alpha;
            for (std::uint32_t c = 0; c < 3; ++c) {
                const double o = original.at(x, y, c);
                const double w = wm.at(wx, wy, c);
                const double v = spec.blend == BlendMode::additive ? o + a * w : (1.0 - a) * o + a * w;
                out.at(x, y, c) = to_u8(v);
            }
        }
    }
    return out;
}

}  // namespace tcd
