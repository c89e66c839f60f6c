// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "tcd/image.hpp"

namespace tcd {

inline constexpr double kDefaultOpacity = 0.8;
inline constexpr double kDefaultAnchor = 0.9;
inline constexpr std::string_view kDefaultProbeQuestion = "What is the last captcha number in the image?";
inline constexpr std::string_view kDefaultExpectedAnswer = "8";

enum class BlendMode {
    additive,  // out = orig + alpha * wm, clamped
    convex,    // out = (1 - alpha) * orig + alpha * wm
};

struct WatermarkSpec {
    ImageBuffer image;
    double alpha = kDefaultOpacity;
    double anchor_x = kDefaultAnchor;
    double anchor_y = kDefaultAnchor;
    double scale = 1.0;
    BlendMode blend = BlendMode::additive;
    std::string probe_question{kDefaultProbeQuestion};
    std::string expected_answer{kDefaultExpectedAnswer};

    /// Throws ParameterError naming the first invalid field. Does not require
    /// `image` to be loaded.
    void validate() const;
};

/// Resolved watermark placement inside a base image. The rectangle is
/// already clipped to the image; `wm_width`/`wm_height` are the resized
/// watermark extents before clipping.
struct OverlayPlacement {
    std::uint32_t anchor_x = 0;
    std::uint32_t anchor_y = 0;
    std::uint32_t wm_width = 0;
    std::uint32_t wm_height = 0;
    std::int64_t left = 0;  // unclipped top-left of the watermark
    std::int64_t top = 0;
    std::uint32_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // clipped, half-open
    int shrink_iterations = 0;

    bool contains(std::uint32_t x, std::uint32_t y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

OverlayPlacement place_watermark(std::uint32_t base_width, std::uint32_t base_height,
                                 std::uint32_t wm_width, std::uint32_t wm_height, const WatermarkSpec& spec);

/// Nearest-neighbour resample, pixel-centre aligned.
ImageBuffer resize_nearest(const ImageBuffer& src, std::uint32_t width, std::uint32_t height);

ImageBuffer embed_watermark(const ImageBuffer& original, const WatermarkSpec& spec);

}  // namespace tcd
