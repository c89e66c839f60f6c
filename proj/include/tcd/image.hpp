// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace tcd {

/// Row-major 8-bit RGB or RGBA image. (0,0) is the top-left pixel.
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(std::uint32_t width, std::uint32_t height, std::uint32_t channels,
                std::vector<std::uint8_t> data);
    /// Solid fill.
    ImageBuffer(std::uint32_t width, std::uint32_t height, std::uint32_t channels, std::uint8_t value = 0);

    std::uint32_t width() const noexcept { return width_; }
    std::uint32_t height() const noexcept { return height_; }
    std::uint32_t channels() const noexcept { return channels_; }
    std::span<const std::uint8_t> data() const noexcept { return data_; }
    std::span<std::uint8_t> data() noexcept { return data_; }
    bool empty() const noexcept { return data_.empty(); }

    std::uint8_t at(std::uint32_t x, std::uint32_t y, std::uint32_t c) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    std::uint8_t& at(std::uint32_t x, std::uint32_t y, std::uint32_t c) {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

private:
    std::uint32_t width_ = 0;
    std::uint32_t height_ = 0;
    std::uint32_t channels_ = 0;
    std::vector<std::uint8_t> data_;
};

// PNG and binary PPM (P6). The format is chosen from the file contents on
// load and from the extension on save (".ppm" / ".pnm" -> P6, else PNG).
ImageBuffer load_image(const std::filesystem::path& path);
void save_image(const ImageBuffer& img, const std::filesystem::path& path);

ImageBuffer decode_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_ppm(const ImageBuffer& img);
ImageBuffer decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const ImageBuffer& img);

}  // namespace tcd
