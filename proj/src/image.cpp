// Copyright 2026 The TCD Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcd/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "tcd/error.hpp"

namespace tcd {

namespace {

// Anything above this is treated as a corrupt or hostile header.
constexpr std::uint64_t kMaxPixels = std::uint64_t{1} << 28;

void check_dims(std::uint64_t w, std::uint64_t h, std::uint64_t c) {
    if (w == 0 || h == 0) throw FormatError("image dimensions must be at least 1x1");
    if (w > 0xFFFFFFFFull || h > 0xFFFFFFFFull || w * h > kMaxPixels || w * h * c > kMaxPixels * 4) {
        throw FormatError("image dimension overflow: " + std::to_string(w) + "x" + std::to_string(h));
    }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to '" + path.string() + "'");
}

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

bool is_png(std::span<const std::uint8_t> b) {
    return b.size() >= 8 && std::equal(b.begin(), b.begin() + 8, std::begin(kPngSignature));
}

class PpmHeaderReader {
public:
    explicit PpmHeaderReader(std::span<const std::uint8_t> b) : bytes_(b) {}

    std::uint64_t next_uint() {
        skip_space_and_comments();
        if (pos_ >= bytes_.size()) throw TruncatedError("truncated PPM header");
        if (!std::isdigit(bytes_[pos_])) throw FormatError("malformed PPM header");
        std::uint64_t v = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_++] - '0');
            if (v > 0xFFFFFFFFull) throw FormatError("image dimension overflow in PPM header");
        }
        return v;
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t raster_offset() {
        if (pos_ >= bytes_.size()) throw TruncatedError("truncated PPM header");
        if (!std::isspace(bytes_[pos_])) throw FormatError("malformed PPM header");
        return pos_ + 1;
    }

    void skip(std::size_t n) { pos_ += n; }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

ImageBuffer::ImageBuffer(std::uint32_t width, std::uint32_t height, std::uint32_t channels,
                         std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    if (width == 0 || height == 0) throw DimensionError("image width and height must be >= 1");
    if (channels != 3 && channels != 4) throw FormatError("image must have 3 or 4 channels");
    if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
        throw DimensionError("image data length does not match width*height*channels");
    }
}

ImageBuffer::ImageBuffer(std::uint32_t width, std::uint32_t height, std::uint32_t channels, std::uint8_t value)
    : ImageBuffer(width, height, channels,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * channels, value)) {}

ImageBuffer decode_ppm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2) throw TruncatedError("truncated image file");
    if (bytes[0] != 'P' || bytes[1] != '6') throw FormatError("unsupported PPM variant (only P6)");
    PpmHeaderReader reader(bytes);
    reader.skip(2);
    const auto w = reader.next_uint();
    const auto h = reader.next_uint();
    const auto maxval = reader.next_uint();
    if (maxval != 255) throw FormatError("unsupported PPM maxval " + std::to_string(maxval));
    check_dims(w, h, 3);
    const std::size_t off = reader.raster_offset();
    const std::size_t need = static_cast<std::size_t>(w * h * 3);
    if (bytes.size() - off < need) throw TruncatedError("truncated PPM raster");
    std::vector<std::uint8_t> data(bytes.begin() + static_cast<std::ptrdiff_t>(off),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(off + need));
    return ImageBuffer(static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(h), 3, std::move(data));
}

std::vector<std::uint8_t> encode_ppm(const ImageBuffer& img) {
    if (img.channels() != 3) throw FormatError("PPM output needs an RGB image");
    const std::string header =
        "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.data().begin(), img.data().end());
    return out;
}

ImageBuffer decode_png(std::span<const std::uint8_t> bytes) {
    if (!is_png(bytes)) throw FormatError("not a PNG stream");
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        std::string msg = image.message;
        png_image_free(&image);
        throw FormatError("PNG header: " + msg);
    }
    const bool alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
    image.format = alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
    const std::uint32_t channels = alpha ? 4 : 3;
    try {
        check_dims(image.width, image.height, channels);
    } catch (...) {
        png_image_free(&image);
        throw;
    }
    std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, data.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        // libpng reports a short stream as a read error; surface it as truncation.
        if (msg.find("EOF") != std::string::npos || msg.find("end") != std::string::npos ||
            msg.find("short") != std::string::npos) {
            throw TruncatedError("truncated PNG: " + msg);
        }
        throw FormatError("PNG decode: " + msg);
    }
    return ImageBuffer(image.width, image.height, channels, std::move(data));
}

std::vector<std::uint8_t> encode_png(const ImageBuffer& img) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = img.width();
    image.height = img.height();
    image.format = img.channels() == 4 ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(image, size, 0, img.data().data(), 0, nullptr)) {
        throw FormatError(std::string("PNG encode: ") + image.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.data().data(), 0, nullptr)) {
        throw FormatError(std::string("PNG encode: ") + image.message);
    }
    out.resize(size);
    return out;
}

ImageBuffer load_image(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    if (bytes.empty()) throw TruncatedError("'" + path.string() + "' is empty");
    if (is_png(bytes)) return decode_png(bytes);
    if (bytes[0] == 'P') return decode_ppm(bytes);
    if (bytes.size() < 8 && bytes[0] == 0x89) throw TruncatedError("truncated PNG signature");
    throw FormatError("'" + path.string() + "': unsupported image format");
}

void save_image(const ImageBuffer& img, const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".ppm" || ext == ".pnm") {
        write_file(path, encode_ppm(img));
    } else {
        write_file(path, encode_png(img));
    }
}

}  // namespace tcd
