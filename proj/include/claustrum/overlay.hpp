/*
 *  Copyright 2026 The claustrum-seg Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <algorithm>
#include <csetjmp>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <png.h>

#include "error.hpp"
#include "grid.hpp"
#include "io.hpp"

namespace claustrum {

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct RgbImage {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> pixels;
};

/// Grayscale slice with ground truth in green, prediction in red and their
/// overlap in yellow.
template <class T>
RgbImage render_overlay(const Grid<T>& image, const Mask& truth, const Mask& prediction) {
    if (!truth.same_shape(prediction) || truth.rows() != image.rows() || truth.cols() != image.cols())
        throw ShapeError("overlay: image, truth and prediction shapes differ");
    RgbImage out{image.rows(), image.cols(), std::vector<std::uint8_t>(image.size() * 3)};
    double lo = 0, hi = 0;
    if (image.size()) {
        auto [mn, mx] = std::minmax_element(image.storage().begin(), image.storage().end());
        lo = static_cast<double>(*mn);
        hi = static_cast<double>(*mx);
    }
    const double range = hi > lo ? hi - lo : 1.0;
    for (std::size_t i = 0; i < image.size(); ++i) {
        const auto g = static_cast<std::uint8_t>(std::clamp((static_cast<double>(image.storage()[i]) - lo) / range, 0.0, 1.0) * 255.0);
        std::uint8_t rgb[3] = {g, g, g};
        const bool t = truth.storage()[i] != 0, p = prediction.storage()[i] != 0;
        if (t && p) {
            rgb[0] = 255; rgb[1] = 255; rgb[2] = 0;
        } else if (t) {
            rgb[0] = 0; rgb[1] = 255; rgb[2] = 0;
        } else if (p) {
            rgb[0] = 255; rgb[1] = 0; rgb[2] = 0;
        }
        std::copy(rgb, rgb + 3, out.pixels.begin() + static_cast<long>(i * 3));
    }
    return out;
}

namespace detail {

inline void png_append(png_structp png, png_bytep data, png_size_t len) {
    auto* buf = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    buf->insert(buf->end(), data, data + len);
}

inline void png_noop_flush(png_structp) {}

} // namespace detail

inline std::vector<std::uint8_t> encode_png(const RgbImage& img) {
    if (img.rows == 0 || img.cols == 0 || img.pixels.size() != img.rows * img.cols * 3)
        throw ShapeError("encode_png: bad raster dimensions");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    std::vector<std::uint8_t> buf;
    std::vector<png_bytep> rows(img.rows);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encoding failed");
    }
    png_set_write_fn(png, &buf, detail::png_append, detail::png_noop_flush);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.cols), static_cast<png_uint_32>(img.rows), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    for (std::size_t r = 0; r < img.rows; ++r)
        rows[r] = const_cast<png_bytep>(img.pixels.data() + r * img.cols * 3);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return buf;
}

inline void write_png(const RgbImage& img, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_png(img));
}

/// Decodes an 8-bit RGB PNG (used to check written overlays).
inline RgbImage decode_png(const std::vector<std::uint8_t>& bytes) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) throw IoError("not a readable PNG");
    image.format = PNG_FORMAT_RGB;
    RgbImage out{image.height, image.width, std::vector<std::uint8_t>(PNG_IMAGE_SIZE(image))};
    if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
        png_image_free(&image);
        throw IoError("PNG decode failed");
    }
    return out;
}

} // namespace claustrum
