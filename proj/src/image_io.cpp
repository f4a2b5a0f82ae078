/*
 * Copyright 2026 The uiprune Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "uiprune/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace uiprune {
namespace {

std::uint8_t to_byte(double v)
{
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::filesystem::path temp_path(const std::filesystem::path& path)
{
    auto tmp = path;
    tmp += ".tmp";
    return tmp;
}

// PPM header tokens may be separated by whitespace and '#' comments.
std::string next_token(std::istream& in)
{
    std::string tok;
    int ch = 0;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) {
                return tok;
            }
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

} // namespace

ImageBuffer load_image(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ImageIoError("cannot open image " + path.string());
    }
    std::array<char, 8> sig{};
    in.read(sig.data(), sig.size());
    if (in.gcount() >= 2 && sig[0] == 'P' && sig[1] == '6') {
        return load_ppm(path);
    }
    if (in.gcount() == 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(sig.data()), 0, 8) == 0) {
        return load_png(path);
    }
    throw ImageIoError("unrecognized image format: " + path.string());
}

ImageBuffer load_png(const std::filesystem::path& path)
{
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw ImageIoError("cannot decode PNG " + path.string() + ": " + img.message);
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&img);
        throw ImageIoError("cannot decode PNG " + path.string() + ": " + img.message);
    }
    std::vector<double> data(buf.size());
    for (std::size_t k = 0; k < buf.size(); ++k) {
        data[k] = buf[k] / 255.0;
    }
    return ImageBuffer(img.height, img.width, std::move(data));
}

ImageBuffer load_ppm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ImageIoError("cannot open image " + path.string());
    }
    if (next_token(in) != "P6") {
        throw ImageIoError("not a binary PPM: " + path.string());
    }
    std::size_t width = 0;
    std::size_t height = 0;
    unsigned long maxval = 0;
    try {
        width = std::stoul(next_token(in));
        height = std::stoul(next_token(in));
        maxval = std::stoul(next_token(in));
    } catch (const std::exception&) {
        throw ImageIoError("malformed PPM header: " + path.string());
    }
    if (width == 0 || height == 0 || maxval == 0 || maxval > 65535) {
        throw ImageIoError("unsupported PPM geometry or maxval: " + path.string());
    }
    const std::size_t bytes_per_sample = maxval < 256 ? 1 : 2;
    const std::size_t n = width * height * ImageBuffer::kChannels;
    std::vector<unsigned char> raw(n * bytes_per_sample);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw ImageIoError("truncated PPM payload: " + path.string());
    }
    std::vector<double> data(n);
    const double scale = static_cast<double>(maxval);
    for (std::size_t k = 0; k < n; ++k) {
        const unsigned v = bytes_per_sample == 1 ? raw[k] : (raw[2 * k] << 8U) | raw[2 * k + 1];
        if (v > maxval) {
            throw ImageIoError("PPM sample exceeds maxval: " + path.string());
        }
        data[k] = v / scale;
    }
    return ImageBuffer(height, width, std::move(data));
}

void write_png_rgb(const std::filesystem::path& path, const ImageBuffer& image)
{
    std::vector<std::uint8_t> buf(image.data().size());
    std::transform(image.data().begin(), image.data().end(), buf.begin(), to_byte);

    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width());
    img.height = static_cast<png_uint_32>(image.height());
    img.format = PNG_FORMAT_RGB;
    const auto tmp = temp_path(path);
    if (!png_image_write_to_file(&img, tmp.c_str(), 0, buf.data(), 0, nullptr)) {
        throw ImageIoError("cannot write PNG " + path.string() + ": " + img.message);
    }
    std::filesystem::rename(tmp, path);
}

void write_png_gray(const std::filesystem::path& path, std::size_t height, std::size_t width,
                    const std::vector<std::uint8_t>& pixels)
{
    if (pixels.size() != height * width) {
        throw ImageIoError("grayscale buffer size mismatch");
    }
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(width);
    img.height = static_cast<png_uint_32>(height);
    img.format = PNG_FORMAT_GRAY;
    const auto tmp = temp_path(path);
    if (!png_image_write_to_file(&img, tmp.c_str(), 0, pixels.data(), 0, nullptr)) {
        throw ImageIoError("cannot write PNG " + path.string() + ": " + img.message);
    }
    std::filesystem::rename(tmp, path);
}

void write_ppm(const std::filesystem::path& path, const ImageBuffer& image)
{
    const auto tmp = temp_path(path);
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) {
            throw ImageIoError("cannot write " + path.string());
        }
        out << "P6\n" << image.width() << " " << image.height() << "\n255\n";
        for (double v : image.data()) {
            out.put(static_cast<char>(to_byte(v)));
        }
    }
    std::filesystem::rename(tmp, path);
}

} // namespace uiprune
