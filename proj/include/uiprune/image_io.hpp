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

#pragma once

#include "uiprune/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace uiprune {

struct ImageIoError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// Decodes PNG (any color type, converted to 8-bit RGB) or binary PPM (P6),
/// chosen by file signature. 8-bit samples are divided by 255.
ImageBuffer load_image(const std::filesystem::path& path);
ImageBuffer load_png(const std::filesystem::path& path);
ImageBuffer load_ppm(const std::filesystem::path& path);

/// Samples are rounded to the nearest 8-bit level.
void write_png_rgb(const std::filesystem::path& path, const ImageBuffer& image);
void write_png_gray(const std::filesystem::path& path, std::size_t height, std::size_t width,
                    const std::vector<std::uint8_t>& pixels);
void write_ppm(const std::filesystem::path& path, const ImageBuffer& image);

} // namespace uiprune
