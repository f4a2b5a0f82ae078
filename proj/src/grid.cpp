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

#include "uiprune/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace uiprune {

ImageBuffer::ImageBuffer(std::size_t height, std::size_t width)
    : height_(height), width_(width), data_(height * width * kChannels, 0.0)
{
}

ImageBuffer::ImageBuffer(std::size_t height, std::size_t width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data))
{
    if (data_.size() != height_ * width_ * kChannels) {
        throw std::invalid_argument("image data length " + std::to_string(data_.size()) + " does not match " +
                                    std::to_string(height_) + "x" + std::to_string(width_) + "x3");
    }
    for (double v : data_) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("image values must lie in [0,1]");
        }
    }
}

void ImageBuffer::set(std::size_t y, std::size_t x, std::size_t c, double v)
{
    data_[(y * width_ + x) * kChannels + c] = std::clamp(v, 0.0, 1.0);
}

void ImageBuffer::set_rgb(std::size_t y, std::size_t x, double r, double g, double b)
{
    set(y, x, 0, r);
    set(y, x, 1, g);
    set(y, x, 2, b);
}

bool BBox::valid() const
{
    const bool finite = std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2);
    return finite && x1 >= 0.0 && y1 >= 0.0 && x1 <= x2 && y1 <= y2;
}

BBox intersect(const BBox& a, const BBox& b)
{
    BBox r{std::max(a.x1, b.x1), std::max(a.y1, b.y1), std::min(a.x2, b.x2), std::min(a.y2, b.y2)};
    if (r.x2 < r.x1) {
        r.x2 = r.x1;
    }
    if (r.y2 < r.y1) {
        r.y2 = r.y1;
    }
    return r;
}

double intersection_area(const BBox& a, const BBox& b)
{
    const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

BBox PatchGrid::extent() const
{
    return {0.0, 0.0, static_cast<double>(grid_w * patch_size), static_cast<double>(grid_h * patch_size)};
}

PatchGrid make_grid(std::size_t image_h, std::size_t image_w, std::size_t patch_size)
{
    if (patch_size < 1) {
        throw std::invalid_argument("patch size must be >= 1");
    }
    if (image_h < patch_size || image_w < patch_size) {
        throw std::invalid_argument("image " + std::to_string(image_h) + "x" + std::to_string(image_w) +
                                    " is smaller than patch size " + std::to_string(patch_size));
    }
    return PatchGrid{patch_size, image_h / patch_size, image_w / patch_size, image_h, image_w};
}

BBox patch_cell(const PatchGrid& grid, std::size_t i, std::size_t j)
{
    if (i >= grid.grid_h || j >= grid.grid_w) {
        throw std::out_of_range("cell (" + std::to_string(i) + "," + std::to_string(j) + ") outside grid");
    }
    const auto p = static_cast<double>(grid.patch_size);
    return {static_cast<double>(j) * p, static_cast<double>(i) * p, static_cast<double>(j + 1) * p,
            static_cast<double>(i + 1) * p};
}

GridCoord flat_to_coord(std::size_t flat, const PatchGrid& grid)
{
    if (flat >= grid.size()) {
        throw std::out_of_range("flat index " + std::to_string(flat) + " outside grid of " +
                                std::to_string(grid.size()));
    }
    return {flat / grid.grid_w, flat % grid.grid_w, flat};
}

std::size_t coord_to_flat(std::size_t h, std::size_t w, const PatchGrid& grid)
{
    if (h >= grid.grid_h || w >= grid.grid_w) {
        throw std::out_of_range("coordinate outside grid");
    }
    return h * grid.grid_w + w;
}

void check_image_matches(const ImageBuffer& image, const PatchGrid& grid)
{
    if (image.height() != grid.image_h || image.width() != grid.image_w) {
        throw std::invalid_argument("image is " + std::to_string(image.height()) + "x" +
                                    std::to_string(image.width()) + " but grid expects " +
                                    std::to_string(grid.image_h) + "x" + std::to_string(grid.image_w));
    }
}

std::vector<double> extract_patch_pixels(const ImageBuffer& image, const PatchGrid& grid, std::size_t i,
                                         std::size_t j)
{
    check_image_matches(image, grid);
    if (i >= grid.grid_h || j >= grid.grid_w) {
        throw std::out_of_range("cell outside grid");
    }
    const std::size_t p = grid.patch_size;
    std::vector<double> out(ImageBuffer::kChannels * p * p);
    for (std::size_t c = 0; c < ImageBuffer::kChannels; ++c) {
        for (std::size_t dy = 0; dy < p; ++dy) {
            for (std::size_t dx = 0; dx < p; ++dx) {
                out[(c * p + dy) * p + dx] = image.at(i * p + dy, j * p + dx, c);
            }
        }
    }
    return out;
}

} // namespace uiprune
