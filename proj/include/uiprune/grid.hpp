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

#include <cstddef>
#include <span>
#include <vector>

namespace uiprune {

/// RGB image with channel values normalized to [0,1], stored row-major and
/// interleaved (pixel (y,x) channel c lives at (y*width + x)*3 + c).
class ImageBuffer
{
public:
    static constexpr std::size_t kChannels = 3;

    ImageBuffer() = default;
    /// Allocates a zero-filled (black) image.
    ImageBuffer(std::size_t height, std::size_t width);
    /// Takes ownership of interleaved data; validates length and range.
    ImageBuffer(std::size_t height, std::size_t width, std::vector<double> data);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::span<const double> data() const { return data_; }

    double at(std::size_t y, std::size_t x, std::size_t c) const { return data_[(y * width_ + x) * kChannels + c]; }
    /// Writes are clamped into [0,1].
    void set(std::size_t y, std::size_t x, std::size_t c, double v);
    void set_rgb(std::size_t y, std::size_t x, double r, double g, double b);

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> data_;
};

/// Axis-aligned box in pixel units, (x1,y1) top-left and (x2,y2) bottom-right.
struct BBox
{
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    bool valid() const;

    friend bool operator==(const BBox&, const BBox&) = default;
};

/// Intersection of two boxes; empty intersections collapse to a zero-area box.
BBox intersect(const BBox& a, const BBox& b);
double intersection_area(const BBox& a, const BBox& b);

struct GridCoord
{
    std::size_t h = 0;
    std::size_t w = 0;
    std::size_t flat = 0;

    friend bool operator==(const GridCoord&, const GridCoord&) = default;
};

/// Patch geometry for an image of image_h x image_w pixels cut into p x p
/// cells. Residual rows/columns beyond grid_h*p / grid_w*p belong to no cell.
struct PatchGrid
{
    std::size_t patch_size = 1;
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;
    std::size_t image_h = 0;
    std::size_t image_w = 0;

    std::size_t size() const { return grid_h * grid_w; }
    /// Pixel extent covered by cells: [0, grid_w*p] x [0, grid_h*p].
    BBox extent() const;

    friend bool operator==(const PatchGrid&, const PatchGrid&) = default;
};

PatchGrid make_grid(std::size_t image_h, std::size_t image_w, std::size_t patch_size);

/// Cell (i,j) as [j*p, i*p, (j+1)*p, (i+1)*p].
BBox patch_cell(const PatchGrid& grid, std::size_t i, std::size_t j);

GridCoord flat_to_coord(std::size_t flat, const PatchGrid& grid);
std::size_t coord_to_flat(std::size_t h, std::size_t w, const PatchGrid& grid);

/// Throws std::invalid_argument if the image dimensions differ from the grid's.
void check_image_matches(const ImageBuffer& image, const PatchGrid& grid);

/// The p x p block of cell (i,j) in channel-major layout (3 x p x p), i.e. the
/// flattened vec(PP_ij) used for patch distances.
std::vector<double> extract_patch_pixels(const ImageBuffer& image, const PatchGrid& grid, std::size_t i,
                                         std::size_t j);

} // namespace uiprune
