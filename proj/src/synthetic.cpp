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

#include "uiprune/synthetic.hpp"

#include "uiprune/nn.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace uiprune {
namespace {

struct CellRect
{
    std::size_t row, col, h, w;

    bool overlaps(const CellRect& o) const
    {
        return row < o.row + o.h && o.row < row + h && col < o.col + o.w && o.col < col + w;
    }
};

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi)
{
    return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

CellRect random_rect(std::mt19937_64& rng, const SyntheticOptions& o)
{
    CellRect r{};
    r.h = pick(rng, 1, o.max_widget_cells);
    r.w = pick(rng, 1, o.max_widget_cells);
    r.row = pick(rng, 0, o.grid_h - r.h);
    r.col = pick(rng, 0, o.grid_w - r.w);
    return r;
}

void paint(ImageBuffer& img, const CellRect& r, std::size_t p, const NamedColor& c)
{
    for (std::size_t y = r.row * p; y < (r.row + r.h) * p; ++y) {
        for (std::size_t x = r.col * p; x < (r.col + r.w) * p; ++x) {
            img.set_rgb(y, x, c.r, c.g, c.b);
        }
    }
}

} // namespace

std::vector<SyntheticRecord> make_synthetic_dataset(std::size_t count, std::uint64_t seed,
                                                    const SyntheticOptions& options)
{
    if (options.max_widget_cells < 1 || options.max_widget_cells > std::min(options.grid_h, options.grid_w)) {
        throw std::invalid_argument("widget size does not fit the grid");
    }
    if (options.distractors + 1 > kSyntheticPalette.size()) {
        throw std::invalid_argument("not enough palette colours for the requested distractors");
    }
    std::mt19937_64 rng(seed);
    const std::size_t p = options.patch_size;
    std::vector<SyntheticRecord> out;
    out.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
        ImageBuffer img(options.grid_h * p, options.grid_w * p);
        for (std::size_t y = 0; y < img.height(); ++y) {
            for (std::size_t x = 0; x < img.width(); ++x) {
                img.set_rgb(y, x, 0.94, 0.94, 0.94);
            }
        }

        std::array<std::size_t, kSyntheticPalette.size()> colors{};
        std::iota(colors.begin(), colors.end(), std::size_t{0});
        std::shuffle(colors.begin(), colors.end(), rng);

        std::vector<CellRect> placed;
        for (std::size_t w = 0; w <= options.distractors; ++w) {
            CellRect r = random_rect(rng, options);
            for (int attempt = 0; attempt < 64; ++attempt) {
                const bool clash =
                    std::any_of(placed.begin(), placed.end(), [&](const CellRect& o) { return o.overlaps(r); });
                if (!clash) {
                    break;
                }
                r = random_rect(rng, options);
            }
            const bool clash =
                std::any_of(placed.begin(), placed.end(), [&](const CellRect& o) { return o.overlaps(r); });
            if (clash && w > 0) {
                continue; // crowded grid: fewer distractors
            }
            placed.push_back(r);
            paint(img, r, p, kSyntheticPalette[colors[w]]);
        }

        // The first widget placed is the target.
        const CellRect& t = placed.front();
        const auto& color = kSyntheticPalette[colors[0]];
        SyntheticRecord rec{std::move(img), std::string("click ") + color.name + " button",
                            BBox{static_cast<double>(t.col * p), static_cast<double>(t.row * p),
                                 static_cast<double>((t.col + t.w) * p), static_cast<double>((t.row + t.h) * p)}};
        out.push_back(std::move(rec));
    }
    return out;
}

} // namespace uiprune
