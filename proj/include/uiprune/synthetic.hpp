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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace uiprune {

// Seeded toy screenshots: a flat light background with a few solid colour
// widgets. The instruction names the colour of exactly one widget, whose
// cell-aligned box is the target.

struct NamedColor
{
    const char* name;
    double r, g, b;
};

inline constexpr std::array<NamedColor, 8> kSyntheticPalette{{
    {"red", 0.90, 0.10, 0.10},
    {"green", 0.10, 0.75, 0.20},
    {"blue", 0.15, 0.25, 0.90},
    {"yellow", 0.95, 0.85, 0.10},
    {"magenta", 0.85, 0.15, 0.80},
    {"cyan", 0.10, 0.80, 0.85},
    {"orange", 0.95, 0.55, 0.05},
    {"purple", 0.45, 0.15, 0.65},
}};

struct SyntheticOptions
{
    std::size_t grid_h = 8;
    std::size_t grid_w = 8;
    std::size_t patch_size = 4;
    std::size_t distractors = 3;
    /// Widget side length in cells is drawn from [1, max_widget_cells].
    std::size_t max_widget_cells = 3;
};

struct SyntheticRecord
{
    ImageBuffer image;
    std::string instruction;
    BBox bbox;
};

std::vector<SyntheticRecord> make_synthetic_dataset(std::size_t count, std::uint64_t seed,
                                                    const SyntheticOptions& options = {});

} // namespace uiprune
