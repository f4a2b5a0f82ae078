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

#include "uiprune/metrics.hpp"

#include "uiprune/selector.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace uiprune {

std::size_t GtMask::positives() const
{
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

GtMask gt_mask_from_bbox(const PatchGrid& grid, const BBox& bbox)
{
    if (!bbox.valid()) {
        throw std::invalid_argument("invalid bounding box");
    }
    GtMask gt;
    gt.mask.reserve(grid.size());
    for (std::size_t i = 0; i < grid.grid_h; ++i) {
        for (std::size_t j = 0; j < grid.grid_w; ++j) {
            gt.mask.push_back(intersection_area(patch_cell(grid, i, j), bbox) > 0.0 ? 1 : 0);
        }
    }
    return gt;
}

namespace {

void check_inputs(std::span<const double> scores, const GtMask& gt)
{
    if (scores.size() != gt.mask.size()) {
        throw std::invalid_argument("score and mask lengths differ");
    }
    if (gt.empty()) {
        throw EmptyGroundTruth("ground-truth mask has no positive patch");
    }
}

} // namespace

double patch_recall_at_k(std::span<const double> scores, const GtMask& gt, double k_fraction)
{
    check_inputs(scores, gt);
    if (!(k_fraction > 0.0 && k_fraction <= 1.0)) {
        throw std::invalid_argument("k fraction must lie in (0,1]");
    }
    const auto order = descending_rank_order(scores);
    const std::size_t budget = std::min(budget_count(k_fraction, scores.size()), scores.size());
    std::size_t hits = 0;
    for (std::size_t r = 0; r < budget; ++r) {
        hits += static_cast<std::size_t>(gt.mask[order[r]] == 1);
    }
    return static_cast<double>(hits) / static_cast<double>(gt.positives());
}

double full_coverage_budget(std::span<const double> scores, const GtMask& gt)
{
    check_inputs(scores, gt);
    const auto order = descending_rank_order(scores);
    std::size_t worst = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (gt.mask[order[r]] == 1) {
            worst = r;
        }
    }
    return static_cast<double>(worst + 1) / static_cast<double>(scores.size());
}

bool hit_test(double x, double y, const BBox& box)
{
    return box.x1 <= x && x <= box.x2 && box.y1 <= y && y <= box.y2;
}

double iou(const BBox& a, const BBox& b)
{
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<AnnotatedBox> filter_by_iou(std::span<const AnnotatedBox> records, double threshold)
{
    std::vector<AnnotatedBox> kept;
    std::copy_if(records.begin(), records.end(), std::back_inserter(kept),
                 [&](const AnnotatedBox& r) { return iou(r.ground_truth, r.detected) >= threshold; });
    return kept;
}

TokenStats token_share(double n_system, double n_visual, double n_instruction)
{
    if (n_system < 0.0 || n_visual < 0.0 || n_instruction < 0.0) {
        throw std::invalid_argument("token counts must be non-negative");
    }
    const double total = n_system + n_visual + n_instruction;
    if (!(total > 0.0)) {
        throw std::invalid_argument("token counts sum to zero");
    }
    return {n_system, n_visual, n_instruction, n_visual / total};
}

AttentionCost attention_cost_estimate(std::size_t seq_len_before, std::size_t seq_len_after)
{
    if (seq_len_before < 1 || seq_len_after < 1) {
        throw std::invalid_argument("sequence lengths must be >= 1");
    }
    const double r = static_cast<double>(seq_len_after) / static_cast<double>(seq_len_before);
    return {r, r * r};
}

} // namespace uiprune
