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

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace uiprune {

/// Ground-truth positive patches: cells overlapping the element box with
/// positive area.
struct GtMask
{
    std::vector<int> mask;

    std::size_t positives() const;
    bool empty() const { return positives() == 0; }
};

GtMask gt_mask_from_bbox(const PatchGrid& grid, const BBox& bbox);

struct EmptyGroundTruth : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};

/// |top floor(k*M) by score  intersect  GT| / |GT|, ties broken by lower index.
double patch_recall_at_k(std::span<const double> scores, const GtMask& gt, double k_fraction);

/// (1 + rank of the worst-ranked GT patch) / M with 0-based descending ranks.
double full_coverage_budget(std::span<const double> scores, const GtMask& gt);

/// Closed-box containment.
bool hit_test(double x, double y, const BBox& box);

/// Intersection over union; 0 when the union has zero area.
double iou(const BBox& a, const BBox& b);

struct AnnotatedBox
{
    BBox ground_truth;
    BBox detected;
};

/// Keeps records whose ground-truth/detected IoU is at least threshold.
std::vector<AnnotatedBox> filter_by_iou(std::span<const AnnotatedBox> records, double threshold = 0.3);

struct TokenStats
{
    double n_system = 0.0;
    double n_visual = 0.0;
    double n_instruction = 0.0;
    double visual_share = 0.0;
};

/// Counts are reals; averaged counts are accepted.
TokenStats token_share(double n_system, double n_visual, double n_instruction);

struct AttentionCost
{
    double ratio_linear = 1.0;
    double ratio_quadratic = 1.0;
};

AttentionCost attention_cost_estimate(std::size_t seq_len_before, std::size_t seq_len_after);

} // namespace uiprune
