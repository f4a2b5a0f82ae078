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

#include <nlohmann/json.hpp>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace uiprune {

/// Indices sorted by descending score; equal scores keep ascending index.
std::vector<std::size_t> descending_rank_order(std::span<const double> scores);

/// floor(ratio * count), with a small tolerance so ratios such as 0.29 on
/// 100 tokens give 29 rather than 28.
std::size_t budget_count(double ratio, std::size_t count);

struct SelectionPlan
{
    double retention_ratio = 1.0;
    std::size_t k = 0;
    double threshold = 0.0; // gamma, the K-th largest score
    std::vector<std::size_t> kept;
    std::vector<std::size_t> dropped;

    std::size_t m() const { return kept.size() + dropped.size(); }
};

struct SelectionError : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};

/// Keeps exactly K = floor(rM) indices: those with score above gamma plus
/// the lowest-index ties at gamma. Throws SelectionError when K = 0.
SelectionPlan select_topk(std::span<const double> scores, double ratio);

/// Maximal run of consecutive dropped indices, [first, last] inclusive.
struct IndexRun
{
    std::size_t first = 0;
    std::size_t last = 0;

    std::size_t length() const { return last - first + 1; }
    friend bool operator==(const IndexRun&, const IndexRun&) = default;
};

struct DroppedRuns
{
    std::vector<IndexRun> runs;

    std::size_t count() const { return runs.size(); }
    std::vector<std::size_t> ends() const;
    std::size_t total() const;
};

/// Partitions sorted or unsorted dropped indices (all < m) into maximal runs
/// in raster order; runs may cross row boundaries.
DroppedRuns partition_runs(std::span<const std::size_t> dropped, std::size_t m);

enum class PadVariant { SequenceEnd, SequenceFirst, SequenceMiddle, DirectDrop, FullPadding };

/// CLI short names: end, first, middle, drop, full.
std::optional<PadVariant> parse_variant(std::string_view name);
std::string_view variant_short_name(PadVariant v);
/// Long names used in serialized traces.
std::string_view variant_name(PadVariant v);

enum class EntryKind { Patch, PosPad };

struct SequenceEntry
{
    EntryKind kind = EntryKind::Patch;
    std::size_t original_index = 0;
    GridCoord coord;

    friend bool operator==(const SequenceEntry&, const SequenceEntry&) = default;
};

struct TokenSequence
{
    std::size_t m = 0;
    PadVariant variant = PadVariant::SequenceEnd;
    std::vector<SequenceEntry> entries;

    std::size_t m_prime() const { return entries.size(); }
};

/// Placement index of the marker for one run under a padded variant.
std::size_t pad_placement(const IndexRun& run, PadVariant variant);

/// Builds the visual token sequence after selection. Kept patches keep
/// their original index and (h,w); every padded run contributes markers that
/// inherit the (h,w) of their placement index.
TokenSequence pospad_transform(const SelectionPlan& plan, const DroppedRuns& runs, PadVariant variant,
                               const PatchGrid& grid);

struct SequenceStats
{
    std::size_t kept_count = 0;
    std::size_t pad_count = 0;
    std::size_t m_prime = 0;
};

SequenceStats sequence_stats(const TokenSequence& seq);

/// {m, m_prime, variant, entries: [{kind, index, h, w}]}
nlohmann::json to_json(const TokenSequence& seq);

} // namespace uiprune
