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

#include "uiprune/selector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace uiprune {

std::vector<std::size_t> descending_rank_order(std::span<const double> scores)
{
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

std::size_t budget_count(double ratio, std::size_t count)
{
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(count) + 1e-9));
}

SelectionPlan select_topk(std::span<const double> scores, double ratio)
{
    if (!(ratio > 0.0 && ratio <= 1.0)) {
        throw SelectionError("retention ratio must lie in (0,1]");
    }
    if (scores.empty()) {
        throw SelectionError("cannot select from an empty score vector");
    }
    if (std::any_of(scores.begin(), scores.end(), [](double s) { return std::isnan(s); })) {
        throw SelectionError("scores contain NaN");
    }
    const std::size_t m = scores.size();
    const std::size_t k = std::min(budget_count(ratio, m), m);
    if (k == 0) {
        throw SelectionError("retention ratio " + std::to_string(ratio) + " keeps no tokens out of " +
                             std::to_string(m) + "; use a ratio of at least 1/M");
    }

    const auto order = descending_rank_order(scores);
    std::vector<bool> keep(m, false);
    for (std::size_t r = 0; r < k; ++r) {
        keep[order[r]] = true;
    }

    SelectionPlan plan;
    plan.retention_ratio = ratio;
    plan.k = k;
    plan.threshold = scores[order[k - 1]];
    for (std::size_t i = 0; i < m; ++i) {
        (keep[i] ? plan.kept : plan.dropped).push_back(i);
    }
    return plan;
}

std::vector<std::size_t> DroppedRuns::ends() const
{
    std::vector<std::size_t> out;
    out.reserve(runs.size());
    for (const auto& r : runs) {
        out.push_back(r.last);
    }
    return out;
}

std::size_t DroppedRuns::total() const
{
    std::size_t n = 0;
    for (const auto& r : runs) {
        n += r.length();
    }
    return n;
}

DroppedRuns partition_runs(std::span<const std::size_t> dropped, std::size_t m)
{
    std::vector<std::size_t> sorted(dropped.begin(), dropped.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw std::invalid_argument("dropped indices contain duplicates");
    }
    if (!sorted.empty() && sorted.back() >= m) {
        throw std::out_of_range("dropped index outside sequence of length " + std::to_string(m));
    }
    DroppedRuns out;
    for (std::size_t idx : sorted) {
        if (!out.runs.empty() && out.runs.back().last + 1 == idx) {
            out.runs.back().last = idx;
        } else {
            out.runs.push_back({idx, idx});
        }
    }
    return out;
}

std::optional<PadVariant> parse_variant(std::string_view name)
{
    if (name == "end" || name == "sequence-end") {
        return PadVariant::SequenceEnd;
    }
    if (name == "first" || name == "sequence-first") {
        return PadVariant::SequenceFirst;
    }
    if (name == "middle" || name == "sequence-middle") {
        return PadVariant::SequenceMiddle;
    }
    if (name == "drop" || name == "direct-drop") {
        return PadVariant::DirectDrop;
    }
    if (name == "full" || name == "full-padding") {
        return PadVariant::FullPadding;
    }
    return std::nullopt;
}

std::string_view variant_short_name(PadVariant v)
{
    switch (v) {
    case PadVariant::SequenceEnd:
        return "end";
    case PadVariant::SequenceFirst:
        return "first";
    case PadVariant::SequenceMiddle:
        return "middle";
    case PadVariant::DirectDrop:
        return "drop";
    case PadVariant::FullPadding:
        return "full";
    }
    return "end";
}

std::string_view variant_name(PadVariant v)
{
    switch (v) {
    case PadVariant::SequenceEnd:
        return "sequence-end";
    case PadVariant::SequenceFirst:
        return "sequence-first";
    case PadVariant::SequenceMiddle:
        return "sequence-middle";
    case PadVariant::DirectDrop:
        return "direct-drop";
    case PadVariant::FullPadding:
        return "full-padding";
    }
    return "sequence-end";
}

std::size_t pad_placement(const IndexRun& run, PadVariant variant)
{
    switch (variant) {
    case PadVariant::SequenceFirst:
        return run.first;
    case PadVariant::SequenceMiddle:
        // lower median for even-length runs
        return run.first + (run.length() - 1) / 2;
    default:
        return run.last;
    }
}

TokenSequence pospad_transform(const SelectionPlan& plan, const DroppedRuns& runs, PadVariant variant,
                               const PatchGrid& grid)
{
    const std::size_t m = plan.m();
    if (m != grid.size()) {
        throw std::invalid_argument("plan covers " + std::to_string(m) + " tokens but grid has " +
                                    std::to_string(grid.size()));
    }
    std::vector<bool> is_kept(m, false);
    for (std::size_t i : plan.kept) {
        if (i >= m || is_kept[i]) {
            throw std::invalid_argument("plan has invalid or repeated kept index");
        }
        is_kept[i] = true;
    }
    if (runs.total() != plan.dropped.size()) {
        throw std::invalid_argument("runs do not cover the dropped set");
    }
    for (const auto& run : runs.runs) {
        if (run.last >= m || run.first > run.last) {
            throw std::invalid_argument("run outside sequence");
        }
        for (std::size_t i = run.first; i <= run.last; ++i) {
            if (is_kept[i]) {
                throw std::invalid_argument("run overlaps a kept index");
            }
        }
    }

    std::vector<bool> is_pad(m, false);
    if (variant == PadVariant::FullPadding) {
        for (std::size_t i : plan.dropped) {
            is_pad[i] = true;
        }
    } else if (variant != PadVariant::DirectDrop) {
        for (const auto& run : runs.runs) {
            is_pad[pad_placement(run, variant)] = true;
        }
    }

    TokenSequence seq{m, variant, {}};
    for (std::size_t i = 0; i < m; ++i) {
        if (is_kept[i]) {
            seq.entries.push_back({EntryKind::Patch, i, flat_to_coord(i, grid)});
        } else if (is_pad[i]) {
            seq.entries.push_back({EntryKind::PosPad, i, flat_to_coord(i, grid)});
        }
    }
    return seq;
}

SequenceStats sequence_stats(const TokenSequence& seq)
{
    SequenceStats s;
    for (const auto& e : seq.entries) {
        (e.kind == EntryKind::Patch ? s.kept_count : s.pad_count) += 1;
    }
    s.m_prime = seq.entries.size();
    return s;
}

nlohmann::json to_json(const TokenSequence& seq)
{
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : seq.entries) {
        entries.push_back({{"kind", e.kind == EntryKind::Patch ? "patch" : "pos_pad"},
                           {"index", e.original_index},
                           {"h", e.coord.h},
                           {"w", e.coord.w}});
    }
    return {{"m", seq.m},
            {"m_prime", seq.m_prime()},
            {"variant", std::string(variant_name(seq.variant))},
            {"entries", std::move(entries)}};
}

} // namespace uiprune
