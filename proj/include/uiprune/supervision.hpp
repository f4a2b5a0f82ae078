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
#include <span>
#include <utility>
#include <vector>

namespace uiprune {

/// Dense per-patch score grid, row-major over (h,w).
class ScoreMap
{
public:
    ScoreMap() = default;
    ScoreMap(std::size_t grid_h, std::size_t grid_w, double fill = 0.0);
    ScoreMap(std::size_t grid_h, std::size_t grid_w, std::vector<double> values);

    std::size_t grid_h() const { return grid_h_; }
    std::size_t grid_w() const { return grid_w_; }
    std::size_t size() const { return values_.size(); }
    std::span<const double> values() const { return values_; }

    double operator()(std::size_t h, std::size_t w) const { return values_[h * grid_w_ + w]; }
    double& operator()(std::size_t h, std::size_t w) { return values_[h * grid_w_ + w]; }
    double operator[](std::size_t flat) const { return values_[flat]; }
    double& operator[](std::size_t flat) { return values_[flat]; }

    bool same_shape(const ScoreMap& o) const { return grid_h_ == o.grid_h_ && grid_w_ == o.grid_w_; }

private:
    std::size_t grid_h_ = 0;
    std::size_t grid_w_ = 0;
    std::vector<double> values_;
};

nlohmann::json to_json(const ScoreMap& map);
ScoreMap score_map_from_json(const nlohmann::json& j);

/// Disjoint-set forest with path compression and union by size. The smaller
/// root is attached under the larger one; on equal sizes the lower index
/// stays root, so roots are reproducible for a fixed union sequence.
class UnionFind
{
public:
    explicit UnionFind(std::size_t n);

    std::size_t size() const { return parent_.size(); }
    std::size_t find(std::size_t a);
    /// Returns true if a and b were in different components.
    bool unite(std::size_t a, std::size_t b);
    /// Size of the component containing a.
    std::size_t component_size(std::size_t a);

private:
    void check(std::size_t a) const;

    std::vector<std::size_t> parent_;
    std::vector<std::size_t> size_;
};

struct FusionConfig
{
    double lambda = 0.8;
    /// Edge threshold in 0-255 pixel units.
    double tau = 2.0;

    void validate() const;
};

/// Per-cell overlap area with bbox divided by p^2. The box is clamped to the
/// grid extent; a zero-area box yields an all-zero map.
ScoreMap bbox_saliency(const PatchGrid& grid, const BBox& bbox);

using PatchEdge = std::pair<std::size_t, std::size_t>;

/// Euclidean distance between vec(PP_a) and vec(PP_b), in 0-255 pixel units.
double patch_distance(const ImageBuffer& image, const PatchGrid& grid, std::size_t a, std::size_t b);

/// Right and down neighbour pairs (raster order) whose patch distance is
/// strictly below tau.
std::vector<PatchEdge> similar_patch_edges(const ImageBuffer& image, const PatchGrid& grid, double tau);

/// Root label per node after uniting every edge, in the given order.
std::vector<std::size_t> components_from_edges(std::size_t node_count, std::span<const PatchEdge> edges);

/// Component weight 1 / max(1, ln(n+1)).
double component_weight(std::size_t component_size);

/// UI-graph saliency: each cell gets the weight of its visually-similar
/// connected component, so large homogeneous regions score low.
ScoreMap uig_saliency(const ImageBuffer& image, const PatchGrid& grid, double tau);

/// lambda * bbox + (1 - lambda) * uig, elementwise.
ScoreMap fuse_supervision(const ScoreMap& s_bbox, const ScoreMap& s_uig, double lambda);

/// Convenience wrapper running all three steps for one record.
ScoreMap build_supervision(const ImageBuffer& image, const PatchGrid& grid, const BBox& bbox,
                           const FusionConfig& config);

} // namespace uiprune
