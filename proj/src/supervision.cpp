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

#include "uiprune/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace uiprune {

ScoreMap::ScoreMap(std::size_t grid_h, std::size_t grid_w, double fill)
    : grid_h_(grid_h), grid_w_(grid_w), values_(grid_h * grid_w, fill)
{
}

ScoreMap::ScoreMap(std::size_t grid_h, std::size_t grid_w, std::vector<double> values)
    : grid_h_(grid_h), grid_w_(grid_w), values_(std::move(values))
{
    if (values_.size() != grid_h_ * grid_w_) {
        throw std::invalid_argument("score map has " + std::to_string(values_.size()) + " values for a " +
                                    std::to_string(grid_h_) + "x" + std::to_string(grid_w_) + " grid");
    }
}

nlohmann::json to_json(const ScoreMap& map)
{
    return {{"grid_h", map.grid_h()},
            {"grid_w", map.grid_w()},
            {"values", std::vector<double>(map.values().begin(), map.values().end())}};
}

ScoreMap score_map_from_json(const nlohmann::json& j)
{
    return ScoreMap(j.at("grid_h").get<std::size_t>(), j.at("grid_w").get<std::size_t>(),
                    j.at("values").get<std::vector<double>>());
}

UnionFind::UnionFind(std::size_t n) : parent_(n), size_(n, 1)
{
    for (std::size_t k = 0; k < n; ++k) {
        parent_[k] = k;
    }
}

void UnionFind::check(std::size_t a) const
{
    if (a >= parent_.size()) {
        throw std::out_of_range("union-find node " + std::to_string(a) + " out of range");
    }
}

std::size_t UnionFind::find(std::size_t a)
{
    check(a);
    std::size_t root = a;
    while (parent_[root] != root) {
        root = parent_[root];
    }
    while (parent_[a] != root) {
        const std::size_t next = parent_[a];
        parent_[a] = root;
        a = next;
    }
    return root;
}

bool UnionFind::unite(std::size_t a, std::size_t b)
{
    std::size_t ra = find(a);
    std::size_t rb = find(b);
    if (ra == rb) {
        return false;
    }
    if (size_[ra] < size_[rb] || (size_[ra] == size_[rb] && rb < ra)) {
        std::swap(ra, rb);
    }
    parent_[rb] = ra;
    size_[ra] += size_[rb];
    return true;
}

std::size_t UnionFind::component_size(std::size_t a)
{
    return size_[find(a)];
}

void FusionConfig::validate() const
{
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw std::invalid_argument("lambda must lie in [0,1]");
    }
    if (!(tau >= 0.0) || !std::isfinite(tau)) {
        throw std::invalid_argument("tau must be finite and >= 0");
    }
}

ScoreMap bbox_saliency(const PatchGrid& grid, const BBox& bbox)
{
    if (!bbox.valid()) {
        throw std::invalid_argument("invalid bounding box");
    }
    const BBox clamped = intersect(bbox, grid.extent());
    const double cell_area = static_cast<double>(grid.patch_size * grid.patch_size);
    ScoreMap out(grid.grid_h, grid.grid_w);
    for (std::size_t i = 0; i < grid.grid_h; ++i) {
        for (std::size_t j = 0; j < grid.grid_w; ++j) {
            out(i, j) = std::min(1.0, intersection_area(patch_cell(grid, i, j), clamped) / cell_area);
        }
    }
    return out;
}

double patch_distance(const ImageBuffer& image, const PatchGrid& grid, std::size_t a, std::size_t b)
{
    const std::size_t p = grid.patch_size;
    const GridCoord ca = flat_to_coord(a, grid);
    const GridCoord cb = flat_to_coord(b, grid);
    double sum = 0.0;
    for (std::size_t dy = 0; dy < p; ++dy) {
        for (std::size_t dx = 0; dx < p; ++dx) {
            for (std::size_t c = 0; c < ImageBuffer::kChannels; ++c) {
                const double d = 255.0 * (image.at(ca.h * p + dy, ca.w * p + dx, c) -
                                          image.at(cb.h * p + dy, cb.w * p + dx, c));
                sum += d * d;
            }
        }
    }
    return std::sqrt(sum);
}

std::vector<PatchEdge> similar_patch_edges(const ImageBuffer& image, const PatchGrid& grid, double tau)
{
    check_image_matches(image, grid);
    std::vector<PatchEdge> edges;
    for (std::size_t i = 0; i < grid.grid_h; ++i) {
        for (std::size_t j = 0; j < grid.grid_w; ++j) {
            const std::size_t here = i * grid.grid_w + j;
            if (j + 1 < grid.grid_w && patch_distance(image, grid, here, here + 1) < tau) {
                edges.emplace_back(here, here + 1);
            }
            if (i + 1 < grid.grid_h && patch_distance(image, grid, here, here + grid.grid_w) < tau) {
                edges.emplace_back(here, here + grid.grid_w);
            }
        }
    }
    return edges;
}

std::vector<std::size_t> components_from_edges(std::size_t node_count, std::span<const PatchEdge> edges)
{
    UnionFind uf(node_count);
    for (const auto& [a, b] : edges) {
        uf.unite(a, b);
    }
    std::vector<std::size_t> roots(node_count);
    for (std::size_t k = 0; k < node_count; ++k) {
        roots[k] = uf.find(k);
    }
    return roots;
}

double component_weight(std::size_t component_size)
{
    return 1.0 / std::max(1.0, std::log(static_cast<double>(component_size) + 1.0));
}

ScoreMap uig_saliency(const ImageBuffer& image, const PatchGrid& grid, double tau)
{
    if (!(tau >= 0.0)) {
        throw std::invalid_argument("tau must be >= 0");
    }
    const auto edges = similar_patch_edges(image, grid, tau);
    const auto roots = components_from_edges(grid.size(), edges);

    std::vector<std::size_t> counts(grid.size(), 0);
    for (std::size_t r : roots) {
        ++counts[r];
    }
    ScoreMap out(grid.grid_h, grid.grid_w);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        out[k] = component_weight(counts[roots[k]]);
    }
    return out;
}

ScoreMap fuse_supervision(const ScoreMap& s_bbox, const ScoreMap& s_uig, double lambda)
{
    if (!s_bbox.same_shape(s_uig)) {
        throw std::invalid_argument("score maps differ in shape");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw std::invalid_argument("lambda must lie in [0,1]");
    }
    ScoreMap out(s_bbox.grid_h(), s_bbox.grid_w());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = lambda * s_bbox[k] + (1.0 - lambda) * s_uig[k];
    }
    return out;
}

ScoreMap build_supervision(const ImageBuffer& image, const PatchGrid& grid, const BBox& bbox,
                           const FusionConfig& config)
{
    config.validate();
    return fuse_supervision(bbox_saliency(grid, bbox), uig_saliency(image, grid, config.tau), config.lambda);
}

} // namespace uiprune
