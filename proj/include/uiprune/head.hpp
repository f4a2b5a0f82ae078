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
#include "uiprune/nn.hpp"
#include "uiprune/selector.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace uiprune {

/// Coordinate-free action head: refines candidate patches with self-attention,
/// projects the actor vector and every patch through separate MLPs and scores
/// them with a scaled dot product.
struct HeadParams
{
    std::size_t dim = 8;
    std::uint64_t seed = 0;
    /// Bypass attention and both MLPs: z = h_actor, z_i = v_i.
    bool identity_mode = false;
    AttentionWeights attn;
    Mlp mlp_t;
    Mlp mlp_v;

    static HeadParams init(std::size_t dim, std::uint64_t seed);
    static HeadParams zeros_like(const HeadParams& p);

    std::size_t parameter_count() const { return 7 * dim * dim + 4 * dim; }
    std::vector<double> flatten() const;
    void assign(std::span<const double> flat);
    bool all_finite() const;
};

nlohmann::json to_json(const HeadParams& p);
HeadParams head_params_from_json(const nlohmann::json& j);

struct AttentionDist
{
    std::vector<double> logits; // alpha_i = z . z_i / sqrt(d)
    std::vector<double> probs;  // softmax(alpha)
};

AttentionDist head_forward(std::span<const double> h_actor, const Matrix& patches, const HeadParams& params);

inline constexpr double kAttentionLossEpsilon = 1e-8;

struct AttentionLoss
{
    double loss = 0.0;
    /// d loss / d logits = a * sum(p) - p.
    std::vector<double> grad_logits;
    /// Set when no label is positive; the loss is then 0 with zero gradient.
    bool degenerate = false;
};

/// sum_i p_i log(p_i / a_i) with p_i = y_i / (sum_j y_j + eps) and 0 log 0 = 0.
AttentionLoss attention_loss(std::span<const int> labels, const AttentionDist& dist,
                             double epsilon = kAttentionLossEpsilon);

struct HeadLossGrad
{
    AttentionDist dist;
    AttentionLoss loss;
    HeadParams grad;
};

HeadLossGrad head_loss_grad(std::span<const double> h_actor, const Matrix& patches, std::span<const int> labels,
                            const HeadParams& params, double epsilon = kAttentionLossEpsilon);

struct Labels
{
    std::vector<int> values;
    bool degenerate = false; // all zero
};

/// 1 for patch entries whose cell overlaps bbox with positive area, 0 for
/// other patches and for every pad entry.
Labels labels_from_bbox(const TokenSequence& seq, const PatchGrid& grid, const BBox& bbox);

/// Same predicate over an explicit list of flat indices (e.g. plan.kept).
Labels labels_for_indices(std::span<const std::size_t> indices, const PatchGrid& grid, const BBox& bbox);

} // namespace uiprune
