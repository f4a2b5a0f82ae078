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

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace uiprune {

/// count x dim embedding rows (patches or text tokens).
using EmbeddingSet = Matrix;

enum class Modality { Patch, Text };

inline constexpr int kParamsVersion = 1;

/// Query-guided saliency scorer weights: one self-attention block per modality.
struct ScorerParams
{
    std::size_t dim = 8;
    std::uint64_t seed = 0;
    /// Skip attention entirely; only tanh + L2 normalization remain.
    bool identity_mode = false;
    AttentionWeights patch;
    AttentionWeights text;

    /// Uniform in [-1/sqrt(d), 1/sqrt(d)] from the given seed.
    static ScorerParams init(std::size_t dim, std::uint64_t seed);
    static ScorerParams zeros_like(const ScorerParams& p);

    std::size_t parameter_count() const { return 6 * dim * dim; }
    std::vector<double> flatten() const;
    void assign(std::span<const double> flat);
    bool all_finite() const;
};

nlohmann::json to_json(const ScorerParams& p);
ScorerParams scorer_params_from_json(const nlohmann::json& j);

/// Self-attention (with residual) over the rows of one modality, then tanh and
/// row-wise L2 normalization. Output rows have unit norm unless the tanh
/// output is exactly zero.
EmbeddingSet refine_and_normalize(const EmbeddingSet& raw, const ScorerParams& params, Modality modality);

struct SimilarityMatrix
{
    Matrix values;                   // M x N cosine similarities
    std::vector<double> per_patch;   // mean over text tokens
};

SimilarityMatrix similarity_scores(const EmbeddingSet& v, const EmbeddingSet& e);

struct LossGrad
{
    double loss = 0.0;
    std::vector<double> grad;
};

/// KL(softmax(target) || softmax(predicted)) and its gradient w.r.t. predicted,
/// softmax(predicted) - softmax(target).
LossGrad ins2patch_loss(std::span<const double> target, std::span<const double> predicted);

/// Per-patch saliency s for raw patch (M x d) and text (N x d) embeddings.
std::vector<double> scorer_forward(const EmbeddingSet& raw_v, const EmbeddingSet& raw_e, const ScorerParams& params);

struct ScorerLossGrad
{
    double loss = 0.0;
    std::vector<double> scores;
    ScorerParams grad;
};

/// Forward, Ins2Patch loss and backprop into all scorer weights.
ScorerLossGrad scorer_loss_grad(const EmbeddingSet& raw_v, const EmbeddingSet& raw_e, std::span<const double> target,
                                const ScorerParams& params);

/// Loss and analytic gradient at a point.
using GradFn = std::function<LossGrad(std::span<const double>)>;

struct GradCheckResult
{
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
};

/// Central differences per coordinate against fn's analytic gradient; relative
/// error uses denominator max(|a|, |n|, 1e-8).
GradCheckResult grad_check(const GradFn& fn, std::span<const double> point, double epsilon = 1e-6);

// Toy embedding source. With no vision encoder or language model available,
// patches are described by pixel statistics and text by hashed tokens.

inline constexpr std::size_t kPatchFeatureCount = 9;

/// Mean RGB and std RGB rescaled to [-1,1] and [0,1], row/col centre in
/// [-0.5,0.5], and a constant 1.
std::vector<double> patch_features(const ImageBuffer& image, const PatchGrid& grid, std::size_t i, std::size_t j);

/// M x d: patch features through a fixed projection seeded by `seed`.
EmbeddingSet patch_embeddings(const ImageBuffer& image, const PatchGrid& grid, std::size_t dim, std::uint64_t seed);

/// Lowercased whitespace tokens.
std::vector<std::string> tokenize(std::string_view text);

/// N x d: one hashed vector per token in [-1,1]; empty text gives one zero row.
EmbeddingSet text_embeddings(std::string_view instruction, std::size_t dim, std::uint64_t seed);

} // namespace uiprune
