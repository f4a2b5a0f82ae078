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

#include "uiprune/head.hpp"
#include "uiprune/scorer.hpp"

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace uiprune {

/// Action-head supervision for one sample: an actor vector and a 0/1 label
/// per patch (flat raster order).
struct HeadSample
{
    std::vector<double> h_actor;
    std::vector<int> labels;
};

struct TrainSample
{
    EmbeddingSet patches; // M x d raw
    EmbeddingSet text;    // N x d raw
    std::vector<double> target; // flattened fused supervision, length M
    std::optional<HeadSample> head;
};

struct TrainOptions
{
    double lr = 0.05;
    std::size_t epochs = 200;
    std::size_t workers = 1;
    /// Also fit the action head on each sample's currently-kept patches.
    bool attention_loss = false;
    double head_ratio = 0.5;
};

struct EpochLoss
{
    std::size_t epoch = 0;
    double ins2patch = 0.0;
    double attention = 0.0;
    double total = 0.0;
};

struct TrainResult
{
    ScorerParams scorer;
    std::optional<HeadParams> head;
    std::vector<EpochLoss> trace;
};

class DivergenceError : public std::runtime_error
{
public:
    DivergenceError(std::size_t epoch, const std::string& what) : std::runtime_error(what), epoch_(epoch) {}
    std::size_t epoch() const { return epoch_; }

private:
    std::size_t epoch_;
};

/// Full-batch gradient descent on the mean Ins2Patch loss (plus the mean
/// attention loss when enabled). trace[e] is the loss at the start of epoch e.
/// Throws DivergenceError naming the epoch when the loss or params stop being
/// finite.
TrainResult train_scorer(std::span<const TrainSample> dataset, const ScorerParams& init, const TrainOptions& options,
                         std::optional<HeadParams> head_init = std::nullopt);

} // namespace uiprune
