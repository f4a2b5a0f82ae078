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

#include "uiprune/training.hpp"

#include "uiprune/parallel.hpp"
#include "uiprune/selector.hpp"

#include <cmath>
#include <string>

namespace uiprune {
namespace {

struct SampleGrad
{
    double ins2patch = 0.0;
    double attention = 0.0;
    std::vector<double> scorer;
    std::vector<double> head;
};

void validate(std::span<const TrainSample> dataset, const ScorerParams& init, const TrainOptions& options,
              const std::optional<HeadParams>& head)
{
    if (dataset.empty()) {
        throw std::invalid_argument("training set is empty");
    }
    if (!(options.lr >= 0.0) || !std::isfinite(options.lr)) {
        throw std::invalid_argument("learning rate must be finite and >= 0");
    }
    for (const auto& s : dataset) {
        if (s.patches.cols() != init.dim || s.text.cols() != init.dim) {
            throw std::invalid_argument("sample embedding dim does not match scorer dim");
        }
        if (s.target.size() != s.patches.rows()) {
            throw std::invalid_argument("target length does not match patch count");
        }
        if (options.attention_loss && s.head) {
            if (s.head->labels.size() != s.patches.rows() || s.head->h_actor.size() != init.dim) {
                throw std::invalid_argument("head sample shape mismatch");
            }
        }
    }
    if (options.attention_loss && (!head || head->dim != init.dim)) {
        throw std::invalid_argument("attention loss needs head params of the scorer dim");
    }
}

SampleGrad sample_grad(const TrainSample& s, const ScorerParams& scorer, const std::optional<HeadParams>& head,
                       const TrainOptions& options)
{
    auto sg = scorer_loss_grad(s.patches, s.text, s.target, scorer);
    SampleGrad out{sg.loss, 0.0, sg.grad.flatten(), {}};
    if (!options.attention_loss || !s.head) {
        return out;
    }
    // Head trains on the current top-K; no gradient reaches the scorer.
    const auto plan = select_topk(sg.scores, options.head_ratio);
    Matrix kept(plan.kept.size(), scorer.dim);
    std::vector<int> labels(plan.kept.size());
    for (std::size_t r = 0; r < plan.kept.size(); ++r) {
        const auto src = s.patches.row(plan.kept[r]);
        std::copy(src.begin(), src.end(), kept.row(r).begin());
        labels[r] = s.head->labels[plan.kept[r]];
    }
    auto hg = head_loss_grad(s.head->h_actor, kept, labels, *head);
    out.attention = hg.loss.loss;
    out.head = hg.grad.flatten();
    return out;
}

} // namespace

TrainResult train_scorer(std::span<const TrainSample> dataset, const ScorerParams& init, const TrainOptions& options,
                         std::optional<HeadParams> head_init)
{
    validate(dataset, init, options, head_init);
    TrainResult result{init, options.attention_loss ? head_init : std::nullopt, {}};
    result.trace.reserve(options.epochs);

    const double inv_n = 1.0 / static_cast<double>(dataset.size());
    std::vector<SampleGrad> grads(dataset.size());
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        try {
            parallel_for(dataset.size(), options.workers, [&](std::size_t i) {
                grads[i] = sample_grad(dataset[i], result.scorer, result.head, options);
            });
        } catch (const std::invalid_argument& e) {
            // Finite weights, non-finite activations.
            if (epoch == 0) {
                throw;
            }
            throw DivergenceError(epoch, "training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
        }

        // Fixed reduction order.
        EpochLoss loss{epoch, 0.0, 0.0, 0.0};
        std::vector<double> scorer_step(result.scorer.parameter_count(), 0.0);
        std::vector<double> head_step(result.head ? result.head->parameter_count() : 0, 0.0);
        for (const auto& g : grads) {
            loss.ins2patch += g.ins2patch * inv_n;
            loss.attention += g.attention * inv_n;
            for (std::size_t k = 0; k < scorer_step.size(); ++k) {
                scorer_step[k] += g.scorer[k] * inv_n;
            }
            for (std::size_t k = 0; k < g.head.size(); ++k) {
                head_step[k] += g.head[k] * inv_n;
            }
        }
        loss.total = loss.ins2patch + loss.attention;
        if (!std::isfinite(loss.total)) {
            throw DivergenceError(epoch, "training diverged at epoch " + std::to_string(epoch));
        }
        result.trace.push_back(loss);

        auto flat = result.scorer.flatten();
        for (std::size_t k = 0; k < flat.size(); ++k) {
            flat[k] -= options.lr * scorer_step[k];
        }
        result.scorer.assign(flat);
        if (result.head) {
            auto hflat = result.head->flatten();
            for (std::size_t k = 0; k < hflat.size(); ++k) {
                hflat[k] -= options.lr * head_step[k];
            }
            result.head->assign(hflat);
        }
        if (!result.scorer.all_finite() || (result.head && !result.head->all_finite())) {
            throw DivergenceError(epoch, "parameters became non-finite at epoch " + std::to_string(epoch));
        }
    }
    return result;
}

} // namespace uiprune
