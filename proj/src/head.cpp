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

#include "uiprune/head.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace uiprune {
namespace {

struct Slot
{
    const char* name;
    std::span<double> values;
};

std::vector<Slot> slots(HeadParams& p)
{
    return {{"attn_wq", p.attn.wq.data()},  {"attn_wk", p.attn.wk.data()}, {"attn_wv", p.attn.wv.data()},
            {"mlp_t_w1", p.mlp_t.w1.data()}, {"mlp_t_b1", p.mlp_t.b1},      {"mlp_t_w2", p.mlp_t.w2.data()},
            {"mlp_t_b2", p.mlp_t.b2},        {"mlp_v_w1", p.mlp_v.w1.data()}, {"mlp_v_b1", p.mlp_v.b1},
            {"mlp_v_w2", p.mlp_v.w2.data()}, {"mlp_v_b2", p.mlp_v.b2}};
}

std::vector<Slot> slots(const HeadParams& p)
{
    return slots(const_cast<HeadParams&>(p));
}

struct HeadForward
{
    AttentionCache attn;
    MlpCache t_cache;
    MlpCache v_cache;
    Matrix z;  // 1 x d
    Matrix zi; // M' x d
    AttentionDist dist;
};

HeadForward run_forward(std::span<const double> h_actor, const Matrix& patches, const HeadParams& params)
{
    const std::size_t d = params.dim;
    if (h_actor.size() != d || patches.cols() != d) {
        throw std::invalid_argument("head input dims do not match head dim " + std::to_string(d));
    }
    if (patches.rows() == 0) {
        throw std::invalid_argument("head needs at least one candidate patch");
    }
    HeadForward f;
    Matrix h(1, d, std::vector<double>(h_actor.begin(), h_actor.end()));
    if (params.identity_mode) {
        f.z = std::move(h);
        f.zi = patches;
    } else {
        const Matrix refined = self_attention_forward(patches, params.attn, &f.attn);
        f.z = mlp_forward(h, params.mlp_t, &f.t_cache);
        f.zi = mlp_forward(refined, params.mlp_v, &f.v_cache);
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    f.dist.logits.resize(f.zi.rows());
    for (std::size_t i = 0; i < f.zi.rows(); ++i) {
        f.dist.logits[i] = dot(f.z.row(0), f.zi.row(i)) * scale;
    }
    f.dist.probs = softmax(f.dist.logits);
    return f;
}

} // namespace

HeadParams HeadParams::init(std::size_t dim, std::uint64_t seed)
{
    if (dim < 1) {
        throw std::invalid_argument("head dim must be >= 1");
    }
    std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
    HeadParams p;
    p.dim = dim;
    p.seed = seed;
    p.attn = AttentionWeights::random(dim, rng);
    p.mlp_t = Mlp::random(dim, dim, dim, rng);
    p.mlp_v = Mlp::random(dim, dim, dim, rng);
    return p;
}

HeadParams HeadParams::zeros_like(const HeadParams& p)
{
    HeadParams z;
    z.dim = p.dim;
    z.seed = p.seed;
    z.identity_mode = p.identity_mode;
    z.attn = AttentionWeights::zeros(p.dim);
    z.mlp_t = Mlp::zeros(p.dim, p.dim, p.dim);
    z.mlp_v = Mlp::zeros(p.dim, p.dim, p.dim);
    return z;
}

std::vector<double> HeadParams::flatten() const
{
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& s : slots(*this)) {
        out.insert(out.end(), s.values.begin(), s.values.end());
    }
    return out;
}

void HeadParams::assign(std::span<const double> flat)
{
    if (flat.size() != parameter_count()) {
        throw std::invalid_argument("flat head parameter vector has wrong length");
    }
    std::size_t off = 0;
    for (auto& s : slots(*this)) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), s.values.size(), s.values.begin());
        off += s.values.size();
    }
}

bool HeadParams::all_finite() const
{
    const auto flat = flatten();
    return std::all_of(flat.begin(), flat.end(), [](double v) { return std::isfinite(v); });
}

nlohmann::json to_json(const HeadParams& p)
{
    nlohmann::json mats = nlohmann::json::object();
    for (const auto& s : slots(p)) {
        mats[s.name] = std::vector<double>(s.values.begin(), s.values.end());
    }
    return {{"version", 1}, {"kind", "head"}, {"d", p.dim}, {"seed", p.seed}, {"identity_mode", p.identity_mode},
            {"matrices", mats}};
}

HeadParams head_params_from_json(const nlohmann::json& j)
{
    if (j.at("version").get<int>() != 1 || j.at("kind").get<std::string>() != "head") {
        throw std::invalid_argument("not a version-1 head params document");
    }
    HeadParams shape;
    shape.dim = j.at("d").get<std::size_t>();
    shape.seed = j.at("seed").get<std::uint64_t>();
    shape.identity_mode = j.at("identity_mode").get<bool>();
    HeadParams p = HeadParams::zeros_like(shape);
    const auto& mats = j.at("matrices");
    for (auto& s : slots(p)) {
        const auto v = mats.at(s.name).get<std::vector<double>>();
        if (v.size() != s.values.size()) {
            throw std::invalid_argument(std::string("head matrix ") + s.name + " has wrong size");
        }
        std::copy(v.begin(), v.end(), s.values.begin());
    }
    if (!p.all_finite()) {
        throw std::invalid_argument("head params contain non-finite values");
    }
    return p;
}

AttentionDist head_forward(std::span<const double> h_actor, const Matrix& patches, const HeadParams& params)
{
    return run_forward(h_actor, patches, params).dist;
}

AttentionLoss attention_loss(std::span<const int> labels, const AttentionDist& dist, double epsilon)
{
    if (labels.size() != dist.probs.size()) {
        throw std::invalid_argument("label count does not match distribution length");
    }
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("epsilon must be positive");
    }
    double positives = 0.0;
    for (int y : labels) {
        if (y != 0 && y != 1) {
            throw std::invalid_argument("labels must be 0 or 1");
        }
        positives += y;
    }
    AttentionLoss out;
    out.grad_logits.assign(labels.size(), 0.0);
    if (positives == 0.0) {
        out.degenerate = true;
        return out;
    }
    const double denom = positives + epsilon;
    const double mass = positives / denom;
    const double lse = log_sum_exp(dist.logits);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double p = labels[i] / denom;
        if (p > 0.0) {
            // log a_i from the logits keeps tiny probabilities exact.
            out.loss += p * (std::log(p) - (dist.logits[i] - lse));
        }
        out.grad_logits[i] = dist.probs[i] * mass - p;
    }
    return out;
}

HeadLossGrad head_loss_grad(std::span<const double> h_actor, const Matrix& patches, std::span<const int> labels,
                            const HeadParams& params, double epsilon)
{
    HeadForward f = run_forward(h_actor, patches, params);
    HeadLossGrad out{f.dist, attention_loss(labels, f.dist, epsilon), HeadParams::zeros_like(params)};
    if (params.identity_mode || out.loss.degenerate) {
        return out;
    }
    const std::size_t d = params.dim;
    const std::size_t n = f.zi.rows();
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    Matrix dz(1, d);
    Matrix dzi(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const double g = out.loss.grad_logits[i] * scale;
        for (std::size_t c = 0; c < d; ++c) {
            dz(0, c) += g * f.zi(i, c);
            dzi(i, c) = g * f.z(0, c);
        }
    }
    mlp_backward(dz, params.mlp_t, f.t_cache, out.grad.mlp_t);
    const Matrix drefined = mlp_backward(dzi, params.mlp_v, f.v_cache, out.grad.mlp_v);
    self_attention_backward(drefined, params.attn, f.attn, out.grad.attn);
    return out;
}

Labels labels_for_indices(std::span<const std::size_t> indices, const PatchGrid& grid, const BBox& bbox)
{
    if (!bbox.valid()) {
        throw std::invalid_argument("invalid bounding box");
    }
    Labels out;
    out.values.reserve(indices.size());
    for (std::size_t idx : indices) {
        const GridCoord c = flat_to_coord(idx, grid);
        out.values.push_back(intersection_area(patch_cell(grid, c.h, c.w), bbox) > 0.0 ? 1 : 0);
    }
    out.degenerate = std::none_of(out.values.begin(), out.values.end(), [](int v) { return v == 1; });
    return out;
}

Labels labels_from_bbox(const TokenSequence& seq, const PatchGrid& grid, const BBox& bbox)
{
    if (seq.m != grid.size()) {
        throw std::invalid_argument("sequence does not belong to this grid");
    }
    if (!bbox.valid()) {
        throw std::invalid_argument("invalid bounding box");
    }
    Labels out;
    out.values.reserve(seq.entries.size());
    for (const auto& e : seq.entries) {
        const bool hit = e.kind == EntryKind::Patch &&
                         intersection_area(patch_cell(grid, e.coord.h, e.coord.w), bbox) > 0.0;
        out.values.push_back(hit ? 1 : 0);
    }
    out.degenerate = std::none_of(out.values.begin(), out.values.end(), [](int v) { return v == 1; });
    return out;
}

} // namespace uiprune
