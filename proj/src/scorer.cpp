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

#include "uiprune/scorer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

namespace uiprune {
namespace {

std::vector<Matrix*> matrices(ScorerParams& p)
{
    return {&p.patch.wq, &p.patch.wk, &p.patch.wv, &p.text.wq, &p.text.wk, &p.text.wv};
}

std::vector<const Matrix*> matrices(const ScorerParams& p)
{
    return {&p.patch.wq, &p.patch.wk, &p.patch.wv, &p.text.wq, &p.text.wk, &p.text.wv};
}

constexpr const char* kMatrixNames[] = {"patch_wq", "patch_wk", "patch_wv", "text_wq", "text_wk", "text_wv"};

void check_finite(std::span<const double> xs, const char* what)
{
    if (!std::all_of(xs.begin(), xs.end(), [](double v) { return std::isfinite(v); })) {
        throw std::invalid_argument(std::string(what) + " contains non-finite values");
    }
}

const AttentionWeights& weights_for(const ScorerParams& p, Modality m)
{
    return m == Modality::Patch ? p.patch : p.text;
}

struct ModalityCache
{
    AttentionCache attn;
    TanhNormCache norm;
    Matrix out;
};

Matrix refine(const EmbeddingSet& raw, const ScorerParams& params, Modality modality, ModalityCache* cache)
{
    if (raw.cols() != params.dim) {
        throw std::invalid_argument("embedding dim " + std::to_string(raw.cols()) + " does not match scorer dim " +
                                    std::to_string(params.dim));
    }
    if (raw.rows() == 0) {
        throw std::invalid_argument("embedding set is empty");
    }
    Matrix pre = params.identity_mode
                     ? raw
                     : self_attention_forward(raw, weights_for(params, modality), cache ? &cache->attn : nullptr);
    Matrix out = tanh_l2_forward(pre, cache ? &cache->norm : nullptr);
    if (cache != nullptr) {
        cache->out = out;
    }
    return out;
}

} // namespace

ScorerParams ScorerParams::init(std::size_t dim, std::uint64_t seed)
{
    if (dim < 1) {
        throw std::invalid_argument("scorer dim must be >= 1");
    }
    std::mt19937_64 rng(seed);
    ScorerParams p;
    p.dim = dim;
    p.seed = seed;
    p.patch = AttentionWeights::random(dim, rng);
    p.text = AttentionWeights::random(dim, rng);
    return p;
}

ScorerParams ScorerParams::zeros_like(const ScorerParams& p)
{
    ScorerParams z;
    z.dim = p.dim;
    z.seed = p.seed;
    z.identity_mode = p.identity_mode;
    z.patch = AttentionWeights::zeros(p.dim);
    z.text = AttentionWeights::zeros(p.dim);
    return z;
}

std::vector<double> ScorerParams::flatten() const
{
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const Matrix* m : matrices(*this)) {
        out.insert(out.end(), m->data().begin(), m->data().end());
    }
    return out;
}

void ScorerParams::assign(std::span<const double> flat)
{
    if (flat.size() != parameter_count()) {
        throw std::invalid_argument("flat parameter vector has wrong length");
    }
    std::size_t off = 0;
    for (Matrix* m : matrices(*this)) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), m->data().size(), m->data().begin());
        off += m->data().size();
    }
}

bool ScorerParams::all_finite() const
{
    const auto ms = matrices(*this);
    return std::all_of(ms.begin(), ms.end(), [](const Matrix* m) { return m->all_finite(); });
}

nlohmann::json to_json(const ScorerParams& p)
{
    nlohmann::json mats = nlohmann::json::object();
    const auto ms = matrices(p);
    for (std::size_t k = 0; k < ms.size(); ++k) {
        mats[kMatrixNames[k]] = std::vector<double>(ms[k]->data().begin(), ms[k]->data().end());
    }
    return {{"version", kParamsVersion}, {"kind", "scorer"},          {"d", p.dim},
            {"seed", p.seed},            {"identity_mode", p.identity_mode}, {"matrices", mats}};
}

ScorerParams scorer_params_from_json(const nlohmann::json& j)
{
    if (j.at("version").get<int>() != kParamsVersion) {
        throw std::invalid_argument("unsupported params version");
    }
    if (j.at("kind").get<std::string>() != "scorer") {
        throw std::invalid_argument("params document is not a scorer");
    }
    ScorerParams shape;
    shape.dim = j.at("d").get<std::size_t>();
    shape.seed = j.at("seed").get<std::uint64_t>();
    shape.identity_mode = j.at("identity_mode").get<bool>();
    ScorerParams p = ScorerParams::zeros_like(shape);
    const auto& mats = j.at("matrices");
    const auto ms = matrices(p);
    for (std::size_t k = 0; k < ms.size(); ++k) {
        *ms[k] = Matrix(p.dim, p.dim, mats.at(kMatrixNames[k]).get<std::vector<double>>());
    }
    if (!p.all_finite()) {
        throw std::invalid_argument("params contain non-finite values");
    }
    return p;
}

EmbeddingSet refine_and_normalize(const EmbeddingSet& raw, const ScorerParams& params, Modality modality)
{
    return refine(raw, params, modality, nullptr);
}

SimilarityMatrix similarity_scores(const EmbeddingSet& v, const EmbeddingSet& e)
{
    if (v.cols() != e.cols()) {
        throw std::invalid_argument("patch and text embedding dims differ");
    }
    if (v.rows() == 0 || e.rows() == 0) {
        throw std::invalid_argument("similarity needs at least one patch and one text token");
    }
    SimilarityMatrix out{matmul_nt(v, e), std::vector<double>(v.rows(), 0.0)};
    const double inv_n = 1.0 / static_cast<double>(e.rows());
    for (std::size_t i = 0; i < v.rows(); ++i) {
        double s = 0.0;
        for (double x : out.values.row(i)) {
            s += x;
        }
        out.per_patch[i] = s * inv_n;
    }
    return out;
}

LossGrad ins2patch_loss(std::span<const double> target, std::span<const double> predicted)
{
    if (target.size() != predicted.size()) {
        throw std::invalid_argument("target has " + std::to_string(target.size()) + " entries, prediction has " +
                                    std::to_string(predicted.size()));
    }
    if (target.empty()) {
        throw std::invalid_argument("empty score vectors");
    }
    check_finite(target, "target");
    check_finite(predicted, "prediction");

    const double lse_t = log_sum_exp(target);
    const double lse_s = log_sum_exp(predicted);
    LossGrad out{0.0, std::vector<double>(target.size())};
    for (std::size_t k = 0; k < target.size(); ++k) {
        const double log_p = target[k] - lse_t;
        const double log_q = predicted[k] - lse_s;
        const double p = std::exp(log_p);
        out.loss += p * (log_p - log_q);
        out.grad[k] = std::exp(log_q) - p;
    }
    // Rounding can leave a tiny negative value when the distributions agree.
    out.loss = std::max(out.loss, 0.0);
    return out;
}

std::vector<double> scorer_forward(const EmbeddingSet& raw_v, const EmbeddingSet& raw_e, const ScorerParams& params)
{
    const Matrix v = refine(raw_v, params, Modality::Patch, nullptr);
    const Matrix e = refine(raw_e, params, Modality::Text, nullptr);
    return similarity_scores(v, e).per_patch;
}

ScorerLossGrad scorer_loss_grad(const EmbeddingSet& raw_v, const EmbeddingSet& raw_e, std::span<const double> target,
                                const ScorerParams& params)
{
    ModalityCache vc;
    ModalityCache ec;
    const Matrix v = refine(raw_v, params, Modality::Patch, &vc);
    const Matrix e = refine(raw_e, params, Modality::Text, &ec);
    auto sim = similarity_scores(v, e);
    auto kl = ins2patch_loss(target, sim.per_patch);

    // s_i = <v_i, mean_j e_j>
    const std::size_t m = v.rows();
    const std::size_t n = e.rows();
    const std::size_t d = params.dim;
    std::vector<double> e_mean(d, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t c = 0; c < d; ++c) {
            e_mean[c] += e(j, c) / static_cast<double>(n);
        }
    }
    Matrix dv(m, d);
    std::vector<double> de_row(d, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
            dv(i, c) = kl.grad[i] * e_mean[c];
            de_row[c] += kl.grad[i] * v(i, c) / static_cast<double>(n);
        }
    }
    Matrix de(n, d);
    for (std::size_t j = 0; j < n; ++j) {
        std::copy(de_row.begin(), de_row.end(), de.row(j).begin());
    }

    ScorerLossGrad out{kl.loss, std::move(sim.per_patch), ScorerParams::zeros_like(params)};
    const Matrix dv_pre = tanh_l2_backward(dv, vc.out, vc.norm);
    const Matrix de_pre = tanh_l2_backward(de, ec.out, ec.norm);
    if (!params.identity_mode) {
        self_attention_backward(dv_pre, params.patch, vc.attn, out.grad.patch);
        self_attention_backward(de_pre, params.text, ec.attn, out.grad.text);
    }
    return out;
}

GradCheckResult grad_check(const GradFn& fn, std::span<const double> point, double epsilon)
{
    if (!(epsilon >= 1e-7 && epsilon <= 1e-4)) {
        throw std::invalid_argument("grad_check epsilon must lie in [1e-7, 1e-4]");
    }
    const LossGrad at = fn(point);
    if (!std::isfinite(at.loss)) {
        throw std::domain_error("loss is not finite at the probe point");
    }
    if (at.grad.size() != point.size()) {
        throw std::invalid_argument("analytic gradient has wrong length");
    }
    std::vector<double> x(point.begin(), point.end());
    GradCheckResult result;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double orig = x[k];
        x[k] = orig + epsilon;
        const double up = fn(x).loss;
        x[k] = orig - epsilon;
        const double down = fn(x).loss;
        x[k] = orig;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw std::domain_error("loss is not finite near the probe point");
        }
        const double numeric = (up - down) / (2.0 * epsilon);
        const double analytic = at.grad[k];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        const double rel = std::abs(analytic - numeric) / denom;
        if (rel > result.max_rel_error) {
            result.max_rel_error = rel;
            result.worst_index = k;
        }
    }
    return result;
}

std::vector<double> patch_features(const ImageBuffer& image, const PatchGrid& grid, std::size_t i, std::size_t j)
{
    const auto pixels = extract_patch_pixels(image, grid, i, j);
    const std::size_t per_channel = grid.patch_size * grid.patch_size;
    std::vector<double> f(kPatchFeatureCount, 0.0);
    for (std::size_t c = 0; c < 3; ++c) {
        double sum = 0.0;
        double sq = 0.0;
        for (std::size_t k = 0; k < per_channel; ++k) {
            const double v = pixels[c * per_channel + k];
            sum += v;
            sq += v * v;
        }
        const double mean = sum / static_cast<double>(per_channel);
        f[c] = 2.0 * mean - 1.0;
        f[3 + c] = 2.0 * std::sqrt(std::max(0.0, sq / static_cast<double>(per_channel) - mean * mean));
    }
    f[6] = (static_cast<double>(i) + 0.5) / static_cast<double>(grid.grid_h) - 0.5;
    f[7] = (static_cast<double>(j) + 0.5) / static_cast<double>(grid.grid_w) - 0.5;
    f[8] = 1.0;
    return f;
}

namespace {

// kPatchFeatureCount x dim projection with orthonormal leading columns.
Matrix feature_projection(std::size_t dim, std::uint64_t seed)
{
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    Matrix proj(kPatchFeatureCount, dim);
    for (double& v : proj.data()) {
        v = uniform(rng, -1.0, 1.0);
    }
    const std::size_t basis = std::min(dim, kPatchFeatureCount);
    for (std::size_t c = 0; c < basis; ++c) {
        for (std::size_t prev = 0; prev < c; ++prev) {
            double d = 0.0;
            for (std::size_t r = 0; r < kPatchFeatureCount; ++r) {
                d += proj(r, c) * proj(r, prev);
            }
            for (std::size_t r = 0; r < kPatchFeatureCount; ++r) {
                proj(r, c) -= d * proj(r, prev);
            }
        }
        double norm = 0.0;
        for (std::size_t r = 0; r < kPatchFeatureCount; ++r) {
            norm += proj(r, c) * proj(r, c);
        }
        norm = std::sqrt(norm);
        for (std::size_t r = 0; r < kPatchFeatureCount; ++r) {
            proj(r, c) /= norm;
        }
    }
    return proj;
}

} // namespace

EmbeddingSet patch_embeddings(const ImageBuffer& image, const PatchGrid& grid, std::size_t dim, std::uint64_t seed)
{
    check_image_matches(image, grid);
    const Matrix proj = feature_projection(dim, seed);
    Matrix feats(grid.size(), kPatchFeatureCount);
    for (std::size_t i = 0; i < grid.grid_h; ++i) {
        for (std::size_t j = 0; j < grid.grid_w; ++j) {
            const auto f = patch_features(image, grid, i, j);
            std::copy(f.begin(), f.end(), feats.row(i * grid.grid_w + j).begin());
        }
    }
    return matmul(feats, proj);
}

std::vector<std::string> tokenize(std::string_view text)
{
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) {
                tokens.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!cur.empty()) {
        tokens.push_back(std::move(cur));
    }
    return tokens;
}

EmbeddingSet text_embeddings(std::string_view instruction, std::size_t dim, std::uint64_t seed)
{
    const auto tokens = tokenize(instruction);
    if (tokens.empty()) {
        return Matrix(1, dim);
    }
    Matrix out(tokens.size(), dim);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        std::mt19937_64 rng(fnv1a(tokens[t], seed));
        for (double& v : out.row(t)) {
            v = uniform(rng, -1.0, 1.0);
        }
    }
    return out;
}

} // namespace uiprune
