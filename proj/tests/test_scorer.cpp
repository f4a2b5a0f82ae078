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

#include "uiprune/synthetic.hpp"
#include "uiprune/training.hpp"

#include "numeric.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

namespace uiprune {
namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale = 1.0)
{
    Matrix m(r, c);
    for (double& v : m.data()) {
        v = uniform(rng, -scale, scale);
    }
    return m;
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0)
{
    std::vector<double> v(n);
    for (double& x : v) {
        x = uniform(rng, -scale, scale);
    }
    return v;
}

using testing::max_rel_error;
using testing::numeric_gradient;

TEST(Softmax, SumsToOneAndShiftInvariant)
{
    std::mt19937_64 rng(1);
    for (int t = 0; t < 100; ++t) {
        auto x = random_vector(rng, 1 + t % 20, 30.0);
        const auto p = softmax(x);
        EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
        for (double& v : x) {
            v += 123.0;
        }
        const auto q = softmax(x);
        for (std::size_t i = 0; i < p.size(); ++i) {
            EXPECT_NEAR(p[i], q[i], 1e-12);
        }
    }
    EXPECT_NEAR(log_sum_exp(std::vector<double>{1000.0, 1000.0}), 1000.0 + std::log(2.0), 1e-9);
}

TEST(Matrix, Products)
{
    const Matrix a(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
    const Matrix b(3, 2, std::vector<double>{7, 8, 9, 10, 11, 12});
    const Matrix c = matmul(a, b);
    EXPECT_EQ(c(0, 0), 58);
    EXPECT_EQ(c(1, 1), 154);
    const Matrix at_a = matmul_tn(a, a);
    EXPECT_EQ(at_a(0, 0), 17);
    EXPECT_EQ(at_a(2, 1), 3 * 2 + 6 * 5);
    const Matrix a_at = matmul_nt(a, a);
    EXPECT_EQ(a_at(0, 1), 32);
    EXPECT_THROW(matmul(a, a), std::invalid_argument);
}

TEST(RefineAndNormalize, SaturatedDirection)
{
    ScorerParams p = ScorerParams::init(2, 0);
    p.identity_mode = true;
    const Matrix x(1, 2, std::vector<double>{300.0, 400.0});
    const Matrix y = refine_and_normalize(x, p, Modality::Patch);
    EXPECT_NEAR(y(0, 0), std::sqrt(0.5), 1e-9);
    EXPECT_NEAR(y(0, 1), std::sqrt(0.5), 1e-9);
}

TEST(RefineAndNormalize, SmallInputsKeepDirection)
{
    ScorerParams p = ScorerParams::init(3, 0);
    p.identity_mode = true;
    const double e = 1e-4;
    const Matrix x(1, 3, std::vector<double>{e * 0.6, 0.0, e * 0.8});
    const Matrix y = refine_and_normalize(x, p, Modality::Text);
    EXPECT_NEAR(y(0, 0), 0.6, 1e-8);
    EXPECT_NEAR(y(0, 1), 0.0, 1e-12);
    EXPECT_NEAR(y(0, 2), 0.8, 1e-8);
}

TEST(RefineAndNormalize, UnitRowNormsInFullMode)
{
    std::mt19937_64 rng(2);
    for (int t = 0; t < 20; ++t) {
        const std::size_t d = 1 + t % 8;
        const ScorerParams p = ScorerParams::init(d, t);
        const Matrix y = refine_and_normalize(random_matrix(rng, 1 + t % 16, d, 3.0), p, Modality::Patch);
        for (std::size_t r = 0; r < y.rows(); ++r) {
            EXPECT_NEAR(std::sqrt(dot(y.row(r), y.row(r))), 1.0, 1e-12);
        }
    }
}

TEST(RefineAndNormalize, ZeroRowStaysFinite)
{
    ScorerParams p = ScorerParams::init(4, 0);
    p.identity_mode = true;
    const Matrix y = refine_and_normalize(Matrix(2, 4), p, Modality::Patch);
    EXPECT_TRUE(y.all_finite());
    EXPECT_THROW(refine_and_normalize(Matrix(2, 3), p, Modality::Patch), std::invalid_argument);
}

TEST(Similarity, Examples)
{
    const Matrix v(2, 2, std::vector<double>{1, 0, 0, 1});
    const Matrix e1(1, 2, std::vector<double>{1, 0});
    const auto s1 = similarity_scores(v, e1);
    EXPECT_DOUBLE_EQ(s1.per_patch[0], 1.0);
    EXPECT_DOUBLE_EQ(s1.per_patch[1], 0.0);
    const Matrix e2(2, 2, std::vector<double>{1, 0, 0, 1});
    EXPECT_DOUBLE_EQ(similarity_scores(v, e2).per_patch[0], 0.5);
    EXPECT_THROW(similarity_scores(v, Matrix(1, 3)), std::invalid_argument);
}

TEST(Ins2PatchLoss, HandValue)
{
    const LossGrad lg = ins2patch_loss(std::vector<double>{0, 0}, std::vector<double>{0, std::log(3.0)});
    EXPECT_NEAR(lg.loss, 0.5 * std::log(4.0 / 3.0), 1e-12);
    EXPECT_NEAR(lg.loss, 0.14384, 1e-5);
    EXPECT_NEAR(lg.grad[0], 0.25 - 0.5, 1e-12);
    EXPECT_NEAR(lg.grad[1], 0.75 - 0.5, 1e-12);
}

TEST(Ins2PatchLoss, ZeroCases)
{
    const std::vector<double> t{0.1, 0.7, 0.3};
    EXPECT_NEAR(ins2patch_loss(t, t).loss, 0.0, 1e-15);
    EXPECT_NEAR(ins2patch_loss(std::vector<double>(9, 0.2), std::vector<double>(9, -4.0)).loss, 0.0, 1e-15);
}

TEST(Ins2PatchLoss, NonNegativeAndShiftInvariant)
{
    std::mt19937_64 rng(4);
    for (int t = 0; t < 200; ++t) {
        const std::size_t m = 1 + t % 16;
        const auto a = random_vector(rng, m, 3.0);
        auto b = random_vector(rng, m, 3.0);
        const double base = ins2patch_loss(a, b).loss;
        EXPECT_GE(base, 0.0);
        for (double& v : b) {
            v -= 2.5;
        }
        EXPECT_NEAR(ins2patch_loss(a, b).loss, base, 1e-12);
    }
}

TEST(Ins2PatchLoss, Errors)
{
    EXPECT_THROW(ins2patch_loss(std::vector<double>{1, 2}, std::vector<double>{1}), std::invalid_argument);
    EXPECT_THROW(ins2patch_loss(std::vector<double>{NAN, 2}, std::vector<double>{1, 2}), std::invalid_argument);
    EXPECT_THROW(ins2patch_loss(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
}

TEST(Ins2PatchLoss, GradientMatchesFiniteDifferences)
{
    std::mt19937_64 rng(8);
    for (int t = 0; t < 50; ++t) {
        const std::size_t m = 2 + t % 15;
        const auto target = random_vector(rng, m, 2.0);
        const auto s = random_vector(rng, m, 2.0);
        const auto analytic = ins2patch_loss(target, s).grad;
        const auto numeric =
            numeric_gradient([&](std::span<const double> x) { return ins2patch_loss(target, x).loss; }, s, 1e-6);
        EXPECT_LT(max_rel_error(analytic, numeric), 1e-4);
    }
}

TEST(GradCheck, Quadratic)
{
    const GradFn f = [](std::span<const double> x) {
        LossGrad lg;
        lg.grad.assign(x.begin(), x.end());
        lg.loss = 0.5 * dot(x, x);
        return lg;
    };
    const std::vector<double> x{0.3, -1.2, 4.0, 0.0, 2.5};
    EXPECT_LT(grad_check(f, x).max_rel_error, 1e-9);
    EXPECT_THROW(grad_check(f, x, 1e-2), std::invalid_argument);
}

TEST(GradCheck, ReportsWrongGradient)
{
    const GradFn f = [](std::span<const double> x) {
        LossGrad lg{0.5 * dot(x, x), std::vector<double>(x.begin(), x.end())};
        lg.grad[1] *= 2.0;
        return lg;
    };
    const GradCheckResult r = grad_check(f, std::vector<double>{1.0, 1.0, 1.0});
    EXPECT_GT(r.max_rel_error, 0.4);
    EXPECT_EQ(r.worst_index, 1u);
}

TEST(ScorerForward, IdentityModeExamples)
{
    ScorerParams p = ScorerParams::init(3, 0);
    p.identity_mode = true;
    const Matrix a(1, 3, std::vector<double>{0.2, -0.5, 0.1});
    EXPECT_NEAR(scorer_forward(a, a, p)[0], 1.0, 1e-12);
    const Matrix b(1, 3, std::vector<double>{0.0, 0.0, 0.7});
    const Matrix c(1, 3, std::vector<double>{0.4, 0.0, 0.0});
    EXPECT_NEAR(scorer_forward(b, c, p)[0], 0.0, 1e-12);
}

TEST(ScorerForward, IdentityModePermutationEquivariance)
{
    std::mt19937_64 rng(12);
    ScorerParams p = ScorerParams::init(5, 1);
    p.identity_mode = true;
    const Matrix v = random_matrix(rng, 7, 5);
    const Matrix e = random_matrix(rng, 3, 5);
    const auto s = scorer_forward(v, e, p);
    std::vector<std::size_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix pv(7, 5);
    for (std::size_t i = 0; i < 7; ++i) {
        std::copy(v.row(perm[i]).begin(), v.row(perm[i]).end(), pv.row(i).begin());
    }
    const auto ps = scorer_forward(pv, e, p);
    for (std::size_t i = 0; i < 7; ++i) {
        EXPECT_NEAR(ps[i], s[perm[i]], 1e-12);
    }
}

TEST(ScorerForward, ScoresBounded)
{
    std::mt19937_64 rng(13);
    for (int t = 0; t < 30; ++t) {
        const std::size_t d = 1 + t % 8;
        const auto s = scorer_forward(random_matrix(rng, 1 + t % 16, d, 5.0), random_matrix(rng, 1 + t % 4, d, 5.0),
                                      ScorerParams::init(d, t));
        for (double v : s) {
            EXPECT_LE(std::abs(v), 1.0 + 1e-12);
        }
    }
}

TEST(ScorerLossGrad, FullParameterGradientCheck)
{
    std::mt19937_64 rng(14);
    for (int t = 0; t < 12; ++t) {
        const std::size_t d = 2 + t % 7;
        const std::size_t m = 2 + (t * 5) % 15;
        const std::size_t n = 1 + t % 4;
        const Matrix v = random_matrix(rng, m, d);
        const Matrix e = random_matrix(rng, n, d);
        const auto target = random_vector(rng, m, 2.0);
        ScorerParams p = ScorerParams::init(d, 100 + t);
        const auto point = p.flatten();
        const auto analytic = scorer_loss_grad(v, e, target, p).grad.flatten();
        const auto numeric = numeric_gradient(
            [&](std::span<const double> x) {
                ScorerParams q = p;
                q.assign(x);
                return ins2patch_loss(target, scorer_forward(v, e, q)).loss;
            },
            point, 1e-5);
        // Absolute slack of 1e-9 on near-zero weight gradients.
        EXPECT_LT(max_rel_error(analytic, numeric, 1e-5), 1e-4) << "trial " << t;
    }
}

TEST(ScorerParams, FlattenAssignAndJson)
{
    const ScorerParams p = ScorerParams::init(4, 99);
    EXPECT_EQ(p.flatten().size(), p.parameter_count());
    ScorerParams q = ScorerParams::zeros_like(p);
    q.assign(p.flatten());
    EXPECT_EQ(q.flatten(), p.flatten());
    const ScorerParams r = scorer_params_from_json(to_json(p));
    EXPECT_EQ(r.flatten(), p.flatten());
    EXPECT_EQ(r.dim, 4u);
    EXPECT_EQ(r.seed, 99u);
    EXPECT_EQ(to_json(p)["version"], kParamsVersion);
    auto bad = to_json(p);
    bad["version"] = 99;
    EXPECT_THROW(scorer_params_from_json(bad), std::exception);
    EXPECT_THROW(q.assign(std::vector<double>(3)), std::invalid_argument);
}

TEST(Embeddings, DeterministicAndShaped)
{
    EXPECT_EQ(tokenize("  Click  the RED\tbutton "), (std::vector<std::string>{"click", "the", "red", "button"}));
    const Matrix a = text_embeddings("click red button", 6, 3);
    const Matrix b = text_embeddings("CLICK red button", 6, 3);
    ASSERT_EQ(a.rows(), 3u);
    EXPECT_EQ(std::vector<double>(a.data().begin(), a.data().end()),
              std::vector<double>(b.data().begin(), b.data().end()));
    const Matrix empty = text_embeddings("   ", 6, 3);
    EXPECT_EQ(empty.rows(), 1u);
    for (double v : empty.data()) {
        EXPECT_EQ(v, 0.0);
    }

    const auto data = make_synthetic_dataset(1, 5);
    const PatchGrid g = make_grid(data[0].image.height(), data[0].image.width(), 4);
    const Matrix pe = patch_embeddings(data[0].image, g, 8, 1);
    EXPECT_EQ(pe.rows(), g.size());
    EXPECT_EQ(pe.cols(), 8u);
    EXPECT_EQ(patch_features(data[0].image, g, 0, 0).size(), kPatchFeatureCount);
}

std::vector<TrainSample> tiny_dataset(std::size_t count, std::size_t d)
{
    const auto data = make_synthetic_dataset(count, 17);
    std::vector<TrainSample> out;
    for (const auto& r : data) {
        const PatchGrid g = make_grid(r.image.height(), r.image.width(), 4);
        std::vector<double> target(g.size(), 0.0);
        const BBox box = r.bbox;
        for (std::size_t k = 0; k < g.size(); ++k) {
            const GridCoord c = flat_to_coord(k, g);
            target[k] = intersection_area(patch_cell(g, c.h, c.w), box) / 16.0;
        }
        out.push_back({patch_embeddings(r.image, g, d, 0), text_embeddings(r.instruction, d, 0), target, {}});
    }
    return out;
}

TEST(TrainScorer, SingleSampleDescends)
{
    const auto data = tiny_dataset(1, 8);
    TrainOptions o;
    o.lr = 0.05;
    o.epochs = 200;
    const TrainResult r = train_scorer(data, ScorerParams::init(8, 2), o);
    ASSERT_EQ(r.trace.size(), 200u);
    double best = r.trace.front().total;
    for (const auto& e : r.trace) {
        best = std::min(best, e.total);
    }
    EXPECT_LT(best, r.trace.front().total);
}

TEST(TrainScorer, ZeroLearningRateIsStationary)
{
    const auto data = tiny_dataset(3, 4);
    TrainOptions o;
    o.lr = 0.0;
    o.epochs = 10;
    const ScorerParams init = ScorerParams::init(4, 3);
    const TrainResult r = train_scorer(data, init, o);
    EXPECT_EQ(r.scorer.flatten(), init.flatten());
    for (const auto& e : r.trace) {
        EXPECT_EQ(e.total, r.trace.front().total);
    }
}

TEST(TrainScorer, WorkerCountDoesNotChangeResult)
{
    const auto data = tiny_dataset(6, 4);
    TrainOptions o;
    o.lr = 1.0;
    o.epochs = 15;
    const TrainResult a = train_scorer(data, ScorerParams::init(4, 1), o);
    o.workers = 4;
    const TrainResult b = train_scorer(data, ScorerParams::init(4, 1), o);
    EXPECT_EQ(a.scorer.flatten(), b.scorer.flatten());
}

TEST(TrainScorer, DivergenceNamesTheEpoch)
{
    const auto data = tiny_dataset(2, 4);
    TrainOptions o;
    o.lr = 1e308;
    o.epochs = 50;
    try {
        train_scorer(data, ScorerParams::init(4, 1), o);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_LT(e.epoch(), 50u);
        EXPECT_NE(std::string(e.what()).find(std::to_string(e.epoch())), std::string::npos);
    }
}

TEST(TrainScorer, RejectsEmptyDataset)
{
    EXPECT_THROW(train_scorer(std::vector<TrainSample>{}, ScorerParams::init(4, 1), {}), std::invalid_argument);
}

} // namespace
} // namespace uiprune
