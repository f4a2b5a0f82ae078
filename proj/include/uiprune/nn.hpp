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

// Small dense building blocks with hand-written backward passes. Everything
// is double precision and row-major; vectors are rows.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace uiprune {

class Matrix
{
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill)
    {
    }
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    Matrix& operator+=(const Matrix& o);
    Matrix& operator*=(double s);

    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);    // a * b
Matrix matmul_tn(const Matrix& a, const Matrix& b); // a^T * b
Matrix matmul_nt(const Matrix& a, const Matrix& b); // a * b^T

double dot(std::span<const double> a, std::span<const double> b);

/// Numerically stable log(sum(exp(x))).
double log_sum_exp(std::span<const double> x);
std::vector<double> softmax(std::span<const double> x);

/// Uniform doubles in [lo, hi) built directly from the engine output so the
/// sequence is identical across standard library implementations.
double uniform(std::mt19937_64& rng, double lo, double hi);

/// FNV-1a, used to derive stable seeds from strings.
std::uint64_t fnv1a(std::span<const char> bytes, std::uint64_t seed = 0);

/// Single-head scaled dot-product self-attention with residual:
/// Y = X + softmax(X Wq (X Wk)^T / sqrt(d)) X Wv.
struct AttentionWeights
{
    Matrix wq;
    Matrix wk;
    Matrix wv;

    static AttentionWeights zeros(std::size_t d);
    static AttentionWeights random(std::size_t d, std::mt19937_64& rng);
};

struct AttentionCache
{
    Matrix x;
    Matrix q;
    Matrix k;
    Matrix v;
    Matrix probs; // n x n row-stochastic
};

Matrix self_attention_forward(const Matrix& x, const AttentionWeights& w, AttentionCache* cache = nullptr);

/// Accumulates weight gradients into grad and returns dL/dX.
Matrix self_attention_backward(const Matrix& dy, const AttentionWeights& w, const AttentionCache& cache,
                               AttentionWeights& grad);

/// Two-layer perceptron z = W2 tanh(W1 x + b1) + b2 with hidden width = d.
struct Mlp
{
    Matrix w1;
    std::vector<double> b1;
    Matrix w2;
    std::vector<double> b2;

    static Mlp zeros(std::size_t in, std::size_t hidden, std::size_t out);
    static Mlp random(std::size_t in, std::size_t hidden, std::size_t out, std::mt19937_64& rng);
};

struct MlpCache
{
    Matrix x;
    Matrix hidden; // post-tanh
};

/// Applies the MLP to every row of x.
Matrix mlp_forward(const Matrix& x, const Mlp& mlp, MlpCache* cache = nullptr);
Matrix mlp_backward(const Matrix& dy, const Mlp& mlp, const MlpCache& cache, Mlp& grad);

/// Row-wise tanh then L2 normalization with norm floor eps.
struct TanhNormCache
{
    Matrix t;                 // tanh output
    std::vector<double> norm; // max(||t_i||, eps)
};

inline constexpr double kNormEpsilon = 1e-12;

Matrix tanh_l2_forward(const Matrix& x, TanhNormCache* cache = nullptr);
Matrix tanh_l2_backward(const Matrix& dy, const Matrix& y, const TanhNormCache& cache);

} // namespace uiprune
