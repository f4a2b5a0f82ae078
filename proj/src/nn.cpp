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

#include "uiprune/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace uiprune {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data))
{
    if (data_.size() != rows_ * cols_) {
        throw std::invalid_argument("matrix data length mismatch");
    }
}

Matrix Matrix::identity(std::size_t n)
{
    Matrix m(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        m(k, k) = 1.0;
    }
    return m;
}

Matrix& Matrix::operator+=(const Matrix& o)
{
    if (rows_ != o.rows_ || cols_ != o.cols_) {
        throw std::invalid_argument("matrix shape mismatch in +=");
    }
    for (std::size_t k = 0; k < data_.size(); ++k) {
        data_[k] += o.data_[k];
    }
    return *this;
}

Matrix& Matrix::operator*=(double s)
{
    for (double& v : data_) {
        v *= s;
    }
    return *this;
}

bool Matrix::all_finite() const
{
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b)
{
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul shape mismatch");
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out(i, j) += aik * b(k, j);
            }
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b)
{
    if (a.rows() != b.rows()) {
        throw std::invalid_argument("matmul_tn shape mismatch");
    }
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out(i, j) += aki * b(k, j);
            }
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b)
{
    if (a.cols() != b.cols()) {
        throw std::invalid_argument("matmul_nt shape mismatch");
    }
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
            out(i, j) = dot(a.row(i), b.row(j));
        }
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        s += a[k] * b[k];
    }
    return s;
}

double log_sum_exp(std::span<const double> x)
{
    if (x.empty()) {
        return -std::numeric_limits<double>::infinity();
    }
    const double m = *std::max_element(x.begin(), x.end());
    double s = 0.0;
    for (double v : x) {
        s += std::exp(v - m);
    }
    return m + std::log(s);
}

std::vector<double> softmax(std::span<const double> x)
{
    const double lse = log_sum_exp(x);
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        out[k] = std::exp(x[k] - lse);
    }
    return out;
}

double uniform(std::mt19937_64& rng, double lo, double hi)
{
    const double u = static_cast<double>(rng() >> 11U) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

std::uint64_t fnv1a(std::span<const char> bytes, std::uint64_t seed)
{
    std::uint64_t h = 14695981039346656037ULL ^ seed;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng)
{
    Matrix m(rows, cols);
    for (double& v : m.data()) {
        v = uniform(rng, -bound, bound);
    }
    return m;
}

} // namespace

AttentionWeights AttentionWeights::zeros(std::size_t d)
{
    return {Matrix(d, d), Matrix(d, d), Matrix(d, d)};
}

AttentionWeights AttentionWeights::random(std::size_t d, std::mt19937_64& rng)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    AttentionWeights w;
    w.wq = random_matrix(d, d, bound, rng);
    w.wk = random_matrix(d, d, bound, rng);
    w.wv = random_matrix(d, d, bound, rng);
    return w;
}

Matrix self_attention_forward(const Matrix& x, const AttentionWeights& w, AttentionCache* cache)
{
    const std::size_t n = x.rows();
    const double scale = 1.0 / std::sqrt(static_cast<double>(x.cols()));
    Matrix q = matmul(x, w.wq);
    Matrix k = matmul(x, w.wk);
    Matrix v = matmul(x, w.wv);
    Matrix probs = matmul_nt(q, k);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = probs.row(i);
        for (double& s : r) {
            s *= scale;
        }
        const auto p = softmax(r);
        std::copy(p.begin(), p.end(), r.begin());
    }
    Matrix y = matmul(probs, v);
    y += x;
    if (cache != nullptr) {
        *cache = AttentionCache{x, std::move(q), std::move(k), std::move(v), std::move(probs)};
    }
    return y;
}

Matrix self_attention_backward(const Matrix& dy, const AttentionWeights& w, const AttentionCache& cache,
                               AttentionWeights& grad)
{
    const std::size_t n = cache.x.rows();
    const double scale = 1.0 / std::sqrt(static_cast<double>(cache.x.cols()));

    // O = P V
    Matrix dprobs = matmul_nt(dy, cache.v);
    Matrix dv = matmul_tn(cache.probs, dy);

    // Row softmax: dS = P .* (dP - rowsum(dP .* P)), then the 1/sqrt(d) scale.
    Matrix dscores(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double inner = dot(dprobs.row(i), cache.probs.row(i));
        for (std::size_t j = 0; j < n; ++j) {
            dscores(i, j) = cache.probs(i, j) * (dprobs(i, j) - inner) * scale;
        }
    }
    Matrix dq = matmul(dscores, cache.k);
    Matrix dk = matmul_tn(dscores, cache.q);

    grad.wq += matmul_tn(cache.x, dq);
    grad.wk += matmul_tn(cache.x, dk);
    grad.wv += matmul_tn(cache.x, dv);

    Matrix dx = dy;
    dx += matmul_nt(dq, w.wq);
    dx += matmul_nt(dk, w.wk);
    dx += matmul_nt(dv, w.wv);
    return dx;
}

Mlp Mlp::zeros(std::size_t in, std::size_t hidden, std::size_t out)
{
    return {Matrix(in, hidden), std::vector<double>(hidden, 0.0), Matrix(hidden, out), std::vector<double>(out, 0.0)};
}

Mlp Mlp::random(std::size_t in, std::size_t hidden, std::size_t out, std::mt19937_64& rng)
{
    Mlp m = zeros(in, hidden, out);
    m.w1 = random_matrix(in, hidden, 1.0 / std::sqrt(static_cast<double>(in)), rng);
    m.w2 = random_matrix(hidden, out, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
    return m;
}

Matrix mlp_forward(const Matrix& x, const Mlp& mlp, MlpCache* cache)
{
    Matrix hidden = matmul(x, mlp.w1);
    for (std::size_t i = 0; i < hidden.rows(); ++i) {
        for (std::size_t j = 0; j < hidden.cols(); ++j) {
            hidden(i, j) = std::tanh(hidden(i, j) + mlp.b1[j]);
        }
    }
    Matrix out = matmul(hidden, mlp.w2);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = 0; j < out.cols(); ++j) {
            out(i, j) += mlp.b2[j];
        }
    }
    if (cache != nullptr) {
        *cache = MlpCache{x, std::move(hidden)};
    }
    return out;
}

Matrix mlp_backward(const Matrix& dy, const Mlp& mlp, const MlpCache& cache, Mlp& grad)
{
    grad.w2 += matmul_tn(cache.hidden, dy);
    for (std::size_t i = 0; i < dy.rows(); ++i) {
        for (std::size_t j = 0; j < dy.cols(); ++j) {
            grad.b2[j] += dy(i, j);
        }
    }
    Matrix dpre = matmul_nt(dy, mlp.w2);
    for (std::size_t i = 0; i < dpre.rows(); ++i) {
        for (std::size_t j = 0; j < dpre.cols(); ++j) {
            const double h = cache.hidden(i, j);
            dpre(i, j) *= 1.0 - h * h;
            grad.b1[j] += dpre(i, j);
        }
    }
    grad.w1 += matmul_tn(cache.x, dpre);
    return matmul_nt(dpre, mlp.w1);
}

Matrix tanh_l2_forward(const Matrix& x, TanhNormCache* cache)
{
    Matrix t(x.rows(), x.cols());
    std::vector<double> norms(x.rows());
    Matrix y(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            t(i, j) = std::tanh(x(i, j));
        }
        norms[i] = std::max(std::sqrt(dot(t.row(i), t.row(i))), kNormEpsilon);
        for (std::size_t j = 0; j < x.cols(); ++j) {
            y(i, j) = t(i, j) / norms[i];
        }
    }
    if (cache != nullptr) {
        *cache = TanhNormCache{std::move(t), std::move(norms)};
    }
    return y;
}

Matrix tanh_l2_backward(const Matrix& dy, const Matrix& y, const TanhNormCache& cache)
{
    Matrix dx(dy.rows(), dy.cols());
    for (std::size_t i = 0; i < dy.rows(); ++i) {
        const double n = cache.norm[i];
        // Below the floor the map is t / eps, a plain scaling.
        const bool floored = n <= kNormEpsilon;
        const double proj = floored ? 0.0 : dot(y.row(i), dy.row(i));
        for (std::size_t j = 0; j < dy.cols(); ++j) {
            const double dt = (dy(i, j) - y(i, j) * proj) / n;
            const double t = cache.t(i, j);
            dx(i, j) = dt * (1.0 - t * t);
        }
    }
    return dx;
}

} // namespace uiprune
