/*
 *  Copyright 2026 The claustrum-seg Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

// Layer primitives with reverse-mode rules. Every op takes the tape first;
// nothing is recorded when the tape is off or no input requires a gradient.

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "rng.hpp"
#include "tensor.hpp"

namespace claustrum {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

// cols has shape (cin*9, h*w); zero ring padding.
template <class T>
void im2col3x3(const T* in, std::size_t cin, std::size_t h, std::size_t w, T* cols) {
    const std::size_t hw = h * w;
    for (std::size_t ci = 0; ci < cin; ++ci) {
        const T* plane = in + ci * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                T* row = cols + ((ci * 3 + ky) * 3 + kx) * hw;
                const int dy = ky - 1, dx = kx - 1;
                for (std::size_t y = 0; y < h; ++y) {
                    T* dst = row + y * w;
                    const long sy = static_cast<long>(y) + dy;
                    if (sy < 0 || sy >= static_cast<long>(h)) {
                        std::fill(dst, dst + w, T(0));
                        continue;
                    }
                    const T* src = plane + sy * w;
                    if (dx == 0) {
                        std::memcpy(dst, src, w * sizeof(T));
                    } else if (dx < 0) {
                        dst[0] = T(0);
                        std::memcpy(dst + 1, src, (w - 1) * sizeof(T));
                    } else {
                        std::memcpy(dst, src + 1, (w - 1) * sizeof(T));
                        dst[w - 1] = T(0);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im3x3_add(const T* cols, std::size_t cin, std::size_t h, std::size_t w, T* out) {
    const std::size_t hw = h * w;
    for (std::size_t ci = 0; ci < cin; ++ci) {
        T* plane = out + ci * hw;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const T* row = cols + ((ci * 3 + ky) * 3 + kx) * hw;
                const int dy = ky - 1, dx = kx - 1;
                for (std::size_t y = 0; y < h; ++y) {
                    const long sy = static_cast<long>(y) + dy;
                    if (sy < 0 || sy >= static_cast<long>(h)) continue;
                    const T* src = row + y * w;
                    T* dst = plane + sy * w;
                    if (dx == 0) {
                        for (std::size_t x = 0; x < w; ++x) dst[x] += src[x];
                    } else if (dx < 0) {
                        for (std::size_t x = 1; x < w; ++x) dst[x - 1] += src[x];
                    } else {
                        for (std::size_t x = 0; x + 1 < w; ++x) dst[x + 1] += src[x];
                    }
                }
            }
        }
    }
}

// Left-to-right sum. Eigen reductions over a Map peel by runtime address,
// which would make results depend on where the allocator put the buffer.
template <class T>
T plain_sum(const T* p, std::size_t n) {
    T s = T(0);
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    return s;
}

template <class T>
void add_into(std::vector<T>& dst, std::span<const T> src) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

} // namespace detail

/// 3x3 convolution, stride 1, one ring of zero padding.
/// weight: (C_out, C_in, 3, 3); bias: C_out elements.
template <class T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    const Shape xs = x.shape(), ws = weight.shape();
    if (ws.h != 3 || ws.w != 3) throw ShapeError("conv2d kernel must be 3x3, got " + ws.str());
    if (ws.c != xs.c)
        throw ShapeError("conv2d channel mismatch: input has " + std::to_string(xs.c) + ", kernel expects " +
                         std::to_string(ws.c));
    if (bias.numel() != ws.n) throw ShapeError("conv2d bias needs " + std::to_string(ws.n) + " elements");
    const std::size_t cin = xs.c, cout = ws.n, hw = xs.plane(), k = cin * 9;
    Tensor<T> y(Shape{xs.n, cout, xs.h, xs.w});
    std::vector<T> cols(k * hw);
    detail::ConstMapMat<T> wm(weight.storage().data(), cout, k);
    for (std::size_t n = 0; n < xs.n; ++n) {
        detail::im2col3x3(x.storage().data() + n * cin * hw, cin, xs.h, xs.w, cols.data());
        detail::MapMat<T> out(y.storage().data() + n * cout * hw, cout, hw);
        out.noalias() = wm * detail::ConstMapMat<T>(cols.data(), k, hw);
        for (std::size_t co = 0; co < cout; ++co) out.row(co).array() += bias.storage()[co];
    }
    if (tape.wants({&x, &weight, &bias})) {
        tape.record(y, [x = x, weight = weight, bias = bias, y]() mutable {
            const Shape xs = x.shape();
            const std::size_t cin = xs.c, cout = weight.shape().n, hw = xs.plane(), k = cin * 9;
            const auto& gy = y.storage_ptr()->grad;
            std::vector<T> cols(k * hw);
            std::vector<T> dcols(k * hw);
            detail::ConstMapMat<T> wm(weight.storage().data(), cout, k);
            for (std::size_t n = 0; n < xs.n; ++n) {
                detail::ConstMapMat<T> g(gy.data() + n * cout * hw, cout, hw);
                if (weight.requires_grad()) {
                    detail::im2col3x3(x.storage().data() + n * cin * hw, cin, xs.h, xs.w, cols.data());
                    detail::MapMat<T> dw(weight.grad().data(), cout, k);
                    dw.noalias() += g * detail::ConstMapMat<T>(cols.data(), k, hw).transpose();
                }
                if (bias.requires_grad()) {
                    auto db = bias.grad();
                    for (std::size_t co = 0; co < cout; ++co) db[co] += detail::plain_sum(gy.data() + (n * cout + co) * hw, hw);
                }
                if (x.requires_grad()) {
                    detail::MapMat<T> dc(dcols.data(), k, hw);
                    dc.noalias() = wm.transpose() * g;
                    detail::col2im3x3_add(dcols.data(), cin, xs.h, xs.w, x.grad().data() + n * cin * hw);
                }
            }
        });
    }
    return y;
}

/// 2x2 max pooling, stride 2. Ties resolve to the first element in row-major
/// window order, which is where the gradient goes.
template <class T>
Tensor<T> maxpool2(Tape<T>& tape, const Tensor<T>& x) {
    const Shape xs = x.shape();
    if (xs.h % 2 != 0 || xs.w % 2 != 0) throw ShapeError("maxpool2 needs even spatial dims, got " + xs.str());
    const std::size_t oh = xs.h / 2, ow = xs.w / 2;
    Tensor<T> y(Shape{xs.n, xs.c, oh, ow});
    const bool rec = tape.wants({&x});
    std::vector<std::size_t> argmax(rec ? y.numel() : 0);
    const T* in = x.storage().data();
    T* out = y.storage().data();
    std::size_t o = 0;
    for (std::size_t nc = 0; nc < xs.n * xs.c; ++nc) {
        const std::size_t base = nc * xs.plane();
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j, ++o) {
                std::size_t best = base + (2 * i) * xs.w + 2 * j;
                const std::size_t cand[3] = {best + 1, best + xs.w, best + xs.w + 1};
                for (auto c : cand)
                    if (in[c] > in[best]) best = c;
                out[o] = in[best];
                if (rec) argmax[o] = best;
            }
        }
    }
    if (rec) {
        tape.record(y, [x = x, y, argmax = std::move(argmax)]() mutable {
            const auto& gy = y.storage_ptr()->grad;
            auto gx = x.grad();
            for (std::size_t o = 0; o < gy.size(); ++o) gx[argmax[o]] += gy[o];
        });
    }
    return y;
}

/// 2x2 stride-2 transposed convolution; doubles H and W.
/// weight: (C_in, C_out, 2, 2); bias: C_out elements.
template <class T>
Tensor<T> transposed_conv2(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    const Shape xs = x.shape(), ws = weight.shape();
    if (ws.h != 2 || ws.w != 2) throw ShapeError("transposed_conv2 kernel must be 2x2, got " + ws.str());
    if (ws.n != xs.c)
        throw ShapeError("transposed_conv2 channel mismatch: input has " + std::to_string(xs.c) +
                         ", kernel expects " + std::to_string(ws.n));
    if (bias.numel() != ws.c) throw ShapeError("transposed_conv2 bias needs " + std::to_string(ws.c) + " elements");
    const std::size_t cin = xs.c, cout = ws.c, hw = xs.plane(), ow = 2 * xs.w;
    Tensor<T> y(Shape{xs.n, cout, 2 * xs.h, 2 * xs.w});
    std::vector<T> r(cout * 4 * hw);
    detail::ConstMapMat<T> wm(weight.storage().data(), cin, cout * 4);
    for (std::size_t n = 0; n < xs.n; ++n) {
        detail::MapMat<T> rm(r.data(), cout * 4, hw);
        rm.noalias() = wm.transpose() * detail::ConstMapMat<T>(x.storage().data() + n * cin * hw, cin, hw);
        T* out = y.storage().data() + n * cout * 4 * hw;
        for (std::size_t co = 0; co < cout; ++co) {
            const T b = bias.storage()[co];
            for (std::size_t ab = 0; ab < 4; ++ab) {
                const std::size_t a = ab / 2, bb = ab % 2;
                const T* src = r.data() + (co * 4 + ab) * hw;
                T* dst = out + co * 4 * hw;
                for (std::size_t i = 0; i < xs.h; ++i)
                    for (std::size_t j = 0; j < xs.w; ++j) dst[(2 * i + a) * ow + 2 * j + bb] = src[i * xs.w + j] + b;
            }
        }
    }
    if (tape.wants({&x, &weight, &bias})) {
        tape.record(y, [x = x, weight = weight, bias = bias, y]() mutable {
            const Shape xs = x.shape();
            const std::size_t cin = xs.c, cout = weight.shape().c, hw = xs.plane(), ow = 2 * xs.w;
            const auto& gy = y.storage_ptr()->grad;
            std::vector<T> g(cout * 4 * hw);
            detail::ConstMapMat<T> wm(weight.storage().data(), cin, cout * 4);
            for (std::size_t n = 0; n < xs.n; ++n) {
                const T* src = gy.data() + n * cout * 4 * hw;
                for (std::size_t co = 0; co < cout; ++co)
                    for (std::size_t ab = 0; ab < 4; ++ab) {
                        const std::size_t a = ab / 2, bb = ab % 2;
                        T* dst = g.data() + (co * 4 + ab) * hw;
                        const T* plane = src + co * 4 * hw;
                        for (std::size_t i = 0; i < xs.h; ++i)
                            for (std::size_t j = 0; j < xs.w; ++j) dst[i * xs.w + j] = plane[(2 * i + a) * ow + 2 * j + bb];
                    }
                detail::ConstMapMat<T> gm(g.data(), cout * 4, hw);
                if (x.requires_grad()) {
                    detail::MapMat<T> dx(x.grad().data() + n * cin * hw, cin, hw);
                    dx.noalias() += wm * gm;
                }
                if (weight.requires_grad()) {
                    detail::MapMat<T> dw(weight.grad().data(), cin, cout * 4);
                    dw.noalias() += detail::ConstMapMat<T>(x.storage().data() + n * cin * hw, cin, hw) * gm.transpose();
                }
                if (bias.requires_grad()) {
                    auto db = bias.grad();
                    for (std::size_t co = 0; co < cout; ++co) db[co] += detail::plain_sum(g.data() + co * 4 * hw, 4 * hw);
                }
            }
        });
    }
    return y;
}

template <class T>
struct BatchNormState {
    Tensor<T> gamma;
    Tensor<T> beta;
    std::vector<T> running_mean;
    std::vector<T> running_var;
    T momentum = T(0.1);
    T epsilon = T(1e-5);

    BatchNormState() = default;
    explicit BatchNormState(std::size_t channels, T momentum_ = T(0.1), T epsilon_ = T(1e-5))
        : gamma(Shape{channels, 1, 1, 1}, T(1)), beta(Shape{channels, 1, 1, 1}, T(0)),
          running_mean(channels, T(0)), running_var(channels, T(1)), momentum(momentum_), epsilon(epsilon_) {
        gamma.set_requires_grad();
        beta.set_requires_grad();
        validate();
    }

    std::size_t channels() const { return running_mean.size(); }

    void validate() const {
        if (!(epsilon > T(0))) throw ValueError("batchnorm epsilon must be > 0");
        if (!(momentum > T(0) && momentum < T(1))) throw ValueError("batchnorm momentum must be in (0,1)");
    }

    BatchNormState clone() const {
        BatchNormState s = *this;
        s.gamma = gamma.clone();
        s.beta = beta.clone();
        return s;
    }
};

/// Per-channel batch normalization over (N, H, W). Train mode normalizes
/// with the biased batch variance and folds the unbiased variance into the
/// running estimate; eval mode uses the running statistics.
template <class T>
Tensor<T> batchnorm(Tape<T>& tape, const Tensor<T>& x, BatchNormState<T>& state, Mode mode) {
    const Shape xs = x.shape();
    if (xs.c != state.channels())
        throw ShapeError("batchnorm channel mismatch: input has " + std::to_string(xs.c) + ", state has " +
                         std::to_string(state.channels()));
    const std::size_t m = xs.n * xs.plane();
    if (m == 0) throw ShapeError("batchnorm on an empty batch");
    state.validate();
    const std::size_t hw = xs.plane();
    Tensor<T> y(xs);
    std::vector<T> xhat(x.numel());
    std::vector<T> inv_std(xs.c);
    const T* in = x.storage().data();
    T* out = y.storage().data();
    const auto& g = state.gamma.storage();
    const auto& b = state.beta.storage();
    for (std::size_t c = 0; c < xs.c; ++c) {
        T mean, var;
        if (mode == Mode::train) {
            double s = 0;
            for (std::size_t n = 0; n < xs.n; ++n) {
                const T* p = in + (n * xs.c + c) * hw;
                for (std::size_t i = 0; i < hw; ++i) s += p[i];
            }
            const double mu = s / static_cast<double>(m);
            double ss = 0;
            for (std::size_t n = 0; n < xs.n; ++n) {
                const T* p = in + (n * xs.c + c) * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                    const double d = p[i] - mu;
                    ss += d * d;
                }
            }
            mean = static_cast<T>(mu);
            var = static_cast<T>(ss / static_cast<double>(m));
            const T unbiased = m > 1 ? static_cast<T>(ss / static_cast<double>(m - 1)) : var;
            state.running_mean[c] = (T(1) - state.momentum) * state.running_mean[c] + state.momentum * mean;
            state.running_var[c] = (T(1) - state.momentum) * state.running_var[c] + state.momentum * unbiased;
        } else {
            mean = state.running_mean[c];
            var = state.running_var[c];
        }
        inv_std[c] = T(1) / std::sqrt(var + state.epsilon);
        for (std::size_t n = 0; n < xs.n; ++n) {
            const std::size_t base = (n * xs.c + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                const T h = (in[base + i] - mean) * inv_std[c];
                xhat[base + i] = h;
                out[base + i] = g[c] * h + b[c];
            }
        }
    }
    if (tape.wants({&x, &state.gamma, &state.beta})) {
        tape.record(y, [x = x, y, gamma = state.gamma, beta = state.beta, xhat = std::move(xhat),
                        inv_std = std::move(inv_std), mode]() mutable {
            const Shape xs = x.shape();
            const std::size_t hw = xs.plane();
            const double m = static_cast<double>(xs.n * hw);
            const auto& gy = y.storage_ptr()->grad;
            const auto& gv = gamma.storage();
            for (std::size_t c = 0; c < xs.c; ++c) {
                double sum_g = 0, sum_gx = 0;
                for (std::size_t n = 0; n < xs.n; ++n) {
                    const std::size_t base = (n * xs.c + c) * hw;
                    for (std::size_t i = 0; i < hw; ++i) {
                        sum_g += gy[base + i];
                        sum_gx += gy[base + i] * xhat[base + i];
                    }
                }
                if (gamma.requires_grad()) gamma.grad()[c] += static_cast<T>(sum_gx);
                if (beta.requires_grad()) beta.grad()[c] += static_cast<T>(sum_g);
                if (!x.requires_grad()) continue;
                auto gx = x.grad();
                const T scale = gv[c] * inv_std[c];
                for (std::size_t n = 0; n < xs.n; ++n) {
                    const std::size_t base = (n * xs.c + c) * hw;
                    for (std::size_t i = 0; i < hw; ++i) {
                        if (mode == Mode::train) {
                            gx[base + i] += static_cast<T>(
                                scale * (gy[base + i] - sum_g / m - xhat[base + i] * sum_gx / m));
                        } else {
                            gx[base + i] += scale * gy[base + i];
                        }
                    }
                }
            }
        });
    }
    return y;
}

/// Eval-only overload; running statistics are read, never written.
template <class T>
Tensor<T> batchnorm(Tape<T>& tape, const Tensor<T>& x, const BatchNormState<T>& state, Mode mode) {
    if (mode == Mode::train) throw ValueError("train-mode batchnorm updates running statistics and needs a mutable state");
    return batchnorm(tape, x, const_cast<BatchNormState<T>&>(state), Mode::eval);
}

/// Inverted dropout: survivors are scaled by 1/(1-rate) so eval is identity.
template <class T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double rate, Mode mode, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ValueError("dropout rate must be in [0,1), got " + std::to_string(rate));
    if (mode == Mode::eval || rate == 0.0) return x;
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<T> mask(x.numel());
    for (auto& v : mask) v = u(rng) < rate ? T(0) : keep_scale;
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < mask.size(); ++i) y.storage()[i] = x.storage()[i] * mask[i];
    if (tape.wants({&x})) {
        tape.record(y, [x = x, y, mask = std::move(mask)]() mutable {
            const auto& gy = y.storage_ptr()->grad;
            auto gx = x.grad();
            for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += gy[i] * mask[i];
        });
    }
    return y;
}

template <class T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    const auto& in = x.storage();
    auto& out = y.storage();
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
    if (tape.wants({&x})) {
        tape.record(y, [x = x, y]() mutable {
            const auto& gy = y.storage_ptr()->grad;
            const auto& in = x.storage();
            auto gx = x.grad();
            for (std::size_t i = 0; i < in.size(); ++i)
                if (in[i] > T(0)) gx[i] += gy[i];
        });
    }
    return y;
}

/// Logistic sigmoid, clamped so every output lies strictly inside (0,1)
/// even where the exact value rounds to 0 or 1.
template <class T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    const auto& in = x.storage();
    auto& out = y.storage();
    const T lo = std::numeric_limits<T>::denorm_min();
    const T hi = std::nextafter(T(1), T(0));
    for (std::size_t i = 0; i < in.size(); ++i) {
        const T v = in[i];
        T s;
        if (v >= T(0)) {
            s = T(1) / (T(1) + std::exp(-v));
        } else {
            const T e = std::exp(v);
            s = e / (T(1) + e);
        }
        out[i] = std::clamp(s, lo, hi);
    }
    if (tape.wants({&x})) {
        tape.record(y, [x = x, y]() mutable {
            const auto& gy = y.storage_ptr()->grad;
            const auto& s = y.storage();
            auto gx = x.grad();
            for (std::size_t i = 0; i < s.size(); ++i) gx[i] += gy[i] * s[i] * (T(1) - s[i]);
        });
    }
    return y;
}

/// Channel concatenation; a's channels come first.
template <class T>
Tensor<T> concat_channels(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    const Shape as = a.shape(), bs = b.shape();
    if (as.n != bs.n || as.h != bs.h || as.w != bs.w)
        throw ShapeError("concat_channels mismatch: " + as.str() + " vs " + bs.str());
    const std::size_t hw = as.plane(), ca = as.c * hw, cb = bs.c * hw;
    Tensor<T> y(Shape{as.n, as.c + bs.c, as.h, as.w});
    for (std::size_t n = 0; n < as.n; ++n) {
        std::copy_n(a.storage().data() + n * ca, ca, y.storage().data() + n * (ca + cb));
        std::copy_n(b.storage().data() + n * cb, cb, y.storage().data() + n * (ca + cb) + ca);
    }
    if (tape.wants({&a, &b})) {
        tape.record(y, [a = a, b = b, y, ca, cb]() mutable {
            const auto& gy = y.storage_ptr()->grad;
            const std::size_t nb = a.shape().n;
            for (std::size_t n = 0; n < nb; ++n) {
                const T* src = gy.data() + n * (ca + cb);
                if (a.requires_grad()) {
                    T* ga = a.grad().data() + n * ca;
                    for (std::size_t i = 0; i < ca; ++i) ga[i] += src[i];
                }
                if (b.requires_grad()) {
                    T* gb = b.grad().data() + n * cb;
                    for (std::size_t i = 0; i < cb; ++i) gb[i] += src[ca + i];
                }
            }
        });
    }
    return y;
}

/// Sum of all elements as a (1,1,1,1) tensor.
template <class T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
    double s = 0;
    for (auto v : x.storage()) s += v;
    Tensor<T> y(Shape{1, 1, 1, 1}, static_cast<T>(s));
    if (tape.wants({&x})) {
        tape.record(y, [x = x, y]() mutable {
            const T g = y.storage_ptr()->grad[0];
            for (auto& v : x.grad()) v += g;
        });
    }
    return y;
}

template <class T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    if (!(a.shape() == b.shape())) throw ShapeError("mul shape mismatch: " + a.shape().str() + " vs " + b.shape().str());
    Tensor<T> y(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) y.storage()[i] = a.storage()[i] * b.storage()[i];
    if (tape.wants({&a, &b})) {
        tape.record(y, [a = a, b = b, y]() mutable {
            const auto& gy = y.storage_ptr()->grad;
            // Both grads are taken before accumulation so mul(x, x) works.
            std::vector<T> da(gy.size()), db(gy.size());
            for (std::size_t i = 0; i < gy.size(); ++i) {
                da[i] = gy[i] * b.storage()[i];
                db[i] = gy[i] * a.storage()[i];
            }
            if (a.requires_grad()) detail::add_into(a.storage_ptr()->ensure_grad(), std::span<const T>(da));
            if (b.requires_grad()) detail::add_into(b.storage_ptr()->ensure_grad(), std::span<const T>(db));
        });
    }
    return y;
}

template <class T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T factor) {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y.storage()[i] = x.storage()[i] * factor;
    if (tape.wants({&x})) {
        tape.record(y, [x = x, y, factor]() mutable {
            const auto& gy = y.storage_ptr()->grad;
            auto gx = x.grad();
            for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * factor;
        });
    }
    return y;
}

} // namespace claustrum
