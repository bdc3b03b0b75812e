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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "error.hpp"
#include "preprocess.hpp"
#include "rng.hpp"

namespace claustrum {

struct AugmentConfig {
    double elastic_alpha = 8.0;
    double elastic_sigma = 4.0;
    double max_rotation = 10.0;   // degrees
    double max_translation = 5.0; // pixels
    double max_scale_delta = 0.05;
    std::pair<double, double> intensity_gain_range{0.9, 1.1};
    std::pair<double, double> intensity_bias_range{-0.05, 0.05};
    int copies_per_sample = 4;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(elastic_alpha >= 0.0)) throw ConfigError("augment.elastic_alpha", "must be >= 0");
        if (!(elastic_sigma > 0.0)) throw ConfigError("augment.elastic_sigma", "must be > 0");
        if (!(max_rotation >= 0.0)) throw ConfigError("augment.max_rotation", "must be >= 0");
        if (!(max_translation >= 0.0)) throw ConfigError("augment.max_translation", "must be >= 0");
        if (!(max_scale_delta >= 0.0 && max_scale_delta < 1.0))
            throw ConfigError("augment.max_scale_delta", "must be in [0,1)");
        auto [glo, ghi] = intensity_gain_range;
        if (!(std::isfinite(glo) && std::isfinite(ghi) && glo > 0.0 && glo <= ghi))
            throw ConfigError("augment.intensity_gain_range", "must be a finite range with 0 < lo <= hi");
        auto [blo, bhi] = intensity_bias_range;
        if (!(std::isfinite(blo) && std::isfinite(bhi) && blo <= bhi))
            throw ConfigError("augment.intensity_bias_range", "must be a finite range with lo <= hi");
        if (copies_per_sample < 0) throw ConfigError("augment.copies_per_sample", "must be >= 0");
    }
};

namespace detail {

// Bilinear sample with zeros outside the grid.
inline float sample_bilinear(const Image& img, double y, double x) {
    const double fy0 = std::floor(y), fx0 = std::floor(x);
    const long y0 = static_cast<long>(fy0), x0 = static_cast<long>(fx0);
    const double fy = y - fy0, fx = x - fx0;
    const long h = static_cast<long>(img.rows()), w = static_cast<long>(img.cols());
    auto at = [&](long r, long c) -> double { return (r < 0 || c < 0 || r >= h || c >= w) ? 0.0 : img(r, c); };
    double v = 0.0;
    v += (1 - fy) * (1 - fx) * at(y0, x0);
    if (fx > 0.0) v += (1 - fy) * fx * at(y0, x0 + 1);
    if (fy > 0.0) v += fy * (1 - fx) * at(y0 + 1, x0);
    if (fy > 0.0 && fx > 0.0) v += fy * fx * at(y0 + 1, x0 + 1);
    return static_cast<float>(v);
}

inline std::uint8_t sample_nearest(const Mask& m, double y, double x) {
    const long r = std::lround(y), c = std::lround(x);
    if (r < 0 || c < 0 || r >= static_cast<long>(m.rows()) || c >= static_cast<long>(m.cols())) return 0;
    return m(r, c) ? 1 : 0;
}

// Separable Gaussian blur, edge-clamped, radius ceil(3 sigma).
inline std::vector<double> gaussian_blur(const std::vector<double>& in, std::size_t h, std::size_t w, double sigma) {
    const long radius = static_cast<long>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double ks = 0;
    for (long i = -radius; i <= radius; ++i) ks += k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    for (auto& v : k) v /= ks;
    std::vector<double> tmp(in.size()), out(in.size());
    const long H = static_cast<long>(h), W = static_cast<long>(w);
    for (long r = 0; r < H; ++r)
        for (long c = 0; c < W; ++c) {
            double s = 0;
            for (long i = -radius; i <= radius; ++i) s += k[i + radius] * in[r * W + std::clamp(c + i, 0L, W - 1)];
            tmp[r * W + c] = s;
        }
    for (long r = 0; r < H; ++r)
        for (long c = 0; c < W; ++c) {
            double s = 0;
            for (long i = -radius; i <= radius; ++i) s += k[i + radius] * tmp[std::clamp(r + i, 0L, H - 1) * W + c];
            out[r * W + c] = s;
        }
    return out;
}

// Resample image and label through a backward map (r, c) -> source (y, x).
template <class Map>
void warp(SliceSample& s, Map&& source) {
    const Image src = s.image;
    const std::optional<Mask> lsrc = s.label;
    for (std::size_t r = 0; r < src.rows(); ++r)
        for (std::size_t c = 0; c < src.cols(); ++c) {
            auto [y, x] = source(r, c);
            s.image(r, c) = sample_bilinear(src, y, x);
            if (lsrc) (*s.label)(r, c) = sample_nearest(*lsrc, y, x);
        }
}

} // namespace detail

/// Random smooth displacement field: per-pixel uniform [-1,1] offsets,
/// Gaussian-smoothed with std `sigma`, scaled by `alpha`.
inline SliceSample elastic_deform(const SliceSample& sample, double alpha, double sigma, Rng& rng) {
    sample.check();
    if (!(alpha >= 0.0)) throw ValueError("elastic_deform alpha must be >= 0");
    if (!(sigma > 0.0)) throw ValueError("elastic_deform sigma must be > 0");
    SliceSample out = sample;
    const std::size_t h = sample.image.rows(), w = sample.image.cols();
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> dy(h * w), dx(h * w);
    for (auto& v : dy) v = u(rng);
    for (auto& v : dx) v = u(rng);
    if (alpha == 0.0) {
        out.provenance.transforms.push_back("elastic(alpha=0)");
        return out;
    }
    dy = detail::gaussian_blur(dy, h, w, sigma);
    dx = detail::gaussian_blur(dx, h, w, sigma);
    detail::warp(out, [&](std::size_t r, std::size_t c) {
        const std::size_t i = r * w + c;
        return std::pair{static_cast<double>(r) + alpha * dy[i], static_cast<double>(c) + alpha * dx[i]};
    });
    out.provenance.transforms.push_back("elastic(alpha=" + std::to_string(alpha) + ",sigma=" + std::to_string(sigma) + ")");
    return out;
}

/// Rotation (degrees) about the image centre, then isotropic scale, then
/// translation (rows, cols). Zeros fill everything mapped from outside.
inline SliceSample affine_transform(const SliceSample& sample, double rotation_deg, std::pair<double, double> translation,
                                    double scale) {
    sample.check();
    if (!(scale > 0.0)) throw ValueError("affine_transform scale must be > 0");
    SliceSample out = sample;
    if (rotation_deg == 0.0 && scale == 1.0 && translation.first == 0.0 && translation.second == 0.0) return out;
    const double th = rotation_deg * std::numbers::pi / 180.0;
    const double cs = std::cos(th), sn = std::sin(th);
    const double cy = (static_cast<double>(sample.image.rows()) - 1.0) / 2.0;
    const double cx = (static_cast<double>(sample.image.cols()) - 1.0) / 2.0;
    // Forward: p = s * R (q - c) + c + t; sample at q = R^T (p - c - t) / s + c.
    detail::warp(out, [&](std::size_t r, std::size_t c) {
        const double py = (static_cast<double>(r) - cy - translation.first) / scale;
        const double px = (static_cast<double>(c) - cx - translation.second) / scale;
        return std::pair{cs * py + sn * px + cy, -sn * py + cs * px + cx};
    });
    out.provenance.transforms.push_back("affine(rot=" + std::to_string(rotation_deg) + ",scale=" + std::to_string(scale) +
                                        ",t=" + std::to_string(translation.first) + "," +
                                        std::to_string(translation.second) + ")");
    return out;
}

/// image' = clamp(gain * image + bias, 0, 1); the label is untouched.
inline SliceSample intensity_rescale(const SliceSample& sample, double gain, double bias) {
    if (!(gain > 0.0)) throw ValueError("intensity_rescale gain must be > 0");
    SliceSample out = sample;
    for (auto& v : out.image.storage()) v = static_cast<float>(std::clamp(gain * v + bias, 0.0, 1.0));
    out.provenance.transforms.push_back("intensity(gain=" + std::to_string(gain) + ",bias=" + std::to_string(bias) + ")");
    return out;
}

/// One stochastic variant: intensity, then affine, then elastic, each with
/// parameters drawn from `rng` within the config bounds.
inline SliceSample augment_sample(const SliceSample& sample, const AugmentConfig& cfg, Rng& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> gain(cfg.intensity_gain_range.first, cfg.intensity_gain_range.second);
    std::uniform_real_distribution<double> bias(cfg.intensity_bias_range.first, cfg.intensity_bias_range.second);
    const double g = gain(rng), b = bias(rng);
    const double rot = cfg.max_rotation * u(rng);
    const double ty = cfg.max_translation * u(rng), tx = cfg.max_translation * u(rng);
    const double sc = 1.0 + cfg.max_scale_delta * u(rng);
    auto s = intensity_rescale(sample, g, b);
    s = affine_transform(s, rot, {ty, tx}, sc);
    s = elastic_deform(s, cfg.elastic_alpha, cfg.elastic_sigma, rng);
    s.provenance.augmented = true;
    return s;
}

/// Originals followed by `copies_per_sample` variants of each original.
/// Variant (i, k) uses a stream seeded by (seed, subject, slice, k), so the
/// output does not depend on `workers`.
inline std::vector<SliceSample> augment_dataset(std::span<const SliceSample> samples, const AugmentConfig& cfg,
                                                unsigned workers = 1) {
    cfg.validate();
    require_training_data(samples, "augment_dataset");
    const std::size_t copies = static_cast<std::size_t>(cfg.copies_per_sample);
    std::vector<SliceSample> out(samples.begin(), samples.end());
    out.resize(samples.size() * (1 + copies));
    auto job = [&](std::size_t idx) {
        const std::size_t i = idx / copies, k = idx % copies;
        const auto& s = samples[i];
        Rng rng(derive_seed(cfg.seed, {hash_string(s.subject_id), static_cast<std::uint64_t>(s.slice_index), k}));
        out[samples.size() + idx] = augment_sample(s, cfg, rng);
    };
    const std::size_t total = samples.size() * copies;
    workers = std::max(1u, workers);
    if (workers == 1 || total < 2) {
        for (std::size_t idx = 0; idx < total; ++idx) job(idx);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < workers; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t idx = t; idx < total; idx += workers) job(idx);
            });
        for (auto& th : pool) th.join();
    }
    return out;
}

} // namespace claustrum
