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
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "augment.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "nifti_io.hpp"
#include "rng.hpp"

namespace claustrum {

/// Synthetic slices with a thin curved ribbon near a fixed locus.
struct PhantomConfig {
    int n_subjects = 10;
    int slices_per_subject = 16;
    double band_fraction = 0.8; // central share of slices carrying the ribbon
    double thickness_min = 2.0;
    double thickness_max = 4.0;
    double length_min = 76.0;
    double length_max = 88.0;
    double curvature = 10.0;     // max sag of the spline midpoint, px
    double tilt_deg = 8.0;
    double center_jitter = 4.0;  // per subject, px
    double slice_wobble = 1.5;   // per slice, px
    double center_row = 120.0;
    double center_col = 118.0;
    double noise_std = 0.06;
    double contrast = 0.35;      // ribbon darkening relative to the tissue level
    double intensity_scale = 1000.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_subjects < 1) throw ConfigError("phantom.n_subjects", "must be >= 1");
        if (slices_per_subject < 1) throw ConfigError("phantom.slices_per_subject", "must be >= 1");
        if (!(band_fraction > 0.0 && band_fraction <= 1.0)) throw ConfigError("phantom.band_fraction", "must be in (0,1]");
        if (!(thickness_min >= 1.0)) throw ConfigError("phantom.thickness_min", "must be >= 1");
        if (!(thickness_max >= thickness_min)) throw ConfigError("phantom.thickness_max", "must be >= thickness_min");
        if (!(length_min > 0.0 && length_max >= length_min)) throw ConfigError("phantom.length_max", "bad length range");
        if (!(curvature >= 0.0)) throw ConfigError("phantom.curvature", "must be >= 0");
        if (!(center_jitter >= 0.0 && slice_wobble >= 0.0)) throw ConfigError("phantom.center_jitter", "must be >= 0");
        if (!(noise_std >= 0.0)) throw ConfigError("phantom.noise_std", "must be >= 0");
        if (!(intensity_scale > 0.0)) throw ConfigError("phantom.intensity_scale", "must be > 0");
        // Worst-case extent of the union box, plus the default ROI margin.
        const double half_len = length_max / 2.0 + center_jitter + slice_wobble + thickness_max / 2.0;
        const double half_h = curvature + std::sin(tilt_deg * std::acos(-1.0) / 180.0) * length_max / 2.0 + center_jitter +
                              slice_wobble + thickness_max / 2.0;
        if (2.0 * half_len + 8.0 > 112.0 || 2.0 * half_h + 8.0 > 64.0)
            throw ConfigError("phantom", "ribbon geometry can exceed a 64x112 window");
    }
};

struct PhantomSubject {
    std::string subject_id;
    nifti::Volume image; // float32, 256 x 256 x slices
    nifti::Volume label; // uint8 {0,1}
    std::uint64_t foreground_pixels = 0;
    std::uint64_t boundary_pixels = 0;
    int ribbon_slices = 0;

    double foreground_fraction() const {
        return static_cast<double>(foreground_pixels) / static_cast<double>(image.voxel_count());
    }
    /// Share of ribbon pixels with a 4-neighbour outside the ribbon.
    double boundary_fraction() const {
        return foreground_pixels ? static_cast<double>(boundary_pixels) / static_cast<double>(foreground_pixels) : 0.0;
    }
};

inline std::string phantom_subject_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "sub-%03d", index + 1);
    return buf;
}

namespace detail {

struct Ribbon {
    double r0, c0, r1, c1, r2, c2; // quadratic Bezier control points
    double thickness;
};

inline double bezier_distance(const Ribbon& rb, double r, double c) {
    // Dense sampling is plenty at these sizes and keeps the raster exact and deterministic.
    constexpr int kSteps = 256;
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s <= kSteps; ++s) {
        const double t = static_cast<double>(s) / kSteps, u = 1.0 - t;
        const double pr = u * u * rb.r0 + 2 * u * t * rb.r1 + t * t * rb.r2;
        const double pc = u * u * rb.c0 + 2 * u * t * rb.c1 + t * t * rb.c2;
        best = std::min(best, (pr - r) * (pr - r) + (pc - c) * (pc - c));
    }
    return std::sqrt(best);
}

inline Mask rasterize(const Ribbon& rb, std::size_t rows, std::size_t cols) {
    Mask m(rows, cols);
    const double pad = rb.thickness / 2.0 + 1.0;
    const auto lo_r = static_cast<long>(std::floor(std::min({rb.r0, rb.r1, rb.r2}) - pad));
    const auto hi_r = static_cast<long>(std::ceil(std::max({rb.r0, rb.r1, rb.r2}) + pad));
    const auto lo_c = static_cast<long>(std::floor(std::min({rb.c0, rb.c1, rb.c2}) - pad));
    const auto hi_c = static_cast<long>(std::ceil(std::max({rb.c0, rb.c1, rb.c2}) + pad));
    for (long r = std::max(0L, lo_r); r <= std::min<long>(static_cast<long>(rows) - 1, hi_r); ++r)
        for (long c = std::max(0L, lo_c); c <= std::min<long>(static_cast<long>(cols) - 1, hi_c); ++c)
            if (bezier_distance(rb, static_cast<double>(r), static_cast<double>(c)) <= rb.thickness / 2.0)
                m(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = 1;
    return m;
}

inline std::vector<double> smooth_field(std::size_t rows, std::size_t cols, double sigma, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> f(rows * cols);
    for (auto& v : f) v = n(rng);
    f = gaussian_blur(f, rows, cols, sigma);
    double ss = 0;
    for (double v : f) ss += v * v;
    const double sd = std::sqrt(ss / static_cast<double>(f.size()));
    if (sd > 0)
        for (auto& v : f) v /= sd;
    return f;
}

inline std::uint64_t boundary_count(const Mask& m) {
    std::uint64_t n = 0;
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (!m(r, c)) continue;
            const bool edge = r == 0 || c == 0 || r + 1 == m.rows() || c + 1 == m.cols() || !m(r - 1, c) ||
                              !m(r + 1, c) || !m(r, c - 1) || !m(r, c + 1);
            n += edge;
        }
    return n;
}

} // namespace detail

/// Deterministic in (config.seed, subject_index).
inline PhantomSubject generate_subject(const PhantomConfig& cfg, int subject_index) {
    cfg.validate();
    constexpr std::size_t F = 256;
    const auto S = static_cast<std::size_t>(cfg.slices_per_subject);
    Rng rng(derive_seed(cfg.seed, {0x9A, static_cast<std::uint64_t>(subject_index)}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double a, double b) { return a + (b - a) * unit(rng); };
    const double pi = std::acos(-1.0);

    PhantomSubject out;
    out.subject_id = phantom_subject_id(subject_index);
    out.image = nifti::make_volume({F, F, S}, {0.7, 0.7, 0.7}, nifti::Datatype::float32);
    out.label = nifti::make_volume({F, F, S}, {0.7, 0.7, 0.7}, nifti::Datatype::uint8);

    // Subject-level anatomy: locus, base shape, brain outline.
    const double cr = cfg.center_row + uniform(-cfg.center_jitter, cfg.center_jitter);
    const double cc = cfg.center_col + uniform(-cfg.center_jitter, cfg.center_jitter);
    const double base_len = uniform(cfg.length_min, cfg.length_max);
    const double base_sag = uniform(-cfg.curvature, cfg.curvature);
    const double base_tilt = uniform(-cfg.tilt_deg, cfg.tilt_deg);
    const double base_thick = uniform(cfg.thickness_min, cfg.thickness_max);
    const double brain_a = uniform(100.0, 112.0), brain_b = uniform(84.0, 96.0);
    const double tissue = uniform(0.9, 1.1);

    const std::size_t band = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.band_fraction * static_cast<double>(S))));
    const std::size_t band0 = (S - band) / 2;

    for (std::size_t k = 0; k < S; ++k) {
        // Slow tissue texture plus fine noise.
        auto coarse = detail::smooth_field(F, F, 12.0, rng);
        auto fine = detail::smooth_field(F, F, 1.5, rng);
        std::normal_distribution<double> white(0.0, cfg.noise_std);
        Mask ribbon(F, F);
        if (k >= band0 && k < band0 + band) {
            // Position along the band: thinner, shorter ribbons towards its ends.
            const double pos = band > 1 ? (static_cast<double>(k - band0) / static_cast<double>(band - 1)) * 2.0 - 1.0 : 0.0;
            const double taper = 1.0 - 0.2 * pos * pos;
            const double len = std::clamp(base_len * taper + uniform(-4.0, 4.0), cfg.length_min * 0.8, cfg.length_max);
            const double sag = std::clamp(base_sag + uniform(-2.0, 2.0), -cfg.curvature, cfg.curvature);
            const double tilt = std::clamp(base_tilt + uniform(-2.0, 2.0), -cfg.tilt_deg, cfg.tilt_deg) * pi / 180.0;
            const double thick = std::clamp(base_thick + uniform(-0.4, 0.4), cfg.thickness_min, cfg.thickness_max);
            const double r = cr + uniform(-cfg.slice_wobble, cfg.slice_wobble);
            const double c = cc + uniform(-cfg.slice_wobble, cfg.slice_wobble);
            const double dr = std::sin(tilt) * len / 2.0, dc = std::cos(tilt) * len / 2.0;
            // Control point chosen so the curve midpoint sags by `sag` rows.
            detail::Ribbon rb{r - dr, c - dc, r + 2.0 * sag, c, r + dr, c + dc, thick};
            ribbon = detail::rasterize(rb, F, F);
        }
        for (std::size_t i = 0; i < F; ++i)
            for (std::size_t j = 0; j < F; ++j) {
                const double y = (static_cast<double>(i) - 128.0) / brain_b, x = (static_cast<double>(j) - 128.0) / brain_a;
                const double rr = std::sqrt(x * x + y * y);
                // Soft-edged brain ellipse on a dark background.
                const double inside = 1.0 / (1.0 + std::exp((rr - 1.0) * 40.0));
                double v = inside * (tissue + 0.08 * coarse[i * F + j] + 0.04 * fine[i * F + j]);
                if (ribbon(i, j)) v -= cfg.contrast * tissue;
                v += white(rng);
                out.image.at(i, j, k) = static_cast<double>(static_cast<float>(std::max(0.0, v) * cfg.intensity_scale));
                out.label.at(i, j, k) = ribbon(i, j);
            }
        const auto fg = count_foreground(ribbon);
        out.foreground_pixels += fg;
        out.boundary_pixels += detail::boundary_count(ribbon);
        out.ribbon_slices += fg > 0;
    }
    return out;
}

struct PhantomDatasetEntry {
    std::string subject_id;
    std::filesystem::path image;
    std::filesystem::path label;
    double foreground_fraction = 0.0;
    double boundary_fraction = 0.0;
    int ribbon_slices = 0;
};

/// Writes `<dir>/sub-XXX_img.nii.gz` and `<dir>/sub-XXX_lbl.nii.gz` per
/// subject. The caller writes the manifest.
inline std::vector<PhantomDatasetEntry> generate_dataset(const PhantomConfig& cfg, const std::filesystem::path& dir,
                                                         unsigned workers = 1) {
    cfg.validate();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    std::vector<PhantomDatasetEntry> entries(static_cast<std::size_t>(cfg.n_subjects));
    std::vector<std::exception_ptr> errors(entries.size());
    auto job = [&](std::size_t s) {
        try {
            auto subj = generate_subject(cfg, static_cast<int>(s));
            auto& e = entries[s];
            e.subject_id = subj.subject_id;
            e.image = dir / (subj.subject_id + "_img.nii.gz");
            e.label = dir / (subj.subject_id + "_lbl.nii.gz");
            nifti::write_nifti(subj.image, e.image);
            nifti::write_nifti(subj.label, e.label);
            e.foreground_fraction = subj.foreground_fraction();
            e.boundary_fraction = subj.boundary_fraction();
            e.ribbon_slices = subj.ribbon_slices;
        } catch (...) {
            errors[s] = std::current_exception();
        }
    };
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(entries.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t s = t; s < entries.size(); s += workers) job(s);
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return entries;
}

} // namespace claustrum
