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
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "grid.hpp"
#include "metrics.hpp"
#include "nifti_io.hpp"

namespace claustrum {

inline constexpr std::size_t kFrameSize = 256;
inline constexpr std::size_t kRoiRows = 64;
inline constexpr std::size_t kRoiCols = 112;

/// Which side of a train/held-out split a sample belongs to.
enum class Role { unassigned, train, validation, test };

inline const char* role_name(Role r) {
    switch (r) {
    case Role::unassigned: return "unassigned";
    case Role::train: return "train";
    case Role::validation: return "validation";
    case Role::test: return "test";
    }
    return "?";
}

/// 64x112 window inside the 256x256 frame, anchored at its top-left pixel.
struct RoiWindow {
    std::size_t row0 = 0;
    std::size_t col0 = 0;
    static constexpr std::size_t rows = kRoiRows;
    static constexpr std::size_t cols = kRoiCols;

    void validate() const {
        if (row0 + rows > kFrameSize || col0 + cols > kFrameSize)
            throw ValueError("ROI window at (" + std::to_string(row0) + "," + std::to_string(col0) +
                             ") does not fit in the 256x256 frame");
    }
    bool contains(std::size_t r, std::size_t c) const {
        return r >= row0 && r < row0 + rows && c >= col0 && c < col0 + cols;
    }
    friend bool operator==(const RoiWindow&, const RoiWindow&) = default;
};

struct Provenance {
    std::size_t original_rows = 0;
    std::size_t original_cols = 0;
    Role role = Role::unassigned;
    bool augmented = false;
    std::optional<RoiWindow> roi;
    std::vector<std::string> transforms;
};

struct SliceSample {
    std::string subject_id;
    int slice_index = 0;
    Image image;
    std::optional<Mask> label;
    Provenance provenance;

    void check() const {
        if (label && !label->same_shape(image))
            throw ShapeError("sample " + subject_id + "/" + std::to_string(slice_index) +
                             " has mismatched image and label shapes");
    }
};

// ---------------------------------------------------------------------------
// Leakage guards
// ---------------------------------------------------------------------------

/// Rejects held-out samples. Used by every computation that derives
/// statistics which later shape training.
inline void require_training_data(std::span<const SliceSample> samples, const char* where) {
    for (const auto& s : samples)
        if (s.provenance.role == Role::test || s.provenance.role == Role::validation)
            throw LeakageError(std::string(where) + " received held-out sample " + s.subject_id + "/" +
                               std::to_string(s.slice_index) + " (role " + role_name(s.provenance.role) + ")");
}

/// Rejects augmented samples; evaluation only sees original data.
inline void require_unaugmented(std::span<const SliceSample> samples, const char* where) {
    for (const auto& s : samples)
        if (s.provenance.augmented)
            throw LeakageError(std::string(where) + " received augmented sample " + s.subject_id + "/" +
                               std::to_string(s.slice_index));
}

inline void set_role(std::span<SliceSample> samples, Role role) {
    for (auto& s : samples) s.provenance.role = role;
}

// ---------------------------------------------------------------------------
// Volume -> samples
// ---------------------------------------------------------------------------

/// Axial slices of an image volume (and optional label volume) as samples.
/// Labels are binarized: any value > 0 becomes 1.
inline std::vector<SliceSample> volume_to_samples(const std::string& subject_id, const nifti::Volume& image,
                                                  const nifti::Volume* label = nullptr) {
    if (label && label->dims != image.dims) throw ShapeError("label volume dims differ from image dims for " + subject_id);
    auto img_slices = nifti::axial_slices(image);
    std::vector<Grid<double>> lbl_slices;
    if (label) lbl_slices = nifti::axial_slices(*label);
    std::vector<SliceSample> out;
    out.reserve(img_slices.size());
    for (std::size_t k = 0; k < img_slices.size(); ++k) {
        SliceSample s;
        s.subject_id = subject_id;
        s.slice_index = static_cast<int>(k);
        const auto& g = img_slices[k];
        s.image = Image(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) s.image.storage()[i] = static_cast<float>(g.storage()[i]);
        if (label) {
            Mask m(g.rows(), g.cols());
            for (std::size_t i = 0; i < g.size(); ++i) m.storage()[i] = lbl_slices[k].storage()[i] > 0.0 ? 1 : 0;
            s.label = std::move(m);
        }
        s.provenance.original_rows = g.rows();
        s.provenance.original_cols = g.cols();
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

namespace detail {

// Pixel-centre aligned source coordinate for output index `i`.
inline double source_coord(std::size_t i, std::size_t in, std::size_t out) {
    return (static_cast<double>(i) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
}

} // namespace detail

inline Image resize_bilinear(const Image& img, std::size_t rows, std::size_t cols) {
    if (img.empty() || rows == 0 || cols == 0) throw ValueError("resize of an empty image");
    if (img.rows() == rows && img.cols() == cols) return img;
    Image out(rows, cols);
    const long ih = static_cast<long>(img.rows()), iw = static_cast<long>(img.cols());
    for (std::size_t r = 0; r < rows; ++r) {
        const double y = std::clamp(detail::source_coord(r, img.rows(), rows), 0.0, static_cast<double>(ih - 1));
        const long y0 = static_cast<long>(std::floor(y));
        const long y1 = std::min(y0 + 1, ih - 1);
        const double fy = y - static_cast<double>(y0);
        for (std::size_t c = 0; c < cols; ++c) {
            const double x = std::clamp(detail::source_coord(c, img.cols(), cols), 0.0, static_cast<double>(iw - 1));
            const long x0 = static_cast<long>(std::floor(x));
            const long x1 = std::min(x0 + 1, iw - 1);
            const double fx = x - static_cast<double>(x0);
            const double top = (1 - fx) * img(y0, x0) + fx * img(y0, x1);
            const double bot = (1 - fx) * img(y1, x0) + fx * img(y1, x1);
            out(r, c) = static_cast<float>((1 - fy) * top + fy * bot);
        }
    }
    return out;
}

inline Mask resize_nearest(const Mask& m, std::size_t rows, std::size_t cols) {
    if (m.empty() || rows == 0 || cols == 0) throw ValueError("resize of an empty label");
    Mask out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto sr = std::min<std::size_t>(
            static_cast<std::size_t>((static_cast<double>(r) + 0.5) * m.rows() / static_cast<double>(rows)), m.rows() - 1);
        for (std::size_t c = 0; c < cols; ++c) {
            const auto sc = std::min<std::size_t>(
                static_cast<std::size_t>((static_cast<double>(c) + 0.5) * m.cols() / static_cast<double>(cols)),
                m.cols() - 1);
            out(r, c) = m(sr, sc) > 0 ? 1 : 0;
        }
    }
    return out;
}

/// Bilinear image and nearest-neighbour label resize to rows x cols (256x256
/// by default). Provenance keeps the original shape.
inline SliceSample resize_slice(const SliceSample& sample, std::size_t rows = kFrameSize, std::size_t cols = kFrameSize) {
    sample.check();
    if (sample.image.empty()) throw ValueError("resize_slice on an empty image");
    SliceSample out = sample;
    if (out.provenance.original_rows == 0) {
        out.provenance.original_rows = sample.image.rows();
        out.provenance.original_cols = sample.image.cols();
    }
    if (sample.image.rows() == rows && sample.image.cols() == cols) return out;
    out.image = resize_bilinear(sample.image, rows, cols);
    if (sample.label) out.label = resize_nearest(*sample.label, rows, cols);
    out.provenance.transforms.push_back("resize(" + std::to_string(sample.image.rows()) + "x" +
                                        std::to_string(sample.image.cols()) + "->" + std::to_string(rows) + "x" +
                                        std::to_string(cols) + ")");
    return out;
}

// ---------------------------------------------------------------------------
// Intensity normalization
// ---------------------------------------------------------------------------

/// Min-max scale all slices of one volume jointly to [0,1]. A constant
/// volume maps to 0; non-finite pixels map to 0.
inline void normalize_volume(std::span<SliceSample> slices) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : slices)
        for (float v : s.image.values())
            if (std::isfinite(v)) {
                lo = std::min<double>(lo, v);
                hi = std::max<double>(hi, v);
            }
    if (!(lo <= hi)) throw ValueError("normalize_volume: volume has no finite voxel");
    const double range = hi - lo;
    for (auto& s : slices) {
        for (auto& v : s.image.storage()) {
            if (!std::isfinite(v) || range == 0.0)
                v = 0.0f;
            else
                v = static_cast<float>(std::clamp((static_cast<double>(v) - lo) / range, 0.0, 1.0));
        }
        s.provenance.transforms.push_back("minmax_volume");
    }
}

inline std::vector<SliceSample> normalize_volume(std::vector<SliceSample> slices) {
    normalize_volume(std::span<SliceSample>(slices));
    return slices;
}

// ---------------------------------------------------------------------------
// Slice selection and ROI
// ---------------------------------------------------------------------------

inline std::vector<SliceSample> select_ci_slices(std::span<const SliceSample> samples) {
    std::vector<SliceSample> out;
    for (const auto& s : samples) {
        if (!s.label)
            throw ValueError("select_ci_slices: sample " + s.subject_id + "/" + std::to_string(s.slice_index) +
                             " has no label");
        if (count_foreground(*s.label) > 0) out.push_back(s);
    }
    return out;
}

template <class G>
G crop_grid(const G& g, const RoiWindow& w) {
    G out(RoiWindow::rows, RoiWindow::cols);
    for (std::size_t r = 0; r < RoiWindow::rows; ++r)
        for (std::size_t c = 0; c < RoiWindow::cols; ++c) out(r, c) = g(w.row0 + r, w.col0 + c);
    return out;
}

inline SliceSample crop_roi(const SliceSample& sample, const RoiWindow& window) {
    sample.check();
    if (sample.image.rows() != kFrameSize || sample.image.cols() != kFrameSize)
        throw ShapeError("crop_roi needs a 256x256 slice, got " + std::to_string(sample.image.rows()) + "x" +
                         std::to_string(sample.image.cols()));
    window.validate();
    SliceSample out;
    out.subject_id = sample.subject_id;
    out.slice_index = sample.slice_index;
    out.image = crop_grid(sample.image, window);
    if (sample.label) out.label = crop_grid(*sample.label, window);
    out.provenance = sample.provenance;
    out.provenance.roi = window;
    out.provenance.transforms.push_back("crop_roi(" + std::to_string(window.row0) + "," + std::to_string(window.col0) + ")");
    return out;
}

/// Paste a 64x112 mask into an all-zero 256x256 frame at `window`.
inline Mask restore_from_roi(const Mask& mask, const RoiWindow& window) {
    if (mask.rows() != RoiWindow::rows || mask.cols() != RoiWindow::cols)
        throw ShapeError("restore_from_roi needs a 64x112 mask, got " + std::to_string(mask.rows()) + "x" +
                         std::to_string(mask.cols()));
    window.validate();
    Mask out(kFrameSize, kFrameSize, 0);
    for (std::size_t r = 0; r < RoiWindow::rows; ++r)
        for (std::size_t c = 0; c < RoiWindow::cols; ++c) out(window.row0 + r, window.col0 + c) = mask(r, c);
    return out;
}

/// Fit one 64x112 window that covers the union bounding box of every
/// foreground pixel plus `margin`, centred on the union centroid and then
/// shifted the minimum amount needed to cover the box and stay in frame.
inline RoiWindow fit_roi_window(std::span<const Mask> labels, std::size_t margin = 4) {
    long rmin = std::numeric_limits<long>::max(), rmax = -1, cmin = std::numeric_limits<long>::max(), cmax = -1;
    double sr = 0, sc = 0;
    std::uint64_t n = 0;
    for (const auto& m : labels) {
        if (m.rows() != kFrameSize || m.cols() != kFrameSize) throw ShapeError("fit_roi_window needs 256x256 labels");
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < m.cols(); ++c)
                if (m(r, c)) {
                    rmin = std::min<long>(rmin, static_cast<long>(r));
                    rmax = std::max<long>(rmax, static_cast<long>(r));
                    cmin = std::min<long>(cmin, static_cast<long>(c));
                    cmax = std::max<long>(cmax, static_cast<long>(c));
                    sr += static_cast<double>(r);
                    sc += static_cast<double>(c);
                    ++n;
                }
    }
    if (n == 0) throw ValueError("fit_roi_window: no foreground pixel in the training labels");
    const long m = static_cast<long>(margin);
    const long H = static_cast<long>(RoiWindow::rows), W = static_cast<long>(RoiWindow::cols);
    const long F = static_cast<long>(kFrameSize);
    const long box_h = rmax - rmin + 1 + 2 * m, box_w = cmax - cmin + 1 + 2 * m;
    if (box_h > H || box_w > W)
        throw ValueError("foreground extent " + std::to_string(rmax - rmin + 1) + "x" + std::to_string(cmax - cmin + 1) +
                         " plus margin " + std::to_string(margin) + " does not fit a 64x112 window");
    auto place = [F](double centroid, long lo, long hi, long size) {
        long start = std::lround(centroid - static_cast<double>(size - 1) / 2.0);
        // Cover [lo, hi] (clipped to the frame) ...
        start = std::clamp(start, std::min(F - 1, hi) - size + 1, std::max(0L, lo));
        // ... and stay inside the frame.
        return std::clamp(start, 0L, F - size);
    };
    RoiWindow w;
    w.row0 = static_cast<std::size_t>(place(sr / static_cast<double>(n), rmin - m, rmax + m, H));
    w.col0 = static_cast<std::size_t>(place(sc / static_cast<double>(n), cmin - m, cmax + m, W));
    return w;
}

inline RoiWindow fit_roi_window(std::span<const SliceSample> samples, std::size_t margin = 4) {
    require_training_data(samples, "fit_roi_window");
    std::vector<Mask> labels;
    for (const auto& s : samples) {
        if (!s.label) throw ValueError("fit_roi_window: sample without label");
        labels.push_back(*s.label);
    }
    return fit_roi_window(std::span<const Mask>(labels), margin);
}

/// Class weights from the (ROI-cropped, CI-containing) training samples.
inline ClassWeights compute_class_weights(std::span<const SliceSample> samples) {
    require_training_data(samples, "compute_class_weights");
    std::vector<Mask> labels;
    for (const auto& s : samples) {
        if (!s.label) throw ValueError("compute_class_weights: sample without label");
        labels.push_back(*s.label);
    }
    return compute_class_weights(std::span<const Mask>(labels));
}

// ---------------------------------------------------------------------------
// Class imbalance report
// ---------------------------------------------------------------------------

struct SliceImbalance {
    std::string subject_id;
    int slice_index = 0;
    std::uint64_t ci_pixels_before = 0;
    std::uint64_t bg_pixels_before = 0;
    std::uint64_t ci_pixels_after = 0;
    std::uint64_t bg_pixels_after = 0;
};

struct ImbalanceStats {
    std::vector<SliceImbalance> slices;
    RoiWindow window;
    double foreground_fraction_before = 0.0;
    double foreground_fraction_after = 0.0;
    double background_reduction = 0.0; // total bg before / total bg after
};

inline ImbalanceStats imbalance_report(std::span<const SliceSample> samples, const RoiWindow& window) {
    window.validate();
    ImbalanceStats st;
    st.window = window;
    std::uint64_t ci_b = 0, tot_b = 0, ci_a = 0, tot_a = 0, bg_b = 0, bg_a = 0;
    for (const auto& s : samples) {
        if (!s.label) throw ValueError("imbalance_report: sample " + s.subject_id + " has no label");
        const Mask& m = *s.label;
        if (m.rows() != kFrameSize || m.cols() != kFrameSize) throw ShapeError("imbalance_report needs 256x256 labels");
        SliceImbalance row{s.subject_id, s.slice_index, 0, 0, 0, 0};
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < m.cols(); ++c) {
                const bool fg = m(r, c) != 0;
                const bool in = window.contains(r, c);
                (fg ? row.ci_pixels_before : row.bg_pixels_before)++;
                if (in) (fg ? row.ci_pixels_after : row.bg_pixels_after)++;
            }
        ci_b += row.ci_pixels_before;
        bg_b += row.bg_pixels_before;
        tot_b += m.size();
        ci_a += row.ci_pixels_after;
        bg_a += row.bg_pixels_after;
        tot_a += RoiWindow::rows * RoiWindow::cols;
        st.slices.push_back(std::move(row));
    }
    st.foreground_fraction_before = tot_b ? static_cast<double>(ci_b) / static_cast<double>(tot_b) : 0.0;
    st.foreground_fraction_after = tot_a ? static_cast<double>(ci_a) / static_cast<double>(tot_a) : 0.0;
    st.background_reduction = bg_a ? static_cast<double>(bg_b) / static_cast<double>(bg_a) : 0.0;
    return st;
}

} // namespace claustrum
