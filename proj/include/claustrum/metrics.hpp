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
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "grid.hpp"

namespace claustrum {

// ---------------------------------------------------------------------------
// Class weights and weighted binary cross-entropy
// ---------------------------------------------------------------------------

/// `w` multiplies the background term, `one_minus_w` the foreground term.
struct ClassWeights {
    double w = 0.5;
    double one_minus_w = 0.5;
    std::uint64_t foreground_pixels = 0;
    std::uint64_t total_pixels = 0;
    std::string warning;
};

inline ClassWeights class_weights_from_counts(std::uint64_t foreground, std::uint64_t total) {
    if (total == 0) throw ValueError("class weights need at least one pixel");
    if (foreground > total) throw ValueError("foreground count exceeds total");
    ClassWeights cw;
    cw.foreground_pixels = foreground;
    cw.total_pixels = total;
    cw.w = static_cast<double>(foreground) / static_cast<double>(total);
    cw.one_minus_w = 1.0 - cw.w;
    if (foreground == total) cw.warning = "every pixel is foreground; the foreground term has weight 0";
    if (foreground == 0) cw.warning = "no foreground pixels; the background term has weight 0";
    return cw;
}

/// Foreground fraction f pooled over all label grids; w = f.
inline ClassWeights compute_class_weights(std::span<const Mask> labels) {
    if (labels.empty()) throw ValueError("compute_class_weights needs at least one slice");
    std::uint64_t fg = 0, total = 0;
    for (const auto& m : labels) {
        fg += count_foreground(m);
        total += m.size();
    }
    return class_weights_from_counts(fg, total);
}

inline constexpr double kProbabilityClamp = 1e-7;

template <class T>
struct BceResult {
    double loss = 0.0;
    std::vector<T> grad; // d(loss)/d(pred), already divided by the pixel count
};

/// Mean over pixels of -(1-w) c log p - w (1-c) log(1-p), p clamped to
/// [eps, 1-eps]. The gradient is evaluated at the clamped p.
template <class T>
BceResult<T> weighted_bce(std::span<const T> pred, std::span<const T> target, const ClassWeights& weights) {
    if (pred.size() != target.size())
        throw ShapeError("weighted_bce shape mismatch: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(target.size()) + " targets");
    if (pred.empty()) throw ShapeError("weighted_bce on an empty batch");
    const double n = static_cast<double>(pred.size());
    const double wf = weights.one_minus_w, wb = weights.w;
    BceResult<T> r;
    r.grad.resize(pred.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double c = static_cast<double>(target[i]);
        if (c != 0.0 && c != 1.0) throw ValueError("weighted_bce target must be binary, got " + std::to_string(c));
        const double p = std::clamp(static_cast<double>(pred[i]), kProbabilityClamp, 1.0 - kProbabilityClamp);
        acc += -wf * c * std::log(p) - wb * (1.0 - c) * std::log(1.0 - p);
        r.grad[i] = static_cast<T>((-wf * c / p + wb * (1.0 - c) / (1.0 - p)) / n);
    }
    r.loss = acc / n;
    return r;
}

// ---------------------------------------------------------------------------
// Overlap metrics
// ---------------------------------------------------------------------------

struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline ConfusionCounts confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
    if (pred.size() != truth.size()) throw ShapeError("confusion needs equally sized masks");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const auto p = pred[i], t = truth[i];
        if (p > 1 || t > 1) throw ValueError("confusion needs binary masks");
        if (p && t)
            ++c.tp;
        else if (p)
            ++c.fp;
        else if (t)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

inline ConfusionCounts confusion(const Mask& pred, const Mask& truth) {
    if (!pred.same_shape(truth)) throw ShapeError("confusion needs equally shaped masks");
    return confusion(pred.values(), truth.values());
}

/// 2TP / (2TP + FP + FN); 1.0 when both masks are empty.
inline double dice(const ConfusionCounts& c) {
    const std::uint64_t denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0) return 1.0;
    return static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

struct SubjectMasks {
    std::string subject_id;
    std::vector<Mask> slices;
};

struct SubjectDice {
    std::string subject_id;
    ConfusionCounts counts;
    double dice = 0.0;
};

/// Counts pooled over all slices of a subject, then one Dice per subject.
inline std::vector<SubjectDice> dice_per_case(std::span<const SubjectMasks> pred, std::span<const SubjectMasks> truth) {
    if (pred.size() != truth.size())
        throw ValueError("dice_per_case: " + std::to_string(pred.size()) + " predicted subjects vs " +
                         std::to_string(truth.size()) + " ground-truth subjects");
    std::vector<SubjectDice> out;
    out.reserve(pred.size());
    for (std::size_t s = 0; s < pred.size(); ++s) {
        if (pred[s].subject_id != truth[s].subject_id)
            throw ValueError("dice_per_case subject mismatch: " + pred[s].subject_id + " vs " + truth[s].subject_id);
        if (pred[s].slices.size() != truth[s].slices.size())
            throw ShapeError("dice_per_case slice count mismatch for " + pred[s].subject_id);
        SubjectDice d{pred[s].subject_id, {}, 0.0};
        for (std::size_t k = 0; k < pred[s].slices.size(); ++k) d.counts += confusion(pred[s].slices[k], truth[s].slices[k]);
        d.dice = dice(d.counts);
        out.push_back(std::move(d));
    }
    return out;
}

inline double mean_dice(std::span<const SubjectDice> ds) {
    if (ds.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0;
    for (const auto& d : ds) s += d.dice;
    return s / static_cast<double>(ds.size());
}

// ---------------------------------------------------------------------------
// Intraclass correlation (Shrout & Fleiss)
// ---------------------------------------------------------------------------

struct IccReport {
    double icc1 = 0, icc2 = 0, icc3 = 0;
    double icc1k = 0, icc2k = 0, icc3k = 0;
    std::size_t n_subjects = 0;
    std::size_t n_judges = 0;
    // ANOVA mean squares: between subjects, between judges, residual, within subjects.
    double bms = 0, jms = 0, ems = 0, wms = 0;
    std::string note;
};

/// `ratings[i][j]` is judge j's rating of subject i.
inline IccReport icc(const std::vector<std::vector<double>>& ratings) {
    const std::size_t n = ratings.size();
    if (n < 2) throw ValueError("icc needs at least 2 subjects");
    const std::size_t k = ratings[0].size();
    if (k < 2) throw ValueError("icc needs at least 2 judges");
    for (const auto& row : ratings) {
        if (row.size() != k) throw ValueError("icc rating matrix has missing cells");
        for (double v : row)
            if (!std::isfinite(v)) throw ValueError("icc ratings must be finite");
    }

    double grand = 0;
    std::vector<double> row_mean(n, 0.0), col_mean(k, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            row_mean[i] += ratings[i][j];
            col_mean[j] += ratings[i][j];
        }
    for (auto& v : row_mean) v /= static_cast<double>(k);
    for (auto& v : col_mean) v /= static_cast<double>(n);
    // Mean of column means: identical judges then give residuals of exactly 0.
    for (double v : col_mean) grand += v;
    grand /= static_cast<double>(k);

    double ss_rows = 0, ss_cols = 0, ss_err = 0, ss_within = 0;
    for (std::size_t i = 0; i < n; ++i) ss_rows += (row_mean[i] - grand) * (row_mean[i] - grand);
    ss_rows *= static_cast<double>(k);
    for (std::size_t j = 0; j < k; ++j) ss_cols += (col_mean[j] - grand) * (col_mean[j] - grand);
    ss_cols *= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            const double r = ratings[i][j] - row_mean[i] - col_mean[j] + grand;
            ss_err += r * r;
            const double d = ratings[i][j] - row_mean[i];
            ss_within += d * d;
        }

    const double dn = static_cast<double>(n), dk = static_cast<double>(k);
    IccReport r;
    r.n_subjects = n;
    r.n_judges = k;
    r.bms = ss_rows / (dn - 1.0);
    r.jms = ss_cols / (dk - 1.0);
    r.ems = ss_err / ((dn - 1.0) * (dk - 1.0));
    r.wms = ss_within / (dn * (dk - 1.0));

    if (r.bms == 0.0 && r.wms == 0.0) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        r.icc1 = r.icc2 = r.icc3 = r.icc1k = r.icc2k = r.icc3k = nan;
        r.note = "all ratings are identical; ICC is undefined for zero-variance input";
        return r;
    }
    r.icc1 = (r.bms - r.wms) / (r.bms + (dk - 1.0) * r.wms);
    r.icc2 = (r.bms - r.ems) / (r.bms + (dk - 1.0) * r.ems + dk * (r.jms - r.ems) / dn);
    r.icc3 = (r.bms - r.ems) / (r.bms + (dk - 1.0) * r.ems);
    r.icc1k = (r.bms - r.wms) / r.bms;
    r.icc2k = (r.bms - r.ems) / (r.bms + (r.jms - r.ems) / dn);
    r.icc3k = (r.bms - r.ems) / r.bms;
    if (r.bms == 0.0) r.note = "no between-subject variance; ICC values are not meaningful";
    return r;
}

struct IccRow {
    const char* description;
    const char* name;
    double IccReport::*field;
};

// Row labels in the conventional Shrout-Fleiss reporting order.
inline constexpr IccRow kIccRows[] = {
    {"Single raters absolute", "ICC1", &IccReport::icc1},   {"Single random raters", "ICC2", &IccReport::icc2},
    {"Single fixed raters", "ICC3", &IccReport::icc3},      {"Average raters absolute", "ICC1k", &IccReport::icc1k},
    {"Average random raters", "ICC2k", &IccReport::icc2k}, {"Average fixed raters", "ICC3k", &IccReport::icc3k},
};

} // namespace claustrum
