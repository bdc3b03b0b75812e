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

#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"

#include "augment.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "phantom.hpp"
#include "preprocess.hpp"
#include "train.hpp"
#include "unet.hpp"

namespace claustrum {

using Json = nlohmann::ordered_json;

namespace detail {

// Reads the fields of one JSON object, rejecting unknown keys and wrong
// types with the dotted path of the offending field.
class FieldReader {
public:
    FieldReader(const Json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
        if (!j.is_object()) throw ConfigError(prefix_, "expected an object");
    }

    template <class T>
    void read(const char* name, T& out) {
        known_.insert(name);
        auto it = j_.find(name);
        if (it == j_.end()) return;
        const std::string path = prefix_.empty() ? name : prefix_ + "." + name;
        if constexpr (std::is_same_v<T, bool>) {
            if (!it->is_boolean()) throw ConfigError(path, "expected a boolean");
            out = it->template get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!it->is_number_integer()) throw ConfigError(path, "expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (it->is_number_unsigned() || it->template get<long long>() >= 0)
                    out = it->template get<T>();
                else
                    throw ConfigError(path, "expected a non-negative integer");
            } else {
                const auto v = it->template get<long long>();
                if (v < std::numeric_limits<T>::min() || v > std::numeric_limits<T>::max())
                    throw ConfigError(path, "integer out of range");
                out = static_cast<T>(v);
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!it->is_number()) throw ConfigError(path, "expected a number");
            out = it->template get<T>();
        } else {
            // std::pair<double, double>
            if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number())
                throw ConfigError(path, "expected a [lo, hi] pair of numbers");
            out = {(*it)[0].template get<double>(), (*it)[1].template get<double>()};
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!known_.count(it.key()))
                throw ConfigError(prefix_.empty() ? it.key() : prefix_ + "." + it.key(), "unknown field");
    }

private:
    const Json& j_;
    std::string prefix_;
    std::set<std::string> known_;
};

inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

} // namespace detail

// ---------------------------------------------------------------------------
// Configs
// ---------------------------------------------------------------------------

inline Json to_json(const UNetConfig& c) {
    return {{"depth", c.depth},           {"base_channels", c.base_channels}, {"dropout_rate", c.dropout_rate},
            {"bn_momentum", c.bn_momentum}, {"bn_epsilon", c.bn_epsilon},     {"in_channels", c.in_channels},
            {"out_channels", c.out_channels}, {"seed", c.seed}};
}

inline Json to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate}, {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},       {"adam_epsilon", c.adam_epsilon},
            {"l2_lambda", c.l2_lambda},         {"batch_size", c.batch_size},
            {"max_epochs", c.max_epochs},       {"patience", c.patience},
            {"k_folds", c.k_folds},             {"seed", c.seed},
            {"validation_subjects", c.validation_subjects}, {"roi_margin", c.roi_margin},
            {"threshold", c.threshold}};
}

inline Json to_json(const AugmentConfig& c) {
    return {{"elastic_alpha", c.elastic_alpha},
            {"elastic_sigma", c.elastic_sigma},
            {"max_rotation", c.max_rotation},
            {"max_translation", c.max_translation},
            {"max_scale_delta", c.max_scale_delta},
            {"intensity_gain_range", {c.intensity_gain_range.first, c.intensity_gain_range.second}},
            {"intensity_bias_range", {c.intensity_bias_range.first, c.intensity_bias_range.second}},
            {"copies_per_sample", c.copies_per_sample},
            {"seed", c.seed}};
}

inline Json to_json(const PhantomConfig& c) {
    return {{"n_subjects", c.n_subjects},       {"slices_per_subject", c.slices_per_subject},
            {"band_fraction", c.band_fraction}, {"thickness_min", c.thickness_min},
            {"thickness_max", c.thickness_max}, {"length_min", c.length_min},
            {"length_max", c.length_max},       {"curvature", c.curvature},
            {"tilt_deg", c.tilt_deg},           {"center_jitter", c.center_jitter},
            {"slice_wobble", c.slice_wobble},   {"center_row", c.center_row},
            {"center_col", c.center_col},       {"noise_std", c.noise_std},
            {"contrast", c.contrast},           {"intensity_scale", c.intensity_scale},
            {"seed", c.seed}};
}

inline void from_json(const Json& j, UNetConfig& c, const std::string& prefix = "unet") {
    detail::FieldReader r(j, prefix);
    r.read("depth", c.depth);
    r.read("base_channels", c.base_channels);
    r.read("dropout_rate", c.dropout_rate);
    r.read("bn_momentum", c.bn_momentum);
    r.read("bn_epsilon", c.bn_epsilon);
    r.read("in_channels", c.in_channels);
    r.read("out_channels", c.out_channels);
    r.read("seed", c.seed);
    r.finish();
}

inline void from_json(const Json& j, TrainConfig& c, const std::string& prefix = "train") {
    detail::FieldReader r(j, prefix);
    r.read("learning_rate", c.learning_rate);
    r.read("adam_beta1", c.adam_beta1);
    r.read("adam_beta2", c.adam_beta2);
    r.read("adam_epsilon", c.adam_epsilon);
    r.read("l2_lambda", c.l2_lambda);
    r.read("batch_size", c.batch_size);
    r.read("max_epochs", c.max_epochs);
    r.read("patience", c.patience);
    r.read("k_folds", c.k_folds);
    r.read("seed", c.seed);
    r.read("validation_subjects", c.validation_subjects);
    r.read("roi_margin", c.roi_margin);
    r.read("threshold", c.threshold);
    r.finish();
}

inline void from_json(const Json& j, AugmentConfig& c, const std::string& prefix = "augment") {
    detail::FieldReader r(j, prefix);
    r.read("elastic_alpha", c.elastic_alpha);
    r.read("elastic_sigma", c.elastic_sigma);
    r.read("max_rotation", c.max_rotation);
    r.read("max_translation", c.max_translation);
    r.read("max_scale_delta", c.max_scale_delta);
    r.read("intensity_gain_range", c.intensity_gain_range);
    r.read("intensity_bias_range", c.intensity_bias_range);
    r.read("copies_per_sample", c.copies_per_sample);
    r.read("seed", c.seed);
    r.finish();
}

inline void from_json(const Json& j, PhantomConfig& c, const std::string& prefix = "phantom") {
    detail::FieldReader r(j, prefix);
    r.read("n_subjects", c.n_subjects);
    r.read("slices_per_subject", c.slices_per_subject);
    r.read("band_fraction", c.band_fraction);
    r.read("thickness_min", c.thickness_min);
    r.read("thickness_max", c.thickness_max);
    r.read("length_min", c.length_min);
    r.read("length_max", c.length_max);
    r.read("curvature", c.curvature);
    r.read("tilt_deg", c.tilt_deg);
    r.read("center_jitter", c.center_jitter);
    r.read("slice_wobble", c.slice_wobble);
    r.read("center_row", c.center_row);
    r.read("center_col", c.center_col);
    r.read("noise_std", c.noise_std);
    r.read("contrast", c.contrast);
    r.read("intensity_scale", c.intensity_scale);
    r.read("seed", c.seed);
    r.finish();
}

/// Training config file: {"unet": {...}, "train": {...}, "augment": {...}},
/// every section optional. Values are validated after parsing.
inline void parse_run_config(const Json& j, UNetConfig& unet, TrainConfig& train, AugmentConfig& augment) {
    if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        if (k == "unet")
            from_json(*it, unet);
        else if (k == "train")
            from_json(*it, train);
        else if (k == "augment")
            from_json(*it, augment);
        else
            throw ConfigError(k, "unknown section");
    }
    unet.validate();
    train.validate();
    augment.validate();
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline Json to_json(const RoiWindow& w) {
    return {{"row0", w.row0}, {"col0", w.col0}, {"rows", RoiWindow::rows}, {"cols", RoiWindow::cols}};
}

inline RoiWindow roi_window_from_json(const Json& j) {
    auto index = [&](const char* k) {
        return j.contains(k) && j[k].is_number_integer() && (j[k].is_number_unsigned() || j[k].get<long long>() >= 0);
    };
    if (!j.is_object() || !index("row0") || !index("col0"))
        throw ConfigError("roi_window", "expected {\"row0\": n, \"col0\": n} with non-negative integers");
    RoiWindow w{j["row0"].get<std::size_t>(), j["col0"].get<std::size_t>()};
    w.validate();
    return w;
}

inline Json to_json(const ClassWeights& w) {
    Json j = {{"w", w.w},
              {"one_minus_w", w.one_minus_w},
              {"foreground_pixels", w.foreground_pixels},
              {"total_pixels", w.total_pixels}};
    if (!w.warning.empty()) j["warning"] = w.warning;
    return j;
}

/// ICC values keyed by the conventional Shrout-Fleiss row labels.
inline Json to_json(const IccReport& r) {
    Json rows = Json::array();
    for (const auto& row : kIccRows)
        rows.push_back({{"description", row.description}, {"name", row.name}, {"value", detail::number_or_null(r.*row.field)}});
    Json j = {{"n_subjects", r.n_subjects},
              {"n_judges", r.n_judges},
              {"rows", rows},
              {"mean_squares", {{"bms", r.bms}, {"jms", r.jms}, {"ems", r.ems}, {"wms", r.wms}}}};
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

inline Json to_json(const SubjectEvaluation& e) {
    return {{"subject_id", e.subject_id},
            {"dice", e.dice},
            {"tp", e.counts.tp},
            {"fp", e.counts.fp},
            {"fn", e.counts.fn},
            {"tn", e.counts.tn},
            {"truth_volume", e.truth_volume},
            {"predicted_volume", e.predicted_volume}};
}

inline Json to_json(const EvaluationReport& r) {
    Json subs = Json::array();
    for (const auto& s : r.subjects) subs.push_back(to_json(s));
    return {{"subjects", subs},
            {"mean_dice", detail::number_or_null(r.mean_dice)},
            {"icc", r.icc ? to_json(*r.icc) : Json(nullptr)}};
}

inline Json to_json(const FoldReport& f) {
    Json subs = Json::array();
    for (const auto& s : f.per_subject) subs.push_back(to_json(s));
    Json hist = Json::array();
    for (const auto& h : f.history)
        hist.push_back({{"epoch", h.epoch},
                        {"train_loss", h.train_loss},
                        {"val_dice", detail::number_or_null(h.val_dice)},
                        {"improved", h.improved}});
    return {{"fold_index", f.fold_index},
            {"train_subjects", f.train_subjects},
            {"validation_subjects", f.validation_subjects},
            {"test_subjects", f.test_subjects},
            {"per_subject", subs},
            {"mean_dice", detail::number_or_null(f.mean_dice)},
            {"epochs_trained", f.epochs_trained},
            {"best_epoch", f.best_epoch},
            {"best_val_dice", detail::number_or_null(f.best_val_dice)},
            {"stop_reason", stop_reason_name(f.stop)},
            {"roi_window", to_json(f.window)},
            {"class_weights", to_json(f.weights)},
            {"train_samples", f.train_samples},
            {"augmented_samples", f.augmented_samples},
            {"history", hist}};
}

inline Json to_json(const ImbalanceStats& st) {
    Json rows = Json::array();
    std::uint64_t ci_b = 0, bg_b = 0, ci_a = 0, bg_a = 0;
    for (const auto& s : st.slices) {
        rows.push_back({{"subject_id", s.subject_id},
                        {"slice_index", s.slice_index},
                        {"ci_pixels_before", s.ci_pixels_before},
                        {"bg_pixels_before", s.bg_pixels_before},
                        {"ci_pixels_after", s.ci_pixels_after},
                        {"bg_pixels_after", s.bg_pixels_after}});
        ci_b += s.ci_pixels_before;
        bg_b += s.bg_pixels_before;
        ci_a += s.ci_pixels_after;
        bg_a += s.bg_pixels_after;
    }
    return {{"window", to_json(st.window)},
            {"slices", rows},
            {"aggregate",
             {{"slices", st.slices.size()},
              {"ci_pixels_before", ci_b},
              {"bg_pixels_before", bg_b},
              {"ci_pixels_after", ci_a},
              {"bg_pixels_after", bg_a},
              {"foreground_fraction_before", st.foreground_fraction_before},
              {"foreground_fraction_after", st.foreground_fraction_after},
              {"background_reduction", st.background_reduction}}}};
}

} // namespace claustrum
