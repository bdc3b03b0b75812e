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
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "augment.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "loss.hpp"
#include "metrics.hpp"
#include "preprocess.hpp"
#include "rng.hpp"
#include "unet.hpp"

namespace claustrum {

struct TrainConfig {
    double learning_rate = 0.001;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double l2_lambda = 1e-4;
    int batch_size = 8;
    int max_epochs = 100;
    int patience = 10;
    int k_folds = 5;
    std::uint64_t seed = 0;
    // Subjects taken from each fold's training pool to drive early stopping.
    int validation_subjects = 1;
    int roi_margin = 4;
    double threshold = 0.5;

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate", "must be > 0");
        if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) throw ConfigError("train.adam_beta1", "must be in (0,1)");
        if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) throw ConfigError("train.adam_beta2", "must be in (0,1)");
        if (!(adam_epsilon > 0.0)) throw ConfigError("train.adam_epsilon", "must be > 0");
        if (!(l2_lambda >= 0.0)) throw ConfigError("train.l2_lambda", "must be >= 0");
        if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
        if (max_epochs < 1) throw ConfigError("train.max_epochs", "must be >= 1");
        if (patience < 1) throw ConfigError("train.patience", "must be >= 1");
        if (k_folds < 2) throw ConfigError("train.k_folds", "must be >= 2");
        if (validation_subjects < 1) throw ConfigError("train.validation_subjects", "must be >= 1");
        if (roi_margin < 0) throw ConfigError("train.roi_margin", "must be >= 0");
        if (!(threshold >= 0.0 && threshold < 1.0)) throw ConfigError("train.threshold", "must be in [0,1)");
    }
};

class TrainError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <class T>
struct AdamState {
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
    long step = 0;
};

/// One Adam update with bias-corrected moments. L2 is added to the gradient
/// (g += l2_lambda * theta) for parameters flagged `decay`. A non-finite
/// gradient aborts the step before anything is modified.
template <class T>
void adam_step(std::span<const ParamRef<T>> params, AdamState<T>& state, const TrainConfig& cfg) {
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.tensor.numel(), T(0));
            state.v.emplace_back(p.tensor.numel(), T(0));
        }
    }
    if (state.m.size() != params.size()) throw ShapeError("adam state does not match the parameter list");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& t = params[i].tensor;
        if (state.m[i].size() != t.numel()) throw ShapeError("adam state shape mismatch for " + params[i].name);
        if (!t.has_grad()) continue;
        for (T g : t.grad())
            if (!std::isfinite(static_cast<double>(g)))
                throw TrainError("non-finite gradient in " + params[i].name + "; step aborted");
    }
    ++state.step;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto tensor = params[i].tensor;
        auto theta = tensor.values();
        const bool has_grad = tensor.has_grad();
        const bool decay = params[i].decay && cfg.l2_lambda > 0.0;
        auto& m = state.m[i];
        auto& v = state.v[i];
        const std::span<const T> grad = has_grad ? std::as_const(tensor).grad() : std::span<const T>();
        for (std::size_t j = 0; j < theta.size(); ++j) {
            double g = has_grad ? static_cast<double>(grad[j]) : 0.0;
            if (decay) g += cfg.l2_lambda * static_cast<double>(theta[j]);
            const double mj = b1 * m[j] + (1.0 - b1) * g;
            const double vj = b2 * v[j] + (1.0 - b2) * g * g;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            theta[j] = static_cast<T>(theta[j] - cfg.learning_rate * (mj / c1) / (std::sqrt(vj / c2) + cfg.adam_epsilon));
        }
    }
}

// ---------------------------------------------------------------------------
// Early stopping
// ---------------------------------------------------------------------------

enum class StopReason { early, max_epochs };

inline const char* stop_reason_name(StopReason r) { return r == StopReason::early ? "early" : "max"; }

/// Tracks the best validation score; stops after `patience` consecutive
/// epochs without a strict improvement.
class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {
        if (patience < 1) throw ValueError("patience must be >= 1");
    }
    /// Returns true when `score` is a new best.
    bool update(double score) {
        if (std::isfinite(score) && score > best_) {
            best_ = score;
            since_ = 0;
            return true;
        }
        ++since_;
        return false;
    }
    bool should_stop() const { return since_ >= patience_; }
    double best() const { return best_; }

private:
    int patience_;
    int since_ = 0;
    double best_ = -std::numeric_limits<double>::infinity();
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// A held-out subject at full 256x256 resolution with ground truth labels.
struct EvalSubject {
    std::string subject_id;
    std::vector<SliceSample> slices;
};

struct SubjectEvaluation {
    std::string subject_id;
    ConfusionCounts counts;
    double dice = 0.0;
    std::uint64_t truth_volume = 0;     // foreground pixels in the ground truth
    std::uint64_t predicted_volume = 0; // foreground pixels in the prediction
    std::vector<Mask> predicted;        // full-frame masks, kept on request
};

struct EvaluationReport {
    std::vector<SubjectEvaluation> subjects;
    double mean_dice = 0.0;
    std::optional<IccReport> icc;
};

inline Tensor<float> batch_tensor(std::span<const SliceSample* const> batch) {
    const auto h = batch.front()->image.rows(), w = batch.front()->image.cols();
    Tensor<float> t(Shape{batch.size(), 1, h, w});
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& img = batch[b]->image;
        if (img.rows() != h || img.cols() != w) throw ShapeError("batch samples differ in shape");
        std::copy(img.values().begin(), img.values().end(), t.storage().begin() + static_cast<long>(b * h * w));
    }
    return t;
}

inline Tensor<float> label_tensor(std::span<const SliceSample* const> batch) {
    const auto h = batch.front()->image.rows(), w = batch.front()->image.cols();
    Tensor<float> t(Shape{batch.size(), 1, h, w});
    for (std::size_t b = 0; b < batch.size(); ++b) {
        if (!batch[b]->label) throw ValueError("training sample without label");
        const auto& m = *batch[b]->label;
        for (std::size_t i = 0; i < m.size(); ++i) t.storage()[b * h * w + i] = m.storage()[i] ? 1.0f : 0.0f;
    }
    return t;
}

/// Full-frame masks for 256x256 slices: crop to the window, predict, paste back.
inline std::vector<Mask> predict_slices(const UNetModel<float>& model, std::span<const SliceSample> slices,
                                        const RoiWindow& window, double threshold, std::size_t chunk = 16) {
    std::vector<Mask> out;
    out.reserve(slices.size());
    for (std::size_t start = 0; start < slices.size(); start += chunk) {
        const std::size_t end = std::min(slices.size(), start + chunk);
        std::vector<SliceSample> crops;
        for (std::size_t i = start; i < end; ++i) {
            SliceSample s = slices[i];
            s.label.reset();
            crops.push_back(crop_roi(s, window));
        }
        std::vector<const SliceSample*> ptrs;
        for (const auto& c : crops) ptrs.push_back(&c);
        auto probs = forward_eval(model, batch_tensor(ptrs));
        const std::size_t hw = RoiWindow::rows * RoiWindow::cols;
        for (std::size_t b = 0; b < crops.size(); ++b) {
            Mask m(RoiWindow::rows, RoiWindow::cols);
            for (std::size_t i = 0; i < hw; ++i) m.storage()[i] = probs.storage()[b * hw + i] > threshold ? 1 : 0;
            out.push_back(restore_from_roi(m, window));
        }
    }
    return out;
}

/// Per-subject pooled Dice and an ICC over (ground-truth volume, predicted
/// volume) pairs. Only original (non-augmented) labelled slices are accepted.
/// `predictor` overrides the model, e.g. for oracle baselines.
inline EvaluationReport evaluate(
    const UNetModel<float>& model, std::span<const EvalSubject> subjects, const RoiWindow& window, double threshold = 0.5,
    bool keep_masks = false,
    const std::function<std::vector<Mask>(const EvalSubject&)>& predictor = {}) {
    EvaluationReport rep;
    for (const auto& subj : subjects) {
        require_unaugmented(subj.slices, "evaluate");
        for (const auto& s : subj.slices)
            if (!s.label) throw ValueError("evaluate: subject " + subj.subject_id + " has a slice without label");
        auto pred = predictor ? predictor(subj) : predict_slices(model, subj.slices, window, threshold);
        if (pred.size() != subj.slices.size()) throw ShapeError("predictor returned the wrong number of slices");
        SubjectEvaluation ev;
        ev.subject_id = subj.subject_id;
        for (std::size_t k = 0; k < pred.size(); ++k) {
            ev.counts += confusion(pred[k], *subj.slices[k].label);
        }
        ev.dice = dice(ev.counts);
        ev.truth_volume = ev.counts.tp + ev.counts.fn;
        ev.predicted_volume = ev.counts.tp + ev.counts.fp;
        if (keep_masks) ev.predicted = std::move(pred);
        rep.subjects.push_back(std::move(ev));
    }
    double s = 0;
    for (const auto& e : rep.subjects) s += e.dice;
    rep.mean_dice = rep.subjects.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(rep.subjects.size());
    if (rep.subjects.size() >= 2) {
        std::vector<std::vector<double>> ratings;
        for (const auto& e : rep.subjects)
            ratings.push_back({static_cast<double>(e.truth_volume), static_cast<double>(e.predicted_volume)});
        rep.icc = icc(ratings);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Single fold training
// ---------------------------------------------------------------------------

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_dice = 0.0;
    bool improved = false;
};

struct FoldTraining {
    UNetModel<float> model; // best-epoch snapshot
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    double best_val_dice = -1.0;
    int epochs_trained = 0;
    StopReason stop = StopReason::max_epochs;
    ClassWeights weights;
};

struct TrainHooks {
    // Replaces the validation Dice (used to script early-stopping tests).
    std::function<double(int epoch, const UNetModel<float>&)> validation_metric;
    std::function<void(const EpochRecord&)> on_epoch;
};

/// Mini-batch Adam on ROI-cropped training samples with class-weighted BCE.
/// Validation per-case Dice after every epoch drives early stopping; the
/// returned model is the best-epoch snapshot.
inline FoldTraining train_fold(std::span<const SliceSample> train, std::span<const EvalSubject> validation,
                               const RoiWindow& window, const UNetConfig& unet_cfg, const TrainConfig& cfg,
                               const TrainHooks& hooks = {}) {
    cfg.validate();
    unet_cfg.validate();
    if (train.empty()) throw TrainError("train_fold: empty training set");
    if (validation.empty() && !hooks.validation_metric) throw TrainError("train_fold: empty validation set");
    require_training_data(train, "train_fold");
    std::set<std::string> train_ids;
    for (const auto& s : train) {
        if (!s.label) throw ValueError("train_fold: training sample without label");
        train_ids.insert(s.subject_id);
    }
    for (const auto& v : validation) {
        require_unaugmented(v.slices, "train_fold validation");
        if (train_ids.count(v.subject_id))
            throw LeakageError("subject " + v.subject_id + " appears in both training and validation data");
    }

    std::vector<SliceSample> originals;
    for (const auto& s : train)
        if (!s.provenance.augmented) originals.push_back(s);
    FoldTraining out;
    out.weights = originals.empty() ? compute_class_weights(train)
                                    : compute_class_weights(std::span<const SliceSample>(originals));

    UNetModel<float> model = build_model<float>(unet_cfg);
    const auto params = model.parameters();
    AdamState<float> adam;
    Rng dropout_rng(derive_seed(cfg.seed, {0xD0}));
    EarlyStopper stopper(cfg.patience);
    out.model = model.clone();

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, {0x5F, static_cast<std::uint64_t>(epoch)}));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t end = std::min(order.size(), start + bs);
            std::vector<const SliceSample*> batch;
            for (std::size_t i = start; i < end; ++i) batch.push_back(&train[order[i]]);
            const auto x = batch_tensor(batch);
            const auto y = label_tensor(batch);
            Tape<float> tape;
            auto probs = forward(model, tape, x, Mode::train, dropout_rng);
            auto loss = weighted_bce_loss(tape, probs, y, out.weights);
            const double lv = loss.item();
            if (!std::isfinite(lv)) throw TrainError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
            model.zero_grad();
            tape.backward(loss);
            adam_step<float>(params, adam, cfg);
            loss_sum += lv * static_cast<double>(batch.size());
            seen += batch.size();
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(seen);
        rec.val_dice = hooks.validation_metric ? hooks.validation_metric(epoch, model)
                                               : evaluate(model, validation, window, cfg.threshold).mean_dice;
        rec.improved = stopper.update(rec.val_dice);
        if (rec.improved) {
            out.model = model.clone();
            out.best_epoch = epoch;
            out.best_val_dice = rec.val_dice;
        }
        out.history.push_back(rec);
        out.epochs_trained = epoch;
        if (hooks.on_epoch) hooks.on_epoch(rec);
        if (stopper.should_stop()) {
            out.stop = StopReason::early;
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// K-fold cross-validation
// ---------------------------------------------------------------------------

/// Seeded subject-level shuffle, then round-robin assignment to k folds.
inline std::vector<std::vector<std::size_t>> assign_folds(std::size_t n_subjects, int k, std::uint64_t seed) {
    if (k < 2) throw ValueError("k-fold needs k >= 2");
    if (n_subjects < static_cast<std::size_t>(k))
        throw ValueError("k-fold needs at least k subjects (" + std::to_string(n_subjects) + " < " + std::to_string(k) + ")");
    std::vector<std::size_t> idx(n_subjects);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(seed, {0xF0}));
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < idx.size(); ++i) folds[i % static_cast<std::size_t>(k)].push_back(idx[i]);
    return folds;
}

struct KFoldConfig {
    UNetConfig unet;
    TrainConfig train;
    AugmentConfig augment;
    unsigned workers = 1;
    std::optional<int> only_fold; // run a single fold (all folds when empty)
};

struct FoldReport {
    int fold_index = 0;
    std::vector<std::string> train_subjects;
    std::vector<std::string> validation_subjects;
    std::vector<std::string> test_subjects;
    std::vector<SubjectEvaluation> per_subject;
    double mean_dice = 0.0;
    int epochs_trained = 0;
    int best_epoch = 0;
    double best_val_dice = 0.0;
    StopReason stop = StopReason::max_epochs;
    RoiWindow window;
    ClassWeights weights;
    std::vector<EpochRecord> history;
    std::size_t train_samples = 0; // originals, before augmentation
    std::size_t augmented_samples = 0;
};

struct KFoldResult {
    std::vector<std::vector<std::string>> assignments; // fold -> test subject ids
    std::vector<FoldReport> folds;
    double aggregate_dice = 0.0; // mean of fold mean Dice
    std::optional<IccReport> icc;  // pooled over every tested subject
    std::vector<UNetModel<float>> models;
};

/// Everything a fold needs, built strictly from its training subjects.
struct FoldData {
    std::vector<SliceSample> train;          // cropped, augmented
    std::vector<EvalSubject> validation;
    std::vector<EvalSubject> test;
    RoiWindow window;
    std::size_t originals = 0;
};

inline FoldData prepare_fold(std::span<const SubjectData> subjects, const std::vector<std::vector<std::size_t>>& folds,
                             int fold, const KFoldConfig& cfg, std::vector<std::string>& train_ids,
                             std::vector<std::string>& val_ids) {
    FoldData fd;
    std::vector<std::size_t> pool;
    for (std::size_t f = 0; f < folds.size(); ++f)
        if (static_cast<int>(f) != fold) pool.insert(pool.end(), folds[f].begin(), folds[f].end());
    Rng rng(derive_seed(cfg.train.seed, {0xA1, static_cast<std::uint64_t>(fold)}));
    std::shuffle(pool.begin(), pool.end(), rng);
    const auto n_val = static_cast<std::size_t>(cfg.train.validation_subjects);
    if (pool.size() < n_val + 1)
        throw TrainError("fold " + std::to_string(fold) + " leaves " + std::to_string(pool.size()) +
                         " subjects for training and validation; need at least " + std::to_string(n_val + 1));

    auto as_eval = [&](std::size_t idx, Role role) {
        EvalSubject e{subjects[idx].subject_id, subjects[idx].slices};
        set_role(std::span<SliceSample>(e.slices), role);
        return e;
    };
    for (std::size_t idx : folds[static_cast<std::size_t>(fold)]) fd.test.push_back(as_eval(idx, Role::test));
    for (std::size_t i = 0; i < n_val; ++i) {
        fd.validation.push_back(as_eval(pool[i], Role::validation));
        val_ids.push_back(subjects[pool[i]].subject_id);
    }
    std::vector<SliceSample> ci;
    for (std::size_t i = n_val; i < pool.size(); ++i) {
        const auto& subj = subjects[pool[i]];
        train_ids.push_back(subj.subject_id);
        for (const auto& s : subj.slices) {
            if (!s.label) throw ValueError("subject " + subj.subject_id + " has no labels");
            if (count_foreground(*s.label) == 0) continue;
            SliceSample t = s;
            t.provenance.role = Role::train;
            ci.push_back(std::move(t));
        }
    }
    if (ci.empty()) throw TrainError("fold " + std::to_string(fold) + " has no foreground slices to train on");
    // No held-out subject reaches the ROI fit, the class weights or augmentation.
    fd.window = fit_roi_window(std::span<const SliceSample>(ci), static_cast<std::size_t>(cfg.train.roi_margin));
    std::vector<SliceSample> cropped;
    cropped.reserve(ci.size());
    for (const auto& s : ci) cropped.push_back(crop_roi(s, fd.window));
    fd.originals = cropped.size();
    AugmentConfig aug = cfg.augment;
    aug.seed = derive_seed(cfg.augment.seed, {0xA2, static_cast<std::uint64_t>(fold)});
    fd.train = augment_dataset(std::span<const SliceSample>(cropped), aug, 1);
    return fd;
}

inline KFoldResult kfold_cross_validate(
    std::span<const SubjectData> subjects, const KFoldConfig& cfg,
    const std::function<void(const FoldReport&, UNetModel<float>&)>& on_fold_done = {},
    const std::function<void(int fold, const EpochRecord&)>& on_epoch = {}) {
    cfg.train.validate();
    cfg.unet.validate();
    cfg.augment.validate();
    const int k = cfg.train.k_folds;
    const auto folds = assign_folds(subjects.size(), k, cfg.train.seed);
    KFoldResult res;
    for (const auto& f : folds) {
        std::vector<std::string> ids;
        for (auto i : f) ids.push_back(subjects[i].subject_id);
        res.assignments.push_back(ids);
    }
    std::vector<int> to_run;
    for (int f = 0; f < k; ++f)
        if (!cfg.only_fold || *cfg.only_fold == f) to_run.push_back(f);
    if (cfg.only_fold && to_run.empty()) throw ConfigError("only_fold", "fold index out of range");

    std::vector<std::optional<FoldReport>> reports(to_run.size());
    std::vector<std::optional<UNetModel<float>>> models(to_run.size());
    std::vector<std::exception_ptr> errors(to_run.size());
    auto run = [&](std::size_t slot) {
        try {
            const int f = to_run[slot];
            FoldReport rep;
            rep.fold_index = f;
            rep.test_subjects = res.assignments[static_cast<std::size_t>(f)];
            auto fd = prepare_fold(subjects, folds, f, cfg, rep.train_subjects, rep.validation_subjects);
            UNetConfig ucfg = cfg.unet;
            ucfg.seed = derive_seed(cfg.unet.seed, {0xB0, static_cast<std::uint64_t>(f)});
            TrainConfig tcfg = cfg.train;
            tcfg.seed = derive_seed(cfg.train.seed, {0xB1, static_cast<std::uint64_t>(f)});
            TrainHooks hooks;
            if (on_epoch) hooks.on_epoch = [&, f](const EpochRecord& r) { on_epoch(f, r); };
            auto tr = train_fold(fd.train, fd.validation, fd.window, ucfg, tcfg, hooks);
            auto ev = evaluate(tr.model, fd.test, fd.window, cfg.train.threshold);
            rep.per_subject = std::move(ev.subjects);
            rep.mean_dice = ev.mean_dice;
            rep.epochs_trained = tr.epochs_trained;
            rep.best_epoch = tr.best_epoch;
            rep.best_val_dice = tr.best_val_dice;
            rep.stop = tr.stop;
            rep.window = fd.window;
            rep.weights = tr.weights;
            rep.history = std::move(tr.history);
            rep.train_samples = fd.originals;
            rep.augmented_samples = fd.train.size() - fd.originals;
            if (on_fold_done) on_fold_done(rep, tr.model);
            reports[slot] = std::move(rep);
            models[slot] = std::move(tr.model);
        } catch (...) {
            errors[slot] = std::current_exception();
        }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(cfg.workers, static_cast<unsigned>(to_run.size())));
    if (workers == 1) {
        for (std::size_t s = 0; s < to_run.size(); ++s) run(s);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < workers; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t s = t; s < to_run.size(); s += workers) run(s);
            });
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<std::vector<double>> ratings;
    double sum = 0;
    for (std::size_t s = 0; s < to_run.size(); ++s) {
        sum += reports[s]->mean_dice;
        for (const auto& e : reports[s]->per_subject)
            ratings.push_back({static_cast<double>(e.truth_volume), static_cast<double>(e.predicted_volume)});
        res.folds.push_back(std::move(*reports[s]));
        res.models.push_back(std::move(*models[s]));
    }
    res.aggregate_dice = sum / static_cast<double>(to_run.size());
    if (ratings.size() >= 2) res.icc = icc(ratings);
    return res;
}

} // namespace claustrum
