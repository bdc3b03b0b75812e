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

#include <gtest/gtest.h>

#include <set>

#include "claustrum/dataset.hpp"
#include "claustrum/phantom.hpp"
#include "claustrum/train.hpp"

using namespace claustrum;

namespace {

std::vector<SubjectData> phantom_subjects(int n, int slices = 8, std::uint64_t seed = 3) {
    PhantomConfig cfg;
    cfg.n_subjects = n;
    cfg.slices_per_subject = slices;
    cfg.seed = seed;
    std::vector<SubjectData> out;
    for (int i = 0; i < n; ++i) {
        const auto p = generate_subject(cfg, i);
        out.push_back(prepare_subject(p.subject_id, p.image, &p.label));
    }
    return out;
}

struct SmallFold {
    std::vector<SliceSample> train;
    std::vector<EvalSubject> validation;
    RoiWindow window;
};

SmallFold small_fold(const std::vector<SubjectData>& subjects) {
    SmallFold f;
    std::vector<SliceSample> ci;
    for (std::size_t i = 0; i + 1 < subjects.size(); ++i)
        for (auto s : select_ci_slices(subjects[i].slices)) {
            s.provenance.role = Role::train;
            ci.push_back(s);
        }
    f.window = fit_roi_window(std::span<const SliceSample>(ci), 4);
    for (const auto& s : ci) f.train.push_back(crop_roi(s, f.window));
    EvalSubject v{subjects.back().subject_id, subjects.back().slices};
    set_role(std::span<SliceSample>(v.slices), Role::validation);
    f.validation.push_back(v);
    return f;
}

UNetConfig tiny_unet() {
    UNetConfig u;
    u.base_channels = 4;
    u.seed = 8;
    return u;
}

std::vector<std::uint8_t> bytes_of(const UNetModel<float>& m) {
    auto c = m.clone();
    return encode_checkpoint(c);
}

} // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
    Tensor<float> p(Shape{1, 1, 1, 4}, std::vector<float>{1, -2, 3, 0.5f});
    p.set_requires_grad();
    auto g = p.grad();
    const float grads[4] = {0.3f, -5.0f, 1e-3f, 100.0f};
    std::copy(grads, grads + 4, g.begin());
    std::vector<ParamRef<float>> params{{"p", p, false}};
    TrainConfig cfg;
    AdamState<float> st;
    const auto before = p.storage();
    adam_step<float>(params, st, cfg);
    for (int i = 0; i < 4; ++i) {
        const double expected = before[i] - cfg.learning_rate * (grads[i] > 0 ? 1.0 : -1.0);
        EXPECT_NEAR(p.storage()[i], expected, 1e-5 * cfg.learning_rate + 1e-7);
    }
    EXPECT_EQ(st.step, 1);
}

TEST(Adam, ZeroGradientWithoutDecayLeavesParameters) {
    Tensor<float> p(Shape{1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
    p.set_requires_grad();
    p.zero_grad();
    (void)p.grad();
    std::vector<ParamRef<float>> params{{"p", p, false}};
    AdamState<float> st;
    const auto before = p.storage();
    for (int i = 0; i < 3; ++i) adam_step<float>(params, st, TrainConfig{});
    EXPECT_EQ(p.storage(), before);
}

TEST(Adam, DecayPullsTowardZero) {
    Tensor<float> p(Shape{1, 1, 1, 2}, std::vector<float>{1, -1});
    std::vector<ParamRef<float>> params{{"p", p, true}};
    AdamState<float> st;
    adam_step<float>(params, st, TrainConfig{});
    EXPECT_LT(p.storage()[0], 1.0f);
    EXPECT_GT(p.storage()[1], -1.0f);
}

TEST(Adam, NonFiniteGradientAbortsWithoutUpdate) {
    Tensor<float> p(Shape{1, 1, 1, 2}, std::vector<float>{1, 2});
    p.set_requires_grad();
    p.grad()[0] = 0.5f;
    p.grad()[1] = std::numeric_limits<float>::quiet_NaN();
    std::vector<ParamRef<float>> params{{"p", p, false}};
    AdamState<float> st;
    EXPECT_THROW(adam_step<float>(params, st, TrainConfig{}), TrainError);
    EXPECT_EQ(p.storage(), (std::vector<float>{1, 2}));
    EXPECT_EQ(st.step, 0);
}

TEST(EarlyStopping, StopperCountsNonImprovements) {
    EarlyStopper s(2);
    EXPECT_TRUE(s.update(0.5));
    EXPECT_FALSE(s.update(0.5));
    EXPECT_FALSE(s.should_stop());
    EXPECT_FALSE(s.update(0.4));
    EXPECT_TRUE(s.should_stop());
    EXPECT_THROW(EarlyStopper(0), ValueError);
}

TEST(TrainFold, PatienceOneStopsAtSecondEpoch) {
    const auto f = small_fold(phantom_subjects(3));
    TrainConfig cfg;
    cfg.patience = 1;
    cfg.max_epochs = 10;
    TrainHooks hooks;
    hooks.validation_metric = [](int, const UNetModel<float>&) { return 0.5; };
    const auto r = train_fold(f.train, f.validation, f.window, tiny_unet(), cfg, hooks);
    EXPECT_EQ(r.epochs_trained, 2);
    EXPECT_EQ(r.stop, StopReason::early);
    EXPECT_EQ(r.best_epoch, 1);
}

TEST(TrainFold, ReturnsBestEpochSnapshotAndLearns) {
    const auto f = small_fold(phantom_subjects(3));
    TrainConfig cfg;
    cfg.patience = 3;
    cfg.max_epochs = 5;
    std::vector<std::uint8_t> snapshot;
    TrainHooks hooks;
    hooks.validation_metric = [&](int epoch, const UNetModel<float>& m) {
        if (epoch == 2) snapshot = bytes_of(m);
        return epoch == 2 ? 0.9 : 0.1;
    };
    const auto r = train_fold(f.train, f.validation, f.window, tiny_unet(), cfg, hooks);
    EXPECT_EQ(r.best_epoch, 2);
    EXPECT_EQ(r.epochs_trained, 5);
    EXPECT_EQ(r.stop, StopReason::early);
    EXPECT_EQ(bytes_of(r.model), snapshot);
    ASSERT_EQ(r.history.size(), 5u);
    EXPECT_LT(r.history[4].train_loss, r.history[0].train_loss);
    EXPECT_GT(r.weights.w, 0.0);
    EXPECT_LT(r.weights.w, 0.1);
}

TEST(TrainFold, DeterministicForFixedSeeds) {
    const auto f = small_fold(phantom_subjects(3));
    TrainConfig cfg;
    cfg.max_epochs = 2;
    const auto a = train_fold(f.train, f.validation, f.window, tiny_unet(), cfg);
    const auto b = train_fold(f.train, f.validation, f.window, tiny_unet(), cfg);
    EXPECT_EQ(bytes_of(a.model), bytes_of(b.model));
    EXPECT_EQ(a.history.back().train_loss, b.history.back().train_loss);
}

TEST(TrainFold, RejectsLeakage) {
    const auto subjects = phantom_subjects(3);
    auto f = small_fold(subjects);
    auto overlap = f.validation;
    overlap[0].subject_id = f.train.front().subject_id;
    EXPECT_THROW(train_fold(f.train, overlap, f.window, tiny_unet(), TrainConfig{}), LeakageError);
    auto held = f.train;
    held[0].provenance.role = Role::test;
    EXPECT_THROW(train_fold(held, f.validation, f.window, tiny_unet(), TrainConfig{}), LeakageError);
    auto aug_val = f.validation;
    aug_val[0].slices[0].provenance.augmented = true;
    EXPECT_THROW(train_fold(f.train, aug_val, f.window, tiny_unet(), TrainConfig{}), LeakageError);
}

TEST(Folds, PartitionIsDisjointAndBalanced) {
    const auto folds = assign_folds(30, 5, 1);
    ASSERT_EQ(folds.size(), 5u);
    std::set<std::size_t> seen;
    for (const auto& f : folds) {
        EXPECT_EQ(f.size(), 6u);
        for (auto i : f) EXPECT_TRUE(seen.insert(i).second);
    }
    EXPECT_EQ(seen.size(), 30u);
    const auto two = assign_folds(4, 2, 1);
    EXPECT_EQ(two[0].size(), 2u);
    EXPECT_EQ(two[1].size(), 2u);
    EXPECT_EQ(assign_folds(30, 5, 1), folds);
    EXPECT_NE(assign_folds(30, 5, 2), folds);
    EXPECT_THROW(assign_folds(4, 1, 1), ValueError);
}

TEST(Evaluate, OracleAndEmptyPredictors) {
    const auto subjects = phantom_subjects(4);
    std::vector<EvalSubject> eval;
    for (const auto& s : subjects) eval.push_back({s.subject_id, s.slices});
    const auto model = build_model<float>(tiny_unet());
    const RoiWindow w{0, 0};
    auto oracle = [](const EvalSubject& s) {
        std::vector<Mask> m;
        for (const auto& sl : s.slices) m.push_back(*sl.label);
        return m;
    };
    const auto perfect = evaluate(model, eval, w, 0.5, false, oracle);
    EXPECT_EQ(perfect.mean_dice, 1.0);
    ASSERT_TRUE(perfect.icc.has_value());
    EXPECT_NEAR(perfect.icc->icc2k, 1.0, 1e-12);
    for (const auto& e : perfect.subjects) EXPECT_EQ(e.truth_volume, e.predicted_volume);

    auto none = [](const EvalSubject& s) { return std::vector<Mask>(s.slices.size(), Mask(256, 256, 0)); };
    const auto zero = evaluate(model, eval, w, 0.5, false, none);
    EXPECT_EQ(zero.mean_dice, 0.0);

    auto augmented = eval;
    augmented[1].slices[0].provenance.augmented = true;
    EXPECT_THROW(evaluate(model, augmented, w, 0.5, false, oracle), LeakageError);
}

TEST(KFold, HeldOutSubjectsNeverShapeTraining) {
    KFoldConfig cfg;
    cfg.unet = tiny_unet();
    cfg.train.k_folds = 2;
    cfg.train.max_epochs = 1;
    cfg.augment.copies_per_sample = 1;
    cfg.workers = 2;
    const auto subjects = phantom_subjects(4);
    const auto res = kfold_cross_validate(subjects, cfg);
    ASSERT_EQ(res.folds.size(), 2u);
    std::set<std::string> tested;
    for (const auto& f : res.folds) {
        std::set<std::string> tr(f.train_subjects.begin(), f.train_subjects.end());
        for (const auto& v : f.validation_subjects) EXPECT_FALSE(tr.count(v));
        for (const auto& t : f.test_subjects) {
            EXPECT_FALSE(tr.count(t));
            EXPECT_TRUE(std::find(f.validation_subjects.begin(), f.validation_subjects.end(), t) ==
                        f.validation_subjects.end());
            EXPECT_TRUE(tested.insert(t).second);
        }
        EXPECT_EQ(f.per_subject.size(), 2u);
        EXPECT_EQ(f.augmented_samples, f.train_samples);
    }
    EXPECT_EQ(tested.size(), 4u);
    EXPECT_NEAR(res.aggregate_dice, (res.folds[0].mean_dice + res.folds[1].mean_dice) / 2.0, 1e-15);

    cfg.train.k_folds = 4; // three remaining subjects cannot cover three validation and one training subject
    cfg.train.validation_subjects = 3;
    EXPECT_THROW(kfold_cross_validate(subjects, cfg), TrainError);
}
