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

#include <random>

#include "claustrum/dataset.hpp"
#include "claustrum/preprocess.hpp"
#include "test_support.hpp"

using namespace claustrum;

namespace {

SliceSample make_sample(std::size_t rows, std::size_t cols, float fill = 0.0f, bool with_label = true) {
    SliceSample s;
    s.subject_id = "sub-001";
    s.image = Image(rows, cols, fill);
    if (with_label) s.label = Mask(rows, cols, 0);
    return s;
}

std::vector<SliceSample> imbalance_samples() {
    const auto v = testing_support::imbalance_fixture();
    auto img = v;
    return volume_to_samples("sub-001", img, &v);
}

} // namespace

TEST(Resize, IdentityOnExactSize) {
    auto s = make_sample(256, 256);
    std::mt19937 rng(1);
    for (auto& v : s.image.storage()) v = std::uniform_real_distribution<float>(0, 1)(rng);
    const auto out = resize_slice(s);
    EXPECT_EQ(out.image, s.image);
    EXPECT_TRUE(out.provenance.transforms.empty());
}

TEST(Resize, AnisotropicInputReachesFrameAndRecordsOrigin) {
    for (auto [r, c] : {std::pair<std::size_t, std::size_t>{218, 364}, {311, 260}}) {
        auto s = make_sample(r, c, 0.25f);
        (*s.label)(r / 2, c / 2) = 7;
        const auto out = resize_slice(s);
        EXPECT_EQ(out.image.rows(), 256u);
        EXPECT_EQ(out.image.cols(), 256u);
        EXPECT_EQ(out.provenance.original_rows, r);
        EXPECT_EQ(out.provenance.original_cols, c);
        for (float v : out.image.values()) EXPECT_FLOAT_EQ(v, 0.25f); // constants survive interpolation
        for (auto v : out.label->values()) EXPECT_LE(v, 1);
    }
    EXPECT_THROW(resize_slice(make_sample(0, 0)), ValueError);
}

TEST(Normalize, MinMaxPerVolume) {
    std::vector<SliceSample> v{make_sample(1, 3), make_sample(1, 1)};
    v[0].image.storage() = {0, 5, 10};
    v[1].image.storage() = {5};
    v = normalize_volume(std::move(v));
    EXPECT_EQ(v[0].image.storage(), (std::vector<float>{0, 0.5f, 1}));
    EXPECT_EQ(v[1].image.storage(), (std::vector<float>{0.5f}));

    std::vector<SliceSample> unit{make_sample(1, 3)};
    unit[0].image.storage() = {0, 0.25f, 1};
    EXPECT_EQ(normalize_volume(unit)[0].image.storage(), unit[0].image.storage());

    std::vector<SliceSample> flat{make_sample(2, 2, 3.0f)};
    const auto flat_out = normalize_volume(flat);
    for (float x : flat_out[0].image.values()) EXPECT_EQ(x, 0.0f);

    std::vector<SliceSample> nan{make_sample(2, 2, std::numeric_limits<float>::quiet_NaN())};
    EXPECT_THROW(normalize_volume(nan), ValueError);
}

TEST(SelectCi, KeepsExactlyLabelledSlicesInOrder) {
    const auto all = imbalance_samples();
    std::vector<SliceSample> mixed{all[0], make_sample(256, 256), all[2]};
    const auto kept = select_ci_slices(mixed);
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_EQ(count_foreground(*kept[0].label), 198u);
    EXPECT_EQ(count_foreground(*kept[1].label), 187u);
    EXPECT_TRUE(select_ci_slices({}).empty());
    std::vector<SliceSample> unlabelled{make_sample(4, 4, 0.0f, false)};
    EXPECT_THROW(select_ci_slices(unlabelled), ValueError);
}

TEST(Roi, CropRestoreOnRandomWindows) {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<std::size_t> rr(0, 256 - 64), cc(0, 256 - 112);
    auto s = make_sample(256, 256);
    for (std::size_t i = 0; i < s.label->size(); ++i) s.label->storage()[i] = (rng() % 5) == 0;
    for (int t = 0; t < 1000; ++t) {
        const RoiWindow w{rr(rng), cc(rng)};
        const auto crop = crop_roi(s, w);
        ASSERT_EQ(crop.image.rows(), 64u);
        ASSERT_EQ(crop.image.cols(), 112u);
        ASSERT_EQ(crop.provenance.roi, w);
        const auto back = restore_from_roi(*crop.label, w);
        for (std::size_t r = 0; r < 256; ++r)
            for (std::size_t c = 0; c < 256; ++c)
                ASSERT_EQ(back(r, c), w.contains(r, c) ? (*s.label)(r, c) : 0) << t;
        ASSERT_EQ(count_foreground(back), count_foreground(*crop.label));
    }
}

TEST(Roi, ErrorsAndArithmetic) {
    const auto zero = crop_roi(make_sample(256, 256), RoiWindow{0, 0});
    EXPECT_EQ(count_foreground(*zero.label), 0u);
    EXPECT_THROW(crop_roi(make_sample(256, 256), RoiWindow{193, 0}), ValueError);
    EXPECT_THROW(crop_roi(make_sample(128, 128), RoiWindow{0, 0}), ShapeError);
    EXPECT_EQ(count_foreground(restore_from_roi(Mask(64, 112, 1), RoiWindow{10, 20})), 7168u);
    EXPECT_THROW(restore_from_roi(Mask(64, 111, 1), RoiWindow{0, 0}), ShapeError);
}

TEST(FitRoi, CentresOnSinglePixel) {
    Mask m(256, 256, 0);
    m(128, 128) = 1;
    const std::vector<Mask> labels{m};
    const auto w = fit_roi_window(std::span<const Mask>(labels), 2);
    EXPECT_LE(std::abs(static_cast<double>(w.row0) + 31.5 - 128.0), 1.0);
    EXPECT_LE(std::abs(static_cast<double>(w.col0) + 55.5 - 128.0), 1.0);
}

TEST(FitRoi, ExtentBoundary) {
    auto box = [](std::size_t h, std::size_t w) {
        Mask m(256, 256, 0);
        m(100, 60) = 1;
        m(100 + h - 1, 60 + w - 1) = 1;
        return std::vector<Mask>{m};
    };
    const auto fits = box(60, 100);
    const auto w = fit_roi_window(std::span<const Mask>(fits), 2);
    EXPECT_TRUE(w.contains(98, 58));
    EXPECT_TRUE(w.contains(100 + 59 + 2, 60 + 99 + 2));
    const auto too_tall = box(70, 100);
    EXPECT_THROW(fit_roi_window(std::span<const Mask>(too_tall), 2), ValueError);
    const std::vector<Mask> empty{Mask(256, 256, 0)};
    EXPECT_THROW(fit_roi_window(std::span<const Mask>(empty), 2), ValueError);
}

TEST(FitRoi, ClampsInsideFrameAtEdges) {
    Mask m(256, 256, 0);
    m(0, 0) = 1;
    m(255, 255) = 0;
    const std::vector<Mask> labels{m};
    const auto w = fit_roi_window(std::span<const Mask>(labels), 4);
    EXPECT_EQ(w, (RoiWindow{0, 0}));
}

TEST(ImbalanceCounts, CountsBeforeAndAfterRoi) {
    const auto samples = imbalance_samples();
    const auto w = fit_roi_window(std::span<const SliceSample>(samples), 4);
    const auto st = imbalance_report(samples, w);
    ASSERT_EQ(st.slices.size(), 3u);
    const std::uint64_t ci[3] = {198, 209, 187}, bg_b[3] = {65338, 65327, 65349}, bg_a[3] = {6970, 6959, 6981};
    for (int k = 0; k < 3; ++k) {
        const auto& s = st.slices[k];
        EXPECT_EQ(s.ci_pixels_before, ci[k]);
        EXPECT_EQ(s.bg_pixels_before, bg_b[k]);
        EXPECT_EQ(s.ci_pixels_after, ci[k]);
        EXPECT_EQ(s.bg_pixels_after, bg_a[k]);
        EXPECT_EQ(s.ci_pixels_before + s.bg_pixels_before, 65536u);
        EXPECT_EQ(s.ci_pixels_after + s.bg_pixels_after, 7168u);
    }
    EXPECT_NEAR(198.0 / 7168.0, 0.027623, 1e-6);
    EXPECT_NEAR(65338.0 / 6970.0, 9.374, 1e-3);
    EXPECT_NEAR(st.foreground_fraction_after, 594.0 / (3 * 7168.0), 1e-15);
}

TEST(Leakage, HeldOutSamplesRejectedByStatistics) {
    auto samples = imbalance_samples();
    set_role(std::span<SliceSample>(samples).subspan(1, 1), Role::test);
    EXPECT_THROW(fit_roi_window(std::span<const SliceSample>(samples), 4), LeakageError);
    EXPECT_THROW(compute_class_weights(std::span<const SliceSample>(samples)), LeakageError);
    samples[1].provenance.role = Role::validation;
    EXPECT_THROW(fit_roi_window(std::span<const SliceSample>(samples), 4), LeakageError);
    samples[1].provenance.role = Role::train;
    EXPECT_NO_THROW(fit_roi_window(std::span<const SliceSample>(samples), 4));
    samples[0].provenance.augmented = true;
    EXPECT_THROW(require_unaugmented(samples, "test"), LeakageError);
}

TEST(PrepareSubject, LabelsBinarizedAndImagesInUnitRange) {
    auto img = nifti::make_volume({128, 96, 2}, {1, 1, 1}, nifti::Datatype::float32);
    auto lbl = nifti::make_volume({128, 96, 2}, {1, 1, 1}, nifti::Datatype::float32);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<double>(i % 37) * 3.0 - 20.0;
    lbl.at(64, 48, 1) = 0.7;
    lbl.at(10, 10, 0) = 3.0;
    const auto s = prepare_subject("sub-009", img, &lbl);
    ASSERT_EQ(s.slices.size(), 2u);
    for (const auto& sl : s.slices) {
        EXPECT_EQ(sl.image.rows(), 256u);
        for (float v : sl.image.values()) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
        for (auto v : sl.label->values()) ASSERT_LE(v, 1);
        EXPECT_GE(count_foreground(*sl.label), 1u);
    }
}
