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

#include "claustrum/serialize.hpp"
#include "test_support.hpp"

using namespace claustrum;
namespace ts = testing_support;
namespace fs = std::filesystem;

namespace {

std::string error_path(const Json& j) {
    UNetConfig u;
    TrainConfig t;
    AugmentConfig a;
    try {
        parse_run_config(j, u, t, a);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<none>";
}

} // namespace

TEST(Serialize, ConfigsRoundTrip) {
    UNetConfig u;
    u.base_channels = 12;
    u.seed = 99;
    TrainConfig t;
    t.learning_rate = 0.003;
    t.patience = 4;
    AugmentConfig a;
    a.intensity_gain_range = {0.8, 1.2};
    a.copies_per_sample = 2;
    const Json j = {{"unet", to_json(u)}, {"train", to_json(t)}, {"augment", to_json(a)}};
    EXPECT_TRUE(ts::check_schema(j, "run_config"));
    UNetConfig u2;
    TrainConfig t2;
    AugmentConfig a2;
    parse_run_config(j, u2, t2, a2);
    EXPECT_EQ(u2, u);
    EXPECT_EQ(to_json(t2), to_json(t));
    EXPECT_EQ(to_json(a2), to_json(a));

    PhantomConfig p;
    p.seed = 5;
    p.contrast = 0.5;
    PhantomConfig p2;
    from_json(to_json(p), p2);
    EXPECT_EQ(to_json(p2), to_json(p));
}

TEST(Serialize, ShippedConfigsParse) {
    for (const char* name : {"default.json", "phantom_quick.json"}) {
        const auto j = ts::load_json(fs::path(CLAUSTRUM_CONFIG_DIR) / name);
        EXPECT_TRUE(ts::check_schema(j, "run_config")) << name;
        UNetConfig u;
        TrainConfig t;
        AugmentConfig a;
        EXPECT_NO_THROW(parse_run_config(j, u, t, a)) << name;
    }
    const auto j = ts::load_json(fs::path(CLAUSTRUM_CONFIG_DIR) / "default.json");
    UNetConfig u;
    TrainConfig t;
    AugmentConfig a;
    parse_run_config(j, u, t, a);
    EXPECT_EQ(t.learning_rate, 0.001);
    EXPECT_EQ(t.k_folds, 5);
    EXPECT_EQ(u.depth, 4);
}

TEST(Serialize, ErrorsNameTheField) {
    EXPECT_EQ(error_path(Json{{"train", {{"learning_rat", 0.1}}}}), "train.learning_rat");
    EXPECT_EQ(error_path(Json{{"train", {{"batch_size", "8"}}}}), "train.batch_size");
    EXPECT_EQ(error_path(Json{{"train", {{"batch_size", 8.5}}}}), "train.batch_size");
    EXPECT_EQ(error_path(Json{{"train", {{"learning_rate", -1.0}}}}), "train.learning_rate");
    EXPECT_EQ(error_path(Json{{"unet", {{"seed", -3}}}}), "unet.seed");
    EXPECT_EQ(error_path(Json{{"augment", {{"intensity_gain_range", {1.0}}}}}), "augment.intensity_gain_range");
    EXPECT_EQ(error_path(Json{{"augment", {{"elastic_sigma", 0.0}}}}), "augment.elastic_sigma");
    EXPECT_EQ(error_path(Json{{"optimizer", Json::object()}}), "optimizer");
    EXPECT_EQ(error_path(Json::array()), "");
    EXPECT_EQ(error_path(Json::object()), "<none>");
}

TEST(Serialize, RoiWindow) {
    const RoiWindow w{96, 72};
    const auto j = to_json(w);
    EXPECT_EQ(j["rows"], 64);
    EXPECT_EQ(j["cols"], 112);
    EXPECT_EQ(roi_window_from_json(j), w);
    EXPECT_THROW(roi_window_from_json(Json{{"row0", 200}, {"col0", 0}}), ValueError);
    EXPECT_THROW(roi_window_from_json(Json{{"row0", -1}, {"col0", 0}}), ConfigError);
}

TEST(Serialize, IccAndEvaluationMatchSchemas) {
    const auto rep = icc({{1, 1.5}, {2, 2.2}, {3, 2.7}, {5, 5.5}});
    const auto j = to_json(rep);
    EXPECT_TRUE(ts::check_schema(j, "icc"));
    ASSERT_EQ(j["rows"].size(), 6u);
    EXPECT_EQ(j["rows"][4]["name"], "ICC2k");
    EXPECT_EQ(j["rows"][4]["description"], "Average random raters");

    EvaluationReport ev;
    SubjectEvaluation s;
    s.subject_id = "sub-001";
    s.counts = {5, 1, 2, 92};
    s.dice = 10.0 / 13.0;
    s.truth_volume = 7;
    s.predicted_volume = 6;
    ev.subjects = {s};
    ev.mean_dice = s.dice;
    EXPECT_TRUE(ts::check_schema(to_json(ev), "evaluation"));
    ev.mean_dice = std::numeric_limits<double>::quiet_NaN();
    EXPECT_TRUE(to_json(ev)["mean_dice"].is_null());
}

TEST(Serialize, SchemaCheckerRejectsViolations) {
    Json bad = {{"passed", true}, {"checks", Json::array()}};
    EXPECT_FALSE(ts::schema_errors(bad, ts::schema_path("gradcheck")).empty());
    bad = {{"passed", "yes"}, {"checks", {{{"name", "relu"}, {"max_rel_error", 0.0}, {"tolerance", 1e-4}, {"checked", 3}, {"passed", true}}}}};
    EXPECT_FALSE(ts::schema_errors(bad, ts::schema_path("gradcheck")).empty());
    bad["passed"] = true;
    EXPECT_TRUE(ts::schema_errors(bad, ts::schema_path("gradcheck")).empty());
    bad["extra"] = 1;
    EXPECT_FALSE(ts::schema_errors(bad, ts::schema_path("gradcheck")).empty());
}
