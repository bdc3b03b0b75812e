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

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dataset.hpp"
#include "error.hpp"
#include "gradcheck.hpp"
#include "io.hpp"
#include "nifti_io.hpp"
#include "overlay.hpp"
#include "phantom.hpp"
#include "pipeline.hpp"
#include "preprocess.hpp"
#include "serialize.hpp"
#include "train.hpp"
#include "unet.hpp"

#ifndef CLAUSTRUM_SEG_VERSION
#define CLAUSTRUM_SEG_VERSION "1.0.0"
#endif

namespace claustrum::cli {

inline constexpr const char* kVersion = CLAUSTRUM_SEG_VERSION;
inline constexpr const char* kWorkersEnv = "CLAUSTRUM_SEG_WORKERS";

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

// Bad flag values found after parsing; reported like parse errors.
class UsageError : public Error {
public:
    using Error::Error;
};

namespace fs = std::filesystem;

inline unsigned default_workers() {
    if (const char* env = std::getenv(kWorkersEnv)) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v >= 1 && v <= 1024) return static_cast<unsigned>(v);
        throw UsageError(std::string(kWorkersEnv) + " must be an integer in 1..1024, got '" + env + "'");
    }
    return 1;
}

inline void ensure_parent(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

inline void write_json(const fs::path& path, const Json& j) {
    ensure_parent(path);
    io::write_text_atomic(path, j.dump(2) + "\n");
}

inline Json read_json(const fs::path& path) {
    const auto bytes = io::read_file(path);
    try {
        return Json::parse(bytes.begin(), bytes.end());
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string(), std::string("invalid JSON: ") + e.what());
    }
}

inline std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

// ---------------------------------------------------------------------------
// phantom
// ---------------------------------------------------------------------------

struct PhantomArgs {
    int subjects = 0;
    fs::path out;
    std::uint64_t seed = 0;
    std::optional<int> slices;
    std::optional<fs::path> config;
    unsigned workers = 1;
};

inline int cmd_phantom(const PhantomArgs& a, std::ostream& out) {
    PhantomConfig cfg;
    if (a.config) from_json(read_json(*a.config), cfg);
    cfg.n_subjects = a.subjects;
    cfg.seed = a.seed;
    if (a.slices) cfg.slices_per_subject = *a.slices;
    cfg.validate();
    const auto entries = generate_dataset(cfg, a.out, a.workers);
    Json subjects = Json::array();
    double fg = 0, bnd = 0;
    for (const auto& e : entries) {
        subjects.push_back({{"subject_id", e.subject_id},
                            {"image", e.image.filename().string()},
                            {"label", e.label.filename().string()},
                            {"image_sha256", io::file_sha256(e.image)},
                            {"label_sha256", io::file_sha256(e.label)},
                            {"foreground_fraction", e.foreground_fraction},
                            {"boundary_fraction", e.boundary_fraction},
                            {"ribbon_slices", e.ribbon_slices}});
        fg += e.foreground_fraction;
        bnd += e.boundary_fraction;
    }
    const double n = static_cast<double>(entries.size());
    write_json(a.out / "manifest.json", {{"tool", "claustrum-seg"},
                                         {"version", kVersion},
                                         {"command", "phantom"},
                                         {"seed", cfg.seed},
                                         {"phantom", to_json(cfg)},
                                         {"subjects", subjects}});
    out << "wrote " << entries.size() << " subjects (" << 2 * entries.size() << " NIfTI files) to " << a.out.string()
        << "\n"
        << "foreground fraction: " << fmt(100.0 * fg / n, 3) << "%  boundary fraction: " << fmt(bnd / n, 3) << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

struct StatsArgs {
    fs::path path;
    std::optional<std::string> window; // "row0,col0"
    int margin = 4;
    bool ci_only = false;
    std::optional<fs::path> json;
};

inline RoiWindow parse_window(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw UsageError("--window expects row0,col0");
    try {
        std::size_t p1 = 0, p2 = 0;
        const auto a = s.substr(0, comma), b = s.substr(comma + 1);
        const long r = std::stol(a, &p1), c = std::stol(b, &p2);
        if (p1 != a.size() || p2 != b.size() || r < 0 || c < 0) throw UsageError("--window expects row0,col0");
        RoiWindow w{static_cast<std::size_t>(r), static_cast<std::size_t>(c)};
        w.validate();
        return w;
    } catch (const std::logic_error&) {
        throw UsageError("--window expects row0,col0, got '" + s + "'");
    } catch (const ValueError& e) {
        throw UsageError(e.what());
    }
}

/// Label slices at 256x256, from a dataset directory or a single label file.
inline std::vector<SliceSample> load_label_slices(const fs::path& path) {
    std::vector<std::pair<std::string, fs::path>> labels;
    if (fs::is_directory(path)) {
        for (const auto& e : scan_dataset(path))
            if (!e.label.empty()) labels.emplace_back(e.subject_id, e.label);
        if (labels.empty()) throw IoError("no label volumes (*_lbl.nii[.gz]) in " + path.string());
    } else {
        labels.emplace_back(subject_id_of(path), path);
    }
    std::vector<SliceSample> out;
    for (const auto& [id, p] : labels) {
        const auto lbl = nifti::read_nifti(p);
        for (const auto& s : volume_to_samples(id, lbl, &lbl)) out.push_back(resize_slice(s));
    }
    return out;
}

inline void print_stats(const ImbalanceStats& st, std::ostream& out) {
    out << std::left << std::setw(12) << "subject" << std::right << std::setw(7) << "slice" << std::setw(8) << "CI"
        << std::setw(12) << "bg_before" << std::setw(11) << "bg_after" << "\n";
    std::uint64_t ci = 0, bgb = 0, bga = 0, cia = 0;
    for (const auto& s : st.slices) {
        out << std::left << std::setw(12) << s.subject_id << std::right << std::setw(7) << s.slice_index << std::setw(8)
            << s.ci_pixels_before << std::setw(12) << s.bg_pixels_before << std::setw(11) << s.bg_pixels_after << "\n";
        ci += s.ci_pixels_before;
        cia += s.ci_pixels_after;
        bgb += s.bg_pixels_before;
        bga += s.bg_pixels_after;
    }
    out << "window: row0=" << st.window.row0 << " col0=" << st.window.col0 << " size=" << RoiWindow::rows << "x"
        << RoiWindow::cols << "\n"
        << "total: slices=" << st.slices.size() << " ci_before=" << ci << " ci_after=" << cia << " bg_before=" << bgb
        << " bg_after=" << bga << "\n"
        << "foreground before ROI: " << fmt(100.0 * st.foreground_fraction_before, 3)
        << "%  after ROI: " << fmt(100.0 * st.foreground_fraction_after, 3)
        << "%  background reduction: " << fmt(st.background_reduction, 2) << "x\n";
}

inline int cmd_stats(const StatsArgs& a, std::ostream& out) {
    auto slices = load_label_slices(a.path);
    if (a.ci_only) slices = select_ci_slices(slices);
    RoiWindow window{(kFrameSize - kRoiRows) / 2, (kFrameSize - kRoiCols) / 2};
    if (a.window) {
        window = parse_window(*a.window);
    } else {
        std::vector<Mask> masks;
        for (const auto& s : slices)
            if (count_foreground(*s.label)) masks.push_back(*s.label);
        if (!masks.empty()) window = fit_roi_window(std::span<const Mask>(masks), static_cast<std::size_t>(a.margin));
    }
    const auto st = imbalance_report(slices, window);
    print_stats(st, out);
    if (a.json) write_json(*a.json, to_json(st));
    return kOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    fs::path data;
    fs::path out;
    std::optional<fs::path> config;
    std::optional<int> folds;
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
    std::optional<int> base_channels;
    std::optional<int> depth;
    std::optional<int> max_epochs;
    std::optional<int> patience;
    std::optional<int> copies;
    std::optional<int> batch_size;
    std::optional<double> lr;
    std::optional<int> only_fold;
    bool quiet = false;
};

inline std::string checkpoint_name(int fold) { return "fold_" + std::to_string(fold) + ".unet"; }

inline int cmd_train(const TrainArgs& a, std::ostream& out) {
    KFoldConfig cfg;
    if (a.config) parse_run_config(read_json(*a.config), cfg.unet, cfg.train, cfg.augment);
    if (a.folds) cfg.train.k_folds = *a.folds;
    if (a.seed) cfg.train.seed = cfg.unet.seed = cfg.augment.seed = *a.seed;
    if (a.base_channels) cfg.unet.base_channels = *a.base_channels;
    if (a.depth) cfg.unet.depth = *a.depth;
    if (a.max_epochs) cfg.train.max_epochs = *a.max_epochs;
    if (a.patience) cfg.train.patience = *a.patience;
    if (a.copies) cfg.augment.copies_per_sample = *a.copies;
    if (a.batch_size) cfg.train.batch_size = *a.batch_size;
    if (a.lr) cfg.train.learning_rate = *a.lr;
    cfg.workers = a.workers;
    cfg.only_fold = a.only_fold;
    cfg.unet.validate();
    cfg.train.validate();
    cfg.augment.validate();
    if (a.only_fold && (*a.only_fold < 0 || *a.only_fold >= cfg.train.k_folds))
        throw UsageError("--only-fold must be in 0.." + std::to_string(cfg.train.k_folds - 1));

    const auto entries = scan_dataset(a.data);
    if (entries.empty()) throw IoError("no NIfTI subjects found in " + a.data.string());
    std::vector<SubjectData> subjects;
    Json inputs = Json::array();
    for (const auto& e : entries) {
        if (e.image.empty() || e.label.empty())
            throw IoError("subject " + e.subject_id + " needs both *_img and *_lbl volumes");
        subjects.push_back(load_subject(e));
        inputs.push_back({{"subject_id", e.subject_id},
                          {"image", e.image.filename().string()},
                          {"label", e.label.filename().string()},
                          {"image_sha256", io::file_sha256(e.image)},
                          {"label_sha256", io::file_sha256(e.label)}});
    }
    fs::create_directories(a.out);

    std::mutex mu;
    auto on_epoch = [&](int fold, const EpochRecord& r) {
        if (a.quiet) return;
        std::lock_guard lock(mu);
        out << "fold " << fold << " epoch " << r.epoch << " loss " << fmt(r.train_loss, 5) << " val_dice "
            << fmt(r.val_dice) << (r.improved ? " *" : "") << std::endl;
    };
    auto on_fold = [&](const FoldReport& rep, UNetModel<float>& model) {
        save_checkpoint(model, a.out / checkpoint_name(rep.fold_index));
        write_json(a.out / ("fold_" + std::to_string(rep.fold_index) + ".json"), to_json(rep));
        std::lock_guard lock(mu);
        out << "fold " << rep.fold_index << " test dice per case " << fmt(rep.mean_dice) << " (" << rep.epochs_trained
            << " epochs, best " << rep.best_epoch << ", stop " << stop_reason_name(rep.stop) << ")" << std::endl;
    };
    const auto res = kfold_cross_validate(subjects, cfg, on_fold, on_epoch);

    Json folds = Json::array(), fold_means = Json::array();
    for (const auto& f : res.folds) {
        const auto ckpt = a.out / checkpoint_name(f.fold_index);
        folds.push_back({{"fold_index", f.fold_index},
                         {"test_subjects", f.test_subjects},
                         {"validation_subjects", f.validation_subjects},
                         {"train_subjects", f.train_subjects},
                         {"roi_window", to_json(f.window)},
                         {"class_weights", to_json(f.weights)},
                         {"checkpoint", ckpt.filename().string()},
                         {"checkpoint_sha256", io::file_sha256(ckpt)},
                         {"report", "fold_" + std::to_string(f.fold_index) + ".json"}});
        fold_means.push_back(f.mean_dice);
    }
    Json phantom = nullptr;
    if (fs::exists(a.data / "manifest.json")) {
        try {
            const auto dm = read_json(a.data / "manifest.json");
            if (dm.contains("phantom")) phantom = dm["phantom"];
        } catch (const Error&) {
        }
    }
    write_json(a.out / "summary.json", {{"aggregate_dice", res.aggregate_dice},
                                        {"fold_mean_dice", fold_means},
                                        {"icc", res.icc ? to_json(*res.icc) : Json(nullptr)}});
    write_json(a.out / "manifest.json", {{"tool", "claustrum-seg"},
                                         {"version", kVersion},
                                         {"command", "train"},
                                         {"seed", cfg.train.seed},
                                         {"workers", cfg.workers},
                                         {"config", {{"unet", to_json(cfg.unet)},
                                                     {"train", to_json(cfg.train)},
                                                     {"augment", to_json(cfg.augment)}}},
                                         {"phantom", phantom},
                                         {"fold_assignments", res.assignments},
                                         {"folds", folds},
                                         {"inputs", inputs}});
    out << "aggregate dice per case: " << fmt(res.aggregate_dice) << "\n";
    if (res.icc)
        for (const auto& row : kIccRows)
            out << "  " << std::left << std::setw(26) << row.description << std::setw(6) << row.name << " "
                << fmt((*res.icc).*row.field) << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictArgs {
    fs::path checkpoint;
    fs::path input;
    fs::path out;
    std::optional<fs::path> manifest;
    std::optional<int> fold;
    std::optional<double> threshold;
};

/// ROI window recorded in a training manifest for the given checkpoint.
inline RoiWindow manifest_window(const Json& m, const fs::path& checkpoint, std::optional<int> fold) {
    if (!m.contains("folds") || !m["folds"].is_array()) throw ConfigError("folds", "manifest has no fold list");
    for (const auto& f : m["folds"]) {
        const bool match = fold ? f.value("fold_index", -1) == *fold
                                : f.value("checkpoint", std::string()) == checkpoint.filename().string();
        if (match) return roi_window_from_json(f.at("roi_window"));
    }
    throw ConfigError("folds", "no manifest entry for checkpoint " + checkpoint.filename().string());
}

inline int cmd_predict(const PredictArgs& a, std::ostream& out) {
    const auto manifest_path = a.manifest ? *a.manifest : a.checkpoint.parent_path() / "manifest.json";
    if (!fs::exists(manifest_path)) throw IoError("missing manifest: " + manifest_path.string());
    const auto manifest = read_json(manifest_path);
    const auto window = manifest_window(manifest, a.checkpoint, a.fold);
    double threshold = 0.5;
    if (manifest.contains("config") && manifest["config"].contains("train"))
        threshold = manifest["config"]["train"].value("threshold", 0.5);
    if (a.threshold) threshold = *a.threshold;
    if (!(threshold >= 0.0 && threshold < 1.0)) throw UsageError("--threshold must be in [0,1)");
    const auto model = load_checkpoint<float>(a.checkpoint);
    const auto image = nifti::read_nifti(a.input);
    const auto mask = predict_volume(model, window, image, threshold);
    ensure_parent(a.out);
    nifti::write_nifti(mask, a.out, nifti::Datatype::uint8);
    std::uint64_t fg = 0;
    for (double v : mask.data) fg += v > 0;
    out << "wrote " << a.out.string() << " (" << fg << " foreground voxels)\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
    fs::path pred;
    fs::path labels;
    fs::path out;
    std::optional<fs::path> images;
    std::optional<fs::path> overlay_dir;
    std::vector<int> overlay_slices;
};

// subject id -> file, for a directory of NIfTI files or a single file.
inline std::map<std::string, fs::path> nifti_by_subject(const fs::path& p, const char* role) {
    std::map<std::string, fs::path> out;
    if (fs::is_directory(p)) {
        for (const auto& e : scan_dataset(p)) {
            const auto& f = std::string(role) == "image" ? e.image : e.label;
            if (!f.empty()) out[e.subject_id] = f;
        }
        // Plain `<id>.nii[.gz]` files (e.g. prediction outputs).
        for (const auto& e : fs::directory_iterator(p)) {
            const auto name = e.path().filename().string();
            if (e.is_regular_file() && is_nifti_name(name) && name.find('_') == std::string::npos)
                out.emplace(subject_id_of(e.path()), e.path());
        }
    } else {
        out[subject_id_of(p)] = p;
    }
    return out;
}

inline int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    std::vector<std::pair<fs::path, fs::path>> pairs; // (pred, label)
    std::vector<std::string> ids;
    if (!fs::is_directory(a.pred) && !fs::is_directory(a.labels)) {
        pairs.emplace_back(a.pred, a.labels);
        ids.push_back(subject_id_of(a.labels));
    } else {
        const auto preds = nifti_by_subject(a.pred, "label");
        const auto labels = nifti_by_subject(a.labels, "label");
        for (const auto& [id, lp] : labels) {
            auto it = preds.find(id);
            if (it == preds.end()) throw IoError("no prediction for subject " + id);
            pairs.emplace_back(it->second, lp);
            ids.push_back(id);
        }
        if (pairs.empty()) throw IoError("no label volumes found in " + a.labels.string());
    }
    std::map<std::string, fs::path> images;
    if (a.images) images = nifti_by_subject(*a.images, "image");

    std::vector<EvalSubject> subjects;
    std::map<std::string, std::vector<Mask>> predictions;
    std::map<std::string, std::vector<Grid<double>>> backgrounds;
    for (std::size_t s = 0; s < pairs.size(); ++s) {
        const auto pv = nifti::read_nifti(pairs[s].first);
        const auto lv = nifti::read_nifti(pairs[s].second);
        if (pv.dims != lv.dims)
            throw ShapeError("prediction and label volumes for " + ids[s] + " are misaligned (different dims)");
        EvalSubject subj{ids[s], {}};
        auto truth = volume_masks(lv);
        for (std::size_t k = 0; k < truth.size(); ++k) {
            SliceSample smp;
            smp.subject_id = ids[s];
            smp.slice_index = static_cast<int>(k);
            smp.image = Image(truth[k].rows(), truth[k].cols());
            smp.label = std::move(truth[k]);
            smp.provenance.role = Role::test;
            subj.slices.push_back(std::move(smp));
        }
        predictions[ids[s]] = volume_masks(pv);
        if (auto it = images.find(ids[s]); it != images.end()) {
            const auto iv = nifti::read_nifti(it->second);
            if (iv.dims != lv.dims) throw ShapeError("image volume for " + ids[s] + " does not match the labels");
            backgrounds[ids[s]] = nifti::axial_slices(iv);
        }
        subjects.push_back(std::move(subj));
    }
    UNetModel<float> unused;
    const auto rep = evaluate(unused, subjects, RoiWindow{}, 0.5, false,
                              [&](const EvalSubject& s) { return predictions.at(s.subject_id); });

    Json j = to_json(rep);
    if (a.overlay_dir) {
        fs::create_directories(*a.overlay_dir);
        Json written = Json::array();
        for (const auto& subj : subjects) {
            const auto& pred = predictions.at(subj.subject_id);
            std::vector<int> wanted = a.overlay_slices;
            if (wanted.empty()) {
                // Default: the slice with the most ground-truth pixels.
                std::size_t best = 0, best_k = 0;
                for (std::size_t k = 0; k < subj.slices.size(); ++k)
                    if (auto c = count_foreground(*subj.slices[k].label); c > best) best = c, best_k = k;
                wanted.push_back(static_cast<int>(best_k));
            }
            for (int k : wanted) {
                if (k < 0 || static_cast<std::size_t>(k) >= subj.slices.size())
                    throw UsageError("overlay slice " + std::to_string(k) + " out of range for " + subj.subject_id);
                const auto& truth = *subj.slices[static_cast<std::size_t>(k)].label;
                Grid<double> bg(truth.rows(), truth.cols());
                if (auto it = backgrounds.find(subj.subject_id); it != backgrounds.end())
                    bg = it->second[static_cast<std::size_t>(k)];
                const auto png = *a.overlay_dir / (subj.subject_id + "_slice" + std::to_string(k) + ".png");
                write_png(render_overlay(bg, truth, pred[static_cast<std::size_t>(k)]), png);
                written.push_back(png.filename().string());
            }
        }
        j["overlays"] = written;
    }
    write_json(a.out, j);

    for (const auto& s : rep.subjects)
        out << std::left << std::setw(12) << s.subject_id << " dice " << fmt(s.dice) << "  truth " << s.truth_volume
            << "  predicted " << s.predicted_volume << "\n";
    out << "mean dice per case: " << fmt(rep.mean_dice) << "\n";
    if (rep.icc)
        for (const auto& row : kIccRows)
            out << "  " << std::left << std::setw(26) << row.description << std::setw(6) << row.name << " "
                << fmt((*rep.icc).*row.field) << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradcheckArgs {
    std::optional<std::string> op;
    bool inject_fault = false;
    std::optional<fs::path> json;
};

inline int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
    GradcheckOptions opt;
    opt.only = a.op;
    opt.inject_fault = a.inject_fault;
    if (a.op) {
        const auto& names = gradcheck_names();
        if (std::find(names.begin(), names.end(), *a.op) == names.end()) throw UsageError("unknown --op " + *a.op);
    }
    const auto results = run_gradcheck(opt);
    bool ok = true;
    Json arr = Json::array();
    for (const auto& r : results) {
        out << std::left << std::setw(18) << r.name << " max_rel_err " << std::scientific << std::setprecision(3)
            << r.max_rel_error << " tol " << r.tolerance << std::defaultfloat << " checked " << r.checked << "  "
            << (r.passed ? "PASS" : "FAIL") << "\n";
        ok = ok && r.passed;
        arr.push_back({{"name", r.name},
                       {"max_rel_error", r.max_rel_error},
                       {"tolerance", r.tolerance},
                       {"checked", r.checked},
                       {"passed", r.passed}});
    }
    if (a.json) write_json(*a.json, {{"passed", ok}, {"checks", arr}});
    out << (ok ? "all gradient checks passed" : "gradient check FAILED") << "\n";
    return ok ? kOk : kFailure;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Parses `args` (args[0] is the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Claustrum segmentation toolkit: phantom data, ROI statistics, U-Net training and evaluation.",
                 "claustrum-seg"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    PhantomArgs pa;
    auto* phantom = app.add_subcommand("phantom", "Generate a synthetic labelled dataset");
    phantom->add_option("--subjects", pa.subjects, "Number of subjects")->required()->check(CLI::Range(1, 10000));
    phantom->add_option("--out", pa.out, "Output directory")->required();
    phantom->add_option("--seed", pa.seed, "Random seed");
    phantom->add_option("--slices", pa.slices, "Axial slices per subject")->check(CLI::Range(1, 4096));
    phantom->add_option("--config", pa.config, "Phantom config JSON")->check(CLI::ExistingFile);
    std::optional<unsigned> phantom_workers;
    phantom->add_option("--workers", phantom_workers, "Parallel workers")->check(CLI::Range(1, 1024));

    StatsArgs sa;
    auto* stats = app.add_subcommand("stats", "Class-imbalance statistics before and after the ROI crop");
    stats->add_option("path", sa.path, "Dataset directory or label NIfTI")->required()->check(CLI::ExistingPath);
    stats->add_option("--window", sa.window, "ROI window top-left as row0,col0 (default: fitted)");
    stats->add_option("--margin", sa.margin, "Margin for the fitted window")->check(CLI::Range(0, 64));
    stats->add_flag("--ci-only", sa.ci_only, "Only slices containing foreground");
    stats->add_option("--json", sa.json, "Also write the report as JSON");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "K-fold cross-validated training");
    train->add_option("--data", ta.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--out", ta.out, "Output directory")->required();
    train->add_option("--config", ta.config, "Config JSON {unet, train, augment}")->check(CLI::ExistingFile);
    train->add_option("--folds", ta.folds, "Number of folds")->check(CLI::Range(2, 1000));
    train->add_option("--seed", ta.seed, "Seed for folds, weights, augmentation and batches");
    std::optional<unsigned> train_workers;
    train->add_option("--workers", train_workers, "Folds trained in parallel")->check(CLI::Range(1, 1024));
    train->add_option("--base-channels", ta.base_channels, "U-Net base channels")->check(CLI::Range(1, 512));
    train->add_option("--depth", ta.depth, "U-Net depth")->check(CLI::Range(1, 6));
    train->add_option("--max-epochs", ta.max_epochs, "Maximum epochs")->check(CLI::Range(1, 100000));
    train->add_option("--patience", ta.patience, "Early-stopping patience")->check(CLI::Range(1, 100000));
    train->add_option("--copies", ta.copies, "Augmented copies per training slice")->check(CLI::Range(0, 1000));
    train->add_option("--batch-size", ta.batch_size, "Mini-batch size")->check(CLI::Range(1, 4096));
    train->add_option("--lr", ta.lr, "Adam learning rate");
    train->add_option("--only-fold", ta.only_fold, "Train a single fold");
    train->add_flag("--quiet", ta.quiet, "No per-epoch progress");

    PredictArgs pr;
    auto* predict = app.add_subcommand("predict", "Segment a NIfTI volume with a trained checkpoint");
    predict->add_option("--checkpoint", pr.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    predict->add_option("--input", pr.input, "Input NIfTI")->required()->check(CLI::ExistingFile);
    predict->add_option("--out", pr.out, "Output mask NIfTI")->required();
    predict->add_option("--manifest", pr.manifest, "Run manifest (default: next to the checkpoint)");
    predict->add_option("--fold", pr.fold, "Fold whose ROI window to use (default: match checkpoint name)");
    predict->add_option("--threshold", pr.threshold, "Probability threshold");

    EvaluateArgs ea;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Dice and ICC of predictions against labels");
    evaluate_cmd->add_option("--pred", ea.pred, "Prediction NIfTI or directory")->required()->check(CLI::ExistingPath);
    evaluate_cmd->add_option("--labels", ea.labels, "Label NIfTI or dataset directory")->required()->check(CLI::ExistingPath);
    evaluate_cmd->add_option("--out", ea.out, "Metrics JSON")->required();
    evaluate_cmd->add_option("--images", ea.images, "Image NIfTI or dataset directory for overlays")->check(CLI::ExistingPath);
    evaluate_cmd->add_option("--overlay-dir", ea.overlay_dir, "Write PNG overlays here");
    evaluate_cmd->add_option("--overlay-slices", ea.overlay_slices, "Slice indices to render")->delimiter(',');

    GradcheckArgs ga;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every backward rule");
    gradcheck->add_option("--op", ga.op, "Check a single op");
    gradcheck->add_flag("--inject-fault", ga.inject_fault, "Test hook: use a wrong backward rule (must fail)");
    gradcheck->add_option("--json", ga.json, "Also write results as JSON");

    std::vector<const char*> argv;
    for (const auto& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (phantom->parsed()) {
            pa.workers = phantom_workers ? *phantom_workers : default_workers();
            return cmd_phantom(pa, out);
        }
        if (stats->parsed()) return cmd_stats(sa, out);
        if (train->parsed()) {
            ta.workers = train_workers ? *train_workers : default_workers();
            return cmd_train(ta, out);
        }
        if (predict->parsed()) return cmd_predict(pr, out);
        if (evaluate_cmd->parsed()) return cmd_evaluate(ea, out);
        if (gradcheck->parsed()) return cmd_gradcheck(ga, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}

} // namespace claustrum::cli
