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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "error.hpp"
#include "nifti_io.hpp"
#include "preprocess.hpp"

namespace claustrum {

/// One subject's axial slices after resize to 256x256 and per-volume
/// min-max normalization. Labels are present when a label volume was given.
struct SubjectData {
    std::string subject_id;
    std::vector<SliceSample> slices;
};

inline SubjectData prepare_subject(const std::string& subject_id, const nifti::Volume& image,
                                   const nifti::Volume* label = nullptr) {
    auto raw = volume_to_samples(subject_id, image, label);
    SubjectData s{subject_id, {}};
    s.slices.reserve(raw.size());
    for (const auto& r : raw) s.slices.push_back(resize_slice(r));
    normalize_volume(std::span<SliceSample>(s.slices));
    return s;
}

struct DatasetEntry {
    std::string subject_id;
    std::filesystem::path image;
    std::filesystem::path label; // empty when missing
};

/// Subject id of a dataset file name: everything before the first '_'.
inline std::string subject_id_of(const std::filesystem::path& p) {
    std::string name = p.filename().string();
    auto us = name.find('_');
    if (us != std::string::npos) return name.substr(0, us);
    for (const char* ext : {".nii.gz", ".nii"}) {
        const std::string e(ext);
        if (name.size() > e.size() && name.compare(name.size() - e.size(), e.size(), e) == 0)
            return name.substr(0, name.size() - e.size());
    }
    return name;
}

inline bool is_nifti_name(const std::string& n) {
    auto ends = [&](const char* e) {
        const std::string s(e);
        return n.size() > s.size() && n.compare(n.size() - s.size(), s.size(), s) == 0;
    };
    return ends(".nii") || ends(".nii.gz");
}

/// Pair `<id>_img.nii[.gz]` with `<id>_lbl.nii[.gz]` in `dir`, sorted by id.
inline std::vector<DatasetEntry> scan_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
    std::map<std::string, DatasetEntry> by_id;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto name = e.path().filename().string();
        if (!is_nifti_name(name)) continue;
        const auto id = subject_id_of(e.path());
        auto& entry = by_id[id];
        entry.subject_id = id;
        if (name.find("_img.") != std::string::npos)
            entry.image = e.path();
        else if (name.find("_lbl.") != std::string::npos)
            entry.label = e.path();
    }
    std::vector<DatasetEntry> out;
    for (auto& [id, e] : by_id)
        if (!e.image.empty() || !e.label.empty()) out.push_back(e);
    return out;
}

inline SubjectData load_subject(const DatasetEntry& e) {
    if (e.image.empty()) throw IoError("subject " + e.subject_id + " has no image volume");
    const auto image = nifti::read_nifti(e.image);
    if (e.label.empty()) return prepare_subject(e.subject_id, image);
    const auto label = nifti::read_nifti(e.label);
    return prepare_subject(e.subject_id, image, &label);
}

} // namespace claustrum
