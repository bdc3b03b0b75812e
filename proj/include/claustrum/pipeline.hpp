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

#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "nifti_io.hpp"
#include "preprocess.hpp"
#include "train.hpp"
#include "unet.hpp"

namespace claustrum {

/// Segments every axial slice of `image` and returns a uint8 {0,1} mask
/// volume with the input's dims and geometry:
/// resize -> normalize -> crop -> forward -> threshold -> restore -> resize back.
inline nifti::Volume predict_volume(const UNetModel<float>& model, const RoiWindow& window, const nifti::Volume& image,
                                    double threshold = 0.5) {
    window.validate();
    const auto subject = prepare_subject("input", image);
    const auto full = predict_slices(model, subject.slices, window, threshold);
    const auto [nx, ny, nz] = image.dims;
    std::vector<Mask> slices;
    slices.reserve(full.size());
    for (const auto& m : full) slices.push_back(m.rows() == nx && m.cols() == ny ? m : resize_nearest(m, nx, ny));
    auto out = nifti::assemble_volume(slices, image);
    out.header.datatype = nifti::Datatype::uint8;
    out.header.scl_slope = 0.0f;
    out.header.scl_inter = 0.0f;
    return out;
}

/// Binarized (> 0) axial slices of a label or prediction volume.
inline std::vector<Mask> volume_masks(const nifti::Volume& v) {
    std::vector<Mask> out;
    for (const auto& g : nifti::axial_slices(v)) {
        Mask m(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) m.storage()[i] = g.storage()[i] > 0.0 ? 1 : 0;
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace claustrum
