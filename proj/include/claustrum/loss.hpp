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

#include "metrics.hpp"
#include "tensor.hpp"

namespace claustrum {

/// Class-weighted BCE of predicted probabilities against a binary target of
/// the same shape, recorded on the tape as a scalar.
template <class T>
Tensor<T> weighted_bce_loss(Tape<T>& tape, const Tensor<T>& pred, const Tensor<T>& target, const ClassWeights& weights) {
    if (!(pred.shape() == target.shape()))
        throw ShapeError("loss shape mismatch: " + pred.shape().str() + " vs " + target.shape().str());
    auto r = weighted_bce<T>(pred.values(), target.values(), weights);
    Tensor<T> y(Shape{1, 1, 1, 1}, static_cast<T>(r.loss));
    if (tape.wants({&pred})) {
        tape.record(y, [pred = pred, y, grad = std::move(r.grad)]() mutable {
            const T g = y.storage_ptr()->grad[0];
            auto gp = pred.grad();
            for (std::size_t i = 0; i < grad.size(); ++i) gp[i] += g * grad[i];
        });
    }
    return y;
}

} // namespace claustrum
