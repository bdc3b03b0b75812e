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
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace claustrum {

enum class Mode { train, eval };

struct Shape {
    std::size_t n = 0, c = 0, h = 0, w = 0;

    std::size_t numel() const noexcept { return n * c * h * w; }
    std::size_t plane() const noexcept { return h * w; }
    friend bool operator==(const Shape&, const Shape&) = default;
    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }
};

template <class T>
struct TensorStorage {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad; // empty until the first backward touches it
    bool requires_grad = false;
    bool produced = false; // output of a recorded op rather than a leaf

    std::vector<T>& ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
        return grad;
    }
};

/// Rank-4 (N, C, H, W) tensor handle. Copies share storage; use clone() for
/// an independent copy.
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0)) : s_(std::make_shared<TensorStorage<T>>()) {
        s_->shape = shape;
        s_->value.assign(shape.numel(), fill);
    }
    Tensor(Shape shape, std::vector<T> values) : s_(std::make_shared<TensorStorage<T>>()) {
        if (values.size() != shape.numel())
            throw ShapeError("tensor value count " + std::to_string(values.size()) + " does not match shape " +
                             shape.str());
        s_->shape = shape;
        s_->value = std::move(values);
    }

    bool defined() const noexcept { return static_cast<bool>(s_); }
    const Shape& shape() const { return s_->shape; }
    std::size_t numel() const { return s_->value.size(); }

    std::span<T> values() { return s_->value; }
    std::span<const T> values() const { return s_->value; }
    std::vector<T>& storage() { return s_->value; }
    const std::vector<T>& storage() const { return s_->value; }

    T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) { return s_->value[offset(n, c, h, w)]; }
    T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const { return s_->value[offset(n, c, h, w)]; }
    T item() const {
        if (numel() != 1) throw ShapeError("item() needs a single-element tensor, shape is " + shape().str());
        return s_->value[0];
    }

    bool requires_grad() const { return s_->requires_grad; }
    Tensor& set_requires_grad(bool on = true) {
        s_->requires_grad = on;
        return *this;
    }
    bool has_grad() const { return s_->grad.size() == s_->value.size() && !s_->value.empty(); }
    std::span<const T> grad() const { return s_->grad; }
    std::span<T> grad() { return s_->ensure_grad(); }
    void zero_grad() { std::fill(s_->grad.begin(), s_->grad.end(), T(0)); }

    Tensor clone() const {
        Tensor t(shape(), s_->value);
        t.s_->requires_grad = s_->requires_grad;
        return t;
    }

    bool same_storage(const Tensor& o) const noexcept { return s_ == o.s_; }
    const std::shared_ptr<TensorStorage<T>>& storage_ptr() const { return s_; }

private:
    std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        const auto& s = s_->shape;
        return ((n * s.c + c) * s.h + h) * s.w + w;
    }

    std::shared_ptr<TensorStorage<T>> s_;
};

/// Records executed operations and replays their backward rules in reverse.
/// Ops append themselves in execution order, so the record is topologically
/// sorted by construction.
template <class T>
class Tape {
public:
    explicit Tape(bool recording = true) : recording_(recording) {}

    bool recording() const noexcept { return recording_; }
    std::size_t size() const noexcept { return entries_.size(); }

    // Whether an op over `inputs` must be recorded.
    bool wants(std::initializer_list<const Tensor<T>*> inputs) const {
        if (!recording_) return false;
        for (auto* t : inputs)
            if (t && t->defined() && t->requires_grad()) return true;
        return false;
    }

    void record(Tensor<T>& output, std::function<void()> backward_rule) {
        output.storage_ptr()->requires_grad = true;
        output.storage_ptr()->produced = true;
        entries_.push_back({output.storage_ptr(), std::move(backward_rule)});
    }

    /// Accumulate d(loss)/d(t) into every tracked leaf. Intermediate
    /// gradients are reset first so repeated calls add exactly one more
    /// gradient to each leaf.
    void backward(const Tensor<T>& loss) {
        if (!loss.defined() || loss.numel() != 1)
            throw ShapeError("backward needs a scalar loss, got shape " +
                             (loss.defined() ? loss.shape().str() : std::string("<undefined>")));
        if (!loss.requires_grad()) throw ValueError("loss does not depend on any tracked tensor");
        for (auto& e : entries_) {
            auto& g = e.output->grad;
            if (g.size() == e.output->value.size())
                std::fill(g.begin(), g.end(), T(0));
            else
                g.assign(e.output->value.size(), T(0));
        }
        auto& lg = loss.storage_ptr()->ensure_grad();
        if (loss.storage_ptr()->produced)
            lg[0] = T(1);
        else
            lg[0] += T(1);
        for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->backward();
    }

    void clear() { entries_.clear(); }

private:
    struct Entry {
        std::shared_ptr<TensorStorage<T>> output;
        std::function<void()> backward;
    };
    bool recording_;
    std::vector<Entry> entries_;
};

} // namespace claustrum
