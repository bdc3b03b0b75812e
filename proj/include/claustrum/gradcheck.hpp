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
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "error.hpp"
#include "loss.hpp"
#include "ops.hpp"
#include "rng.hpp"
#include "tensor.hpp"
#include "unet.hpp"

namespace claustrum {

struct GradcheckOptions {
    std::optional<std::string> only; // run a single named check
    std::uint64_t seed = 1234;
    std::size_t max_entries = 48;    // sampled coordinates per input tensor
    double step = 1e-5;              // h = step * max(1, |x|)
    double primitive_tolerance = 1e-4;
    double network_tolerance = 1e-3;
    // Test hook: route every checked output through an op whose backward
    // rule is deliberately wrong. All checks must then fail.
    bool inject_fault = false;
};

struct GradcheckResult {
    std::string name;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    std::size_t checked = 0;
    bool passed = false;
};

inline const std::vector<std::string>& gradcheck_names() {
    static const std::vector<std::string> names = {"conv2d",  "maxpool2", "transposed_conv2", "batchnorm", "dropout",
                                                   "relu",    "sigmoid",  "concat",           "weighted_bce", "unet"};
    return names;
}

/// |a - n| / max(|a|, |n|, floor). The floor keeps exactly-zero gradients
/// (e.g. a conv bias feeding batch norm) from dividing round-off by round-off.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

namespace detail {

// Forward identity whose backward rule scales the gradient by 1.5.
inline Tensor<double> faulty_identity(Tape<double>& tape, const Tensor<double>& x) {
    Tensor<double> y = x.clone();
    y.set_requires_grad(false);
    if (tape.wants({&x})) {
        tape.record(y, [x = x, y]() mutable {
            const auto& gy = y.storage_ptr()->grad;
            auto gx = x.grad();
            for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += 1.5 * gy[i];
        });
    }
    return y;
}

inline Tensor<double> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor<double> t(s);
    for (auto& v : t.storage()) v = u(rng);
    return t;
}

} // namespace detail

using GradFn = std::function<Tensor<double>(Tape<double>&)>;

/// Compares tape gradients of sum(R * f) against central differences for
/// every tensor in `inputs`. R is a fixed random projection, so
/// tensor-valued f is checked through a scalar.
inline GradcheckResult check_gradient(const std::string& name, std::vector<Tensor<double>> inputs, const GradFn& f,
                                      double tolerance, const GradcheckOptions& opt) {
    GradcheckResult res;
    res.name = name;
    res.tolerance = tolerance;
    Rng rng(derive_seed(opt.seed, {hash_string(name), 1}));

    Tape<double> probe(false);
    const auto y0 = f(probe);
    std::normal_distribution<double> n(0.0, 1.0);
    Tensor<double> proj(y0.shape());
    for (auto& v : proj.storage()) v = n(rng);

    auto objective = [&](Tape<double>& tape) {
        auto y = f(tape);
        if (opt.inject_fault) y = detail::faulty_identity(tape, y);
        return sum(tape, mul(tape, y, proj));
    };

    for (auto& t : inputs) {
        t.set_requires_grad(true);
        t.zero_grad();
    }
    double floor = 1e-6;
    {
        Tape<double> tape;
        auto loss = objective(tape);
        floor *= std::max(1.0, std::abs(loss.item()));
        tape.backward(loss);
    }
    for (auto& t : inputs) {
        if (!t.has_grad()) throw ValueError("gradcheck " + name + ": an input received no gradient");
        std::vector<std::size_t> idx(t.numel());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        if (idx.size() > opt.max_entries) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(opt.max_entries);
        }
        const std::vector<double> analytic(std::as_const(t).grad().begin(), std::as_const(t).grad().end());
        for (auto i : idx) {
            auto& x = t.storage()[i];
            const double orig = x;
            const double h = opt.step * std::max(1.0, std::abs(orig));
            Tape<double> off(false);
            x = orig + h;
            const double lp = objective(off).item();
            x = orig - h;
            const double lm = objective(off).item();
            x = orig;
            const double numeric = (lp - lm) / (2.0 * h);
            res.max_rel_error = std::max(res.max_rel_error, relative_error(analytic[i], numeric, floor));
            ++res.checked;
        }
    }
    res.passed = res.checked > 0 && res.max_rel_error <= tolerance;
    return res;
}

/// Runs the 64-bit finite-difference suite: every primitive plus a depth-2
/// U-Net in train mode (BN batch statistics, fixed dropout mask).
inline std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& opt = {}) {
    if (opt.only) {
        const auto& names = gradcheck_names();
        if (std::find(names.begin(), names.end(), *opt.only) == names.end())
            throw ValueError("unknown gradcheck op: " + *opt.only);
    }
    auto wanted = [&](const char* n) { return !opt.only || *opt.only == n; };
    const double tol = opt.primitive_tolerance;
    std::vector<GradcheckResult> out;
    Rng rng(opt.seed);

    if (wanted("conv2d")) {
        auto x = detail::random_tensor({2, 3, 6, 5}, rng);
        auto w = detail::random_tensor({4, 3, 3, 3}, rng);
        auto b = detail::random_tensor({4, 1, 1, 1}, rng);
        out.push_back(check_gradient("conv2d", {x, w, b}, [=](Tape<double>& t) { return conv2d(t, x, w, b); }, tol, opt));
    }
    if (wanted("maxpool2")) {
        auto x = detail::random_tensor({2, 2, 6, 8}, rng);
        out.push_back(check_gradient("maxpool2", {x}, [=](Tape<double>& t) { return maxpool2(t, x); }, tol, opt));
    }
    if (wanted("transposed_conv2")) {
        auto x = detail::random_tensor({2, 3, 4, 3}, rng);
        auto w = detail::random_tensor({3, 2, 2, 2}, rng);
        auto b = detail::random_tensor({2, 1, 1, 1}, rng);
        out.push_back(check_gradient("transposed_conv2", {x, w, b},
                                     [=](Tape<double>& t) { return transposed_conv2(t, x, w, b); }, tol, opt));
    }
    if (wanted("batchnorm")) {
        auto x = detail::random_tensor({3, 2, 4, 4}, rng, -2.0, 2.0);
        BatchNormState<double> bn(2);
        bn.gamma = detail::random_tensor({2, 1, 1, 1}, rng, 0.5, 1.5);
        bn.beta = detail::random_tensor({2, 1, 1, 1}, rng);
        auto state = std::make_shared<BatchNormState<double>>(bn);
        out.push_back(check_gradient("batchnorm", {x, bn.gamma, bn.beta},
                                     [=](Tape<double>& t) { return batchnorm(t, x, *state, Mode::train); }, tol, opt));
    }
    if (wanted("dropout")) {
        auto x = detail::random_tensor({2, 2, 5, 5}, rng);
        const auto s = opt.seed;
        out.push_back(check_gradient("dropout", {x}, [=](Tape<double>& t) {
            Rng r(s);
            return dropout(t, x, 0.3, Mode::train, r);
        }, tol, opt));
    }
    if (wanted("relu")) {
        auto x = detail::random_tensor({2, 2, 5, 5}, rng);
        out.push_back(check_gradient("relu", {x}, [=](Tape<double>& t) { return relu(t, x); }, tol, opt));
    }
    if (wanted("sigmoid")) {
        auto x = detail::random_tensor({2, 2, 5, 5}, rng, -4.0, 4.0);
        out.push_back(check_gradient("sigmoid", {x}, [=](Tape<double>& t) { return sigmoid(t, x); }, tol, opt));
    }
    if (wanted("concat")) {
        auto a = detail::random_tensor({2, 2, 3, 4}, rng);
        auto b = detail::random_tensor({2, 3, 3, 4}, rng);
        out.push_back(check_gradient("concat", {a, b}, [=](Tape<double>& t) { return concat_channels(t, a, b); }, tol, opt));
    }
    if (wanted("weighted_bce")) {
        auto p = detail::random_tensor({2, 1, 6, 6}, rng, 0.05, 0.95);
        Tensor<double> c(p.shape());
        std::bernoulli_distribution coin(0.3);
        for (auto& v : c.storage()) v = coin(rng) ? 1.0 : 0.0;
        const auto w = class_weights_from_counts(11, 72);
        out.push_back(check_gradient("weighted_bce", {p},
                                     [=](Tape<double>& t) { return weighted_bce_loss(t, p, c, w); }, tol, opt));
    }
    if (wanted("unet")) {
        UNetConfig cfg;
        cfg.depth = 2;
        cfg.base_channels = 4;
        cfg.dropout_rate = 0.1;
        cfg.seed = opt.seed;
        auto model = std::make_shared<UNetModel<double>>(build_model<double>(cfg));
        auto x = detail::random_tensor({2, 1, 16, 16}, rng);
        std::vector<Tensor<double>> params;
        for (const auto& p : model->parameters()) params.push_back(p.tensor);
        const auto s = opt.seed;
        out.push_back(check_gradient("unet", params, [=](Tape<double>& t) {
            Rng r(s);
            return forward(*model, t, x, Mode::train, r);
        }, opt.network_tolerance, opt));
    }
    return out;
}

} // namespace claustrum
