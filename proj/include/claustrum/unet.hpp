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

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <zlib.h>

#include "error.hpp"
#include "io.hpp"
#include "ops.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace claustrum {

struct UNetConfig {
    int depth = 4;
    int base_channels = 32;
    double dropout_rate = 0.1;
    double bn_momentum = 0.1;
    double bn_epsilon = 1e-5;
    int in_channels = 1;
    int out_channels = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (depth < 1 || depth > 12) throw ConfigError("unet.depth", "must be in 1..12");
        if (base_channels < 1) throw ConfigError("unet.base_channels", "must be >= 1");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("unet.dropout_rate", "must be in [0,1)");
        if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) throw ConfigError("unet.bn_momentum", "must be in (0,1)");
        if (!(bn_epsilon > 0.0)) throw ConfigError("unet.bn_epsilon", "must be > 0");
        if (in_channels < 1) throw ConfigError("unet.in_channels", "must be >= 1");
        if (out_channels < 1) throw ConfigError("unet.out_channels", "must be >= 1");
    }

    /// Channels at encoder level `level` (0-based); level == depth is the bottleneck.
    std::size_t channels_at(int level) const { return static_cast<std::size_t>(base_channels) << level; }
    std::size_t spatial_multiple() const { return std::size_t{1} << depth; }

    friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

template <class T>
struct ConvLayer {
    Tensor<T> weight;
    Tensor<T> bias;

    ConvLayer clone() const { return {weight.clone(), bias.clone()}; }
};

/// [conv3x3 -> BN -> ReLU -> dropout] x 2
template <class T>
struct ConvBlock {
    ConvLayer<T> conv1;
    BatchNormState<T> bn1;
    ConvLayer<T> conv2;
    BatchNormState<T> bn2;

    ConvBlock clone() const { return {conv1.clone(), bn1.clone(), conv2.clone(), bn2.clone()}; }
};

template <class T>
struct ParamRef {
    std::string name;
    Tensor<T> tensor;
    bool decay; // L2 applies (conv and transposed-conv kernels only)
};

template <class T>
struct StateRef {
    std::string name;
    std::span<T> values;
};

template <class T>
struct UNetModel {
    UNetConfig config;
    std::vector<ConvBlock<T>> encoder; // shallow to deep
    ConvBlock<T> bottleneck;
    std::vector<ConvLayer<T>> up;      // deep to shallow, execution order
    std::vector<ConvBlock<T>> decoder; // deep to shallow, execution order
    ConvLayer<T> head;

    /// Learnable tensors in a fixed order.
    std::vector<ParamRef<T>> parameters() const {
        std::vector<ParamRef<T>> out;
        auto conv = [&](const std::string& n, const ConvLayer<T>& c) {
            out.push_back({n + ".weight", c.weight, true});
            out.push_back({n + ".bias", c.bias, false});
        };
        auto block = [&](const std::string& n, const ConvBlock<T>& b) {
            conv(n + ".conv1", b.conv1);
            out.push_back({n + ".bn1.gamma", b.bn1.gamma, false});
            out.push_back({n + ".bn1.beta", b.bn1.beta, false});
            conv(n + ".conv2", b.conv2);
            out.push_back({n + ".bn2.gamma", b.bn2.gamma, false});
            out.push_back({n + ".bn2.beta", b.bn2.beta, false});
        };
        for (std::size_t i = 0; i < encoder.size(); ++i) block("enc" + std::to_string(i), encoder[i]);
        block("bottleneck", bottleneck);
        for (std::size_t i = 0; i < up.size(); ++i) {
            conv("up" + std::to_string(i), up[i]);
            block("dec" + std::to_string(i), decoder[i]);
        }
        conv("head", head);
        return out;
    }

    /// Every serialized value: parameters plus BN running statistics, in
    /// checkpoint order.
    std::vector<StateRef<T>> state() {
        std::vector<StateRef<T>> out;
        auto conv = [&](const std::string& n, ConvLayer<T>& c) {
            out.push_back({n + ".weight", c.weight.values()});
            out.push_back({n + ".bias", c.bias.values()});
        };
        auto bn = [&](const std::string& n, BatchNormState<T>& s) {
            out.push_back({n + ".gamma", s.gamma.values()});
            out.push_back({n + ".beta", s.beta.values()});
            out.push_back({n + ".running_mean", s.running_mean});
            out.push_back({n + ".running_var", s.running_var});
        };
        auto block = [&](const std::string& n, ConvBlock<T>& b) {
            conv(n + ".conv1", b.conv1);
            bn(n + ".bn1", b.bn1);
            conv(n + ".conv2", b.conv2);
            bn(n + ".bn2", b.bn2);
        };
        for (std::size_t i = 0; i < encoder.size(); ++i) block("enc" + std::to_string(i), encoder[i]);
        block("bottleneck", bottleneck);
        for (std::size_t i = 0; i < up.size(); ++i) {
            conv("up" + std::to_string(i), up[i]);
            block("dec" + std::to_string(i), decoder[i]);
        }
        conv("head", head);
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : parameters()) n += p.tensor.numel();
        return n;
    }

    std::size_t state_count() {
        std::size_t n = 0;
        for (const auto& s : state()) n += s.values.size();
        return n;
    }

    void zero_grad() {
        for (auto& p : parameters()) p.tensor.zero_grad();
    }

    UNetModel clone() const {
        UNetModel m;
        m.config = config;
        for (const auto& b : encoder) m.encoder.push_back(b.clone());
        m.bottleneck = bottleneck.clone();
        for (const auto& u : up) m.up.push_back(u.clone());
        for (const auto& b : decoder) m.decoder.push_back(b.clone());
        m.head = head.clone();
        return m;
    }
};

/// Closed-form learnable parameter count for a configuration.
inline std::size_t unet_parameter_count(const UNetConfig& c) {
    auto block = [](std::size_t cin, std::size_t cout) {
        return (9 * cin * cout + cout) + 2 * cout + (9 * cout * cout + cout) + 2 * cout;
    };
    std::size_t n = 0;
    std::size_t cin = static_cast<std::size_t>(c.in_channels);
    for (int k = 0; k < c.depth; ++k) {
        n += block(cin, c.channels_at(k));
        cin = c.channels_at(k);
    }
    n += block(cin, c.channels_at(c.depth));
    for (int k = c.depth - 1; k >= 0; --k) {
        const std::size_t hi = c.channels_at(k + 1), lo = c.channels_at(k);
        n += 4 * hi * lo + lo;
        n += block(2 * lo, lo);
    }
    n += 9 * c.channels_at(0) * static_cast<std::size_t>(c.out_channels) + static_cast<std::size_t>(c.out_channels);
    return n;
}

namespace detail {

template <class T>
ConvLayer<T> he_conv(Rng& rng, std::size_t cout, std::size_t cin, std::size_t fan_in) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    ConvLayer<T> c{Tensor<T>(Shape{cout, cin, 3, 3}), Tensor<T>(Shape{cout, 1, 1, 1})};
    for (auto& v : c.weight.values()) v = static_cast<T>(normal(rng));
    c.weight.set_requires_grad();
    c.bias.set_requires_grad();
    return c;
}

// Each output pixel of a 2x2 stride-2 transposed conv sums exactly cin terms.
template <class T>
ConvLayer<T> he_upconv(Rng& rng, std::size_t cin, std::size_t cout) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(cin)));
    ConvLayer<T> c{Tensor<T>(Shape{cin, cout, 2, 2}), Tensor<T>(Shape{cout, 1, 1, 1})};
    for (auto& v : c.weight.values()) v = static_cast<T>(normal(rng));
    c.weight.set_requires_grad();
    c.bias.set_requires_grad();
    return c;
}

template <class T>
ConvBlock<T> make_block(Rng& rng, const UNetConfig& cfg, std::size_t cin, std::size_t cout) {
    const T mom = static_cast<T>(cfg.bn_momentum), eps = static_cast<T>(cfg.bn_epsilon);
    ConvBlock<T> b;
    b.conv1 = he_conv<T>(rng, cout, cin, 9 * cin);
    b.bn1 = BatchNormState<T>(cout, mom, eps);
    b.conv2 = he_conv<T>(rng, cout, cout, 9 * cout);
    b.bn2 = BatchNormState<T>(cout, mom, eps);
    return b;
}

} // namespace detail

/// He-normal kernels, zero biases, unit gamma, zero beta; fully determined by config.seed.
template <class T>
UNetModel<T> build_model(const UNetConfig& config) {
    config.validate();
    Rng rng(config.seed);
    UNetModel<T> m;
    m.config = config;
    std::size_t cin = static_cast<std::size_t>(config.in_channels);
    for (int k = 0; k < config.depth; ++k) {
        m.encoder.push_back(detail::make_block<T>(rng, config, cin, config.channels_at(k)));
        cin = config.channels_at(k);
    }
    m.bottleneck = detail::make_block<T>(rng, config, cin, config.channels_at(config.depth));
    for (int k = config.depth - 1; k >= 0; --k) {
        const std::size_t hi = config.channels_at(k + 1), lo = config.channels_at(k);
        m.up.push_back(detail::he_upconv<T>(rng, hi, lo));
        m.decoder.push_back(detail::make_block<T>(rng, config, 2 * lo, lo));
    }
    m.head = detail::he_conv<T>(rng, static_cast<std::size_t>(config.out_channels), config.channels_at(0),
                                9 * config.channels_at(0));
    return m;
}

namespace detail {

template <class T, class Block>
Tensor<T> run_block(Tape<T>& tape, Block& b, const Tensor<T>& x, Mode mode, double rate, Rng& rng) {
    auto h = conv2d(tape, x, b.conv1.weight, b.conv1.bias);
    h = dropout(tape, relu(tape, batchnorm(tape, h, b.bn1, mode)), rate, mode, rng);
    h = conv2d(tape, h, b.conv2.weight, b.conv2.bias);
    return dropout(tape, relu(tape, batchnorm(tape, h, b.bn2, mode)), rate, mode, rng);
}

template <class T, class Model>
Tensor<T> forward_impl(Model& model, Tape<T>& tape, const Tensor<T>& input, Mode mode, Rng& rng) {
    const auto& cfg = model.config;
    const Shape s = input.shape();
    if (s.n == 0) throw ShapeError("forward on an empty batch");
    if (s.c != static_cast<std::size_t>(cfg.in_channels))
        throw ShapeError("model expects " + std::to_string(cfg.in_channels) + " input channels, got " + s.str());
    const std::size_t mult = cfg.spatial_multiple();
    if (s.h == 0 || s.w == 0 || s.h % mult != 0 || s.w % mult != 0)
        throw ShapeError("input height and width must be positive multiples of " + std::to_string(mult) + ", got " +
                         s.str());
    const double rate = cfg.dropout_rate;
    std::vector<Tensor<T>> skips;
    Tensor<T> h = input;
    for (auto& block : model.encoder) {
        h = run_block(tape, block, h, mode, rate, rng);
        skips.push_back(h);
        h = maxpool2(tape, h);
    }
    h = run_block(tape, model.bottleneck, h, mode, rate, rng);
    for (std::size_t i = 0; i < model.up.size(); ++i) {
        h = transposed_conv2(tape, h, model.up[i].weight, model.up[i].bias);
        const auto& skip = skips[skips.size() - 1 - i];
        h = concat_channels(tape, skip, h);
        h = run_block(tape, model.decoder[i], h, mode, rate, rng);
    }
    h = conv2d(tape, h, model.head.weight, model.head.bias);
    return sigmoid(tape, h);
}

} // namespace detail

/// Per-pixel foreground probabilities, same spatial shape as the input.
/// Train mode updates BN running statistics and draws dropout masks from rng.
template <class T>
Tensor<T> forward(UNetModel<T>& model, Tape<T>& tape, const Tensor<T>& input, Mode mode, Rng& rng) {
    return detail::forward_impl<T>(model, tape, input, mode, rng);
}

/// Eval-mode forward with no gradient recording. Safe to call concurrently.
template <class T>
Tensor<T> forward_eval(const UNetModel<T>& model, const Tensor<T>& input) {
    Tape<T> tape(false);
    Rng unused(0);
    return detail::forward_impl<T>(model, tape, input, Mode::eval, unused);
}

template <class T>
Tensor<T> threshold_mask(const Tensor<T>& probs, double threshold) {
    Tensor<T> mask(probs.shape());
    for (std::size_t i = 0; i < probs.numel(); ++i)
        mask.storage()[i] = static_cast<double>(probs.storage()[i]) > threshold ? T(1) : T(0);
    return mask;
}

/// 1 where the eval-mode probability exceeds `threshold`, else 0.
template <class T>
Tensor<T> predict_mask(const UNetModel<T>& model, const Tensor<T>& input, double threshold = 0.5) {
    auto probs = forward_eval(model, input);
    return threshold_mask(probs, threshold);
}

// ---------------------------------------------------------------------------
// Checkpoints
//
//   "UNET" | u32 version | u32 depth | u32 base_channels | u32 in_channels |
//   u32 out_channels | f64 dropout_rate | f64 bn_momentum | f64 bn_epsilon |
//   u64 seed | u64 value_count | f32 values[value_count] | u32 crc32
//
// All little-endian. Values follow UNetModel::state() order. The CRC covers
// every preceding byte.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public IoError {
public:
    using IoError::IoError;
};

namespace detail {

template <class V>
void append_le(std::vector<std::uint8_t>& buf, V v) {
    static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf.insert(buf.end(), p, p + sizeof(V));
}

class CheckpointReader {
public:
    explicit CheckpointReader(std::span<const std::uint8_t> b) : b_(b) {}
    template <class V>
    V get() {
        if (pos_ + sizeof(V) > b_.size())
            throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
        V v;
        std::memcpy(&v, b_.data() + pos_, sizeof(V));
        pos_ += sizeof(V);
        return v;
    }
    std::size_t pos() const { return pos_; }

private:
    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 0;
};

} // namespace detail

template <class T>
std::vector<std::uint8_t> encode_checkpoint(UNetModel<T>& model) {
    std::vector<std::uint8_t> buf{'U', 'N', 'E', 'T'};
    const auto& c = model.config;
    detail::append_le<std::uint32_t>(buf, kCheckpointVersion);
    detail::append_le<std::uint32_t>(buf, static_cast<std::uint32_t>(c.depth));
    detail::append_le<std::uint32_t>(buf, static_cast<std::uint32_t>(c.base_channels));
    detail::append_le<std::uint32_t>(buf, static_cast<std::uint32_t>(c.in_channels));
    detail::append_le<std::uint32_t>(buf, static_cast<std::uint32_t>(c.out_channels));
    detail::append_le<double>(buf, c.dropout_rate);
    detail::append_le<double>(buf, c.bn_momentum);
    detail::append_le<double>(buf, c.bn_epsilon);
    detail::append_le<std::uint64_t>(buf, c.seed);
    detail::append_le<std::uint64_t>(buf, model.state_count());
    for (const auto& s : model.state())
        for (T v : s.values) detail::append_le<float>(buf, static_cast<float>(v));
    const auto crc = static_cast<std::uint32_t>(crc32(0L, buf.data(), static_cast<uInt>(buf.size())));
    detail::append_le<std::uint32_t>(buf, crc);
    return buf;
}

template <class T = float>
UNetModel<T> decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "UNET", 4) != 0)
        throw CheckpointError("not a U-Net checkpoint (bad magic)");
    if (bytes.size() < 8) throw CheckpointError("checkpoint truncated at byte 4");
    detail::CheckpointReader rd(bytes.subspan(4));
    const auto version = rd.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                              std::to_string(kCheckpointVersion) + ")");
    if (bytes.size() < 8 + 4) throw CheckpointError("checkpoint truncated");
    const std::size_t body = bytes.size() - 4;
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + body, 4);
    if (static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(body))) != stored_crc)
        throw CheckpointError("checkpoint is corrupt (checksum mismatch)");

    UNetConfig c;
    c.depth = static_cast<int>(rd.get<std::uint32_t>());
    c.base_channels = static_cast<int>(rd.get<std::uint32_t>());
    c.in_channels = static_cast<int>(rd.get<std::uint32_t>());
    c.out_channels = static_cast<int>(rd.get<std::uint32_t>());
    c.dropout_rate = rd.get<double>();
    c.bn_momentum = rd.get<double>();
    c.bn_epsilon = rd.get<double>();
    c.seed = rd.get<std::uint64_t>();
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("checkpoint holds an invalid config: ") + e.what());
    }
    const auto count = rd.get<std::uint64_t>();
    auto model = build_model<T>(c);
    if (count != model.state_count())
        throw CheckpointError("checkpoint has " + std::to_string(count) + " values, config implies " +
                              std::to_string(model.state_count()));
    if (4 + rd.pos() + count * 4 != body) throw CheckpointError("checkpoint length does not match its value count");
    for (auto& s : model.state())
        for (auto& v : s.values) v = static_cast<T>(rd.get<float>());
    return model;
}

template <class T>
void save_checkpoint(UNetModel<T>& model, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_checkpoint(model));
}

template <class T = float>
UNetModel<T> load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint<T>(io::read_file(path));
}

} // namespace claustrum
