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

// NIfTI-1 single-file (.nii, .nii.gz) and pair (.hdr/.img) volumes.
//
// Header layout (byte offsets into the 348-byte header):
//     0  sizeof_hdr   int32
//    40  dim[8]       int16
//    70  datatype     int16
//    72  bitpix       int16
//    76  pixdim[8]    float32
//   108  vox_offset   float32
//   112  scl_slope    float32
//   116  scl_inter    float32
//   123  xyzt_units   char
//   148  descrip      char[80]
//   252  qform_code   int16
//   254  sform_code   int16
//   256  quatern_b/c/d, qoffset_x/y/z  float32 x6
//   280  srow_x/y/z   float32[4] x3
//   344  magic        char[4]

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <zlib.h>

#include "error.hpp"
#include "grid.hpp"
#include "io.hpp"

namespace claustrum::nifti {

inline constexpr std::size_t kHeaderSize = 348;

class NiftiError : public IoError {
public:
    NiftiError(const std::string& what, std::size_t offset)
        : IoError(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

enum class Datatype : std::int16_t {
    uint8 = 2,
    int16 = 4,
    int32 = 8,
    float32 = 16,
    float64 = 64,
};

inline std::optional<Datatype> datatype_from_code(int code) {
    switch (code) {
    case 2: return Datatype::uint8;
    case 4: return Datatype::int16;
    case 8: return Datatype::int32;
    case 16: return Datatype::float32;
    case 64: return Datatype::float64;
    default: return std::nullopt;
    }
}

inline std::size_t bytes_per_voxel(Datatype dt) {
    switch (dt) {
    case Datatype::uint8: return 1;
    case Datatype::int16: return 2;
    case Datatype::int32: return 4;
    case Datatype::float32: return 4;
    case Datatype::float64: return 8;
    }
    return 0;
}

inline const char* datatype_name(Datatype dt) {
    switch (dt) {
    case Datatype::uint8: return "uint8";
    case Datatype::int16: return "int16";
    case Datatype::int32: return "int32";
    case Datatype::float32: return "float32";
    case Datatype::float64: return "float64";
    }
    return "?";
}

using Affine = std::array<std::array<double, 4>, 3>;

struct NiftiHeader {
    std::array<std::int16_t, 8> dim{};
    Datatype datatype = Datatype::float32;
    std::array<float, 8> pixdim{};
    float vox_offset = 352.0f;
    float scl_slope = 0.0f;
    float scl_inter = 0.0f;
    std::uint8_t xyzt_units = 2; // mm
    std::int16_t qform_code = 0;
    std::int16_t sform_code = 0;
    float quatern_b = 0, quatern_c = 0, quatern_d = 0;
    float qoffset_x = 0, qoffset_y = 0, qoffset_z = 0;
    std::array<std::array<float, 4>, 3> srow{};
    std::string descrip;
    std::array<char, 4> magic{'n', '+', '1', '\0'};
    bool big_endian = false;
    // Header bytes exactly as found on disk (empty for synthesized volumes).
    std::vector<std::uint8_t> raw;

    bool has_scaling() const { return scl_slope != 0.0f && std::isfinite(scl_slope); }
};

/// 3D scalar volume. Voxel (i,j,k) lives at i + nx*(j + ny*k), the NIfTI
/// storage order; k is the axial axis.
struct Volume {
    std::array<std::size_t, 3> dims{};
    std::vector<double> data;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    Affine affine{};
    NiftiHeader header;

    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return i + dims[0] * (j + dims[1] * k); }
    double& at(std::size_t i, std::size_t j, std::size_t k) { return data[index(i, j, k)]; }
    double at(std::size_t i, std::size_t j, std::size_t k) const { return data[index(i, j, k)]; }
    std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }
};

inline Affine diagonal_affine(const std::array<double, 3>& spacing) {
    Affine a{};
    for (int r = 0; r < 3; ++r) a[r][r] = spacing[r];
    return a;
}

/// A fresh volume with a canonical header (float32, sform = diag(spacing)).
inline Volume make_volume(std::array<std::size_t, 3> dims, std::array<double, 3> spacing = {1.0, 1.0, 1.0},
                          Datatype dt = Datatype::float32) {
    for (auto d : dims)
        if (d == 0 || d > 32767) throw ValueError("volume dims must be in 1..32767");
    Volume v;
    v.dims = dims;
    v.data.assign(dims[0] * dims[1] * dims[2], 0.0);
    v.spacing = spacing;
    v.affine = diagonal_affine(spacing);
    auto& h = v.header;
    h.dim = {3, static_cast<std::int16_t>(dims[0]), static_cast<std::int16_t>(dims[1]),
             static_cast<std::int16_t>(dims[2]), 1, 1, 1, 1};
    h.datatype = dt;
    h.pixdim = {1.0f, static_cast<float>(spacing[0]), static_cast<float>(spacing[1]),
                static_cast<float>(spacing[2]), 0, 0, 0, 0};
    h.sform_code = 1;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) h.srow[r][c] = static_cast<float>(v.affine[r][c]);
    return v;
}

namespace detail {

inline bool is_gzip(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B;
}

inline std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> in) {
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw IoError("zlib inflateInit2 failed");
    std::vector<std::uint8_t> out;
    std::array<std::uint8_t, 1 << 16> buf{};
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = buf.data();
        zs.avail_out = static_cast<uInt>(buf.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            auto consumed = zs.total_in;
            inflateEnd(&zs);
            throw NiftiError("corrupt or truncated gzip stream", consumed);
        }
        out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            auto consumed = zs.total_in;
            inflateEnd(&zs);
            throw NiftiError("truncated gzip stream", consumed);
        }
    }
    inflateEnd(&zs);
    return out;
}

// gzip with a zero mtime so identical payloads give identical files.
inline std::vector<std::uint8_t> gzip(std::span<const std::uint8_t> in) {
    z_stream zs{};
    if (deflateInit2(&zs, 6, Z_DEFLATED, 16 + MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw IoError("zlib deflateInit2 failed");
    std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(in.size())) + 32);
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = deflate(&zs, Z_FINISH);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw IoError("zlib deflate failed");
    out.resize(zs.total_out);
    return out;
}

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

    template <class T>
    T get(std::size_t offset) const {
        if (offset + sizeof(T) > bytes_.size())
            throw NiftiError("file truncated: need " + std::to_string(offset + sizeof(T)) + " bytes, have " +
                                 std::to_string(bytes_.size()),
                             offset);
        std::array<std::uint8_t, sizeof(T)> tmp{};
        std::memcpy(tmp.data(), bytes_.data() + offset, sizeof(T));
        if (swap_) std::reverse(tmp.begin(), tmp.end());
        return std::bit_cast<T>(tmp);
    }

private:
    std::span<const std::uint8_t> bytes_;
    bool swap_;
};

template <class T>
void put_le(std::vector<std::uint8_t>& buf, std::size_t offset, T value) {
    static_assert(std::endian::native == std::endian::little, "writer assumes a little-endian host");
    std::memcpy(buf.data() + offset, &value, sizeof(T));
}

inline Affine affine_from_header(const NiftiHeader& h) {
    if (h.sform_code > 0) {
        Affine a{};
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c) a[r][c] = h.srow[r][c];
        return a;
    }
    std::array<double, 3> sp{};
    for (int i = 0; i < 3; ++i) sp[i] = h.pixdim[i + 1] > 0 ? h.pixdim[i + 1] : 1.0;
    if (h.qform_code > 0) {
        double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
        double a = 1.0 - (b * b + c * c + d * d);
        a = a > 0 ? std::sqrt(a) : 0.0;
        double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;
        double R[3][3] = {{a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)},
                          {2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)},
                          {2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b}};
        Affine m{};
        for (int r = 0; r < 3; ++r) {
            m[r][0] = R[r][0] * sp[0];
            m[r][1] = R[r][1] * sp[1];
            m[r][2] = R[r][2] * sp[2] * qfac;
        }
        m[0][3] = h.qoffset_x;
        m[1][3] = h.qoffset_y;
        m[2][3] = h.qoffset_z;
        return m;
    }
    return diagonal_affine(sp);
}

} // namespace detail

inline NiftiHeader parse_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderSize)
        throw NiftiError("file truncated: header needs 348 bytes, have " + std::to_string(bytes.size()), bytes.size());
    NiftiHeader h;
    detail::ByteReader le(bytes, false);
    const auto sizeof_hdr = le.get<std::int32_t>(0);
    bool swap = false;
    if (sizeof_hdr != 348) {
        if (__builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr)) == 348u)
            swap = true;
        else
            throw NiftiError("sizeof_hdr is " + std::to_string(sizeof_hdr) + ", expected 348", 0);
    }
    h.big_endian = swap;
    detail::ByteReader rd(bytes, swap);

    std::memcpy(h.magic.data(), bytes.data() + 344, 4);
    const bool single = std::memcmp(h.magic.data(), "n+1\0", 4) == 0;
    const bool pair = std::memcmp(h.magic.data(), "ni1\0", 4) == 0;
    if (!single && !pair) throw NiftiError("bad magic, expected \"n+1\" or \"ni1\"", 344);

    for (int i = 0; i < 8; ++i) h.dim[i] = rd.get<std::int16_t>(40 + 2 * i);
    if (h.dim[0] < 1 || h.dim[0] > 7) throw NiftiError("dim[0] must be in 1..7, got " + std::to_string(h.dim[0]), 40);
    for (int i = 1; i <= h.dim[0]; ++i)
        if (h.dim[i] < 1) throw NiftiError("dim[" + std::to_string(i) + "] must be >= 1", 40 + 2 * i);
    for (int i = 4; i <= h.dim[0]; ++i)
        if (h.dim[i] != 1) throw NiftiError("only 3D volumes are supported (dim[" + std::to_string(i) + "] > 1)", 40 + 2 * i);

    const auto code = rd.get<std::int16_t>(70);
    auto dt = datatype_from_code(code);
    if (!dt) throw NiftiError("unsupported datatype code " + std::to_string(code), 70);
    h.datatype = *dt;
    for (int i = 0; i < 8; ++i) h.pixdim[i] = rd.get<float>(76 + 4 * i);
    h.vox_offset = rd.get<float>(108);
    h.scl_slope = rd.get<float>(112);
    h.scl_inter = rd.get<float>(116);
    h.xyzt_units = bytes[123];
    const char* descrip = reinterpret_cast<const char*>(bytes.data() + 148);
    h.descrip.assign(descrip, strnlen(descrip, 80));
    h.qform_code = rd.get<std::int16_t>(252);
    h.sform_code = rd.get<std::int16_t>(254);
    h.quatern_b = rd.get<float>(256);
    h.quatern_c = rd.get<float>(260);
    h.quatern_d = rd.get<float>(264);
    h.qoffset_x = rd.get<float>(268);
    h.qoffset_y = rd.get<float>(272);
    h.qoffset_z = rd.get<float>(276);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) h.srow[r][c] = rd.get<float>(280 + 16 * r + 4 * c);
    if (!(h.vox_offset >= 0.0f) || (single && h.vox_offset < 348.0f))
        throw NiftiError("invalid vox_offset " + std::to_string(h.vox_offset), 108);
    h.raw.assign(bytes.begin(), bytes.begin() + kHeaderSize);
    return h;
}

/// Decode the voxel payload that starts at `offset` inside `bytes`.
inline Volume decode_volume(const NiftiHeader& h, std::span<const std::uint8_t> bytes, std::size_t offset) {
    Volume v;
    v.header = h;
    std::size_t count = 1;
    for (int i = 0; i < 3; ++i) {
        v.dims[i] = i < h.dim[0] ? static_cast<std::size_t>(h.dim[i + 1]) : 1;
        count *= v.dims[i];
    }
    const std::size_t bpv = bytes_per_voxel(h.datatype);
    if (count > std::numeric_limits<std::size_t>::max() / bpv) throw NiftiError("dimension product overflows", 40);
    const std::size_t need = offset + count * bpv;
    if (bytes.size() < need)
        throw NiftiError("file truncated: voxel data needs " + std::to_string(need) + " bytes, have " +
                             std::to_string(bytes.size()),
                         bytes.size());
    detail::ByteReader rd(bytes, h.big_endian);
    v.data.resize(count);
    const bool scale = h.has_scaling();
    for (std::size_t n = 0; n < count; ++n) {
        const std::size_t at = offset + n * bpv;
        double raw = 0.0;
        switch (h.datatype) {
        case Datatype::uint8: raw = bytes[at]; break;
        case Datatype::int16: raw = rd.get<std::int16_t>(at); break;
        case Datatype::int32: raw = rd.get<std::int32_t>(at); break;
        case Datatype::float32: raw = rd.get<float>(at); break;
        case Datatype::float64: raw = rd.get<double>(at); break;
        }
        const double value = scale ? raw * static_cast<double>(h.scl_slope) + static_cast<double>(h.scl_inter) : raw;
        if (!std::isfinite(value)) throw NiftiError("non-finite voxel value", at);
        v.data[n] = value;
    }
    for (int i = 0; i < 3; ++i) v.spacing[i] = h.pixdim[i + 1] > 0 ? h.pixdim[i + 1] : 1.0;
    v.affine = detail::affine_from_header(h);
    return v;
}

/// Parse a complete in-memory .nii (optionally gzip-compressed) image.
inline Volume parse_nifti(std::span<const std::uint8_t> file_bytes) {
    std::vector<std::uint8_t> inflated;
    std::span<const std::uint8_t> bytes = file_bytes;
    if (detail::is_gzip(file_bytes)) {
        inflated = detail::gunzip(file_bytes);
        bytes = inflated;
    }
    auto h = parse_header(bytes);
    if (h.magic[1] != '+') throw NiftiError("header/image pair cannot be parsed from a single buffer", 344);
    return decode_volume(h, bytes, static_cast<std::size_t>(h.vox_offset));
}

namespace detail {

inline std::filesystem::path pair_image_path(const std::filesystem::path& hdr) {
    std::string s = hdr.string();
    for (const char* ext : {".hdr.gz", ".hdr"}) {
        const std::string e(ext);
        if (s.size() > e.size() && s.compare(s.size() - e.size(), e.size(), e) == 0) {
            std::string base = s.substr(0, s.size() - e.size());
            for (const char* img : {".img", ".img.gz"})
                if (std::filesystem::exists(base + img)) return base + img;
            return base + ".img";
        }
    }
    throw IoError("header/image pair needs a .hdr path: " + s);
}

} // namespace detail

inline Volume read_nifti(const std::filesystem::path& path) {
    auto file = io::read_file(path);
    std::vector<std::uint8_t> inflated;
    std::span<const std::uint8_t> bytes = file;
    if (detail::is_gzip(file)) {
        inflated = detail::gunzip(file);
        bytes = inflated;
    }
    auto h = parse_header(bytes);
    if (h.magic[1] == '+') return decode_volume(h, bytes, static_cast<std::size_t>(h.vox_offset));

    auto img_file = io::read_file(detail::pair_image_path(path));
    std::vector<std::uint8_t> img_inflated;
    std::span<const std::uint8_t> img = img_file;
    if (detail::is_gzip(img_file)) {
        img_inflated = detail::gunzip(img_file);
        img = img_inflated;
    }
    return decode_volume(h, img, static_cast<std::size_t>(h.vox_offset));
}

/// Serialize as little-endian single-file NIfTI-1. Integer targets require
/// every value to be exactly representable after undoing the header's
/// scl_slope/scl_inter.
inline std::vector<std::uint8_t> encode_nifti(const Volume& volume, std::optional<Datatype> datatype = std::nullopt) {
    if (volume.data.size() != volume.voxel_count()) throw ShapeError("volume data length does not match dims");
    for (auto d : volume.dims)
        if (d == 0 || d > 32767) throw ValueError("volume dims must be in 1..32767 to be written as NIfTI-1");
    const Datatype dt = datatype.value_or(volume.header.datatype);
    const NiftiHeader& src = volume.header;
    const bool scale = src.has_scaling();
    const std::size_t bpv = bytes_per_voxel(dt);
    const std::size_t offset = 352;
    std::vector<std::uint8_t> buf(offset + volume.data.size() * bpv, 0);

    using detail::put_le;
    put_le<std::int32_t>(buf, 0, 348);
    std::array<std::int16_t, 8> dim = {3, static_cast<std::int16_t>(volume.dims[0]),
                                       static_cast<std::int16_t>(volume.dims[1]),
                                       static_cast<std::int16_t>(volume.dims[2]), 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i) put_le<std::int16_t>(buf, 40 + 2 * i, dim[i]);
    put_le<std::int16_t>(buf, 70, static_cast<std::int16_t>(dt));
    put_le<std::int16_t>(buf, 72, static_cast<std::int16_t>(bpv * 8));
    std::array<float, 8> pixdim = src.pixdim;
    if (pixdim[0] != -1.0f) pixdim[0] = 1.0f;
    for (int i = 0; i < 3; ++i) pixdim[i + 1] = static_cast<float>(volume.spacing[i]);
    for (int i = 0; i < 8; ++i) put_le<float>(buf, 76 + 4 * i, pixdim[i]);
    put_le<float>(buf, 108, static_cast<float>(offset));
    put_le<float>(buf, 112, scale ? src.scl_slope : 0.0f);
    put_le<float>(buf, 116, scale ? src.scl_inter : 0.0f);
    buf[123] = src.xyzt_units;
    std::memcpy(buf.data() + 148, src.descrip.data(), std::min<std::size_t>(src.descrip.size(), 79));
    put_le<std::int16_t>(buf, 252, src.qform_code);
    put_le<std::int16_t>(buf, 254, src.sform_code);
    const float q[6] = {src.quatern_b, src.quatern_c, src.quatern_d, src.qoffset_x, src.qoffset_y, src.qoffset_z};
    for (int i = 0; i < 6; ++i) put_le<float>(buf, 256 + 4 * i, q[i]);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) put_le<float>(buf, 280 + 16 * r + 4 * c, src.srow[r][c]);
    std::memcpy(buf.data() + 344, "n+1\0", 4);

    for (std::size_t n = 0; n < volume.data.size(); ++n) {
        double raw = volume.data[n];
        if (scale) raw = (raw - static_cast<double>(src.scl_inter)) / static_cast<double>(src.scl_slope);
        const std::size_t at = offset + n * bpv;
        auto check_int = [&](double lo, double hi) {
            if (!(raw >= lo && raw <= hi) || raw != std::round(raw))
                throw ValueError("voxel " + std::to_string(n) + " value " + std::to_string(volume.data[n]) +
                                 " is not representable as " + datatype_name(dt));
        };
        switch (dt) {
        case Datatype::uint8:
            check_int(0, 255);
            buf[at] = static_cast<std::uint8_t>(raw);
            break;
        case Datatype::int16:
            check_int(-32768, 32767);
            put_le<std::int16_t>(buf, at, static_cast<std::int16_t>(raw));
            break;
        case Datatype::int32:
            check_int(-2147483648.0, 2147483647.0);
            put_le<std::int32_t>(buf, at, static_cast<std::int32_t>(raw));
            break;
        case Datatype::float32: put_le<float>(buf, at, static_cast<float>(raw)); break;
        case Datatype::float64: put_le<double>(buf, at, raw); break;
        }
    }
    return buf;
}

inline bool has_gz_extension(const std::filesystem::path& p) {
    const auto s = p.string();
    return s.size() >= 3 && s.compare(s.size() - 3, 3, ".gz") == 0;
}

/// Write `volume` to `path`; a `.gz` suffix selects gzip compression.
inline void write_nifti(const Volume& volume, const std::filesystem::path& path,
                        std::optional<Datatype> datatype = std::nullopt) {
    auto bytes = encode_nifti(volume, datatype);
    if (has_gz_extension(path)) bytes = detail::gzip(bytes);
    io::write_file_atomic(path, bytes);
}

/// Slice k of the returned list has pixel (i,j) = volume(i,j,k).
inline std::vector<Grid<double>> axial_slices(const Volume& volume) {
    if (volume.data.size() != volume.voxel_count()) throw ShapeError("volume data length does not match dims");
    const auto [nx, ny, nz] = volume.dims;
    std::vector<Grid<double>> out;
    out.reserve(nz);
    for (std::size_t k = 0; k < nz; ++k) {
        Grid<double> g(nx, ny);
        for (std::size_t j = 0; j < ny; ++j)
            for (std::size_t i = 0; i < nx; ++i) g(i, j) = volume.at(i, j, k);
        out.push_back(std::move(g));
    }
    return out;
}

template <class T>
Volume assemble_volume(std::span<const Grid<T>> slices, const Volume& templ) {
    const auto [nx, ny, nz] = templ.dims;
    if (slices.size() != nz)
        throw ShapeError("expected " + std::to_string(nz) + " axial slices, got " + std::to_string(slices.size()));
    Volume v = templ;
    v.data.assign(templ.voxel_count(), 0.0);
    for (std::size_t k = 0; k < nz; ++k) {
        const auto& g = slices[k];
        if (g.rows() != nx || g.cols() != ny)
            throw ShapeError("slice " + std::to_string(k) + " has shape " + std::to_string(g.rows()) + "x" +
                             std::to_string(g.cols()) + ", template expects " + std::to_string(nx) + "x" +
                             std::to_string(ny));
        for (std::size_t j = 0; j < ny; ++j)
            for (std::size_t i = 0; i < nx; ++i) v.at(i, j, k) = static_cast<double>(g(i, j));
    }
    return v;
}

template <class T>
Volume assemble_volume(const std::vector<Grid<T>>& slices, const Volume& templ) {
    return assemble_volume(std::span<const Grid<T>>(slices), templ);
}

} // namespace claustrum::nifti
