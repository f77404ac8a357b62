#pragma once

// Middlebury .flo: "PIEH" magic (float 202021.25), int32 width, int32 height,
// then row-major interleaved float32 (u, v). Everything little-endian.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "gyroflow/types.hpp"

namespace gyroflow {

inline constexpr float flo_magic = 202021.25f;
//! written for invalid pixels that carry no out-of-range value of their own
inline constexpr float flo_invalid_value = 1e10f;
inline constexpr double flo_invalid_threshold = 1e9;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b.data(), 4);
}

inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

inline bool flo_invalid(float c) { return !(std::abs(c) <= flo_invalid_threshold); }

} // namespace detail

//! Invalid pixels are written with their stored components when those are
//! already beyond the invalid threshold (so a decoded file re-encodes to the
//! same bytes), otherwise with the 1e10 sentinel.
inline void write_flo(std::ostream& os, const FlowField& flow) {
    detail::put_u32(os, std::bit_cast<std::uint32_t>(flo_magic));
    detail::put_u32(os, static_cast<std::uint32_t>(flow.width()));
    detail::put_u32(os, static_cast<std::uint32_t>(flow.height()));
    for (std::size_t i = 0; i < flow.size(); ++i) {
        float u = static_cast<float>(flow.us()[i]);
        float v = static_cast<float>(flow.vs()[i]);
        if (!flow.valid(i) && !(detail::flo_invalid(u) || detail::flo_invalid(v))) u = v = flo_invalid_value;
        detail::put_u32(os, std::bit_cast<std::uint32_t>(u));
        detail::put_u32(os, std::bit_cast<std::uint32_t>(v));
    }
    if (!os) throw IoError("write_flo: stream write failed");
}

//! A pixel is invalid when either component exceeds 1e9 in magnitude; the
//! raw components are kept in the field.
inline FlowField read_flo(std::istream& is) {
    unsigned char hdr[12];
    if (!is.read(reinterpret_cast<char*>(hdr), 12)) throw FormatError("flo: truncated header");
    const float magic = std::bit_cast<float>(detail::get_u32(hdr));
    if (magic != flo_magic) throw FormatError("flo: bad magic (expected PIEH / 202021.25)");
    const auto w = static_cast<std::int32_t>(detail::get_u32(hdr + 4));
    const auto h = static_cast<std::int32_t>(detail::get_u32(hdr + 8));
    if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16))
        throw FormatError("flo: implausible dimensions " + std::to_string(w) + "x" + std::to_string(h));
    const std::size_t n = static_cast<std::size_t>(w) * h;
    std::string body(n * 8, '\0');
    if (!is.read(body.data(), static_cast<std::streamsize>(body.size())))
        throw FormatError("flo: truncated body, expected " + std::to_string(n * 8) + " payload bytes");
    FlowField flow(w, h);
    const auto* p = reinterpret_cast<const unsigned char*>(body.data());
    for (std::size_t i = 0; i < n; ++i) {
        const float u = std::bit_cast<float>(detail::get_u32(p + 8 * i));
        const float v = std::bit_cast<float>(detail::get_u32(p + 8 * i + 4));
        flow.us()[i] = u;
        flow.vs()[i] = v;
        flow.set_valid(i, !(detail::flo_invalid(u) || detail::flo_invalid(v)));
    }
    return flow;
}

inline std::string encode_flo(const FlowField& flow) {
    std::ostringstream os(std::ios::binary);
    write_flo(os, flow);
    return std::move(os).str();
}

inline FlowField decode_flo(const std::string& bytes) {
    std::istringstream is(bytes, std::ios::binary);
    return read_flo(is);
}

inline void write_flo_file(const std::string& path, const FlowField& flow) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_flo(os, flow);
}

inline FlowField read_flo_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");
    try {
        return read_flo(is);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

} // namespace gyroflow
