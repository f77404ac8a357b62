#pragma once

// 8-bit frames: binary PGM/PPM (P5/P6) and PNG via libpng's simplified API.
// Samples map to [0, 1] as value / 255 on load.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <png.h>

#include "gyroflow/types.hpp"

namespace gyroflow {

namespace detail {

inline std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline std::vector<std::uint8_t> image_bytes(const ImageBuffer& img) {
    std::vector<std::uint8_t> out(img.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = to_byte(img.data()[i]);
    return out;
}

inline ImageBuffer image_from_bytes(int w, int h, int channels, const std::uint8_t* p) {
    std::vector<double> s(static_cast<std::size_t>(w) * h * channels);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = p[i] / 255.0;
    return {w, h, channels, std::move(s)};
}

//! next header token of a PNM file, skipping whitespace and comments
inline std::string pnm_token(std::istream& is) {
    std::string tok;
    int c;
    while ((c = is.get()) != EOF) {
        if (c == '#') {
            while ((c = is.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

inline ImageBuffer read_pnm(std::istream& is, const std::string& name) {
    const std::string magic = pnm_token(is);
    const int channels = magic == "P5" ? 1 : magic == "P6" ? 3 : 0;
    if (channels == 0) throw FormatError(name + ": unsupported PNM type '" + magic + "' (expected P5 or P6)");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(pnm_token(is));
        h = std::stoi(pnm_token(is));
        maxval = std::stoi(pnm_token(is));
    } catch (const std::exception&) {
        throw FormatError(name + ": malformed PNM header");
    }
    if (w <= 0 || h <= 0) throw FormatError(name + ": bad PNM dimensions");
    if (maxval != 255) throw FormatError(name + ": only 8-bit PNM (maxval 255) is supported");
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * channels);
    if (!is.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size())))
        throw FormatError(name + ": truncated PNM raster");
    return image_from_bytes(w, h, channels, px.data());
}

inline ImageBuffer read_png(const std::string& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str()))
        throw FormatError(path + ": " + img.message);
    const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
    img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, px.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw FormatError(path + ": " + msg);
    }
    return image_from_bytes(static_cast<int>(img.width), static_cast<int>(img.height), color ? 3 : 1, px.data());
}

inline bool has_suffix(const std::string& s, const std::string& suf) {
    if (s.size() < suf.size()) return false;
    for (std::size_t i = 0; i < suf.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(s[s.size() - suf.size() + i])) != suf[i]) return false;
    return true;
}

} // namespace detail

//! PNG or binary PNM, detected from the file signature
inline ImageBuffer read_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open image '" + path + "'");
    char sig[8] = {};
    is.read(sig, 8);
    if (is.gcount() == 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(sig), 0, 8) == 0) {
        is.close();
        return detail::read_png(path);
    }
    is.clear();
    is.seekg(0);
    return detail::read_pnm(is, path);
}

inline void write_pnm(const std::string& path, const ImageBuffer& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << (img.channels() == 1 ? "P5" : "P6") << '\n' << img.width() << ' ' << img.height() << "\n255\n";
    const auto px = detail::image_bytes(img);
    os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (!os) throw IoError("write failed: '" + path + "'");
}

inline void write_png(const std::string& path, const ImageBuffer& img) {
    png_image pi{};
    pi.version = PNG_IMAGE_VERSION;
    pi.width = static_cast<png_uint_32>(img.width());
    pi.height = static_cast<png_uint_32>(img.height());
    pi.format = img.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    const auto px = detail::image_bytes(img);
    if (!png_image_write_to_file(&pi, path.c_str(), 0, px.data(), 0, nullptr))
        throw IoError(path + ": " + pi.message);
}

//! format from the extension: .png, otherwise .pgm/.ppm
inline void write_image(const std::string& path, const ImageBuffer& img) {
    if (detail::has_suffix(path, ".png"))
        write_png(path, img);
    else
        write_pnm(path, img);
}

template <typename Tag>
ImageBuffer mask_image(const Mask<Tag>& m) {
    ImageBuffer img(m.width(), m.height());
    for (std::size_t i = 0; i < m.size(); ++i) img.data()[i] = m[i] ? 1.0 : 0.0;
    return img;
}

//! nonzero samples are set
inline ValidityMask read_validity_mask(const std::string& path) {
    const ImageBuffer img = to_gray(read_image(path));
    ValidityMask m(img.width(), img.height());
    for (std::size_t i = 0; i < m.size(); ++i) m.set(i, img.data()[i] > 0.5);
    return m;
}

} // namespace gyroflow
