#pragma once

// Dense-flow primitives: bilinear warping, Gaussian pyramids, census
// descriptors, forward-backward occlusion and endpoint error.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gyroflow/types.hpp"

namespace gyroflow {

namespace detail {

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

//! bilinear sample of a row-major scalar grid; position must lie in [0, w-1] x [0, h-1]
inline double bilinear(const double* data, int w, int h, double sx, double sy, int stride = 1, int offset = 0) {
    const int x0 = static_cast<int>(std::floor(sx));
    const int y0 = static_cast<int>(std::floor(sy));
    const double ax = sx - x0, ay = sy - y0;
    const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    auto at = [&](int x, int y) { return data[(static_cast<std::size_t>(y) * w + x) * stride + offset]; };
    const double top = at(x0, y0) + ax * (at(x1, y0) - at(x0, y0));
    const double bot = at(x0, y1) + ax * (at(x1, y1) - at(x0, y1));
    return top + ay * (bot - top);
}

inline void require_same_size(int w0, int h0, int w1, int h1, const char* what) {
    if (w0 != w1 || h0 != h1)
        throw InvalidArgument(std::string(what) + ": dimension mismatch (" + std::to_string(w0) + "x" +
                              std::to_string(h0) + " vs " + std::to_string(w1) + "x" + std::to_string(h1) + ")");
}

} // namespace detail

struct WarpResult {
    ImageBuffer image;
    OcclusionMask oob;  // true where the sample fell outside the source image
};

//! output(p) = image(p + field(p)), bilinear, border-clamped; out-of-range
//! and invalid-field samples are flagged in `oob`
inline WarpResult warp_bilinear(const ImageBuffer& image, const FlowField& field) {
    detail::require_same_size(image.width(), image.height(), field.width(), field.height(), "warp_bilinear");
    const int w = image.width(), h = image.height(), c = image.channels();
    WarpResult r{ImageBuffer(w, h, c), OcclusionMask(w, h)};
    const double* src = image.data().data();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double sx = x + field.u(x, y), sy = y + field.v(x, y);
            bool out = !field.valid(x, y) || !(sx >= 0.0 && sx <= w - 1 && sy >= 0.0 && sy <= h - 1);
            if (!field.valid(x, y) || !std::isfinite(sx) || !std::isfinite(sy)) {
                sx = x;
                sy = y;
            }
            sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
            sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
            r.oob.set(x, y, out);
            for (int k = 0; k < c; ++k) r.image(x, y, k) = detail::bilinear(src, w, h, sx, sy, c, k);
        }
    }
    return r;
}

//! bilinear sample of a flow field at a real position, border-clamped
inline std::pair<double, double> sample_flow(const FlowField& f, double sx, double sy) {
    sx = std::clamp(sx, 0.0, static_cast<double>(f.width() - 1));
    sy = std::clamp(sy, 0.0, static_cast<double>(f.height() - 1));
    return {detail::bilinear(f.us().data(), f.width(), f.height(), sx, sy),
            detail::bilinear(f.vs().data(), f.width(), f.height(), sx, sy)};
}

struct PyramidLevel {
    int index = 0;
    int scale = 1;  // 2^index
    ImageBuffer image;
};

//! 5-tap binomial kernel, 1 4 6 4 1 / 16
inline constexpr double pyramid_kernel[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

//! separable 5-tap binomial blur, clamp-to-edge, same size
inline ImageBuffer binomial_blur(const ImageBuffer& img) {
    const int w = img.width(), h = img.height(), c = img.channels();
    ImageBuffer tmp(w, h, c), out(w, h, c);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int k = 0; k < c; ++k) {
                double s = 0.0;
                for (int t = -2; t <= 2; ++t) s += pyramid_kernel[t + 2] * img.clamped(x + t, y, k);
                tmp(x, y, k) = std::clamp(s, 0.0, 1.0);
            }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int k = 0; k < c; ++k) {
                double s = 0.0;
                for (int t = -2; t <= 2; ++t) s += pyramid_kernel[t + 2] * tmp.clamped(x, y + t, k);
                out(x, y, k) = std::clamp(s, 0.0, 1.0);
            }
    return out;
}

//! edge-replicate right/bottom to even size, blur, keep even samples
inline ImageBuffer pyr_down(const ImageBuffer& img) {
    const int w = img.width() + (img.width() & 1);
    const int h = img.height() + (img.height() & 1);
    const int c = img.channels();
    // blur rows then columns on the padded image; clamp-to-edge of the padded grid
    // equals clamp-to-edge of the source since padding replicates the edge
    std::vector<double> tmp(static_cast<std::size_t>(w) * h * c);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int k = 0; k < c; ++k) {
                double s = 0.0;
                for (int t = -2; t <= 2; ++t) s += pyramid_kernel[t + 2] * img.clamped(x + t, y, k);
                tmp[(static_cast<std::size_t>(y) * w + x) * c + k] = s;
            }
    ImageBuffer out(w / 2, h / 2, c);
    for (int y = 0; y < h / 2; ++y)
        for (int x = 0; x < w / 2; ++x)
            for (int k = 0; k < c; ++k) {
                double s = 0.0;
                for (int t = -2; t <= 2; ++t) {
                    const int yy = detail::clamp_index(2 * y + t, h);
                    s += pyramid_kernel[t + 2] * tmp[(static_cast<std::size_t>(yy) * w + 2 * x) * c + k];
                }
                out(x, y, k) = std::clamp(s, 0.0, 1.0);
            }
    return out;
}

//! size of pyramid level `level` for a full-resolution `n`
inline int level_size(int n, int level) {
    for (int i = 0; i < level; ++i) n = (n + 1) / 2;
    return n;
}

//! level 0 is the input; each level halves both dimensions (rounding up)
inline std::vector<PyramidLevel> build_pyramid(const ImageBuffer& image, int levels) {
    if (levels < 1) throw InvalidArgument("build_pyramid: levels must be >= 1");
    const int top_w = level_size(image.width(), levels - 1), top_h = level_size(image.height(), levels - 1);
    if (top_w < 8 || top_h < 8)
        throw InvalidArgument("build_pyramid: " + std::to_string(levels) + " levels leave a " +
                              std::to_string(top_w) + "x" + std::to_string(top_h) + " top level (< 8x8)");
    std::vector<PyramidLevel> pyr;
    pyr.reserve(static_cast<std::size_t>(levels));
    pyr.push_back({0, 1, image});
    for (int i = 1; i < levels; ++i) pyr.push_back({i, 1 << i, pyr_down(pyr.back().image)});
    return pyr;
}

//! bilinear upsampling by 2 onto a (width, height) grid, vectors doubled.
//! Fine pixel x sits at coarse coordinate x / 2, matching pyr_down.
inline FlowField upsample_flow(const FlowField& coarse, int width, int height) {
    FlowField fine(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const auto [u, v] = sample_flow(coarse, 0.5 * x, 0.5 * y);
            fine.set(x, y, 2.0 * u, 2.0 * v);
        }
    return fine;
}

//! Per-pixel census bit patterns; bit k is set when the k-th window
//! neighbor (row-major over the (2r+1)^2 window, center skipped) is
//! strictly brighter than the center.
class CensusImage {
public:
    CensusImage(int width, int height, int radius)
        : width_(width), height_(height), radius_(radius),
          bits_(static_cast<std::size_t>(width) * height, 0) {}

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int radius() const noexcept { return radius_; }
    int bit_count() const noexcept { return (2 * radius_ + 1) * (2 * radius_ + 1) - 1; }

    std::uint64_t operator()(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x]; }
    std::uint64_t& operator()(int x, int y) { return bits_[static_cast<std::size_t>(y) * width_ + x]; }

    //! bit index of window offset (dx, dy), or -1 for the center
    int bit_index(int dx, int dy) const {
        if (dx == 0 && dy == 0) return -1;
        const int side = 2 * radius_ + 1;
        const int k = (dy + radius_) * side + (dx + radius_);
        return k < side * radius_ + radius_ ? k : k - 1;
    }

private:
    int width_, height_, radius_;
    std::vector<std::uint64_t> bits_;
};

//! clamp-to-edge borders; 3-channel input is converted to luma
inline CensusImage census_descriptor(const ImageBuffer& image, int radius) {
    if (radius < 1 || radius > 3) throw InvalidArgument("census radius must be in [1, 3]");
    const ImageBuffer g = to_gray(image);
    CensusImage out(g.width(), g.height(), radius);
    for (int y = 0; y < g.height(); ++y)
        for (int x = 0; x < g.width(); ++x) {
            const double c = g(x, y);
            std::uint64_t bits = 0;
            int k = 0;
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    if (g.clamped(x + dx, y + dy) > c) bits |= std::uint64_t{1} << k;
                    ++k;
                }
            out(x, y) = bits;
        }
    return out;
}

inline int hamming(std::uint64_t a, std::uint64_t b) noexcept { return std::popcount(a ^ b); }

inline constexpr double default_occlusion_alpha1 = 0.01;
inline constexpr double default_occlusion_alpha2 = 0.5;

//! occluded iff |f + b(p+f)|^2 > alpha1 (|f|^2 + |b(p+f)|^2) + alpha2,
//! with b sampled bilinearly (border-clamped)
inline OcclusionMask forward_backward_occlusion(const FlowField& fwd, const FlowField& bwd,
                                                double alpha1 = default_occlusion_alpha1,
                                                double alpha2 = default_occlusion_alpha2) {
    detail::require_same_size(fwd.width(), fwd.height(), bwd.width(), bwd.height(), "forward_backward_occlusion");
    OcclusionMask occ(fwd.width(), fwd.height());
    for (int y = 0; y < fwd.height(); ++y)
        for (int x = 0; x < fwd.width(); ++x) {
            const double fu = fwd.u(x, y), fv = fwd.v(x, y);
            const auto [bu, bv] = sample_flow(bwd, x + fu, y + fv);
            const double su = fu + bu, sv = fv + bv;
            const double lhs = su * su + sv * sv;
            const double rhs = alpha1 * (fu * fu + fv * fv + bu * bu + bv * bv) + alpha2;
            occ.set(x, y, lhs > rhs);
        }
    return occ;
}

struct EpeResult {
    double mean = 0.0;
    std::size_t count = 0;
    int width = 0, height = 0;
    std::vector<double> map;  // per-pixel EPE, row-major, computed for every pixel
};

//! mean Euclidean distance over pixels with valid(p) true
inline EpeResult endpoint_error(const FlowField& flow, const FlowField& gt, const ValidityMask& valid) {
    detail::require_same_size(flow.width(), flow.height(), gt.width(), gt.height(), "endpoint_error");
    detail::require_same_size(flow.width(), flow.height(), valid.width(), valid.height(), "endpoint_error mask");
    EpeResult r;
    r.width = flow.width();
    r.height = flow.height();
    r.map.resize(flow.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < flow.size(); ++i) {
        const double du = flow.us()[i] - gt.us()[i], dv = flow.vs()[i] - gt.vs()[i];
        r.map[i] = std::sqrt(du * du + dv * dv);
        if (valid[i]) {
            sum += r.map[i];
            ++r.count;
        }
    }
    if (r.count == 0) throw InvalidArgument("endpoint_error: empty validity mask");
    r.mean = sum / static_cast<double>(r.count);
    return r;
}

//! validity taken from the ground truth's own flags
inline EpeResult endpoint_error(const FlowField& flow, const FlowField& gt) {
    ValidityMask m(gt.width(), gt.height());
    for (std::size_t i = 0; i < gt.size(); ++i) m.set(i, gt.valid(i));
    return endpoint_error(flow, gt, m);
}

//! box filter of radius r with clamp-to-edge, separable
inline std::vector<double> box_filter(const std::vector<double>& in, int w, int h, int r) {
    if (r <= 0) return in;
    std::vector<double> tmp(in.size()), out(in.size());
    const double norm = 1.0 / (2 * r + 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int t = -r; t <= r; ++t) s += in[static_cast<std::size_t>(y) * w + detail::clamp_index(x + t, w)];
            tmp[static_cast<std::size_t>(y) * w + x] = s * norm;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int t = -r; t <= r; ++t) s += tmp[static_cast<std::size_t>(detail::clamp_index(y + t, h)) * w + x];
            out[static_cast<std::size_t>(y) * w + x] = s * norm;
        }
    return out;
}

//! separable (2r+1)^2 maximum, edge-replicated
inline std::vector<double> max_filter(const std::vector<double>& in, int w, int h, int r) {
    if (r <= 0) return in;
    std::vector<double> tmp(in.size()), out(in.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double m = in[static_cast<std::size_t>(y) * w + x];
            for (int t = -r; t <= r; ++t)
                m = std::max(m, in[static_cast<std::size_t>(y) * w + detail::clamp_index(x + t, w)]);
            tmp[static_cast<std::size_t>(y) * w + x] = m;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double m = tmp[static_cast<std::size_t>(y) * w + x];
            for (int t = -r; t <= r; ++t)
                m = std::max(m, tmp[static_cast<std::size_t>(detail::clamp_index(y + t, h)) * w + x]);
            out[static_cast<std::size_t>(y) * w + x] = m;
        }
    return out;
}

} // namespace gyroflow
