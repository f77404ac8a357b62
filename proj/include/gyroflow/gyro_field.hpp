#pragma once

// Gyro field: rolling-shutter homography array from a gyro log, SLERP
// smoothing across row patches, and per-pixel rasterization into a flow.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "gyroflow/rotation.hpp"
#include "gyroflow/types.hpp"

namespace gyroflow {

//! pinhole intrinsics in pixels
struct CameraIntrinsics {
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    double skew = 0.0;

    //! synthetic placeholder used when no calibration is supplied
    static CameraIntrinsics synthetic_default(int width, int height) {
        return {0.8 * width, 0.8 * width, 0.5 * width, 0.5 * height, 0.0};
    }

    Mat3 matrix() const {
        Mat3 k;
        k << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
        return k;
    }

    Mat3 inverse() const {
        Mat3 k;
        k << 1.0 / fx, -skew / (fx * fy), (skew * cy - cx * fy) / (fx * fy), 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
        return k;
    }

    void validate() const {
        if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy))
            throw InvalidArgument("intrinsics: focal lengths must be positive and finite");
        if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(skew))
            throw InvalidArgument("intrinsics: non-finite principal point or skew");
    }

    void validate(int width, int height) const {
        validate();
        if (cx < 0.0 || cx > width || cy < 0.0 || cy > height)
            throw InvalidArgument("intrinsics: principal point outside the " + std::to_string(width) + "x" +
                                  std::to_string(height) + " frame");
    }
};

//! exposure timing of a frame pair, nanoseconds on the gyro clock
struct FrameTiming {
    static constexpr std::int64_t default_readout_ns = 25'000'000;

    std::int64_t start_a = 0;  // first scanline of frame a
    std::int64_t start_b = 0;  // first scanline of frame b
    std::int64_t readout_ns = default_readout_ns;

    void validate() const {
        if (readout_ns < 0) throw InvalidArgument("timing: readout duration must be non-negative");
        if (start_b <= start_a) throw InvalidArgument("timing: frame b must start after frame a");
    }

    //! exposure time of `row` for a frame whose first scanline starts at `start`
    std::int64_t row_time(std::int64_t start, double row, int height) const {
        if (height <= 1) return start;
        return start + std::llround(static_cast<double>(readout_ns) * row / (height - 1));
    }
};

//! scale so the bottom-right entry is 1
inline Mat3 normalize_homography(const Mat3& h) {
    if (!(std::abs(h(2, 2)) > 1e-300)) throw NumericError("homography has zero bottom-right entry");
    return h / h(2, 2);
}

//! rotation-only homography K R K^-1
inline Mat3 global_homography(const CameraIntrinsics& k, const RotationMatrix& r) {
    k.validate();
    // written as I + K (R - I) K^-1 so the identity rotation maps to exactly I
    const Mat3 d = k.matrix() * (r.matrix() - Mat3::Identity()) * k.inverse();
    return normalize_homography(Mat3::Identity() + d);
}

//! Per-row-patch homographies between two frames.
//!
//! Patch n covers rows [n*(H/N), (n+1)*(H/N)) with integer H/N; remainder
//! rows join the last patch. An array with one entry per row is the
//! per-row (smoothed) form of the same type.
class HomographyArray {
public:
    HomographyArray() = default;
    HomographyArray(std::vector<Mat3> patches, CameraIntrinsics k, int width, int height)
        : patches_(std::move(patches)), k_(k), width_(width), height_(height) {
        if (width <= 0 || height <= 0) throw InvalidArgument("homography array: frame size must be positive");
        if (patches_.empty()) throw InvalidArgument("homography array: patch_count must be >= 1");
        if (static_cast<int>(patches_.size()) > height)
            throw InvalidArgument("homography array: more patches than rows");
        for (auto& h : patches_) {
            if (!h.allFinite() || !(std::abs(h.determinant()) > 1e-12))
                throw InvalidArgument("homography array: singular or non-finite patch homography");
            h = normalize_homography(h);
        }
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int patch_count() const noexcept { return static_cast<int>(patches_.size()); }
    const CameraIntrinsics& intrinsics() const noexcept { return k_; }
    const std::vector<Mat3>& patches() const noexcept { return patches_; }
    const Mat3& patch(int n) const { return patches_.at(static_cast<std::size_t>(n)); }

    int rows_per_patch() const noexcept { return height_ / patch_count(); }
    int patch_begin(int n) const noexcept { return n * rows_per_patch(); }
    int patch_end(int n) const noexcept { return n + 1 == patch_count() ? height_ : (n + 1) * rows_per_patch(); }
    //! integer mid row of patch n
    int patch_center(int n) const noexcept { return (patch_begin(n) + patch_end(n) - 1) / 2; }

    int patch_for_row(int y) const noexcept {
        const int n = y / rows_per_patch();
        return n < patch_count() ? n : patch_count() - 1;
    }
    const Mat3& for_row(int y) const { return patches_[static_cast<std::size_t>(patch_for_row(y))]; }

    //! rotation R such that patch(n) = K R K^-1 (up to scale)
    RotationMatrix patch_rotation(int n) const {
        const Mat3 m = k_.inverse() * patch(n) * k_.matrix();
        const double det = m.determinant();
        const Mat3 r = m / std::cbrt(det);
        return quat_to_matrix(matrix_to_quat(RotationMatrix(r, 1e-6)));
    }

private:
    std::vector<Mat3> patches_;
    CameraIntrinsics k_;
    int width_ = 0, height_ = 0;
};

inline constexpr int default_patch_count = 14;

//! Per-patch K R(t_b) R(t_a)^T K^-1, patch times taken at the patch's
//! integer mid row under a linear rolling-shutter readout.
inline HomographyArray build_homography_array(std::span<const GyroSample> samples, const FrameTiming& timing,
                                              const CameraIntrinsics& k, int width, int height,
                                              int patch_count = default_patch_count,
                                              std::int64_t max_gap_ns = default_max_gap_ns) {
    timing.validate();
    k.validate(width, height);
    if (patch_count < 1) throw InvalidArgument("patch_count must be >= 1");
    if (patch_count > height) throw InvalidArgument("patch_count exceeds frame height");
    // layout helper only; entries are replaced below
    const HomographyArray layout(std::vector<Mat3>(static_cast<std::size_t>(patch_count), Mat3::Identity()), k,
                                 width, height);
    std::vector<Mat3> hs;
    hs.reserve(static_cast<std::size_t>(patch_count));
    for (int n = 0; n < patch_count; ++n) {
        const double row = layout.patch_center(n);
        const std::int64_t ta = timing.row_time(timing.start_a, row, height);
        const std::int64_t tb = timing.row_time(timing.start_b, row, height);
        hs.push_back(global_homography(k, integrate_gyro_matrix(samples, ta, tb, max_gap_ns)));
    }
    return {std::move(hs), k, width, height};
}

//! Per-row array: patch rotations as quaternions, SLERPed between
//! adjacent patch centers; rows outside the first/last center hold the
//! nearest patch's rotation.
inline HomographyArray smooth_homography_array(const HomographyArray& in) {
    const int n = in.patch_count();
    std::vector<Quaternion> qs;
    qs.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) qs.push_back(matrix_to_quat(in.patch_rotation(i)));

    std::vector<Mat3> rows;
    rows.reserve(static_cast<std::size_t>(in.height()));
    // rows that take a patch rotation unchanged reuse its homography, so a
    // global-shutter array survives smoothing bit for bit
    int seg = 0;
    for (int y = 0; y < in.height(); ++y) {
        if (n == 1 || y <= in.patch_center(0)) {
            rows.push_back(in.patch(0));
        } else if (y >= in.patch_center(n - 1)) {
            rows.push_back(in.patch(n - 1));
        } else {
            while (in.patch_center(seg + 1) <= y) ++seg;
            const int c0 = in.patch_center(seg), c1 = in.patch_center(seg + 1);
            if (y == c0 || in.patch(seg) == in.patch(seg + 1)) {
                rows.push_back(in.patch(seg));
            } else {
                const Quaternion q = slerp(qs[seg], qs[seg + 1], static_cast<double>(y - c0) / (c1 - c0));
                rows.push_back(global_homography(in.intrinsics(), quat_to_matrix(q)));
            }
        }
    }
    return {std::move(rows), in.intrinsics(), in.width(), in.height()};
}

//! (u, v) = dehomogenized H(row(y)) p - p for every pixel p = (x, y, 1)
inline FlowField rasterize_gyro_field(const HomographyArray& array, int width, int height) {
    if (width != array.width() || height != array.height())
        throw InvalidArgument("rasterize: array bound to " + std::to_string(array.width()) + "x" +
                              std::to_string(array.height()) + ", requested " + std::to_string(width) + "x" +
                              std::to_string(height));
    FlowField field(width, height);
    for (int y = 0; y < height; ++y) {
        const Mat3& h = array.for_row(y);
        const double yy = y;
        for (int x = 0; x < width; ++x) {
            const double xx = x;
            const double px = h(0, 0) * xx + h(0, 1) * yy + h(0, 2);
            const double py = h(1, 0) * xx + h(1, 1) * yy + h(1, 2);
            const double pw = h(2, 0) * xx + h(2, 1) * yy + h(2, 2);
            if (!(std::abs(pw) >= 1e-12)) {
                field.set(x, y, 0.0, 0.0);
                field.set_valid(x, y, false);
                continue;
            }
            field.set(x, y, px / pw - xx, py / pw - yy);
        }
    }
    return field;
}

inline FlowField rasterize_gyro_field(const HomographyArray& array) {
    return rasterize_gyro_field(array, array.width(), array.height());
}

//! Area-average over factor x factor blocks (edge-replicated past the
//! border), vectors divided by `factor` to express coarse-grid pixels.
//! Only valid fine pixels contribute; a block with none is invalid.
inline FlowField downscale_field(const FlowField& field, int factor) {
    if (factor < 1) throw InvalidArgument("downscale factor must be >= 1");
    if ((factor & (factor - 1)) != 0) throw InvalidArgument("downscale factor must be a power of two");
    if (factor == 1) return field;
    const int w = (field.width() + factor - 1) / factor;
    const int h = (field.height() + factor - 1) / factor;
    FlowField out(w, h);
    for (int cy = 0; cy < h; ++cy) {
        for (int cx = 0; cx < w; ++cx) {
            double su = 0.0, sv = 0.0;
            int n = 0;
            for (int dy = 0; dy < factor; ++dy) {
                const int y = std::min(cy * factor + dy, field.height() - 1);
                for (int dx = 0; dx < factor; ++dx) {
                    const int x = std::min(cx * factor + dx, field.width() - 1);
                    if (!field.valid(x, y)) continue;
                    su += field.u(x, y);
                    sv += field.v(x, y);
                    ++n;
                }
            }
            if (n == 0) {
                out.set_valid(cx, cy, false);
                continue;
            }
            out.set(cx, cy, su / n / factor, sv / n / factor);
        }
    }
    return out;
}

} // namespace gyroflow
