#pragma once

// Camera orientation from gyroscope angular velocities: Rodrigues exp-map,
// zero-order-hold integration, quaternion <-> matrix conversion and SLERP.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Core>
#include <Eigen/LU>

#include "gyroflow/error.hpp"

namespace gyroflow {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

//! one timestamped angular-velocity reading, rad/s in the camera frame
struct GyroSample {
    std::int64_t timestamp_ns = 0;
    Vec3 omega = Vec3::Zero();
};

class RotationMatrix;

//! unit quaternion, canonical sign w >= 0
class Quaternion {
public:
    Quaternion() = default;

    //! throws InvalidArgument unless (w,x,y,z) is unit within `tol`
    static Quaternion from_wxyz(double w, double x, double y, double z, double tol = 1e-9) {
        const double n = std::sqrt(w * w + x * x + y * y + z * z);
        if (!std::isfinite(n) || std::abs(n - 1.0) > tol)
            throw InvalidArgument("quaternion is not unit norm (|q| = " + std::to_string(n) + ")");
        return normalized(w, x, y, z);
    }

    //! normalizes any nonzero finite 4-vector
    static Quaternion normalized(double w, double x, double y, double z) {
        const double n = std::sqrt(w * w + x * x + y * y + z * z);
        if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("cannot normalize zero or non-finite quaternion");
        // w == 0 is ambiguous; break the tie on the first nonzero vector part
        if (w < 0.0 || (w == 0.0 && (x < 0.0 || (x == 0.0 && (y < 0.0 || (y == 0.0 && z < 0.0))))))
            n_flip(w, x, y, z);
        Quaternion q;
        q.w_ = w / n;
        q.x_ = x / n;
        q.y_ = y / n;
        q.z_ = z / n;
        return q;
    }

    static Quaternion identity() { return {}; }

    //! rotation of `angle` radians about `axis` (need not be normalized)
    static Quaternion from_axis_angle(const Vec3& axis, double angle) {
        const double n = axis.norm();
        if (!(n > 0.0)) return identity();
        const Vec3 a = axis / n * std::sin(angle / 2.0);
        return normalized(std::cos(angle / 2.0), a.x(), a.y(), a.z());
    }

    double w() const noexcept { return w_; }
    double x() const noexcept { return x_; }
    double y() const noexcept { return y_; }
    double z() const noexcept { return z_; }
    Vec3 vec() const { return {x_, y_, z_}; }

    double dot(const Quaternion& o) const noexcept { return w_ * o.w_ + x_ * o.x_ + y_ * o.y_ + z_ * o.z_; }
    double norm() const noexcept { return std::sqrt(dot(*this)); }

    Quaternion conjugate() const { return normalized(w_, -x_, -y_, -z_); }

    //! Hamilton product; (a * b) applies b first
    Quaternion operator*(const Quaternion& b) const {
        return normalized(w_ * b.w_ - x_ * b.x_ - y_ * b.y_ - z_ * b.z_,
                          w_ * b.x_ + x_ * b.w_ + y_ * b.z_ - z_ * b.y_,
                          w_ * b.y_ - x_ * b.z_ + y_ * b.w_ + z_ * b.x_,
                          w_ * b.z_ + x_ * b.y_ - y_ * b.x_ + z_ * b.w_);
    }

    //! rotation angle in [0, pi]
    double angle() const { return 2.0 * std::atan2(vec().norm(), std::abs(w_)); }

    bool operator==(const Quaternion&) const = default;

private:
    static void n_flip(double& w, double& x, double& y, double& z) {
        w = -w;
        x = -x;
        y = -y;
        z = -z;
    }

    double w_ = 1.0, x_ = 0.0, y_ = 0.0, z_ = 0.0;
};

//! geodesic angle between the rotations two quaternions represent
inline double angular_distance(const Quaternion& a, const Quaternion& b) {
    const double s = a.dot(b) < 0.0 ? -1.0 : 1.0;
    const double dw = a.w() - s * b.w(), dx = a.x() - s * b.x(), dy = a.y() - s * b.y(), dz = a.z() - s * b.z();
    const double pw = a.w() + s * b.w(), px = a.x() + s * b.x(), py = a.y() + s * b.y(), pz = a.z() + s * b.z();
    return 4.0 * std::atan2(std::sqrt(dw * dw + dx * dx + dy * dy + dz * dz),
                            std::sqrt(pw * pw + px * px + py * py + pz * pz));
}

//! element of SO(3); construction checks orthonormality and det = +1
class RotationMatrix {
public:
    RotationMatrix() : m_(Mat3::Identity()) {}

    explicit RotationMatrix(const Mat3& m, double tol = 1e-9) : m_(m) {
        if (!m.allFinite()) throw InvalidArgument("rotation matrix has non-finite entries");
        const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
        const double det = m.determinant();
        if (ortho > tol || std::abs(det - 1.0) > tol)
            throw InvalidArgument("matrix is not a rotation (orthonormality error " + std::to_string(ortho) +
                                  ", det " + std::to_string(det) + ")");
    }

    static RotationMatrix identity() { return {}; }

    const Mat3& matrix() const noexcept { return m_; }
    double operator()(int r, int c) const { return m_(r, c); }

    RotationMatrix transpose() const { return unchecked(m_.transpose()); }
    RotationMatrix operator*(const RotationMatrix& o) const { return unchecked(m_ * o.m_); }
    Vec3 operator*(const Vec3& v) const { return m_ * v; }

private:
    friend RotationMatrix rodrigues(const Vec3&);
    friend RotationMatrix quat_to_matrix(const Quaternion&);

    static RotationMatrix unchecked(const Mat3& m) {
        RotationMatrix r;
        r.m_ = m;
        return r;
    }

    Mat3 m_;
};

//! exp map: rotation of |v| radians about v/|v|
inline RotationMatrix rodrigues(const Vec3& v) {
    if (!v.allFinite()) throw InvalidArgument("rodrigues: non-finite axis-angle vector");
    const double theta2 = v.squaredNorm();
    Mat3 k;
    k << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    double a, b;  // sin(t)/t, (1 - cos(t))/t^2
    if (theta2 < 1e-8) {
        a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
        b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
    } else {
        const double theta = std::sqrt(theta2);
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / theta2;
    }
    return RotationMatrix::unchecked(Mat3::Identity() + a * k + b * k * k);
}

inline RotationMatrix quat_to_matrix(const Quaternion& q) {
    const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
    Mat3 m;
    m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return RotationMatrix::unchecked(m);
}

//! Shepperd's method; picks the numerically largest pivot
inline Quaternion matrix_to_quat(const RotationMatrix& rot) {
    const Mat3& m = rot.matrix();
    const double tr = m.trace();
    const double cand[4] = {tr, m(0, 0), m(1, 1), m(2, 2)};
    const int k = static_cast<int>(std::max_element(cand, cand + 4) - cand);
    double w, x, y, z;
    switch (k) {
    case 0: {
        const double s = 2.0 * std::sqrt(1.0 + tr);
        w = s / 4.0;
        x = (m(2, 1) - m(1, 2)) / s;
        y = (m(0, 2) - m(2, 0)) / s;
        z = (m(1, 0) - m(0, 1)) / s;
        break;
    }
    case 1: {
        const double s = 2.0 * std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2));
        w = (m(2, 1) - m(1, 2)) / s;
        x = s / 4.0;
        y = (m(0, 1) + m(1, 0)) / s;
        z = (m(0, 2) + m(2, 0)) / s;
        break;
    }
    case 2: {
        const double s = 2.0 * std::sqrt(1.0 - m(0, 0) + m(1, 1) - m(2, 2));
        w = (m(0, 2) - m(2, 0)) / s;
        x = (m(0, 1) + m(1, 0)) / s;
        y = s / 4.0;
        z = (m(1, 2) + m(2, 1)) / s;
        break;
    }
    default: {
        const double s = 2.0 * std::sqrt(1.0 - m(0, 0) - m(1, 1) + m(2, 2));
        w = (m(1, 0) - m(0, 1)) / s;
        x = (m(0, 2) + m(2, 0)) / s;
        y = (m(1, 2) + m(2, 1)) / s;
        z = s / 4.0;
        break;
    }
    }
    return Quaternion::normalized(w, x, y, z);
}

//! constant-angular-velocity interpolation along the shorter arc
inline Quaternion slerp(const Quaternion& q0, const Quaternion& q1, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("slerp: t must lie in [0, 1]");
    const double s = q0.dot(q1) < 0.0 ? -1.0 : 1.0;
    const double b[4] = {s * q1.w(), s * q1.x(), s * q1.y(), s * q1.z()};
    const double a[4] = {q0.w(), q0.x(), q0.y(), q0.z()};
    double dn = 0.0, sn = 0.0;
    for (int i = 0; i < 4; ++i) {
        dn += (b[i] - a[i]) * (b[i] - a[i]);
        sn += (b[i] + a[i]) * (b[i] + a[i]);
    }
    // half the rotation angle between q0 and q1
    const double omega = 2.0 * std::atan2(std::sqrt(dn), std::sqrt(sn));
    double c0, c1;
    if (omega < 1e-12) {
        c0 = 1.0 - t;
        c1 = t;
    } else {
        const double so = std::sin(omega);
        c0 = std::sin((1.0 - t) * omega) / so;
        c1 = std::sin(t * omega) / so;
    }
    return Quaternion::normalized(c0 * a[0] + c1 * b[0], c0 * a[1] + c1 * b[1], c0 * a[2] + c1 * b[2],
                                  c0 * a[3] + c1 * b[3]);
}

inline constexpr std::int64_t default_max_gap_ns = 10'000'000;

//! Accumulated rotation over [t_a, t_b] from a gyro log.
//!
//! Each sample's omega is held until the next sample (zero-order hold);
//! increments compose right-to-left, so the result maps camera orientation
//! at t_a to orientation at t_b. The window may extend past the first/last
//! sample by at most `max_gap_ns`; longer extrapolation or an internal gap
//! wider than `max_gap_ns` raises CoverageError.
inline RotationMatrix integrate_gyro_matrix(std::span<const GyroSample> samples, std::int64_t t_a,
                                            std::int64_t t_b, std::int64_t max_gap_ns = default_max_gap_ns) {
    if (samples.empty()) throw InvalidArgument("integrate_gyro: empty gyro log");
    if (t_b < t_a) throw InvalidArgument("integrate_gyro: window end precedes start");
    if (samples.front().timestamp_ns - t_a > max_gap_ns)
        throw CoverageError("gyro log starts at " + std::to_string(samples.front().timestamp_ns) +
                            " ns, after window start " + std::to_string(t_a) + " ns");
    if (t_b - samples.back().timestamp_ns > max_gap_ns)
        throw CoverageError("gyro log ends at " + std::to_string(samples.back().timestamp_ns) +
                            " ns, before window end " + std::to_string(t_b) + " ns");

    // first sample whose hold interval reaches past t_a
    auto it = std::upper_bound(samples.begin(), samples.end(), t_a,
                               [](std::int64_t t, const GyroSample& s) { return t < s.timestamp_ns; });
    std::size_t k = it == samples.begin() ? 0 : static_cast<std::size_t>(it - samples.begin()) - 1;

    Mat3 acc = Mat3::Identity();
    for (; k < samples.size(); ++k) {
        const GyroSample& s = samples[k];
        if (!s.omega.allFinite()) throw InvalidArgument("integrate_gyro: non-finite angular velocity");
        const bool last = k + 1 == samples.size();
        if (!last) {
            const std::int64_t next = samples[k + 1].timestamp_ns;
            if (next <= s.timestamp_ns) throw InvalidArgument("integrate_gyro: timestamps not strictly increasing");
            if (next - s.timestamp_ns > max_gap_ns && next > t_a && s.timestamp_ns < t_b)
                throw CoverageError("gyro log gap of " + std::to_string(next - s.timestamp_ns) + " ns at " +
                                    std::to_string(s.timestamp_ns) + " ns");
        }
        const std::int64_t lo = k == 0 ? t_a : std::max(t_a, s.timestamp_ns);
        const std::int64_t hi = last ? t_b : std::min(t_b, samples[k + 1].timestamp_ns);
        if (hi > lo) acc = rodrigues(s.omega * (static_cast<double>(hi - lo) * 1e-9)).matrix() * acc;
        if (!last && samples[k + 1].timestamp_ns >= t_b) break;
    }
    return RotationMatrix(acc, 1e-8);
}

inline Quaternion integrate_gyro(std::span<const GyroSample> samples, std::int64_t t_a, std::int64_t t_b,
                                 std::int64_t max_gap_ns = default_max_gap_ns) {
    return matrix_to_quat(integrate_gyro_matrix(samples, t_a, t_b, max_gap_ns));
}

} // namespace gyroflow
