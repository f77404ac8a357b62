#pragma once

// Synthetic frame pairs with exact ground truth: procedural texture seen
// by a rolling-shutter camera under a known rotation history, an optional
// independently moving rectangle, degradations and a sampled gyro log.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gyroflow/gyro_field.hpp"
#include "gyroflow/rotation.hpp"
#include "gyroflow/types.hpp"

namespace gyroflow {

enum class SceneCategory { RE, Dark, Fog, Rain, Synth };

inline const char* category_name(SceneCategory c) {
    switch (c) {
    case SceneCategory::RE: return "RE";
    case SceneCategory::Dark: return "Dark";
    case SceneCategory::Fog: return "Fog";
    case SceneCategory::Rain: return "Rain";
    case SceneCategory::Synth: return "Synth";
    }
    return "Synth";
}

inline SceneCategory parse_category(const std::string& s) {
    if (s == "RE") return SceneCategory::RE;
    if (s == "Dark") return SceneCategory::Dark;
    if (s == "Fog") return SceneCategory::Fog;
    if (s == "Rain") return SceneCategory::Rain;
    if (s == "Synth") return SceneCategory::Synth;
    throw InvalidArgument("unknown scene category '" + s + "' (expected RE, Dark, Fog, Rain or Synth)");
}

struct GyroLog {
    std::vector<GyroSample> samples;
    std::string clock = "synthetic";

    void validate() const {
        if (samples.size() < 2) throw ValidationError("gyro log needs at least 2 samples");
        for (std::size_t i = 1; i < samples.size(); ++i)
            if (samples[i].timestamp_ns <= samples[i - 1].timestamp_ns)
                throw ValidationError("gyro log timestamps not strictly increasing at sample " + std::to_string(i));
    }
};

struct SceneBundle {
    ImageBuffer frame_a, frame_b;
    GyroLog gyro;
    FrameTiming timing;
    CameraIntrinsics intrinsics;
    std::optional<FlowField> gt;
    std::optional<ValidityMask> valid;  // false = occluded or leaves the frame
    SceneCategory category = SceneCategory::Synth;
};

//! angular velocity keyframe; the rate is linear between keyframes, held outside
struct OmegaKeyframe {
    std::int64_t t_ns = 0;
    Vec3 omega = Vec3::Zero();
};

//! Continuous camera rotation defined by angular-velocity keyframes.
class RotationHistory {
public:
    RotationHistory() = default;
    explicit RotationHistory(std::vector<OmegaKeyframe> keys) : keys_(std::move(keys)) {
        std::sort(keys_.begin(), keys_.end(), [](const auto& a, const auto& b) { return a.t_ns < b.t_ns; });
        for (std::size_t i = 1; i < keys_.size(); ++i)
            if (keys_[i].t_ns == keys_[i - 1].t_ns) throw SpecError("duplicate rotation keyframe time");
    }

    static RotationHistory constant(const Vec3& omega) { return RotationHistory({{0, omega}}); }

    const std::vector<OmegaKeyframe>& keyframes() const noexcept { return keys_; }

    Vec3 omega_at(double t_ns) const {
        if (keys_.empty()) return Vec3::Zero();
        if (t_ns <= keys_.front().t_ns) return keys_.front().omega;
        if (t_ns >= keys_.back().t_ns) return keys_.back().omega;
        auto it = std::upper_bound(keys_.begin(), keys_.end(), t_ns,
                                   [](double t, const OmegaKeyframe& k) { return t < k.t_ns; });
        const auto& k1 = *it;
        const auto& k0 = *(it - 1);
        const double s = (t_ns - k0.t_ns) / static_cast<double>(k1.t_ns - k0.t_ns);
        return k0.omega + s * (k1.omega - k0.omega);
    }

    //! C(t_b) C(t_a)^T for each (t_a, t_b), midpoint-rule steps of at most `step_ns`
    std::vector<RotationMatrix> relative(const std::vector<std::pair<std::int64_t, std::int64_t>>& windows,
                                         std::int64_t step_ns = 10'000) const {
        std::vector<std::int64_t> times;
        times.reserve(windows.size() * 2);
        for (const auto& [a, b] : windows) {
            times.push_back(a);
            times.push_back(b);
        }
        std::sort(times.begin(), times.end());
        times.erase(std::unique(times.begin(), times.end()), times.end());
        std::vector<Mat3> orient(times.size());
        Mat3 c = Mat3::Identity();
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (i > 0) {
                const std::int64_t t0 = times[i - 1], t1 = times[i];
                const std::int64_t steps = (t1 - t0 + step_ns - 1) / step_ns;
                for (std::int64_t s = 0; s < steps; ++s) {
                    const double lo = t0 + static_cast<double>(t1 - t0) * s / steps;
                    const double hi = t0 + static_cast<double>(t1 - t0) * (s + 1) / steps;
                    c = rodrigues(omega_at(0.5 * (lo + hi)) * ((hi - lo) * 1e-9)).matrix() * c;
                }
            }
            orient[i] = c;
        }
        std::vector<RotationMatrix> out;
        out.reserve(windows.size());
        const auto find = [&](std::int64_t t) {
            return orient[static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), t) - times.begin())];
        };
        for (const auto& [a, b] : windows) {
            const Mat3 r = find(b) * find(a).transpose();
            out.push_back(quat_to_matrix(matrix_to_quat(RotationMatrix(r, 1e-8))));
        }
        return out;
    }

private:
    std::vector<OmegaKeyframe> keys_;
};

struct MovingRect {
    double x = 0.0, y = 0.0, width = 0.0, height = 0.0;  // frame-a placement, pixels
    double dx = 0.0, dy = 0.0;                            // displacement a -> b
    std::uint64_t texture_seed = 7;

    bool contains_a(double px, double py) const { return px >= x && px < x + width && py >= y && py < y + height; }
    bool contains_b(double px, double py) const { return contains_a(px - dx, py - dy); }
};

struct Degradation {
    double dark = 0.0;          // gain/gamma reduction with shot noise, [0, 1]
    double fog = 0.0;           // veil blend, [0, 1]
    double rain = 0.0;          // streak density, [0, 1]
    double sensor_noise = 0.0;  // additive Gaussian std, intensity units
};

struct GyroSampling {
    double rate_hz = 200.0;
    Vec3 bias = Vec3::Zero();   // rad/s
    double noise_std = 0.0;     // rad/s
};

struct SceneSpec {
    int width = 256, height = 192;
    std::optional<CameraIntrinsics> intrinsics;  // default: CameraIntrinsics::synthetic_default
    std::int64_t start_a_ns = 20'000'000;
    std::int64_t frame_interval_ns = 33'333'333;
    std::int64_t readout_ns = FrameTiming::default_readout_ns;
    RotationHistory rotation = RotationHistory::constant(Vec3(0.15, -0.25, 0.05));
    std::optional<MovingRect> rect;
    std::uint64_t texture_seed = 1;
    std::uint64_t seed = 0;
    GyroSampling gyro;
    Degradation degradation;
    SceneCategory category = SceneCategory::Synth;

    CameraIntrinsics resolved_intrinsics() const {
        return intrinsics ? *intrinsics : CameraIntrinsics::synthetic_default(width, height);
    }
    FrameTiming timing() const { return {start_a_ns, start_a_ns + frame_interval_ns, readout_ns}; }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline double lattice_value(std::int64_t ix, std::int64_t iy, std::uint64_t seed) {
    const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(ix) * 0x632be59bd9b4e019ULL ^
                                                         splitmix64(static_cast<std::uint64_t>(iy))));
    return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

inline double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

inline double value_noise(double x, double y, double cell, std::uint64_t seed) {
    const double gx = x / cell, gy = y / cell;
    const double fx = std::floor(gx), fy = std::floor(gy);
    const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
    const double sx = fade(gx - fx), sy = fade(gy - fy);
    const double v00 = lattice_value(ix, iy, seed), v10 = lattice_value(ix + 1, iy, seed);
    const double v01 = lattice_value(ix, iy + 1, seed), v11 = lattice_value(ix + 1, iy + 1, seed);
    const double top = v00 + sx * (v10 - v00), bot = v01 + sx * (v11 - v01);
    return top + sy * (bot - top);
}

} // namespace detail

//! Seeded multi-octave value noise in [0.1, 0.9], defined on the whole plane.
class ProceduralTexture {
public:
    explicit ProceduralTexture(std::uint64_t seed) : seed_(seed) {}

    double operator()(double x, double y) const {
        static constexpr double cells[3] = {32.0, 14.0, 7.0};
        static constexpr double amps[3] = {0.38, 0.27, 0.15};
        double s = 0.5;
        for (int o = 0; o < 3; ++o)
            s += amps[o] * (detail::value_noise(x, y, cells[o], detail::splitmix64(seed_ + 0x51ed * (o + 1))) - 0.5);
        return std::clamp(s, 0.1, 0.9);
    }

private:
    std::uint64_t seed_;
};

namespace detail {

//! true per-row homographies for rows [-margin, height + margin)
struct RowHomographies {
    int margin = 0;
    std::vector<Mat3> rows;

    const Mat3& at_row(int y) const {
        const int i = std::clamp(y + margin, 0, static_cast<int>(rows.size()) - 1);
        return rows[static_cast<std::size_t>(i)];
    }

    //! linear blend between neighbouring rows for a real row coordinate
    Mat3 at(double y) const {
        const double fy = std::floor(y);
        const double s = y - fy;
        const int y0 = static_cast<int>(fy);
        return (1.0 - s) * at_row(y0) + s * at_row(y0 + 1);
    }
};

inline Vec3 project(const Mat3& h, double x, double y) {
    const double px = h(0, 0) * x + h(0, 1) * y + h(0, 2);
    const double py = h(1, 0) * x + h(1, 1) * y + h(1, 2);
    const double pw = h(2, 0) * x + h(2, 1) * y + h(2, 2);
    return {px / pw, py / pw, pw};
}

inline void degrade(ImageBuffer& img, const Degradation& d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int w = img.width(), h = img.height();
    if (d.rain > 0.0) {
        std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h), ulen(6.0, 14.0), ub(0.15, 0.35);
        const int streaks = static_cast<int>(d.rain * w * h / 150.0);
        std::vector<double> overlay(static_cast<std::size_t>(w) * h, 0.0);
        for (int s = 0; s < streaks; ++s) {
            const double x0 = ux(rng), y0 = uy(rng), len = ulen(rng), b = ub(rng);
            for (int t = 0; t < static_cast<int>(len); ++t) {
                const int x = static_cast<int>(x0 + 0.3 * t), y = static_cast<int>(y0 + t);
                if (x < 0 || x >= w || y < 0 || y >= h) continue;
                auto& o = overlay[static_cast<std::size_t>(y) * w + x];
                o = std::max(o, b);
            }
        }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double o = overlay[static_cast<std::size_t>(y) * w + x];
                for (int c = 0; c < img.channels(); ++c) img(x, y, c) = img(x, y, c) + o * (0.95 - img(x, y, c));
            }
    }
    if (d.fog > 0.0) {
        const double a = 0.65 * d.fog, veil = 0.8;
        for (double& v : img.data()) v = (1.0 - a) * v + a * veil;
    }
    if (d.dark > 0.0) {
        const double gain = 1.0 - 0.8 * d.dark, gamma = 1.0 + d.dark;
        for (double& v : img.data()) {
            v = gain * std::pow(v, gamma);
            v += 0.02 * d.dark * std::sqrt(v / gain) * normal(rng);
        }
    }
    if (d.sensor_noise > 0.0)
        for (double& v : img.data()) v += d.sensor_noise * normal(rng);
    for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
}

inline bool rect_visible(const MovingRect& r, double ox, double oy, int w, int h) {
    return r.x + ox < w && r.x + ox + r.width > 0 && r.y + oy < h && r.y + oy + r.height > 0;
}

} // namespace detail

//! Renders a scene with exact ground truth.
//!
//! Frame a samples the background texture at pixel centers. Frame b sees
//! background point p at p' = H(row(p)) p, with H the true per-row
//! rotation homography; rendering solves p' = q per pixel q by fixed-point
//! iteration. The rectangle translates by (dx, dy) on top. Background
//! ground truth is the per-pixel projection through the true homographies.
inline SceneBundle generate_synthetic_scene(const SceneSpec& spec) {
    if (spec.width < 8 || spec.height < 8) throw SpecError("scene must be at least 8x8");
    if (spec.frame_interval_ns <= 0) throw SpecError("frame interval must be positive");
    if (spec.readout_ns < 0) throw SpecError("readout must be non-negative");
    if (!(spec.gyro.rate_hz > 0.0)) throw SpecError("gyro rate must be positive");
    const int w = spec.width, h = spec.height;
    if (spec.rect) {
        const auto& r = *spec.rect;
        if (!(r.width > 0.0 && r.height > 0.0)) throw SpecError("rectangle must have positive size");
        if (!detail::rect_visible(r, 0.0, 0.0, w, h) || !detail::rect_visible(r, r.dx, r.dy, w, h))
            throw SpecError("rectangle leaves the frame entirely");
    }

    SceneBundle out;
    out.intrinsics = spec.resolved_intrinsics();
    out.intrinsics.validate(w, h);
    out.timing = spec.timing();
    out.category = spec.category;

    detail::RowHomographies rh;
    rh.margin = 48;
    std::vector<std::pair<std::int64_t, std::int64_t>> windows;
    for (int y = -rh.margin; y < h + rh.margin; ++y)
        windows.emplace_back(out.timing.row_time(out.timing.start_a, y, h), out.timing.row_time(out.timing.start_b, y, h));
    for (const auto& r : spec.rotation.relative(windows)) rh.rows.push_back(global_homography(out.intrinsics, r));

    const ProceduralTexture bg(spec.texture_seed);
    // only sampled inside the rect
    const ProceduralTexture fg(spec.rect ? spec.rect->texture_seed : 0);

    ImageBuffer a(w, h, 1), b(w, h, 1);
    FlowField gt(w, h);
    ValidityMask valid(w, h, true);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (spec.rect && spec.rect->contains_a(x, y)) {
                a(x, y) = fg(x - spec.rect->x, y - spec.rect->y);
                gt.set(x, y, spec.rect->dx, spec.rect->dy);
            } else {
                a(x, y) = bg(x, y);
                const Vec3 p = detail::project(rh.at_row(y), x, y);
                gt.set(x, y, p.x() - x, p.y() - y);
                if (spec.rect && spec.rect->contains_b(p.x(), p.y())) valid.set(x, y, false);
            }
            const double tx = x + gt.u(x, y), ty = y + gt.v(x, y);
            if (!(tx >= 0.0 && tx <= w - 1 && ty >= 0.0 && ty <= h - 1)) valid.set(x, y, false);
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (spec.rect && spec.rect->contains_b(x, y)) {
                b(x, y) = fg(x - spec.rect->dx - spec.rect->x, y - spec.rect->dy - spec.rect->y);
                continue;
            }
            double px = x, py = y;
            for (int it = 0; it < 30; ++it) {
                const Vec3 q = detail::project(rh.at(py), px, py);
                const double ex = x - q.x(), ey = y - q.y();
                px += ex;
                py += ey;
                if (std::abs(ex) + std::abs(ey) < 1e-12) break;
            }
            b(x, y) = bg(px, py);
        }

    detail::degrade(a, spec.degradation, detail::splitmix64(spec.seed * 2 + 1));
    detail::degrade(b, spec.degradation, detail::splitmix64(spec.seed * 2 + 2));

    // gyro log: one sample per period, reporting the rate at the period midpoint
    const double period = 1e9 / spec.gyro.rate_hz;
    const std::int64_t log_end = out.timing.start_b + out.timing.readout_ns + 20'000'000;
    std::mt19937_64 rng(detail::splitmix64(spec.seed * 2 + 3));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::int64_t i = 0;; ++i) {
        const auto t = static_cast<std::int64_t>(std::llround(i * period));
        if (t > log_end) break;
        Vec3 omega = spec.rotation.omega_at(t + 0.5 * period) + spec.gyro.bias;
        if (spec.gyro.noise_std > 0.0)
            for (int c = 0; c < 3; ++c) omega[c] += spec.gyro.noise_std * normal(rng);
        out.gyro.samples.push_back({t, omega});
    }

    out.frame_a = std::move(a);
    out.frame_b = std::move(b);
    out.gt = std::move(gt);
    out.valid = std::move(valid);
    return out;
}

} // namespace gyroflow
