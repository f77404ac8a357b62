#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "gyroflow/flow_core.hpp"
#include "gyroflow/gyro_field.hpp"

using namespace gyroflow;

namespace {

constexpr double deg = std::numbers::pi / 180.0;

std::vector<GyroSample> log_from(std::int64_t t0, std::int64_t t1, std::int64_t step, auto omega_at) {
    std::vector<GyroSample> s;
    for (std::int64_t t = t0; t <= t1; t += step) s.push_back({t, omega_at(t)});
    return s;
}

double rotation_angle(const Mat3& r) { return std::acos(std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0)); }

// naive projection: straight loops, no shared helpers
FlowField project_oracle(const HomographyArray& a) {
    FlowField f(a.width(), a.height());
    for (int y = 0; y < a.height(); ++y) {
        const Mat3& h = a.patch(y);
        for (int x = 0; x < a.width(); ++x) {
            const Eigen::Vector3d p = h * Eigen::Vector3d(x, y, 1.0);
            f.set(x, y, p.x() / p.z() - x, p.y() / p.z() - y);
        }
    }
    return f;
}

HomographyArray random_smoothed(std::mt19937_64& rng, int w, int h, int patches) {
    std::uniform_real_distribution<double> u(-0.03, 0.03);
    const CameraIntrinsics k{0.8 * w, 0.8 * w, 0.5 * w, 0.5 * h, 0.0};
    std::vector<Mat3> hs;
    for (int n = 0; n < patches; ++n) hs.push_back(global_homography(k, rodrigues(Vec3(u(rng), u(rng), u(rng)))));
    return smooth_homography_array(HomographyArray(hs, k, w, h));
}

} // namespace

TEST(Intrinsics, ClosedFormInverse) {
    const CameraIntrinsics k{512.0, 498.0, 311.0, 402.0, 1.5};
    EXPECT_LT((k.inverse() - k.matrix().inverse()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Intrinsics, Validation) {
    EXPECT_THROW((CameraIntrinsics{0.0, 1.0, 0, 0, 0}.validate()), InvalidArgument);
    EXPECT_THROW((CameraIntrinsics{100, 100, 700, 10, 0}.validate(600, 800)), InvalidArgument);
    EXPECT_NO_THROW((CameraIntrinsics{100, 100, 300, 400, 0}.validate(600, 800)));
    const auto d = CameraIntrinsics::synthetic_default(600, 800);
    EXPECT_DOUBLE_EQ(d.fx, 480.0);
    EXPECT_DOUBLE_EQ(d.cy, 400.0);
}

TEST(FrameTiming, RowTimeIsLinearInRow) {
    const FrameTiming t{1000, 50'000'000, 24'000'000};
    EXPECT_EQ(t.row_time(1000, 0, 25), 1000);
    EXPECT_EQ(t.row_time(1000, 24, 25), 24'001'000);
    EXPECT_EQ(t.row_time(1000, 12, 25), 12'001'000);
    EXPECT_THROW((FrameTiming{10, 10, 0}.validate()), InvalidArgument);
    EXPECT_THROW((FrameTiming{0, 10, -1}.validate()), InvalidArgument);
}

TEST(GlobalHomography, IdentityRotation) {
    const CameraIntrinsics k{500, 500, 300, 400, 0};
    EXPECT_LT((global_homography(k, RotationMatrix::identity()) - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(GlobalHomography, InverseRotationCancels) {
    const CameraIntrinsics k{500, 500, 300, 400, 0};
    const RotationMatrix r = rodrigues(Vec3(0.1, -0.2, 0.05));
    const Mat3 h = global_homography(k, r) * global_homography(k, r.transpose());
    EXPECT_LT((normalize_homography(h) - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(GlobalHomography, SmallYawAtPrincipalPoint) {
    const CameraIntrinsics k{500, 500, 300, 400, 0};
    const double theta = 0.01;
    const Mat3 h = global_homography(k, rodrigues(Vec3(0, theta, 0)));
    const Eigen::Vector3d p = h * Eigen::Vector3d(300, 400, 1);
    EXPECT_NEAR(p.x() / p.z() - 300.0, 500.0 * std::tan(theta), 1e-9);
    EXPECT_NEAR(p.x() / p.z() - 300.0, 5.0, 0.01);
    EXPECT_NEAR(p.y() / p.z() - 400.0, 0.0, 1e-9);
    EXPECT_DOUBLE_EQ(h(2, 2), 1.0);
}

TEST(HomographyArray, Validation) {
    const CameraIntrinsics k{50, 50, 32, 32, 0};
    EXPECT_THROW(HomographyArray({}, k, 64, 64), InvalidArgument);
    EXPECT_THROW(HomographyArray({Mat3::Zero()}, k, 64, 64), InvalidArgument);
    EXPECT_THROW(HomographyArray(std::vector<Mat3>(5, Mat3::Identity()), k, 64, 4), InvalidArgument);
    const HomographyArray a({Mat3::Identity() * 3.0}, k, 64, 64);
    EXPECT_LT((a.patch(0) - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(HomographyArray, PatchLayoutRemainderJoinsLast) {
    const CameraIntrinsics k{50, 50, 32, 32, 0};
    const HomographyArray a(std::vector<Mat3>(14, Mat3::Identity()), k, 64, 100);
    EXPECT_EQ(a.rows_per_patch(), 7);
    EXPECT_EQ(a.patch_begin(13), 91);
    EXPECT_EQ(a.patch_end(13), 100);
    EXPECT_EQ(a.patch_for_row(90), 12);
    EXPECT_EQ(a.patch_for_row(99), 13);
    EXPECT_EQ(a.patch_center(0), 3);
    EXPECT_EQ(a.patch_center(13), 95);
}

TEST(BuildHomographyArray, ZeroRateGivesIdentity) {
    const auto log = log_from(0, 120'000'000, 5'000'000, [](std::int64_t) { return Vec3::Zero(); });
    const FrameTiming t{10'000'000, 43'333'333, 25'000'000};
    const auto a = build_homography_array(log, t, CameraIntrinsics::synthetic_default(64, 48), 64, 48);
    ASSERT_EQ(a.patch_count(), 14);
    for (const auto& h : a.patches()) EXPECT_LT((h - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-15);
    const FlowField f = rasterize_gyro_field(smooth_homography_array(a));
    for (std::size_t i = 0; i < f.size(); ++i) {
        EXPECT_NEAR(f.us()[i], 0.0, 1e-12);
        EXPECT_NEAR(f.vs()[i], 0.0, 1e-12);
    }
}

TEST(BuildHomographyArray, GlobalShutterMatchesSingleHomography) {
    const auto log = log_from(0, 120'000'000, 5'000'000, [](std::int64_t t) { return Vec3(0.3, -0.2 + t * 1e-9, 0.4); });
    const FrameTiming t{10'000'000, 43'333'333, 0};
    const CameraIntrinsics k = CameraIntrinsics::synthetic_default(80, 60);
    const auto a = build_homography_array(log, t, k, 80, 60);
    const Mat3 g = global_homography(k, integrate_gyro_matrix(log, t.start_a, t.start_b));
    for (const auto& h : a.patches()) EXPECT_EQ(h, g);
    const FlowField banded = rasterize_gyro_field(a);
    const FlowField single = rasterize_gyro_field(HomographyArray({g}, k, 80, 60));
    EXPECT_EQ(banded, single);
    // smoothing identical patches must not round-trip through quaternions
    EXPECT_EQ(rasterize_gyro_field(smooth_homography_array(a)), single);
}

TEST(BuildHomographyArray, PatchAnglesFollowScalarTimingOracle) {
    // omega_z ramps linearly in time; a constant rate would give every patch the same angle
    const auto wz = [](std::int64_t t) { return 0.2 + 8.0 * (t * 1e-9); };
    const std::int64_t step = 1'000'000;
    const auto log = log_from(0, 120'000'000, step, [&](std::int64_t t) { return Vec3(0, 0, wz(t)); });
    const int w = 64, h = 98;
    const FrameTiming t{10'000'000, 43'333'333, 30'000'000};
    const auto a = build_homography_array(log, t, CameraIntrinsics::synthetic_default(w, h), w, h);

    double prev = -1.0;
    for (int n = 0; n < a.patch_count(); ++n) {
        // independent timing: mid row of [n*7, n*7+7), linear readout
        const int rows = h / 14;
        const int mid = (n * rows + (n + 1) * rows - 1) / 2;
        const std::int64_t ta = 10'000'000 + std::llround(30'000'000.0 * mid / (h - 1));
        const std::int64_t tb = 43'333'333 + std::llround(30'000'000.0 * mid / (h - 1));
        double angle = 0.0;  // zero-order hold, one sample per ms
        for (std::int64_t s = 0; s < 120'000'000; s += step) {
            const std::int64_t lo = std::max(s, ta), hi = std::min(s + step, tb);
            if (hi > lo) angle += wz(s) * (hi - lo) * 1e-9;
        }
        const double got = rotation_angle(a.patch_rotation(n).matrix());
        EXPECT_NEAR(got, angle, 1e-9) << "patch " << n;
        EXPECT_GT(got, prev);
        prev = got;
    }
}

TEST(BuildHomographyArray, CoverageErrorPropagates) {
    const auto log = log_from(0, 40'000'000, 5'000'000, [](std::int64_t) { return Vec3::Zero(); });
    const FrameTiming t{10'000'000, 43'333'333, 25'000'000};
    EXPECT_THROW(build_homography_array(log, t, CameraIntrinsics::synthetic_default(64, 48), 64, 48),
                 CoverageError);
}

TEST(BuildHomographyArray, PatchCountChecks) {
    const auto log = log_from(0, 120'000'000, 5'000'000, [](std::int64_t) { return Vec3::Zero(); });
    const FrameTiming t{10'000'000, 43'333'333, 25'000'000};
    const auto k = CameraIntrinsics::synthetic_default(64, 48);
    EXPECT_THROW(build_homography_array(log, t, k, 64, 48, 0), InvalidArgument);
    EXPECT_THROW(build_homography_array(log, t, k, 64, 48, 49), InvalidArgument);
    EXPECT_EQ(build_homography_array(log, t, k, 64, 48, 3).patch_count(), 3);
}

TEST(SmoothHomographyArray, ConstantArrayUnchanged) {
    const CameraIntrinsics k{60, 60, 40, 30, 0};
    const Mat3 g = global_homography(k, rodrigues(Vec3(0.02, 0.01, -0.03)));
    const auto s = smooth_homography_array(HomographyArray(std::vector<Mat3>(14, g), k, 80, 60));
    ASSERT_EQ(s.patch_count(), 60);
    for (const auto& h : s.patches()) EXPECT_LT((h - g).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SmoothHomographyArray, MidpointHalvesTheAngle) {
    const CameraIntrinsics k{60, 60, 40, 10, 0};
    const Mat3 r10 = rodrigues(Vec3(0, 0, 10 * deg)).matrix();
    const HomographyArray a({Mat3::Identity(), k.matrix() * r10 * k.inverse()}, k, 80, 20);
    const auto s = smooth_homography_array(a);
    // centers at rows 4 and 14
    const Mat3 mid = s.patch_rotation(9).matrix();
    EXPECT_LT((mid - rodrigues(Vec3(0, 0, 5 * deg)).matrix()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((s.patch(4) - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((s.patch(14) - a.patch(1)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((s.patch(0) - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((s.patch(19) - a.patch(1)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SmoothHomographyArray, PatchCentersReproduceInputs) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    const CameraIntrinsics k{100, 100, 64, 50, 0};
    std::vector<Mat3> hs;
    for (int n = 0; n < 14; ++n) hs.push_back(global_homography(k, rodrigues(Vec3(u(rng), u(rng), u(rng)))));
    const HomographyArray a(hs, k, 128, 100);
    const auto s = smooth_homography_array(a);
    for (int n = 0; n < 14; ++n) EXPECT_LT((s.patch(a.patch_center(n)) - a.patch(n)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SmoothHomographyArray, RowOrientationIsContinuous) {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    const CameraIntrinsics k{100, 100, 64, 70, 0};
    std::vector<Mat3> rs;
    std::vector<Mat3> hs;
    for (int n = 0; n < 14; ++n) {
        rs.push_back(rodrigues(Vec3(u(rng), u(rng), u(rng))).matrix());
        hs.push_back(k.matrix() * rs.back() * k.inverse());
    }
    const HomographyArray a(hs, k, 128, 140);
    const auto s = smooth_homography_array(a);
    double max_patch = 0.0;
    for (int n = 0; n + 1 < 14; ++n) max_patch = std::max(max_patch, rotation_angle(rs[n + 1] * rs[n].transpose()));
    double max_row = 0.0;
    for (int y = 0; y + 1 < 140; ++y) {
        const Mat3 r0 = s.patch_rotation(y).matrix();
        const Mat3 r1 = s.patch_rotation(y + 1).matrix();
        max_row = std::max(max_row, rotation_angle(r1 * r0.transpose()));
    }
    EXPECT_LT(max_row, max_patch / a.rows_per_patch() + 1e-9);
}

TEST(Rasterize, IdentityIsZero) {
    const CameraIntrinsics k{50, 50, 16, 16, 0};
    const FlowField f = rasterize_gyro_field(HomographyArray({Mat3::Identity()}, k, 32, 32));
    for (std::size_t i = 0; i < f.size(); ++i) {
        EXPECT_EQ(f.us()[i], 0.0);
        EXPECT_EQ(f.vs()[i], 0.0);
        EXPECT_TRUE(f.valid(i));
    }
}

TEST(Rasterize, PureTranslationPatch) {
    Mat3 t = Mat3::Identity();
    t(0, 2) = 3.0;
    t(1, 2) = -2.0;
    const FlowField f = rasterize_gyro_field(HomographyArray({t}, CameraIntrinsics{50, 50, 16, 16, 0}, 32, 24));
    for (std::size_t i = 0; i < f.size(); ++i) {
        EXPECT_DOUBLE_EQ(f.us()[i], 3.0);
        EXPECT_DOUBLE_EQ(f.vs()[i], -2.0);
    }
}

TEST(Rasterize, MatchesNaiveProjection) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 5; ++trial) {
        const auto s = random_smoothed(rng, 64, 64, 14);
        const FlowField f = rasterize_gyro_field(s, 64, 64);
        const FlowField o = project_oracle(s);
        for (std::size_t i = 0; i < f.size(); ++i) {
            EXPECT_NEAR(f.us()[i], o.us()[i], 1e-6);
            EXPECT_NEAR(f.vs()[i], o.vs()[i], 1e-6);
        }
    }
}

TEST(Rasterize, SizeMismatchRejected) {
    const HomographyArray a({Mat3::Identity()}, CameraIntrinsics{50, 50, 16, 16, 0}, 32, 32);
    EXPECT_THROW(rasterize_gyro_field(a, 33, 32), InvalidArgument);
}

TEST(Rasterize, DegenerateDepthMarksInvalid) {
    Mat3 h = Mat3::Identity();
    h(2, 0) = -1.0 / 5.0;  // w = 1 - x/5 vanishes at column 5
    const FlowField f = rasterize_gyro_field(HomographyArray({h}, CameraIntrinsics{50, 50, 8, 4, 0}, 16, 8));
    for (int y = 0; y < 8; ++y) {
        EXPECT_FALSE(f.valid(5, y));
        EXPECT_TRUE(f.valid(4, y));
    }
}

TEST(Rasterize, Deterministic) {
    std::mt19937_64 r1(13), r2(13);
    EXPECT_EQ(rasterize_gyro_field(random_smoothed(r1, 96, 80, 14)), rasterize_gyro_field(random_smoothed(r2, 96, 80, 14)));
}

TEST(Rasterize, CompositionOfSmallRotations) {
    const int n = 256;
    const CameraIntrinsics k = CameraIntrinsics::synthetic_default(n, n);
    const RotationMatrix r1 = rodrigues(Vec3(0.3, -0.5, 0.4) * deg);
    const RotationMatrix r2 = rodrigues(Vec3(-0.6, 0.2, 0.7) * deg);
    const FlowField g1 = rasterize_gyro_field(HomographyArray({global_homography(k, r1)}, k, n, n));
    const FlowField g2 = rasterize_gyro_field(HomographyArray({global_homography(k, r2)}, k, n, n));
    const FlowField g12 = rasterize_gyro_field(HomographyArray({global_homography(k, r2 * r1)}, k, n, n));
    double worst = 0.0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double px = x + g1.u(x, y), py = y + g1.v(x, y);
            if (px < 0 || py < 0 || px > n - 1 || py > n - 1) continue;
            const auto [u2, v2] = sample_flow(g2, px, py);
            worst = std::max(worst, std::hypot(px + u2 - x - g12.u(x, y), py + v2 - y - g12.v(x, y)));
        }
    EXPECT_LT(worst, 0.1);
}

TEST(DownscaleField, ConstantField) {
    FlowField f(16, 12, 4.0, 8.0);
    const FlowField d = downscale_field(f, 4);
    ASSERT_EQ(d.width(), 4);
    ASSERT_EQ(d.height(), 3);
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_DOUBLE_EQ(d.us()[i], 1.0);
        EXPECT_DOUBLE_EQ(d.vs()[i], 2.0);
    }
}

TEST(DownscaleField, ZeroField) {
    for (int f : {1, 2, 4, 8}) {
        const FlowField d = downscale_field(FlowField(32, 32), f);
        for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(d.us()[i], 0.0);
    }
}

TEST(DownscaleField, LinearRampAreaAverage) {
    FlowField f(20, 14);
    for (int y = 0; y < 14; ++y)
        for (int x = 0; x < 20; ++x) f.set(x, y, 0.5 * x - 0.25 * y + 1.0, 2.0 * y + 0.125 * x);
    const FlowField d = downscale_field(f, 2);
    for (int cy = 0; cy < 7; ++cy)
        for (int cx = 0; cx < 10; ++cx) {
            // mean of a linear function over a 2x2 block is its value at the block center
            const double mx = 2 * cx + 0.5, my = 2 * cy + 0.5;
            EXPECT_NEAR(d.u(cx, cy), (0.5 * mx - 0.25 * my + 1.0) / 2.0, 1e-9);
            EXPECT_NEAR(d.v(cx, cy), (2.0 * my + 0.125 * mx) / 2.0, 1e-9);
        }
}

TEST(DownscaleField, OddSizeReplicatesEdge) {
    FlowField f(5, 3);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 5; ++x) f.set(x, y, x, 0.0);
    const FlowField d = downscale_field(f, 2);
    ASSERT_EQ(d.width(), 3);
    ASSERT_EQ(d.height(), 2);
    EXPECT_DOUBLE_EQ(d.u(2, 0), 4.0 / 2.0);  // columns 4, 4 (replicated)
    EXPECT_DOUBLE_EQ(d.u(1, 1), 2.5 / 2.0);
}

TEST(DownscaleField, InvalidPixelsExcluded) {
    FlowField f(4, 4, 2.0, 0.0);
    f.set(0, 0, 100.0, 100.0);
    f.set_valid(0, 0, false);
    f.set_valid(2, 2, false);
    f.set_valid(3, 2, false);
    f.set_valid(2, 3, false);
    f.set_valid(3, 3, false);
    const FlowField d = downscale_field(f, 2);
    EXPECT_DOUBLE_EQ(d.u(0, 0), 1.0);
    EXPECT_TRUE(d.valid(0, 0));
    EXPECT_FALSE(d.valid(1, 1));
}

TEST(DownscaleField, BadFactor) {
    EXPECT_THROW(downscale_field(FlowField(8, 8), 0), InvalidArgument);
    EXPECT_THROW(downscale_field(FlowField(8, 8), -2), InvalidArgument);
    EXPECT_THROW(downscale_field(FlowField(8, 8), 3), InvalidArgument);
}
