#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "gyroflow/flow_core.hpp"

using namespace gyroflow;

namespace {

ImageBuffer noise_image(int w, int h, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ImageBuffer img(w, h);
    for (auto& s : img.data()) s = u(rng);
    return img;
}

FlowField random_field(int w, int h, unsigned seed, double amp) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-amp, amp);
    FlowField f(w, h);
    for (std::size_t i = 0; i < f.size(); ++i) {
        f.us()[i] = u(rng);
        f.vs()[i] = u(rng);
    }
    return f;
}

// blur-then-decimate evaluated directly as a 2-d sum over the 5x5 kernel
double decimate_oracle(const ImageBuffer& img, int cx, int cy) {
    const double k[5] = {1, 4, 6, 4, 1};
    double s = 0.0;
    for (int j = -2; j <= 2; ++j)
        for (int i = -2; i <= 2; ++i) s += k[i + 2] * k[j + 2] * img.clamped(2 * cx + i, 2 * cy + j) / 256.0;
    return s;
}

} // namespace

TEST(Warp, ZeroFieldIsIdentity) {
    const ImageBuffer img = noise_image(23, 17, 1);
    const auto r = warp_bilinear(img, FlowField(23, 17));
    EXPECT_EQ(r.image, img);
    EXPECT_EQ(r.oob.count(), 0u);
}

TEST(Warp, IntegerShiftFlagsRightColumns) {
    const ImageBuffer img = noise_image(20, 10, 2);
    const auto r = warp_bilinear(img, FlowField(20, 10, 5.0, 0.0));
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 20; ++x) {
            EXPECT_EQ(r.oob(x, y), x >= 15);
            if (x < 15) EXPECT_DOUBLE_EQ(r.image(x, y), img(x + 5, y));
            else EXPECT_DOUBLE_EQ(r.image(x, y), img(19, y));
        }
}

TEST(Warp, HalfPixelOnRamp) {
    ImageBuffer img(16, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 16; ++x) img(x, y) = x / 20.0;
    const auto r = warp_bilinear(img, FlowField(16, 4, 0.5, 0.0));
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 15; ++x) EXPECT_NEAR(r.image(x, y), 0.5 * (img(x, y) + img(x + 1, y)), 1e-9);
}

TEST(Warp, ExactOnAffineImages) {
    const int w = 40, h = 30;
    ImageBuffer img(w, h);
    const double a = 0.01, b = 0.015, c = 0.05;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img(x, y) = a * x + b * y + c;
    const FlowField f = random_field(w, h, 3, 3.0);
    const auto r = warp_bilinear(img, f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (r.oob(x, y)) continue;
            EXPECT_NEAR(r.image(x, y), a * (x + f.u(x, y)) + b * (y + f.v(x, y)) + c, 1e-9);
        }
}

TEST(Warp, InvalidFieldPixelsAreOob) {
    FlowField f(8, 8, 1.0, 1.0);
    f.set_valid(3, 3, false);
    const auto r = warp_bilinear(noise_image(8, 8, 4), f);
    EXPECT_TRUE(r.oob(3, 3));
    EXPECT_FALSE(r.oob(2, 2));
}

TEST(Warp, ColorChannelsWarpIndependently) {
    ImageBuffer img(6, 6, 3);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x)
            for (int k = 0; k < 3; ++k) img(x, y, k) = (x + 6 * y + 36 * k) / 108.0;
    const auto r = warp_bilinear(img, FlowField(6, 6, 1.0, 0.0));
    for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(r.image(2, 3, k), img(3, 3, k));
}

TEST(Warp, DimensionMismatch) {
    EXPECT_THROW(warp_bilinear(ImageBuffer(8, 8), FlowField(8, 9)), InvalidArgument);
}

TEST(Pyramid, SingleLevelIsInput) {
    const ImageBuffer img = noise_image(30, 20, 5);
    const auto p = build_pyramid(img, 1);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(p[0].image, img);
    EXPECT_EQ(p[0].scale, 1);
}

TEST(Pyramid, ConstantImageStaysConstant) {
    const auto p = build_pyramid(ImageBuffer(100, 70, 1, 0.375), 4);
    ASSERT_EQ(p.size(), 4u);
    for (const auto& l : p)
        for (double s : l.image.data()) EXPECT_DOUBLE_EQ(s, 0.375);
    EXPECT_EQ(p[3].scale, 8);
}

TEST(Pyramid, ImpulseMatchesDirectConvolution) {
    ImageBuffer img(32, 32);
    img(13, 10) = 1.0;
    img(0, 31) = 1.0;
    const auto p = build_pyramid(img, 2);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) EXPECT_NEAR(p[1].image(x, y), decimate_oracle(img, x, y), 1e-9);
}

TEST(Pyramid, OddSizesPadByReplication) {
    const ImageBuffer img = noise_image(41, 35, 6);
    const auto p = build_pyramid(img, 3);
    EXPECT_EQ(p[1].image.width(), 21);
    EXPECT_EQ(p[1].image.height(), 18);
    EXPECT_EQ(p[2].image.width(), 11);
    EXPECT_EQ(p[2].image.height(), 9);
    for (int y = 0; y < 18; ++y)
        for (int x = 0; x < 21; ++x) EXPECT_NEAR(p[1].image(x, y), decimate_oracle(img, x, y), 1e-9);
}

TEST(Pyramid, TooManyLevels) {
    EXPECT_THROW(build_pyramid(ImageBuffer(64, 64), 5), InvalidArgument);
    EXPECT_NO_THROW(build_pyramid(ImageBuffer(64, 64), 4));
    EXPECT_THROW(build_pyramid(ImageBuffer(64, 64), 0), InvalidArgument);
}

TEST(Pyramid, UpsampleDoublesVectors) {
    const FlowField f = upsample_flow(FlowField(8, 6, 1.5, -0.5), 16, 12);
    for (std::size_t i = 0; i < f.size(); ++i) {
        EXPECT_DOUBLE_EQ(f.us()[i], 3.0);
        EXPECT_DOUBLE_EQ(f.vs()[i], -1.0);
    }
}

TEST(Census, ConstantImageIsZero) {
    const auto c = census_descriptor(ImageBuffer(12, 9, 1, 0.4), 2);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 12; ++x) EXPECT_EQ(c(x, y), 0u);
}

TEST(Census, BrightPixelSetsOneBit) {
    ImageBuffer img(11, 11, 1, 0.2);
    img(5, 5) = 0.9;
    const int r = 2;
    const auto c = census_descriptor(img, r);
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            if (dx == 0 && dy == 0) continue;
            // neighbor at (5-dx, 5-dy) sees the bright pixel at offset (dx, dy)
            EXPECT_EQ(c(5 - dx, 5 - dy), std::uint64_t{1} << c.bit_index(dx, dy));
        }
    EXPECT_EQ(c(5, 5), 0u);
    EXPECT_EQ(c(0, 0), 0u);
}

TEST(Census, BitIndexSkipsCenter) {
    const CensusImage c(1, 1, 1);
    EXPECT_EQ(c.bit_count(), 8);
    EXPECT_EQ(c.bit_index(-1, -1), 0);
    EXPECT_EQ(c.bit_index(1, 0), 4);
    EXPECT_EQ(c.bit_index(0, 0), -1);
    EXPECT_EQ(c.bit_index(1, 1), 7);
}

TEST(Census, BrightnessShiftInvariance) {
    ImageBuffer img = noise_image(30, 20, 7);
    for (auto& s : img.data()) s *= 0.7;
    ImageBuffer shifted = img;
    for (auto& s : shifted.data()) s += 0.3;
    const auto a = census_descriptor(img, 2), b = census_descriptor(shifted, 2);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 30; ++x) EXPECT_EQ(hamming(a(x, y), b(x, y)), 0);
}

TEST(Census, MonotoneRemapInvariance) {
    const ImageBuffer img = noise_image(30, 20, 8);
    ImageBuffer remap = img;
    for (auto& s : remap.data()) s = std::pow(s, 2.3) * 0.5 + 0.1;
    for (int r = 1; r <= 3; ++r) {
        const auto a = census_descriptor(img, r), b = census_descriptor(remap, r);
        for (int y = 0; y < 20; ++y)
            for (int x = 0; x < 30; ++x) EXPECT_EQ(a(x, y), b(x, y));
    }
}

TEST(Census, RadiusRange) {
    EXPECT_THROW(census_descriptor(ImageBuffer(8, 8), 0), InvalidArgument);
    EXPECT_THROW(census_descriptor(ImageBuffer(8, 8), 4), InvalidArgument);
}

TEST(Census, Hamming) {
    EXPECT_EQ(hamming(0b1011, 0b0001), 2);
    EXPECT_EQ(hamming(~std::uint64_t{0}, 0), 64);
}

TEST(Occlusion, ZeroFlowsNotOccluded) {
    EXPECT_EQ(forward_backward_occlusion(FlowField(10, 10), FlowField(10, 10)).count(), 0u);
}

TEST(Occlusion, ConsistentPairNotOccluded) {
    const auto occ = forward_backward_occlusion(FlowField(40, 20, 10.0, 0.0), FlowField(40, 20, -10.0, 0.0));
    EXPECT_EQ(occ.count(), 0u);
}

TEST(Occlusion, MissingBackwardIsOccluded) {
    const auto occ = forward_backward_occlusion(FlowField(40, 20, 10.0, 0.0), FlowField(40, 20));
    EXPECT_EQ(occ.count(), occ.size());
}

TEST(Occlusion, ThresholdBoundary) {
    // |sum|^2 = 0.0625, rhs = 0.01 * (1 + 0.5625) + alpha2
    const FlowField fwd(4, 4, 1.0, 0.0), bwd(4, 4, -0.75, 0.0);
    EXPECT_EQ(forward_backward_occlusion(fwd, bwd, 0.01, 0.05).count(), 0u);
    EXPECT_EQ(forward_backward_occlusion(fwd, bwd, 0.01, 0.04).count(), 16u);
}

TEST(Occlusion, ExactInverseOfAffineFlow) {
    // fwd(p) = A p + t; its inverse backward flow evaluated exactly under bilinear sampling
    const int w = 48, h = 40;
    FlowField fwd(w, h), bwd(w, h);
    const double s = 0.02;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            fwd.set(x, y, s * x + 1.0, 0.5);
            // q = (1+s) x + 1 -> x = (q - 1)/(1+s)
            bwd.set(x, y, (x - 1.0) / (1.0 + s) - x, -0.5);
        }
    const auto occ = forward_backward_occlusion(fwd, bwd);
    for (int y = 2; y < h - 2; ++y)
        for (int x = 2; x < w - 4; ++x) EXPECT_FALSE(occ(x, y)) << x << "," << y;
}

TEST(Occlusion, DimensionMismatch) {
    EXPECT_THROW(forward_backward_occlusion(FlowField(4, 4), FlowField(5, 4)), InvalidArgument);
}

TEST(Epe, EqualFlowsGiveZero) {
    const FlowField f = random_field(10, 8, 9, 4.0);
    EXPECT_EQ(endpoint_error(f, f).mean, 0.0);
}

TEST(Epe, ThreeFourFive) {
    const FlowField f(13, 7), g(13, 7, 3.0, 4.0);
    const auto e = endpoint_error(f, g);
    EXPECT_EQ(e.mean, 5.0);
    EXPECT_EQ(e.count, 91u);
}

TEST(Epe, MaskedHalf) {
    FlowField f(10, 10), g(10, 10);
    ValidityMask m(10, 10);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) {
            if (x < 5) {
                f.set(x, y, 1.0, 0.0);
                m.set(x, y, true);
            } else {
                f.set(x, y, 7.0, 7.0);
            }
        }
    const auto e = endpoint_error(f, g, m);
    EXPECT_EQ(e.mean, 1.0);
    EXPECT_EQ(e.count, 50u);
    EXPECT_NEAR(e.map[9], std::sqrt(98.0), 1e-12);
}

TEST(Epe, HandCountedMask) {
    FlowField f(3, 2), g(3, 2);
    f.set(0, 0, 2.0, 0.0);
    f.set(1, 0, 0.0, 3.0);
    f.set(2, 1, 10.0, 0.0);
    ValidityMask m(3, 2, true);
    m.set(2, 1, false);
    EXPECT_DOUBLE_EQ(endpoint_error(f, g, m).mean, 5.0 / 5.0);
    m.set(0, 1, false);
    m.set(1, 1, false);
    EXPECT_DOUBLE_EQ(endpoint_error(f, g, m).mean, 5.0 / 3.0);
}

TEST(Epe, UsesGroundTruthFlags) {
    FlowField f(2, 1), g(2, 1);
    f.set(1, 0, 100.0, 0.0);
    g.set_valid(1, 0, false);
    EXPECT_EQ(endpoint_error(f, g).mean, 0.0);
}

TEST(Epe, SymmetricAndTranslationInvariant) {
    const FlowField f = random_field(20, 15, 10, 5.0), g = random_field(20, 15, 11, 5.0);
    const double e = endpoint_error(f, g).mean;
    EXPECT_NEAR(endpoint_error(g, f).mean, e, 1e-12);
    FlowField ft = f, gt = g;
    for (std::size_t i = 0; i < f.size(); ++i) {
        ft.us()[i] += 2.5;
        gt.us()[i] += 2.5;
        ft.vs()[i] -= 1.25;
        gt.vs()[i] -= 1.25;
    }
    EXPECT_NEAR(endpoint_error(ft, gt).mean, e, 1e-12);
}

TEST(Epe, Errors) {
    EXPECT_THROW(endpoint_error(FlowField(4, 4), FlowField(4, 4), ValidityMask(4, 4)), InvalidArgument);
    EXPECT_THROW(endpoint_error(FlowField(4, 4), FlowField(4, 5)), InvalidArgument);
    EXPECT_THROW(endpoint_error(FlowField(4, 4), FlowField(4, 4), ValidityMask(5, 4, true)), InvalidArgument);
}

TEST(Filters, BoxOfConstantIsConstant) {
    const std::vector<double> in(63, 0.25);
    for (double v : box_filter(in, 9, 7, 3)) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(Filters, BoxMatchesDirectSum) {
    std::mt19937 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int w = 11, h = 9, r = 2;
    std::vector<double> in(w * h);
    for (auto& v : in) v = u(rng);
    const auto out = box_filter(in, w, h, r);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int j = -r; j <= r; ++j)
                for (int i = -r; i <= r; ++i)
                    s += in[std::clamp(y + j, 0, h - 1) * w + std::clamp(x + i, 0, w - 1)];
            EXPECT_NEAR(out[y * w + x], s / 25.0, 1e-12);
        }
}

TEST(Filters, MaxDilatesSquare) {
    std::vector<double> in(100, 0.0);
    in[5 * 10 + 5] = 1.0;
    const auto out = max_filter(in, 10, 10, 1);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) EXPECT_EQ(out[y * 10 + x], (std::abs(x - 5) <= 1 && std::abs(y - 5) <= 1) ? 1.0 : 0.0);
    EXPECT_EQ(max_filter(in, 10, 10, 0), in);
}
