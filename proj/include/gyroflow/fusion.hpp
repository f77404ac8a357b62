#pragma once

// Self-guided fusion: a residual-driven fusion map decides, per pixel,
// between the gyro field (background) and the image flow (motion detail);
// the fused flow initializes every pyramid level of the estimator.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "gyroflow/estimator.hpp"
#include "gyroflow/flow_core.hpp"
#include "gyroflow/gyro_field.hpp"
#include "gyroflow/types.hpp"

namespace gyroflow {

//! per-pixel weight in [0, 1]; 0 keeps the gyro field, 1 the fusion flow
class FusionMap {
public:
    FusionMap() = default;
    FusionMap(int width, int height, double value = 0.0)
        : width_(width), height_(height), weights_(static_cast<std::size_t>(width) * height, value) {
        if (width <= 0 || height <= 0) throw InvalidArgument("fusion map dimensions must be positive");
    }
    FusionMap(int width, int height, std::vector<double> weights) : FusionMap(width, height) {
        if (weights.size() != weights_.size()) throw InvalidArgument("fusion map weight count mismatch");
        weights_ = std::move(weights);
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    double operator()(int x, int y) const { return weights_[static_cast<std::size_t>(y) * width_ + x]; }
    double operator[](std::size_t i) const { return weights_[i]; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    bool in_range() const {
        return std::all_of(weights_.begin(), weights_.end(), [](double m) { return m >= 0.0 && m <= 1.0; });
    }

    double mean() const {
        double s = 0.0;
        for (double m : weights_) s += m;
        return s / static_cast<double>(weights_.size());
    }

private:
    int width_ = 0, height_ = 0;
    std::vector<double> weights_;
};

struct FusionConfig {
    double sigma = 0.1;         // residual scale, normalized census-hamming units
    int smoothing_radius = 2;   // box filter on residuals and map, pixels per level
    int census_radius = 2;
    int dilation = 1;           // max filter on the map before smoothing
    std::vector<int> levels;    // pyramid levels with fusion enabled; empty = all
    bool subtract_noise_floor = true;
    int presmooth = 2;          // binomial blur passes before the census comparison (level 0 only)

    bool enabled_at(int level) const {
        return levels.empty() || std::find(levels.begin(), levels.end(), level) != levels.end();
    }

    void validate() const {
        if (!(sigma > 0.0)) throw InvalidArgument("fusion: sigma must be > 0");
        if (smoothing_radius < 0) throw InvalidArgument("fusion: smoothing_radius must be >= 0");
        if (dilation < 0) throw InvalidArgument("fusion: dilation must be >= 0");
        if (presmooth < 0) throw InvalidArgument("fusion: presmooth must be >= 0");
        if (census_radius < 1 || census_radius > 3) throw InvalidArgument("fusion: census_radius must be in [1, 3]");
        for (int l : levels)
            if (l < 0) throw InvalidArgument("fusion: negative level index");
    }
};

namespace detail {

//! box-averaged normalized census hamming distance between a and warped b
inline std::vector<double> census_residual(const CensusImage& ca, const ImageBuffer& warped, int smoothing) {
    const int w = ca.width(), h = ca.height();
    const CensusImage cb = census_descriptor(warped, ca.radius());
    const double bits = ca.bit_count();
    std::vector<double> r(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) r[static_cast<std::size_t>(y) * w + x] = hamming(ca(x, y), cb(x, y)) / bits;
    return box_filter(r, w, h, smoothing);
}

} // namespace detail

//! Aligns frame b to frame a with the gyro field and scores the census
//! mismatch r_g against a reference level: the residual of the image flow
//! when one is given, otherwise the frame median of r_g (the noise floor of
//! gyro-aligned background). m = 1 - exp(-(max(0, r_g - ref) / sigma)^2),
//! so the map only opens where the gyro field explains the pixel worse than
//! the alternative. Samples the gyro warp cannot observe get m = 1; the map
//! is then dilated, box-smoothed and clamped to [0, 1].
inline FusionMap compute_fusion_map(const ImageBuffer& image_a, const ImageBuffer& image_b, const FlowField& gyro,
                                    const FusionConfig& cfg = {}, const std::optional<FlowField>& flow = std::nullopt) {
    cfg.validate();
    detail::require_same_size(image_a.width(), image_a.height(), image_b.width(), image_b.height(),
                              "compute_fusion_map");
    detail::require_same_size(image_a.width(), image_a.height(), gyro.width(), gyro.height(),
                              "compute_fusion_map gyro field");
    if (flow)
        detail::require_same_size(image_a.width(), image_a.height(), flow->width(), flow->height(),
                                  "compute_fusion_map flow");
    const int w = image_a.width(), h = image_a.height();
    const std::size_t n = static_cast<std::size_t>(w) * h;
    ImageBuffer ga = to_gray(image_a), gb = to_gray(image_b);
    for (int i = 0; i < cfg.presmooth; ++i) {
        ga = binomial_blur(ga);
        gb = binomial_blur(gb);
    }
    const CensusImage ca = census_descriptor(ga, cfg.census_radius);
    const WarpResult warped = warp_bilinear(gb, gyro);
    const std::vector<double> r = detail::census_residual(ca, warped.image, cfg.smoothing_radius);

    std::vector<double> ref(n, 0.0);
    if (flow) {
        ref = detail::census_residual(ca, warp_bilinear(gb, *flow).image, cfg.smoothing_radius);
    } else if (cfg.subtract_noise_floor) {
        std::vector<double> inside;
        inside.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            if (!warped.oob[i]) inside.push_back(r[i]);
        if (!inside.empty()) {
            auto mid = inside.begin() + static_cast<std::ptrdiff_t>(inside.size() / 2);
            std::nth_element(inside.begin(), mid, inside.end());
            std::fill(ref.begin(), ref.end(), *mid);
        }
    }
    std::vector<double> m(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (warped.oob[i]) {
            m[i] = 1.0;
            continue;
        }
        const double e = std::max(0.0, r[i] - ref[i]) / cfg.sigma;
        m[i] = 1.0 - std::exp(-e * e);
    }
    m = max_filter(m, w, h, cfg.dilation);
    m = box_filter(m, w, h, cfg.smoothing_radius);
    for (double& v : m) v = std::clamp(v, 0.0, 1.0);
    return {w, h, std::move(m)};
}

//! Stand-in for the learned fusion block: the image flow where it is
//! valid, the gyro field elsewhere. `flow` may be absent (coarsest level).
inline FlowField compute_fusion_flow(const FlowField& gyro, const std::optional<FlowField>& flow) {
    if (!flow) return gyro;
    detail::require_same_size(gyro.width(), gyro.height(), flow->width(), flow->height(), "compute_fusion_flow");
    FlowField out = gyro;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double u = flow->us()[i], v = flow->vs()[i];
        if (flow->valid(i) && std::isfinite(u) && std::isfinite(v)) {
            out.us()[i] = u;
            out.vs()[i] = v;
            out.set_valid(i, true);
        }
    }
    return out;
}

//! M * O + (1 - M) * G per pixel and component
inline FlowField fuse(const FlowField& gyro, const FlowField& fusion_flow, const FusionMap& map) {
    detail::require_same_size(gyro.width(), gyro.height(), fusion_flow.width(), fusion_flow.height(), "fuse");
    detail::require_same_size(gyro.width(), gyro.height(), map.width(), map.height(), "fuse map");
    if (!map.in_range()) throw InvalidArgument("fuse: fusion map weight outside [0, 1]");
    FlowField out(gyro.width(), gyro.height());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double m = map[i];
        out.us()[i] = m * fusion_flow.us()[i] + (1.0 - m) * gyro.us()[i];
        out.vs()[i] = m * fusion_flow.vs()[i] + (1.0 - m) * gyro.vs()[i];
        out.set_valid(i, fusion_flow.valid(i) && gyro.valid(i));
    }
    return out;
}

//! Everything one fusion step produced at a pyramid level.
struct FusionLevel {
    int level = 0;
    FlowField gyro;
    FusionMap map;
    FlowField fused;
};

//! Coarse-to-fine estimation where each fusion-enabled level starts from
//! the fused flow of the downscaled gyro field and the previous level's
//! flow. `trace`, when given, receives one entry per fusion step.
inline FlowField run_gyroflow(const ImageBuffer& image_a, const ImageBuffer& image_b, const FlowField& gyro_field,
                              const EstimatorConfig& est_cfg = {}, const FusionConfig& fusion_cfg = {},
                              std::vector<FusionLevel>* trace = nullptr) {
    fusion_cfg.validate();
    detail::require_same_size(image_a.width(), image_a.height(), gyro_field.width(), gyro_field.height(),
                              "run_gyroflow gyro field");
    const auto provider = [&](int level, const ImageBuffer& a, const ImageBuffer& b,
                              const std::optional<FlowField>& prev) -> FlowField {
        if (!fusion_cfg.enabled_at(level)) return prev ? *prev : FlowField(a.width(), a.height());
        const FlowField g = downscale_field(gyro_field, 1 << level);
        detail::require_same_size(a.width(), a.height(), g.width(), g.height(), "run_gyroflow level");
        FusionConfig level_cfg = fusion_cfg;
        if (level > 0) level_cfg.presmooth = 0;  // pyramid levels are already low-passed
        FusionMap m = compute_fusion_map(a, b, g, level_cfg, prev);
        FlowField fused = fuse(g, compute_fusion_flow(g, prev), m);
        if (trace) trace->push_back({level, g, m, fused});
        return fused;
    };
    FlowField flow = estimate_pyramid(image_a, image_b, provider, est_cfg);
    // level 0 fusion also applies to the refined full-resolution output
    if (!fusion_cfg.enabled_at(0)) return flow;
    FusionMap m = compute_fusion_map(image_a, image_b, gyro_field, fusion_cfg, flow);
    FlowField fused = fuse(gyro_field, compute_fusion_flow(gyro_field, flow), m);
    if (trace) trace->push_back({0, gyro_field, m, fused});
    return fused;
}

} // namespace gyroflow
