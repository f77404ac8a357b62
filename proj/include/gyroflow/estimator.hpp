#pragma once

// Classical coarse-to-fine flow estimator: per level, repeated
// warp / linearize / solve with a diffusion-regularized increment.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gyroflow/flow_core.hpp"
#include "gyroflow/types.hpp"

namespace gyroflow {

enum class DataTerm { intensity_ssd, census };

struct EstimatorConfig {
    int levels = 5;
    int iterations = 10;         // warps per level
    double lambda = 0.1;         // smoothness weight relative to the normalized data term
    DataTerm data_term = DataTerm::census;
    int inner_iterations = 30;   // SOR sweeps per warp
    double sor_omega = 1.8;
    double census_epsilon = 0.03;  // soft-census saturation, intensity units
    double gradient_floor = 0.01;  // constraint normalization, intensity units per pixel
    double robust_epsilon = 0.1;   // Charbonnier scale on the normalized residual, pixels
    int median_radius = 2;         // flow median filter after each warp, 0 = off
    double edge_kappa = 0.02;      // smoothness falls off as exp(-(dI / kappa)^2) across edges, 0 = off

    void validate() const {
        if (levels < 1) throw InvalidArgument("estimator: levels must be >= 1");
        if (iterations < 1) throw InvalidArgument("estimator: iterations must be >= 1");
        if (inner_iterations < 1) throw InvalidArgument("estimator: inner_iterations must be >= 1");
        if (!(lambda > 0.0)) throw InvalidArgument("estimator: lambda must be > 0");
        if (!(sor_omega > 0.0 && sor_omega < 2.0)) throw InvalidArgument("estimator: sor_omega must be in (0, 2)");
        if (!(census_epsilon > 0.0) || !(gradient_floor > 0.0) || !(robust_epsilon > 0.0))
            throw InvalidArgument("estimator: epsilons must be > 0");
        if (median_radius < 0) throw InvalidArgument("estimator: median_radius must be >= 0");
        if (edge_kappa < 0.0) throw InvalidArgument("estimator: edge_kappa must be >= 0");
    }
};

namespace detail {

//! scalar planes the data term compares; one plane for SSD, eight soft-census planes otherwise
inline std::vector<std::vector<double>> data_planes(const ImageBuffer& gray, const EstimatorConfig& cfg) {
    const int w = gray.width(), h = gray.height();
    if (cfg.data_term == DataTerm::intensity_ssd) return {gray.data()};
    std::vector<std::vector<double>> planes;
    const double e2 = cfg.census_epsilon * cfg.census_epsilon;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            std::vector<double> p(static_cast<std::size_t>(w) * h);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double d = gray.clamped(x + dx, y + dy) - gray(x, y);
                    p[static_cast<std::size_t>(y) * w + x] = d / std::sqrt(e2 + d * d);
                }
            planes.push_back(std::move(p));
        }
    return planes;
}

inline void central_gradient(const std::vector<double>& p, int w, int h, std::vector<double>& gx,
                             std::vector<double>& gy) {
    gx.resize(p.size());
    gy.resize(p.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const auto at = [&](int xx, int yy) {
                return p[static_cast<std::size_t>(clamp_index(yy, h)) * w + clamp_index(xx, w)];
            };
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            gx[i] = 0.5 * (at(x + 1, y) - at(x - 1, y));
            gy[i] = 0.5 * (at(x, y + 1) - at(x, y - 1));
        }
}

inline std::vector<double> median_filter(const std::vector<double>& in, int w, int h, int r) {
    std::vector<double> out(in.size()), win;
    win.reserve(static_cast<std::size_t>((2 * r + 1) * (2 * r + 1)));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            win.clear();
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx)
                    win.push_back(in[static_cast<std::size_t>(clamp_index(y + dy, h)) * w + clamp_index(x + dx, w)]);
            auto mid = win.begin() + static_cast<std::ptrdiff_t>(win.size() / 2);
            std::nth_element(win.begin(), mid, win.end());
            out[static_cast<std::size_t>(y) * w + x] = *mid;
        }
    return out;
}

} // namespace detail

//! Refines `init` on one pyramid level; returns init + accumulated increments.
//! `level` only labels numeric errors.
inline FlowField refine_level(const ImageBuffer& image_a, const ImageBuffer& image_b, const FlowField& init,
                              const EstimatorConfig& cfg, int level = 0) {
    cfg.validate();
    if (image_a.width() != image_b.width() || image_a.height() != image_b.height())
        throw InvalidArgument("refine_level: image sizes differ");
    detail::require_same_size(image_a.width(), image_a.height(), init.width(), init.height(), "refine_level init");
    const int w = image_a.width(), h = image_a.height();
    const std::size_t n = static_cast<std::size_t>(w) * h;

    const auto planes_a = detail::data_planes(to_gray(image_a), cfg);
    const auto planes_b = detail::data_planes(to_gray(image_b), cfg);
    const std::size_t k = planes_a.size();
    std::vector<std::vector<double>> ax(k), ay(k);
    for (std::size_t c = 0; c < k; ++c) detail::central_gradient(planes_a[c], w, h, ax[c], ay[c]);

    FlowField flow = init;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(flow.us()[i]) || !std::isfinite(flow.vs()[i]) || !flow.valid(i)) {
            flow.us()[i] = 0.0;
            flow.vs()[i] = 0.0;
        }
        flow.set_valid(i, true);
    }

    // per-edge smoothness weights from frame a: ex[i] couples i and i+1, ey[i] couples i and i+w
    std::vector<double> ex(n, 1.0), ey(n, 1.0);
    if (cfg.edge_kappa > 0.0) {
        const ImageBuffer ga = to_gray(image_a);
        // keeps every pixel coupled to its neighbours; a fully cut pixel with
        // a rank-deficient data term has a singular block
        constexpr double edge_floor = 0.05;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                if (x + 1 < w) {
                    const double d = (ga(x + 1, y) - ga(x, y)) / cfg.edge_kappa;
                    ex[i] = std::max(edge_floor, std::exp(-d * d));
                }
                if (y + 1 < h) {
                    const double d = (ga(x, y + 1) - ga(x, y)) / cfg.edge_kappa;
                    ey[i] = std::max(edge_floor, std::exp(-d * d));
                }
            }
    }

    const double g2 = cfg.gradient_floor * cfg.gradient_floor;
    const double re2 = cfg.robust_epsilon * cfg.robust_epsilon;
    const double alpha = cfg.lambda;
    std::vector<double> j11(n), j12(n), j22(n), b1(n), b2(n);
    std::vector<double> du(n), dv(n), bw(n), bx, by;

    for (int it = 0; it < cfg.iterations; ++it) {
        std::fill(j11.begin(), j11.end(), 0.0);
        std::fill(j12.begin(), j12.end(), 0.0);
        std::fill(j22.begin(), j22.end(), 0.0);
        std::fill(b1.begin(), b1.end(), 0.0);
        std::fill(b2.begin(), b2.end(), 0.0);
        std::vector<double> resid(n, 0.0);
        std::vector<std::uint8_t> oob(n, 0);

        for (std::size_t c = 0; c < k; ++c) {
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * w + x;
                    double sx = x + flow.us()[i], sy = y + flow.vs()[i];
                    if (!(sx >= 0.0 && sx <= w - 1 && sy >= 0.0 && sy <= h - 1)) oob[i] = 1;
                    sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
                    sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
                    bw[i] = detail::bilinear(planes_b[c].data(), w, h, sx, sy);
                }
            detail::central_gradient(bw, w, h, bx, by);
            for (std::size_t i = 0; i < n; ++i) {
                const double ix = 0.5 * (ax[c][i] + bx[i]);
                const double iy = 0.5 * (ay[c][i] + by[i]);
                const double itt = bw[i] - planes_a[c][i];
                const double rho = 1.0 / (ix * ix + iy * iy + g2);
                j11[i] += rho * ix * ix;
                j12[i] += rho * ix * iy;
                j22[i] += rho * iy * iy;
                b1[i] += rho * ix * itt;
                b2[i] += rho * iy * itt;
                resid[i] += rho * itt * itt;
            }
        }
        // Charbonnier weights on the lagged normalized residual, averaged over planes
        for (std::size_t i = 0; i < n; ++i) {
            const double wt = oob[i] ? 0.0 : cfg.robust_epsilon / std::sqrt(resid[i] / k + re2) / k;
            j11[i] *= wt;
            j12[i] *= wt;
            j22[i] *= wt;
            b1[i] *= wt;
            b2[i] *= wt;
        }

        std::fill(du.begin(), du.end(), 0.0);
        std::fill(dv.begin(), dv.end(), 0.0);
        const auto& u0 = flow.us();
        const auto& v0 = flow.vs();
        for (int sweep = 0; sweep < cfg.inner_iterations; ++sweep) {
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * w + x;
                    double su = 0.0, sv = 0.0, nb = 0.0;
                    const auto add = [&](std::size_t q, double e) {
                        su += e * (u0[q] + du[q] - u0[i]);
                        sv += e * (v0[q] + dv[q] - v0[i]);
                        nb += e;
                    };
                    if (x > 0) add(i - 1, ex[i - 1]);
                    if (x + 1 < w) add(i + 1, ex[i]);
                    if (y > 0) add(i - w, ey[i - w]);
                    if (y + 1 < h) add(i + w, ey[i]);
                    const double a11 = j11[i] + alpha * nb, a22 = j22[i] + alpha * nb, a12 = j12[i];
                    const double r1 = alpha * su - b1[i], r2 = alpha * sv - b2[i];
                    const double det = a11 * a22 - a12 * a12;
                    const double nu = (a22 * r1 - a12 * r2) / det;
                    const double nv = (a11 * r2 - a12 * r1) / det;
                    du[i] += cfg.sor_omega * (nu - du[i]);
                    dv[i] += cfg.sor_omega * (nv - dv[i]);
                }
        }

        std::vector<double> nu(n), nv(n);
        for (std::size_t i = 0; i < n; ++i) {
            nu[i] = u0[i] + du[i];
            nv[i] = v0[i] + dv[i];
            if (!std::isfinite(nu[i]) || !std::isfinite(nv[i]))
                throw NumericError("refine_level: non-finite flow at level " + std::to_string(level) +
                                   ", iteration " + std::to_string(it));
        }
        if (cfg.median_radius > 0) {
            nu = detail::median_filter(nu, w, h, cfg.median_radius);
            nv = detail::median_filter(nv, w, h, cfg.median_radius);
        }
        flow.us() = std::move(nu);
        flow.vs() = std::move(nv);
    }
    return flow;
}

//! Supplies the initialization for a level: (level, image_a, image_b,
//! upsampled previous flow or nullopt at the coarsest level) -> init.
using LevelInitProvider = std::function<FlowField(int, const ImageBuffer&, const ImageBuffer&,
                                                  const std::optional<FlowField>&)>;

//! coarse-to-fine: init each level (provider or upsampled previous flow),
//! refine, upsample with vector doubling
inline FlowField estimate_pyramid(const ImageBuffer& image_a, const ImageBuffer& image_b,
                                  const LevelInitProvider& provider, const EstimatorConfig& cfg) {
    cfg.validate();
    if (image_a.width() != image_b.width() || image_a.height() != image_b.height())
        throw InvalidArgument("estimate_pyramid: image sizes differ");
    const auto pa = build_pyramid(to_gray(image_a), cfg.levels);
    const auto pb = build_pyramid(to_gray(image_b), cfg.levels);
    std::optional<FlowField> prev;
    for (int l = cfg.levels - 1; l >= 0; --l) {
        const ImageBuffer& a = pa[static_cast<std::size_t>(l)].image;
        const ImageBuffer& b = pb[static_cast<std::size_t>(l)].image;
        std::optional<FlowField> up;
        if (prev) up = upsample_flow(*prev, a.width(), a.height());
        FlowField init = provider ? provider(l, a, b, up) : (up ? *up : FlowField(a.width(), a.height()));
        prev = refine_level(a, b, init, cfg, l);
    }
    return *prev;
}

inline FlowField estimate_pyramid(const ImageBuffer& image_a, const ImageBuffer& image_b,
                                  const EstimatorConfig& cfg = {}) {
    return estimate_pyramid(image_a, image_b, LevelInitProvider{}, cfg);
}

} // namespace gyroflow
