// ipt: inverse path tracing toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ipt/transport.hpp"

namespace ipt {

// Color and gradient estimates for one pixel. The two estimates come from
// disjoint counter-based streams: their product is used in the loss gradient,
// and correlated samples would bias that product.
struct PixelGradientEstimate {
    RadianceEstimate color;
    SparseGradient grad;
};

// Monte Carlo estimate of d(pixel RGB)/d(theta) for every parameter touched by
// the sampled paths. Sampling strategy (MIS, NEE, lobe mixture) matches
// trace_radiance; sampling pdfs and MIS weights are treated as constants of
// the differentiation.
inline SparseGradient trace_gradient(const Scene& scene, const ParameterSet& params,
                                     const LightSampler& lights, const TraceConfig& cfg, int px,
                                     int py, const Camera& camera, const StreamKey& key,
                                     int64_t* segments = nullptr) {
    PathTracer tracer(scene, params, lights, cfg);
    std::uint32_t pixel =
        static_cast<std::uint32_t>(py) * static_cast<std::uint32_t>(camera.width) + px;
    SparseGradient grad;
    for (int s = 0; s < cfg.paths_per_pixel_grad; ++s) {
        RngStream rng = make_stream(key, pixel, static_cast<std::uint32_t>(s));
        tracer.trace_one_path(px, py, camera, rng, &grad, segments);
    }
    grad.scale(1.0 / static_cast<double>(cfg.paths_per_pixel_grad));
    return grad;
}

// Pixel color from paths_per_pixel_color paths and gradient from
// paths_per_pixel_grad paths, on purpose-separated streams.
inline PixelGradientEstimate estimate_pixel(const Scene& scene, const ParameterSet& params,
                                            const LightSampler& lights, const TraceConfig& cfg,
                                            int px, int py, const Camera& camera,
                                            std::uint32_t image_id, std::uint32_t iteration,
                                            std::uint64_t seed, int64_t* segments = nullptr) {
    PixelGradientEstimate est;
    StreamKey color_key{seed, image_id, iteration, StreamPurpose::Color};
    StreamKey grad_key{seed, image_id, iteration, StreamPurpose::Gradient};
    est.color = trace_radiance(scene, params, lights, cfg, px, py, camera, color_key, segments);
    est.grad = trace_gradient(scene, params, lights, cfg, px, py, camera, grad_key, segments);
    return est;
}

// Central difference of the pixel color in one parameter slot under common
// random numbers: both sides re-trace the exact same paths (sampling
// distributions stay frozen at `params`) while the probed slot moves by +-h in
// the integrand. This isolates the quantity the analytic gradient estimates
// and cancels the Monte Carlo noise in the difference.
inline RGB finite_difference_oracle(const Scene& scene, const ParameterSet& params,
                                    const LightSampler& lights, const TraceConfig& cfg, int px,
                                    int py, const Camera& camera, int32_t slot, double h,
                                    const StreamKey& key, int paths = 0) {
    if (paths <= 0)
        paths = cfg.paths_per_pixel_color;
    ParameterSet plus = params;
    ParameterSet minus = params;
    plus.values()[slot] += h;
    minus.values()[slot] -= h;

    std::uint32_t pixel =
        static_cast<std::uint32_t>(py) * static_cast<std::uint32_t>(camera.width) + px;
    PathTracer tracer_plus(scene, plus, params, lights, cfg);
    PathTracer tracer_minus(scene, minus, params, lights, cfg);
    RGB sum_plus(0.0), sum_minus(0.0);
    for (int s = 0; s < paths; ++s) {
        RngStream rng_p = make_stream(key, pixel, static_cast<std::uint32_t>(s));
        RngStream rng_m = make_stream(key, pixel, static_cast<std::uint32_t>(s));
        sum_plus += tracer_plus.trace_one_path(px, py, camera, rng_p, nullptr, nullptr);
        sum_minus += tracer_minus.trace_one_path(px, py, camera, rng_m, nullptr, nullptr);
    }
    return (sum_plus - sum_minus) / (2.0 * h * static_cast<double>(paths));
}

}  // namespace ipt
