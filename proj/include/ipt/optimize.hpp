// ipt: inverse path tracing toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <vector>

#include "ipt/gradients.hpp"
#include "ipt/imaging.hpp"
#include "ipt/parallel.hpp"
#include "ipt/render.hpp"

namespace ipt {

// One captured view: linear-radiance image plus the camera that produced it.
struct Capture {
    Image image;
    Camera camera;
};

using CaptureSet = std::vector<Capture>;

inline void validate_captures(const CaptureSet& captures) {
    for (std::size_t i = 0; i < captures.size(); ++i) {
        const Capture& c = captures[i];
        if (c.image.width != c.camera.width || c.image.height != c.camera.height)
            throw InputError("capture " + std::to_string(i) + ": image is " +
                             std::to_string(c.image.width) + "x" + std::to_string(c.image.height) +
                             " but camera expects " + std::to_string(c.camera.width) + "x" +
                             std::to_string(c.camera.height));
        for (float v : c.image.data)
            if (!(v >= 0.0f) || !std::isfinite(v))
                throw InputError("capture " + std::to_string(i) +
                                 ": pixels must be finite and non-negative");
    }
}

// Per-pixel data term of Eq. 3: sum over channels of |captured - estimated|.
inline double l1_loss(const RGB& captured, const RGB& estimated) {
    RGB d = captured - estimated;
    return std::abs(d.x) + std::abs(d.y) + std::abs(d.z);
}

// slot -> scalar contribution to dE/dtheta for one pixel.
using LossGradient = std::vector<std::pair<int32_t, double>>;

// Contracts the pixel's radiance gradient with -sgn(residual): the descent
// direction of the L1 data term. sgn(0) = 0.
inline LossGradient loss_gradient_contribution(const PixelGradientEstimate& est,
                                               const RGB& captured) {
    RGB resid = captured - est.color.value;
    RGB s{-sgn(resid.x), -sgn(resid.y), -sgn(resid.z)};
    LossGradient out;
    out.reserve(est.grad.size());
    for (const auto& e : est.grad.entries())
        out.emplace_back(e.slot, dot(e.value, s));
    return out;
}

// L1 subgradient of the emission regularizer: lambda for positive flux, zero
// at zero. Material slots are untouched.
inline void add_regularizer_gradient(const ParameterSet& params, double reg_lambda,
                                     std::vector<double>& grad) {
    int32_t begin = params.emission_slot_base(0);
    for (int32_t s = begin; s < params.size(); ++s)
        grad[s] += params.values()[s] > 0.0 ? reg_lambda : 0.0;
}

inline std::vector<double> regularizer_gradient(const ParameterSet& params, double reg_lambda) {
    std::vector<double> grad(params.size(), 0.0);
    add_regularizer_gradient(params, reg_lambda, grad);
    return grad;
}

inline double regularizer_term(const ParameterSet& params, double reg_lambda) {
    double sum = 0.0;
    for (int32_t s = params.emission_slot_base(0); s < params.size(); ++s)
        sum += std::abs(params.values()[s]);
    return reg_lambda * sum;
}

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    int64_t step_count = 0;
    double learning_rate = 5e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(int32_t size, double lr = 5e-3)
        : first_moment(size, 0.0), second_moment(size, 0.0), learning_rate(lr) {}
};

// Bias-corrected ADAM step followed by projection onto the feasible box.
inline void adam_step(AdamState& state, ParameterSet& params, const std::vector<double>& grad) {
    ++state.step_count;
    double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    auto& v = params.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        double g = grad[i];
        state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
        state.second_moment[i] =
            state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
        double m_hat = state.first_moment[i] / c1;
        double v_hat = state.second_moment[i] / c2;
        v[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.eps);
    }
    params.project();
}

// Uniform-with-replacement draw over the union of all pixels of all images.
inline std::vector<std::pair<int, int>> sample_batch(const CaptureSet& captures, int batch_size,
                                                     RngStream& rng) {
    int64_t total = 0;
    for (const auto& c : captures)
        total += static_cast<int64_t>(c.image.pixel_count());
    if (total == 0)
        throw InputError("sample_batch: no pixels to sample");
    std::vector<std::pair<int, int>> batch;
    batch.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        int64_t idx = std::min(static_cast<int64_t>(rng.next_double() * total), total - 1);
        int image = 0;
        while (idx >= static_cast<int64_t>(captures[image].image.pixel_count()))
            idx -= static_cast<int64_t>(captures[image++].image.pixel_count());
        batch.emplace_back(image, static_cast<int>(idx));
    }
    return batch;
}

struct SubdivisionConfig {
    bool enabled = false;
    double error_threshold_factor = 2.0;  // x median per-triangle l2 error
    double error_abs_floor = 0.01;        // ignore error below this magnitude
    int max_depth = 2;                    // per-triangle split budget
    int iterations_per_round = 2000;
    int min_pixels = 4;  // triangles covering fewer pixels never split
};

struct EarlyStopConfig {
    bool enabled = false;
    int window = 100;
    double rel_improvement = 1e-4;
};

struct OptimizeConfig {
    int batch_size = 8;
    int iterations = 10000;
    double reg_lambda = 1e-3;
    double learning_rate = 5e-3;
    std::uint64_t seed = 0;
    double light_floor = -1.0;   // < 0: use the sampler's area-scaled default
    int64_t segment_budget = 0;  // > 0: stop once this many path segments are traced
    SubdivisionConfig subdivision;
    EarlyStopConfig early_stop;
    TraceConfig trace;

    void validate() const {
        if (batch_size < 1)
            throw InputError("batch_size must be >= 1");
        if (trace.max_bounces < 1 || trace.paths_per_pixel_color < 1 ||
            trace.paths_per_pixel_grad < 1)
            throw InputError("trace counts must be >= 1");
        if (subdivision.max_depth > 4)
            throw InputError("subdivision max_depth is capped at 4");
        if (reg_lambda < 0.0)
            throw InputError("reg_lambda must be >= 0");
    }
};

struct LogRow {
    int64_t iteration = 0;
    double time_s = 0.0;
    double batch_loss = 0.0;
    double smoothed_loss = 0.0;
    double reg_term = 0.0;
    int64_t segments = 0;  // cumulative traced path segments (not serialized)
};

inline void write_convergence_csv(const std::vector<LogRow>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw InputError(path + ": cannot open for writing");
    out << "iteration,time_s,batch_loss,smoothed_loss,reg_term\n";
    char line[192];
    for (const auto& row : log) {
        std::snprintf(line, sizeof(line), "%lld,%.3f,%.9g,%.9g,%.9g\n",
                      static_cast<long long>(row.iteration), row.time_s, row.batch_loss,
                      row.smoothed_loss, row.reg_term);
        out << line;
    }
}

struct OptimizationResult {
    ParameterSet params;
    std::vector<LogRow> log;
    int64_t segments = 0;
    int subdivision_splits = 0;
    std::optional<Scene> refined_scene;  // set when subdivision ran
    std::vector<int> triangle_depth;     // split depth per final triangle
};

namespace detail {

// EMA-smoothed minibatch loss; raw L1 at B=8 is far too noisy to plot.
constexpr double kSmoothingAlpha = 0.01;

struct OptimizeLoop {
    const Scene& scene;
    const CaptureSet& captures;
    const OptimizeConfig& cfg;
    ThreadPool& pool;
    std::chrono::steady_clock::time_point start;
    int64_t segments = 0;
    int64_t iteration = 0;
    double smoothed = 0.0;
    bool have_smoothed = false;
    std::vector<double> window_losses;

    // Runs `iterations` ADAM steps on `params`; returns false when a budget or
    // early-stop condition ended the phase.
    bool run(ParameterSet& params, AdamState& adam, LightSampler& lights, int iterations,
             std::vector<LogRow>& log) {
        double floor = cfg.light_floor >= 0.0 ? cfg.light_floor : lights.default_floor();
        std::vector<PixelGradientEstimate> estimates(cfg.batch_size);
        std::vector<int64_t> seg_counts(cfg.batch_size);
        std::vector<double> grad(params.size());

        for (int step = 0; step < iterations; ++step) {
            if (cfg.segment_budget > 0 && segments >= cfg.segment_budget)
                return false;
            lights.refresh_weights(scene, params, floor);

            StreamKey batch_key{cfg.seed, 0, static_cast<std::uint32_t>(iteration),
                                StreamPurpose::BatchSampling};
            RngStream batch_rng = make_stream(batch_key, 0, 0);
            auto batch = sample_batch(captures, cfg.batch_size, batch_rng);

            pool.parallel_for(cfg.batch_size, [&](int64_t k) {
                auto [image, pixel] = batch[k];
                const Camera& cam = captures[image].camera;
                seg_counts[k] = 0;
                estimates[k] = estimate_pixel(scene, params, lights, cfg.trace,
                                              pixel % cam.width, pixel / cam.width, cam,
                                              static_cast<std::uint32_t>(image),
                                              static_cast<std::uint32_t>(iteration), cfg.seed,
                                              &seg_counts[k]);
            });

            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (int k = 0; k < cfg.batch_size; ++k) {
                auto [image, pixel] = batch[k];
                segments += seg_counts[k];
                if (!estimates[k].grad.all_finite()) {
                    int32_t bad_slot = -1;
                    for (const auto& e : estimates[k].grad.entries())
                        if (!is_finite(e.value))
                            bad_slot = e.slot;
                    throw NumericalError(
                        "non-finite gradient for slot " + std::to_string(bad_slot) +
                        " at image " + std::to_string(image) + " pixel " + std::to_string(pixel) +
                        " iteration " + std::to_string(iteration));
                }
                const Camera& cam = captures[image].camera;
                RGB captured = captures[image].image.at(pixel % cam.width, pixel / cam.width);
                batch_loss += l1_loss(captured, estimates[k].color.value);
                for (const auto& [slot, value] : loss_gradient_contribution(estimates[k], captured))
                    grad[slot] += value / cfg.batch_size;
            }
            batch_loss /= cfg.batch_size;
            add_regularizer_gradient(params, cfg.reg_lambda, grad);

            adam_step(adam, params, grad);

            smoothed = have_smoothed
                           ? (1.0 - kSmoothingAlpha) * smoothed + kSmoothingAlpha * batch_loss
                           : batch_loss;
            have_smoothed = true;

            LogRow row;
            row.iteration = iteration;
            row.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                             .count();
            row.batch_loss = batch_loss;
            row.smoothed_loss = smoothed;
            row.reg_term = regularizer_term(params, cfg.reg_lambda);
            row.segments = segments;
            log.push_back(row);
            ++iteration;

            if (cfg.early_stop.enabled) {
                window_losses.push_back(batch_loss);
                int w = cfg.early_stop.window;
                if (static_cast<int>(window_losses.size()) >= 2 * w &&
                    iteration % w == 0) {
                    double recent = 0.0, previous = 0.0;
                    for (int i = 0; i < w; ++i) {
                        recent += window_losses[window_losses.size() - 1 - i];
                        previous += window_losses[window_losses.size() - 1 - w - i];
                    }
                    if (previous > 0.0 &&
                        (previous - recent) / previous < cfg.early_stop.rel_improvement)
                        return false;
                }
            }
        }
        return true;
    }
};

}  // namespace detail

// Average per-pixel l2 residual of each triangle, with pixel ownership taken
// from the center primary ray. Triangles covering no pixels report -1.
inline std::vector<double> per_triangle_errors(const Scene& scene, const CaptureSet& captures,
                                               const ParameterSet& params,
                                               const LightSampler& lights, const TraceConfig& cfg,
                                               std::uint64_t seed, ThreadPool& pool,
                                               std::vector<int64_t>* coverage_out = nullptr,
                                               int64_t* segments = nullptr) {
    std::vector<double> error_sum(scene.triangles.size(), 0.0);
    std::vector<int64_t> coverage(scene.triangles.size(), 0);
    for (std::size_t v = 0; v < captures.size(); ++v) {
        const Camera& cam = captures[v].camera;
        TraceConfig ecfg = cfg;
        StreamKey key{seed, static_cast<std::uint32_t>(v), 0, StreamPurpose::ErrorRender};
        Image rendered(cam.width, cam.height);
        int64_t n = static_cast<int64_t>(cam.width) * cam.height;
        std::vector<int32_t> owner(n, -1);
        std::vector<int64_t> segs(segments ? n : 0, 0);
        pool.parallel_for(n, [&](int64_t i) {
            int px = static_cast<int>(i % cam.width);
            int py = static_cast<int>(i / cam.width);
            auto est = trace_radiance(scene, params, lights, ecfg, px, py, cam, key,
                                      segments ? &segs[i] : nullptr);
            rendered.set(px, py, est.value);
            auto hit = scene.intersect(cam.origin(), cam.ray_direction(px, py, 0.5, 0.5), 0.0);
            if (hit)
                owner[i] = hit->triangle_id;
        });
        for (int64_t i = 0; i < n; ++i) {
            if (segments)
                *segments += segs[i];
            if (owner[i] < 0)
                continue;
            int px = static_cast<int>(i % cam.width);
            int py = static_cast<int>(i / cam.width);
            error_sum[owner[i]] += length(captures[v].image.at(px, py) - rendered.at(px, py));
            coverage[owner[i]] += 1;
        }
    }
    std::vector<double> avg(scene.triangles.size(), -1.0);
    for (std::size_t t = 0; t < avg.size(); ++t)
        if (coverage[t] > 0)
            avg[t] = error_sum[t] / static_cast<double>(coverage[t]);
    if (coverage_out)
        *coverage_out = std::move(coverage);
    return avg;
}

// Chooses which triangles to split: error above max(factor x median, floor),
// enough pixel support, and below the depth cap.
inline std::vector<bool> select_triangles_to_split(const std::vector<double>& errors,
                                                   const std::vector<int64_t>& coverage,
                                                   const std::vector<int>& depth,
                                                   const SubdivisionConfig& cfg) {
    std::vector<double> covered;
    for (double e : errors)
        if (e >= 0.0)
            covered.push_back(e);
    std::vector<bool> flags(errors.size(), false);
    if (covered.empty())
        return flags;
    std::size_t mid = covered.size() / 2;
    std::nth_element(covered.begin(), covered.begin() + mid, covered.end());
    double threshold = std::max(cfg.error_threshold_factor * covered[mid], cfg.error_abs_floor);
    for (std::size_t t = 0; t < errors.size(); ++t)
        flags[t] = errors[t] > threshold && coverage[t] >= cfg.min_pixels &&
                   depth[t] < cfg.max_depth;
    return flags;
}

// The inverse loop: per-object ADAM over the captures, then (optionally) the
// coarse-to-fine phase with per-triangle materials and error-driven 1->4
// subdivision. Emission entities stay per-object throughout.
inline OptimizationResult run_optimization(const Scene& scene, const CaptureSet& captures,
                                           const OptimizeConfig& cfg,
                                           std::optional<ParameterSet> initial = std::nullopt,
                                           ThreadPool* pool_in = nullptr) {
    cfg.validate();
    validate_captures(captures);
    ThreadPool& pool = pool_in ? *pool_in : ThreadPool::global();

    OptimizationResult result;
    detail::OptimizeLoop loop{scene, captures, cfg, pool, std::chrono::steady_clock::now()};

    ParameterSet params = initial ? *initial : ParameterSet::zeros(scene, Phase::PerObject);
    {
        LightSampler lights(scene);
        AdamState adam(params.size(), cfg.learning_rate);
        if (params.phase() == Phase::PerObject && cfg.iterations > 0)
            loop.run(params, adam, lights, cfg.iterations, result.log);
    }

    if (!cfg.subdivision.enabled && params.phase() == Phase::PerObject) {
        result.params = std::move(params);
        result.segments = loop.segments;
        return result;
    }

    // Refinement: per-triangle materials, recompute errors each round, split,
    // continue optimizing. Lights are structural per-object; only their flux
    // keeps moving with the optimization.
    Scene current = scene;
    if (params.phase() == Phase::PerObject)
        params = params.to_per_triangle(current);
    std::vector<int> depth(current.triangles.size(), 0);

    int rounds = cfg.subdivision.enabled ? cfg.subdivision.max_depth + 1 : 1;
    for (int round = 0; round < rounds; ++round) {
        bool split_this_round = false;
        if (cfg.subdivision.enabled) {
            LightSampler lights(current);
            double floor = cfg.light_floor >= 0.0 ? cfg.light_floor : lights.default_floor();
            lights.refresh_weights(current, params, floor);
            std::vector<int64_t> coverage;
            auto errors = per_triangle_errors(current, captures, params, lights, cfg.trace,
                                              cfg.seed, pool, &coverage, &loop.segments);
            auto flags = select_triangles_to_split(errors, coverage, depth, cfg.subdivision);
            int n_split = static_cast<int>(std::count(flags.begin(), flags.end(), true));
            if (n_split > 0) {
                split_this_round = true;
                result.subdivision_splits += n_split;
                SubdivisionResult sub = subdivide(current, flags);
                params = params.remap_for_subdivision(sub.scene, sub.parent_of);
                std::vector<int> new_depth(sub.scene.triangles.size());
                for (std::size_t t = 0; t < new_depth.size(); ++t) {
                    int32_t parent = sub.parent_of[t];
                    new_depth[t] = depth[parent] + (flags[parent] ? 1 : 0);
                }
                depth = std::move(new_depth);
                current = std::move(sub.scene);
            }
        }

        LightSampler lights(current);
        AdamState adam(params.size(), cfg.learning_rate);
        detail::OptimizeLoop refine_loop{current, captures, cfg, pool, loop.start};
        refine_loop.segments = loop.segments;
        refine_loop.iteration = loop.iteration;
        refine_loop.smoothed = loop.smoothed;
        refine_loop.have_smoothed = loop.have_smoothed;
        int iters = cfg.subdivision.enabled ? cfg.subdivision.iterations_per_round
                                            : cfg.iterations;
        bool completed = refine_loop.run(params, adam, lights, iters, result.log);
        loop.segments = refine_loop.segments;
        loop.iteration = refine_loop.iteration;
        loop.smoothed = refine_loop.smoothed;
        loop.have_smoothed = refine_loop.have_smoothed;
        if (!completed || !split_this_round)
            break;
    }

    result.params = std::move(params);
    result.segments = loop.segments;
    result.refined_scene = std::move(current);
    result.triangle_depth = std::move(depth);
    return result;
}

}  // namespace ipt
