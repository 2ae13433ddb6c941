// ipt: inverse path tracing toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <optional>

#include "ipt/common.hpp"
#include "ipt/lightsampler.hpp"
#include "ipt/materials.hpp"
#include "ipt/params.hpp"
#include "ipt/rng.hpp"
#include "ipt/scene.hpp"

namespace ipt {

struct TraceConfig {
    int max_bounces = 2;             // 1 = direct illumination
    int paths_per_pixel_color = 256; // 2^8
    int paths_per_pixel_grad = 1;
    bool mis_enabled = true;
};

struct RadianceEstimate {
    RGB value;  // linear radiance, non-negative, finite
    int path_count = 0;
};

// Balance heuristic. Zero when both strategies are dead.
inline double mis_weight(double pdf_a, double pdf_b) {
    double sum = pdf_a + pdf_b;
    return sum > 0.0 ? pdf_a / sum : 0.0;
}

namespace detail {

constexpr int kMaxChain = 34;  // bounce cap plus the next-event vertex

// Per-vertex factors of one light path, enough to rebuild the measurement
// contribution with any single BRDF factor replaced by its derivative.
struct GradVertex {
    int32_t material_slot_base;  // slot of BaseR; +1 G, +2 B, +3 roughness
    RGB fr;                      // BRDF value along the path (eval params)
    double seg;                  // cos / pdf (and MIS/geometry factors for NEE)
    double d_base;               // d fr_c / d base_c at this vertex
    double d_roughness;          // d fr_c / d roughness at this vertex
};

struct GradChain {
    std::array<GradVertex, kMaxChain> v;
    int count = 0;

    void push(const GradVertex& gv) {
        if (count < kMaxChain)
            v[count++] = gv;
    }
    void pop() { --count; }
};

// Emits the derivative of one completed light-arrival term,
//   T_c = light_scalar * flux_c * prod_i fr_i,c * seg_i,
// into the sink: dT/dflux via the full product, dT/dtheta_l via the product
// with vertex l's factor swapped for its derivative (Leibniz rule). Products
// that exclude a vertex are built from prefix/suffix sweeps so zero-valued
// BRDF channels stay differentiable.
inline void close_gradient_term(SparseGradient& sink, const GradChain& chain, double light_scalar,
                                const RGB& flux, int32_t emission_slot_base) {
    for (int c = 0; c < 3; ++c) {
        double pre[kMaxChain + 1];
        pre[0] = 1.0;
        for (int i = 0; i < chain.count; ++i)
            pre[i + 1] = pre[i] * chain.v[i].fr[c] * chain.v[i].seg;

        sink.add_channel(emission_slot_base + c, c, light_scalar * pre[chain.count]);

        double le = flux[c] * light_scalar;
        if (le != 0.0) {
            double suffix = 1.0;
            for (int l = chain.count - 1; l >= 0; --l) {
                const GradVertex& gv = chain.v[l];
                double coeff = pre[l] * suffix * gv.seg * le;
                if (gv.d_base != 0.0)
                    sink.add_channel(gv.material_slot_base + c, c, coeff * gv.d_base);
                if (gv.d_roughness != 0.0)
                    sink.add_channel(gv.material_slot_base + 3, c, coeff * gv.d_roughness);
                suffix *= gv.fr[c] * gv.seg;
            }
        }
    }
}

}  // namespace detail

// One forward path tracer over fixed geometry. Evaluation parameters feed the
// radiometric terms; sampling parameters feed every decision that shapes the
// path (directions, lobe and light selection, pdfs, MIS weights). They are the
// same object in normal operation and differ only inside the
// common-random-number finite-difference probe, which must re-trace identical
// paths while perturbing the integrand.
class PathTracer {
  public:
    PathTracer(const Scene& scene, const ParameterSet& eval_params,
               const ParameterSet& sample_params, const LightSampler& lights,
               const TraceConfig& cfg)
        : scene_(scene), eval_(eval_params), sample_(sample_params), lights_(lights), cfg_(cfg) {}

    PathTracer(const Scene& scene, const ParameterSet& params, const LightSampler& lights,
               const TraceConfig& cfg)
        : PathTracer(scene, params, params, lights, cfg) {}

    // Traces one camera path for the given pixel (box filter, one jittered
    // sample position) and returns its radiance contribution. When `sink` is
    // non-null, also accumulates the path's parameter derivatives.
    RGB trace_one_path(int px, int py, const Camera& camera, RngStream& rng,
                       SparseGradient* sink, int64_t* segments) const {
        double jx = rng.next_double();
        double jy = rng.next_double();
        Vec3 origin = camera.origin();
        Vec3 dir = camera.ray_direction(px, py, jx, jy);

        RGB radiance(0.0);
        RGB beta(1.0);
        detail::GradChain chain;
        double prev_brdf_pdf = 0.0;
        const bool nee = cfg_.mis_enabled && lights_.total_weight() > 0.0;

        for (int depth = 1; depth <= cfg_.max_bounces + 1; ++depth) {
            if (segments)
                ++*segments;
            auto hit = scene_.intersect(origin, dir, kRayEpsilon);
            if (!hit)
                break;  // escaped; no environment emission

            Vec3 wi = -dir;
            double cos_geo = dot(hit->geometric_normal, wi);

            // Emitter hit. Weighted against the light sample the previous
            // vertex could have drawn for the same arrival.
            if (cos_geo > 0.0) {
                double weight = 1.0;
                if (nee && depth > 1) {
                    double pdf_light_area = lights_.pdf_area(scene_, hit->object_id);
                    double pdf_light_sa = pdf_light_area * hit->distance * hit->distance / cos_geo;
                    weight = mis_weight(prev_brdf_pdf, pdf_light_sa);
                }
                if (weight > 0.0) {
                    RGB flux = eval_.emission(hit->object_id).flux;
                    double light_scalar = weight * cos_geo;
                    radiance += beta * flux * light_scalar;
                    if (sink)
                        detail::close_gradient_term(*sink, chain, light_scalar, flux,
                                                    eval_.emission_slot_base(hit->object_id));
                }
            }

            if (depth == cfg_.max_bounces + 1)
                break;  // terminal vertex only collects emission

            Vec3 ns = hit->shading_normal;
            if (cos_geo <= 0.0 || dot(ns, wi) <= 0.0)
                break;  // backside; one-sided surfaces neither emit nor reflect

            MaterialParams mat_eval = eval_.material_at_triangle(hit->triangle_id);
            MaterialParams mat_sample = sample_.material_at_triangle(hit->triangle_id);
            int32_t mat_slot =
                eval_.material_slot_base(eval_.material_entity_of_triangle(hit->triangle_id));

            // Next event estimation, weighted against BRDF sampling.
            if (nee) {
                double u_entity = rng.next_double();
                double u_tri = rng.next_double();
                double u1 = rng.next_double();
                double u2 = rng.next_double();
                LightSample ls = lights_.sample(scene_, u_entity, u_tri, u1, u2);
                Vec3 to_light = ls.position - hit->position;
                double dist2 = length_squared(to_light);
                double dist = std::sqrt(dist2);
                if (dist > 2.0 * kRayEpsilon && ls.pdf_area > 0.0) {
                    Vec3 wl = to_light / dist;
                    double cos_x = dot(ns, wl);
                    double cos_xg = dot(hit->geometric_normal, wl);
                    double cos_y = dot(ls.normal, -wl);
                    if (cos_x > 0.0 && cos_xg > 0.0 && cos_y > 0.0) {
                        if (segments)
                            ++*segments;
                        if (!scene_.occluded(hit->position, wl, kRayEpsilon,
                                             dist - kRayEpsilon)) {
                            double pdf_light_sa = ls.pdf_area * dist2 / cos_y;
                            double pdf_b = pdf_brdf(mat_sample, ns, wi, wl);
                            double weight = mis_weight(pdf_light_sa, pdf_b);
                            RGB fr = eval_brdf(mat_eval, ns, wi, wl);
                            double seg = weight * cos_x * cos_y / (dist2 * ls.pdf_area);
                            RGB flux = eval_.emission(ls.entity).flux;
                            radiance += beta * fr * flux * (seg * cos_y);
                            if (sink) {
                                BrdfGradient bg = grad_brdf(mat_eval, ns, wi, wl);
                                chain.push({mat_slot, fr, seg, bg.d_base_color, bg.d_roughness});
                                detail::close_gradient_term(*sink, chain, cos_y, flux,
                                                            eval_.emission_slot_base(ls.entity));
                                chain.pop();
                            }
                        }
                    }
                }
            }

            // Continue the path by sampling the BRDF lobe mixture.
            double u1 = rng.next_double();
            double u2 = rng.next_double();
            double u_lobe = rng.next_double();
            auto bs = sample_brdf(mat_sample, ns, wi, u1, u2, u_lobe);
            if (!bs)
                break;
            if (dot(bs->direction, hit->geometric_normal) <= 0.0)
                break;

            RGB fr = eval_brdf(mat_eval, ns, wi, bs->direction);
            double seg = dot(ns, bs->direction) / bs->pdf_solid_angle;
            beta *= fr * seg;
            if (sink) {
                BrdfGradient bg = grad_brdf(mat_eval, ns, wi, bs->direction);
                chain.push({mat_slot, fr, seg, bg.d_base_color, bg.d_roughness});
            }
            prev_brdf_pdf = bs->pdf_solid_angle;
            origin = hit->position;
            dir = bs->direction;
        }
        return radiance;
    }

    const TraceConfig& config() const { return cfg_; }

  private:
    const Scene& scene_;
    const ParameterSet& eval_;
    const ParameterSet& sample_;
    const LightSampler& lights_;
    const TraceConfig& cfg_;
};

// Monte Carlo pixel color: the mean of paths_per_pixel_color jittered paths,
// each on its own counter-based stream.
inline RadianceEstimate trace_radiance(const Scene& scene, const ParameterSet& params,
                                       const LightSampler& lights, const TraceConfig& cfg,
                                       int px, int py, const Camera& camera,
                                       const StreamKey& key, int64_t* segments = nullptr) {
    PathTracer tracer(scene, params, lights, cfg);
    std::uint32_t pixel =
        static_cast<std::uint32_t>(py) * static_cast<std::uint32_t>(camera.width) + px;
    RGB sum(0.0);
    for (int s = 0; s < cfg.paths_per_pixel_color; ++s) {
        RngStream rng = make_stream(key, pixel, static_cast<std::uint32_t>(s));
        sum += tracer.trace_one_path(px, py, camera, rng, nullptr, segments);
    }
    RadianceEstimate est;
    est.path_count = cfg.paths_per_pixel_color;
    est.value = sum / static_cast<double>(cfg.paths_per_pixel_color);
    if (!is_finite(est.value))
        throw NumericalError("trace_radiance: non-finite estimate at pixel (" +
                             std::to_string(px) + ", " + std::to_string(py) + ")");
    return est;
}

}  // namespace ipt
