// ipt: inverse path tracing toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <optional>

#include "ipt/common.hpp"

namespace ipt {

// Reflectance model unknowns, one set per material entity. Bounds are enforced
// by projection in the optimizer; evaluation tolerates small excursions (e.g.
// finite-difference probes).
struct MaterialParams {
    RGB base_color{0.0, 0.0, 0.0};  // per channel in [0, 1]
    double roughness = 0.0;         // in [0, 1]
};

// Emission unknowns, one set per object. Radiant flux scale of the clamped
// cosine profile L_e(x, w) = flux * (w . n)+.
struct EmissionParams {
    RGB flux{0.0, 0.0, 0.0};  // per channel >= 0
};

struct BrdfSample {
    Vec3 direction;               // world space, unit
    double pdf_solid_angle = 0.0; // mixture density at `direction`, > 0
    RGB value;                    // f_r at the sampled direction
};

struct BrdfGradient {
    double d_base_color = 0.0;  // d f_c / d base_c, identical for all channels
    double d_roughness = 0.0;   // d f_c / d roughness, identical for all channels
};

namespace brdf {

// Dielectric Fresnel, fixed (not optimized, no angular dependence).
constexpr double kF0 = 0.04;
// Floor on the GGX width so the specular lobe stays integrable as r -> 0.
constexpr double kAlphaMin = 1e-4;

inline double alpha_from_roughness(double roughness) {
    return std::max(roughness * roughness, kAlphaMin);
}

inline double ggx_d(double alpha, double nh) {
    double t = nh * nh * (alpha * alpha - 1.0) + 1.0;
    return alpha * alpha / (kPi * t * t);
}

inline double smith_g1(double alpha, double c) {
    return 2.0 * c / (c + std::sqrt(alpha * alpha + (1.0 - alpha * alpha) * c * c));
}

// Mixture weight of the cosine lobe when sampling; the remainder samples the
// GGX half-vector lobe. Any positive mixture is valid, MIS corrects for it.
inline double diffuse_select_weight(double roughness) {
    return 1.0 - (1.0 - roughness) * 0.5;
}

}  // namespace brdf

// Simplified Disney-style model: a Lambertian base-color lobe plus an
// isotropic GGX specular lobe with separable Smith shadowing and a fixed
// dielectric Fresnel weight,
//
//   f = (1 - F0) * base_color / pi + F0 * D * G1(wi) G1(wo) / (4 (n.wi)(n.wo)).
//
// The (1 - F0) / F0 split keeps the directional albedo strictly <= 1 for all
// parameter values: the single-scattering GGX term integrates to at most 1,
// so the whole lobe mixture is a convex-bounded combination.
inline RGB eval_brdf(const MaterialParams& mat, const Vec3& n, const Vec3& wi, const Vec3& wo) {
    double ci = dot(n, wi);
    double co = dot(n, wo);
    if (ci <= 0.0 || co <= 0.0)
        return RGB(0.0);
    Vec3 h = wi + wo;
    double hl = length(h);
    if (hl < 1e-12)
        return RGB(0.0);
    h = h / hl;
    double nh = dot(n, h);
    double alpha = brdf::alpha_from_roughness(mat.roughness);
    double spec = brdf::kF0 * brdf::ggx_d(alpha, nh) * brdf::smith_g1(alpha, ci) *
                  brdf::smith_g1(alpha, co) / (4.0 * ci * co);
    return mat.base_color * ((1.0 - brdf::kF0) * kInvPi) + RGB(spec);
}

// Analytic partials of eval_brdf with respect to the unknowns, at the same
// geometric configuration. d f_c / d base_c' is zero for c != c'.
inline BrdfGradient grad_brdf(const MaterialParams& mat, const Vec3& n, const Vec3& wi,
                              const Vec3& wo) {
    BrdfGradient g;
    double ci = dot(n, wi);
    double co = dot(n, wo);
    if (ci <= 0.0 || co <= 0.0)
        return g;
    Vec3 h = wi + wo;
    double hl = length(h);
    if (hl < 1e-12)
        return g;
    h = h / hl;
    double nh = dot(n, h);
    g.d_base_color = (1.0 - brdf::kF0) * kInvPi;

    double r = mat.roughness;
    if (r * r < brdf::kAlphaMin)
        return g;  // width clamp active: specular lobe is locally constant in r
    double alpha = r * r;
    double t = nh * nh * (alpha * alpha - 1.0) + 1.0;
    double d = alpha * alpha / (kPi * t * t);
    double dd_dalpha = (2.0 * alpha * t - 4.0 * alpha * alpha * alpha * nh * nh) / (kPi * t * t * t);

    auto g1_and_deriv = [alpha](double c, double& g1, double& dg1) {
        double s = std::sqrt(alpha * alpha + (1.0 - alpha * alpha) * c * c);
        g1 = 2.0 * c / (c + s);
        double ds = alpha * (1.0 - c * c) / s;
        dg1 = -2.0 * c * ds / ((c + s) * (c + s));
    };
    double g1i, dg1i, g1o, dg1o;
    g1_and_deriv(ci, g1i, dg1i);
    g1_and_deriv(co, g1o, dg1o);

    double dspec_dalpha =
        brdf::kF0 * (dd_dalpha * g1i * g1o + d * (dg1i * g1o + g1i * dg1o)) / (4.0 * ci * co);
    g.d_roughness = dspec_dalpha * 2.0 * r;
    return g;
}

// Density of sample_brdf's lobe mixture at wo, in solid angle.
inline double pdf_brdf(const MaterialParams& mat, const Vec3& n, const Vec3& wi, const Vec3& wo) {
    double ci = dot(n, wi);
    double co = dot(n, wo);
    if (ci <= 0.0 || co <= 0.0)
        return 0.0;
    double w_diffuse = brdf::diffuse_select_weight(mat.roughness);
    double pdf = w_diffuse * co * kInvPi;
    if (w_diffuse < 1.0) {
        Vec3 h = wi + wo;
        double hl = length(h);
        if (hl >= 1e-12) {
            h = h / hl;
            double nh = dot(n, h);
            double cd = dot(wi, h);
            if (nh > 0.0 && cd > 1e-12) {
                double alpha = brdf::alpha_from_roughness(mat.roughness);
                pdf += (1.0 - w_diffuse) * brdf::ggx_d(alpha, nh) * nh / (4.0 * cd);
            }
        }
    }
    return pdf;
}

// Draws a continuation direction from the cosine/GGX mixture. Returns nullopt
// when the GGX half-vector reflection lands below the hemisphere.
inline std::optional<BrdfSample> sample_brdf(const MaterialParams& mat, const Vec3& n,
                                             const Vec3& wi, double u1, double u2,
                                             double u_lobe) {
    if (dot(n, wi) <= 0.0)
        return std::nullopt;
    Vec3 tangent, bitangent;
    orthonormal_basis(n, tangent, bitangent);
    double w_diffuse = brdf::diffuse_select_weight(mat.roughness);

    Vec3 wo;
    if (u_lobe < w_diffuse) {
        double cos_theta = std::sqrt(1.0 - u1);
        double sin_theta = std::sqrt(u1);
        double phi = 2.0 * kPi * u2;
        wo = tangent * (sin_theta * std::cos(phi)) + bitangent * (sin_theta * std::sin(phi)) +
             n * cos_theta;
    } else {
        double alpha = brdf::alpha_from_roughness(mat.roughness);
        double cos_h = std::sqrt((1.0 - u1) / (1.0 + (alpha * alpha - 1.0) * u1));
        double sin_h = std::sqrt(std::max(0.0, 1.0 - cos_h * cos_h));
        double phi = 2.0 * kPi * u2;
        Vec3 h = tangent * (sin_h * std::cos(phi)) + bitangent * (sin_h * std::sin(phi)) +
                 n * cos_h;
        double wih = dot(wi, h);
        if (wih <= 0.0)
            return std::nullopt;
        wo = h * (2.0 * wih) - wi;
    }
    if (dot(n, wo) <= 0.0)
        return std::nullopt;
    wo = normalize(wo);

    BrdfSample sample;
    sample.direction = wo;
    sample.pdf_solid_angle = pdf_brdf(mat, n, wi, wo);
    sample.value = eval_brdf(mat, n, wi, wo);
    if (!(sample.pdf_solid_angle > 0.0))
        return std::nullopt;
    return sample;
}

// Directional emission profile L_e(x, wo) = flux * (wo . n)+ (view-independent,
// one-sided).
inline RGB eval_emission(const EmissionParams& em, const Vec3& n, const Vec3& wo) {
    double c = std::max(dot(n, wo), 0.0);
    return em.flux * c;
}

// d L_e,c / d flux_c; cross-channel partials are zero.
inline double grad_emission(const Vec3& n, const Vec3& wo) {
    return std::max(dot(n, wo), 0.0);
}

}  // namespace ipt
