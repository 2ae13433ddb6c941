// ipt: inverse path tracing toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <vector>

#include "ipt/common.hpp"
#include "ipt/fenwick.hpp"
#include "ipt/params.hpp"
#include "ipt/scene.hpp"

namespace ipt {

struct LightSample {
    Vec3 position;
    Vec3 normal;  // geometric normal of the sampled triangle
    int32_t entity = -1;
    double pdf_area = 0.0;  // joint density over the scene surface, 1/m^2
};

// Emission-proportional sampling over objects. Entity weights live in a
// Fenwick tree so per-iteration flux updates are O(log n); a configurable
// floor keeps every object reachable while its estimated flux is still zero.
// Updates must not overlap concurrent sampling; the optimizer refreshes
// between batches.
class LightSampler {
  public:
    LightSampler() = default;

    explicit LightSampler(const Scene& scene) : tree_(scene.objects.size()) {
        triangle_cdf_.resize(scene.objects.size());
        for (std::size_t o = 0; o < scene.objects.size(); ++o) {
            const auto& tris = scene.objects[o].triangles;
            auto& cdf = triangle_cdf_[o];
            cdf.resize(tris.size());
            double acc = 0.0;
            for (std::size_t i = 0; i < tris.size(); ++i) {
                acc += scene.triangles[tris[i]].area;
                cdf[i] = acc;
            }
        }
        // Floor keeps undiscovered emitters sampleable from the zero
        // initialization; scaled by scene size so it is unit-independent.
        double mean_area = 0.0;
        for (const auto& obj : scene.objects)
            mean_area += obj.area;
        mean_area /= std::max<std::size_t>(scene.objects.size(), 1);
        default_floor_ = 1e-3 * mean_area;
    }

    double default_floor() const { return default_floor_; }
    double total_weight() const { return tree_.total(); }
    double weight(int32_t entity) const { return tree_.weight(entity); }

    void set_weight(int32_t entity, double w) { tree_.update(entity, w); }

    // weight_o = max(luminance(flux_o) * area_o, floor).
    void refresh_weights(const Scene& scene, const ParameterSet& params, double floor) {
        for (std::size_t o = 0; o < scene.objects.size(); ++o) {
            double w = luminance(params.emission(static_cast<int32_t>(o)).flux) *
                       scene.objects[o].area;
            tree_.update(o, std::max(w, floor));
        }
    }

    void refresh_weights(const Scene& scene, const ParameterSet& params) {
        refresh_weights(scene, params, default_floor_);
    }

    // Entity by Fenwick inversion, triangle by area within the entity, point
    // uniform on the triangle. pdf_area = (w_e / total) / area_entity.
    LightSample sample(const Scene& scene, double u_entity, double u_tri, double u1,
                       double u2) const {
        LightSample out;
        int32_t entity = static_cast<int32_t>(tree_.sample(u_entity));
        const auto& cdf = triangle_cdf_[entity];
        const auto& tris = scene.objects[entity].triangles;
        double target = u_tri * cdf.back();
        std::size_t k = std::upper_bound(cdf.begin(), cdf.end(), target) - cdf.begin();
        k = std::min(k, cdf.size() - 1);
        int32_t tri = tris[k];
        scene.sample_point_on_triangle(tri, u1, u2, out.position, out.normal, out.pdf_area);
        out.entity = entity;
        out.pdf_area = pdf_area(scene, entity);
        return out;
    }

    // Density of `sample` at any point of the entity's surface (uniform within
    // the entity once selected).
    double pdf_area(const Scene& scene, int32_t entity) const {
        double total = tree_.total();
        if (!(total > 0.0))
            return 0.0;
        double w = tree_.weight(entity);
        if (!(w > 0.0))
            return 0.0;
        return (w / total) / scene.objects[entity].area;
    }

  private:
    FenwickTree tree_;
    std::vector<std::vector<double>> triangle_cdf_;  // per object, by area
    double default_floor_ = 0.0;
};

}  // namespace ipt
