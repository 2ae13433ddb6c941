// ipt: inverse path tracing toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ipt/bvh.hpp"
#include "ipt/common.hpp"

namespace ipt {

struct Vertex {
    Vec3 position;
    Vec3 normal;  // unit length after load
};

struct Triangle {
    int32_t v[3] = {0, 0, 0};
    int32_t object_id = 0;
    double area = 0.0;
};

struct Camera {
    Mat4 pose;  // world from camera; camera looks down -Z, +X right, +Y up
    double fov_y = 1.0;
    int width = 1;
    int height = 1;

    Vec3 origin() const { return pose.transform_point({0.0, 0.0, 0.0}); }

    // jx, jy in [0,1) position the sample inside the pixel footprint.
    Vec3 ray_direction(int px, int py, double jx, double jy) const {
        double tan_half = std::tan(0.5 * fov_y);
        double aspect = static_cast<double>(width) / height;
        double sx = (2.0 * (px + jx) / width - 1.0) * tan_half * aspect;
        double sy = (1.0 - 2.0 * (py + jy) / height) * tan_half;
        return normalize(pose.transform_vector({sx, sy, -1.0}));
    }
};

struct SurfaceHit {
    int32_t triangle_id = -1;
    int32_t object_id = -1;
    Vec3 position;
    Vec3 shading_normal;    // barycentric-interpolated, renormalized
    Vec3 geometric_normal;  // triangle plane normal
    double distance = 0.0;
    double bary_u = 0.0;  // weight of vertex 1
    double bary_v = 0.0;  // weight of vertex 2
};

struct SceneObject {
    std::string name;
    std::vector<int32_t> triangles;
    double area = 0.0;
};

struct LoadStats {
    int dropped_degenerate = 0;
};

// Immutable after construction; all queries are const and thread-safe.
class Scene {
  public:
    std::vector<Vertex> vertices;
    std::vector<Triangle> triangles;
    std::vector<SceneObject> objects;
    std::vector<Camera> cameras;
    LoadStats load_stats;

    // Precomputes per-triangle data and builds the BVH. Call after mutating
    // geometry (load and subdivision do this for you).
    void commit() {
        tri_v0_.resize(triangles.size());
        tri_e1_.resize(triangles.size());
        tri_e2_.resize(triangles.size());
        tri_geo_n_.resize(triangles.size());
        std::vector<Aabb> bounds(triangles.size());
        for (std::size_t i = 0; i < triangles.size(); ++i) {
            const Triangle& t = triangles[i];
            const Vec3& a = vertices[t.v[0]].position;
            const Vec3& b = vertices[t.v[1]].position;
            const Vec3& c = vertices[t.v[2]].position;
            tri_v0_[i] = a;
            tri_e1_[i] = b - a;
            tri_e2_[i] = c - a;
            tri_geo_n_[i] = normalize(cross(tri_e1_[i], tri_e2_[i]));
            bounds[i].grow(a);
            bounds[i].grow(b);
            bounds[i].grow(c);
        }
        for (auto& obj : objects) {
            obj.area = 0.0;
            for (int32_t t : obj.triangles)
                obj.area += triangles[t].area;
        }
        bvh_.build(bounds);
    }

    double triangle_area(int32_t tri) const { return triangles[tri].area; }
    const Vec3& triangle_normal(int32_t tri) const { return tri_geo_n_[tri]; }

    // Nearest hit with distance > t_min; ties broken by lowest triangle id.
    std::optional<SurfaceHit> intersect(const Vec3& origin, const Vec3& dir, double t_min,
                                        double t_max = std::numeric_limits<double>::infinity()) const {
        int32_t best_tri = -1;
        double best_t = t_max;
        double best_u = 0.0, best_v = 0.0;
        bvh_.traverse(origin, dir, t_min, best_t,
                      [&](int32_t first, int32_t count, double cur_max) {
                          for (int32_t k = first; k < first + count; ++k) {
                              int32_t tri = bvh_.prim_indices()[k];
                              double t, u, v;
                              if (!intersect_triangle(tri, origin, dir, t_min, t, u, v))
                                  continue;
                              if (t < best_t || (t == best_t && tri < best_tri)) {
                                  best_t = t;
                                  best_tri = tri;
                                  best_u = u;
                                  best_v = v;
                              }
                          }
                          (void)cur_max;
                          return best_t;
                      });
        if (best_tri < 0)
            return std::nullopt;
        return make_hit(best_tri, origin, dir, best_t, best_u, best_v);
    }

    // Exhaustive nearest-hit; the oracle the BVH must match exactly.
    std::optional<SurfaceHit> intersect_brute_force(const Vec3& origin, const Vec3& dir,
                                                    double t_min) const {
        int32_t best_tri = -1;
        double best_t = std::numeric_limits<double>::infinity();
        double best_u = 0.0, best_v = 0.0;
        for (std::size_t tri = 0; tri < triangles.size(); ++tri) {
            double t, u, v;
            if (!intersect_triangle(static_cast<int32_t>(tri), origin, dir, t_min, t, u, v))
                continue;
            if (t < best_t) {
                best_t = t;
                best_tri = static_cast<int32_t>(tri);
                best_u = u;
                best_v = v;
            }
        }
        if (best_tri < 0)
            return std::nullopt;
        return make_hit(best_tri, origin, dir, best_t, best_u, best_v);
    }

    // Any-hit visibility query over (t_min, t_max).
    bool occluded(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const {
        bool blocked = false;
        bvh_.traverse(origin, dir, t_min, t_max,
                      [&](int32_t first, int32_t count, double cur_max) {
                          for (int32_t k = first; k < first + count; ++k) {
                              int32_t tri = bvh_.prim_indices()[k];
                              double t, u, v;
                              if (intersect_triangle(tri, origin, dir, t_min, t, u, v) &&
                                  t < cur_max) {
                                  blocked = true;
                                  return 0.0;  // prune the rest of the traversal
                              }
                          }
                          return cur_max;
                      });
        return blocked;
    }

    // Uniform point on a triangle: position, geometric normal, pdf = 1/area.
    void sample_point_on_triangle(int32_t tri, double u1, double u2, Vec3& position,
                                  Vec3& geometric_normal, double& pdf_area) const {
        double su = std::sqrt(u1);
        double b1 = su * (1.0 - u2);
        double b2 = su * u2;
        position = tri_v0_[tri] + tri_e1_[tri] * b1 + tri_e2_[tri] * b2;
        geometric_normal = tri_geo_n_[tri];
        pdf_area = 1.0 / triangles[tri].area;
    }

  private:
    bool intersect_triangle(int32_t tri, const Vec3& origin, const Vec3& dir, double t_min,
                            double& t, double& u, double& v) const {
        // Moller-Trumbore.
        const Vec3& e1 = tri_e1_[tri];
        const Vec3& e2 = tri_e2_[tri];
        Vec3 pvec = cross(dir, e2);
        double det = dot(e1, pvec);
        if (std::abs(det) < 1e-14)
            return false;
        double inv_det = 1.0 / det;
        Vec3 tvec = origin - tri_v0_[tri];
        u = dot(tvec, pvec) * inv_det;
        if (u < 0.0 || u > 1.0)
            return false;
        Vec3 qvec = cross(tvec, e1);
        v = dot(dir, qvec) * inv_det;
        if (v < 0.0 || u + v > 1.0)
            return false;
        t = dot(e2, qvec) * inv_det;
        return t > t_min;
    }

    SurfaceHit make_hit(int32_t tri, const Vec3& origin, const Vec3& dir, double t, double u,
                        double v) const {
        const Triangle& triangle = triangles[tri];
        SurfaceHit hit;
        hit.triangle_id = tri;
        hit.object_id = triangle.object_id;
        hit.distance = t;
        hit.bary_u = u;
        hit.bary_v = v;
        hit.position = origin + dir * t;
        hit.geometric_normal = tri_geo_n_[tri];
        hit.shading_normal = normalize(vertices[triangle.v[0]].normal * (1.0 - u - v) +
                                       vertices[triangle.v[1]].normal * u +
                                       vertices[triangle.v[2]].normal * v);
        return hit;
    }

    Bvh bvh_;
    std::vector<Vec3> tri_v0_, tri_e1_, tri_e2_, tri_geo_n_;
};

struct SubdivisionResult {
    Scene scene;
    std::vector<int32_t> parent_of;  // new triangle -> source triangle in the input scene
};

// Splits each flagged triangle into four at the edge midpoints. Children lie
// exactly in the parent plane, so total area is preserved; midpoints of shared
// edges coincide bitwise, so no cracks open between neighbors.
inline SubdivisionResult subdivide(const Scene& source, const std::vector<bool>& split_flags) {
    SubdivisionResult out;
    Scene& scene = out.scene;
    scene.vertices = source.vertices;
    scene.cameras = source.cameras;
    scene.load_stats = source.load_stats;
    scene.objects.resize(source.objects.size());
    for (std::size_t i = 0; i < source.objects.size(); ++i)
        scene.objects[i].name = source.objects[i].name;

    auto midpoint_vertex = [&](int32_t a, int32_t b) {
        Vertex mid;
        mid.position = (source.vertices[a].position + source.vertices[b].position) * 0.5;
        mid.normal = normalize(source.vertices[a].normal + source.vertices[b].normal);
        scene.vertices.push_back(mid);
        return static_cast<int32_t>(scene.vertices.size() - 1);
    };

    auto push_triangle = [&](int32_t a, int32_t b, int32_t c, int32_t object_id,
                             int32_t parent) {
        Triangle t;
        t.v[0] = a;
        t.v[1] = b;
        t.v[2] = c;
        t.object_id = object_id;
        t.area = 0.5 * length(cross(scene.vertices[b].position - scene.vertices[a].position,
                                    scene.vertices[c].position - scene.vertices[a].position));
        scene.objects[object_id].triangles.push_back(static_cast<int32_t>(scene.triangles.size()));
        scene.triangles.push_back(t);
        out.parent_of.push_back(parent);
    };

    for (std::size_t i = 0; i < source.triangles.size(); ++i) {
        const Triangle& t = source.triangles[i];
        int32_t parent = static_cast<int32_t>(i);
        if (!split_flags[i]) {
            push_triangle(t.v[0], t.v[1], t.v[2], t.object_id, parent);
            continue;
        }
        int32_t ab = midpoint_vertex(t.v[0], t.v[1]);
        int32_t bc = midpoint_vertex(t.v[1], t.v[2]);
        int32_t ca = midpoint_vertex(t.v[2], t.v[0]);
        push_triangle(t.v[0], ab, ca, t.object_id, parent);
        push_triangle(ab, t.v[1], bc, t.object_id, parent);
        push_triangle(ca, bc, t.v[2], t.object_id, parent);
        push_triangle(ab, bc, ca, t.object_id, parent);
    }

    scene.commit();
    return out;
}

}  // namespace ipt
