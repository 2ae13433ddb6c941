// ipt: inverse path tracing toolkit
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>

#include "ipt/rng.hpp"
#include "ipt/scene.hpp"
#include "ipt/scene_io.hpp"
#include "test_helpers.hpp"

using namespace ipt;

namespace {

const char* kSingleTriangle =
    "o tri\n"
    "v 0 0 0\n"
    "v 1 0 0\n"
    "v 0 1 0\n"
    "f 1 2 3\n";

// Random triangle soup in the unit cube.
Scene triangle_soup(int triangle_count, std::uint64_t seed) {
    Scene scene;
    scene.objects.resize(1);
    scene.objects[0].name = "soup";
    RngStream rng(seed, 0, 0, 0);
    for (int i = 0; i < triangle_count; ++i) {
        Vec3 base{rng.next_double(), rng.next_double(), rng.next_double()};
        int32_t v0 = static_cast<int32_t>(scene.vertices.size());
        for (int k = 0; k < 3; ++k) {
            Vec3 offset{0.2 * (rng.next_double() - 0.5), 0.2 * (rng.next_double() - 0.5),
                        0.2 * (rng.next_double() - 0.5)};
            scene.vertices.push_back({base + offset, {0, 0, 1}});
        }
        Triangle tri;
        tri.v[0] = v0;
        tri.v[1] = v0 + 1;
        tri.v[2] = v0 + 2;
        tri.object_id = 0;
        Vec3 e1 = scene.vertices[v0 + 1].position - scene.vertices[v0].position;
        Vec3 e2 = scene.vertices[v0 + 2].position - scene.vertices[v0].position;
        tri.area = 0.5 * length(cross(e1, e2));
        if (tri.area < kDegenerateAreaThreshold)
            continue;
        scene.objects[0].triangles.push_back(static_cast<int32_t>(scene.triangles.size()));
        scene.triangles.push_back(tri);
    }
    scene.commit();
    return scene;
}

}  // namespace

TEST_CASE("single triangle OBJ: one object, one triangle, area 1/2") {
    Scene scene = test::load_obj_string("single.obj", kSingleTriangle);
    REQUIRE(scene.objects.size() == 1);
    REQUIRE(scene.triangles.size() == 1);
    REQUIRE(scene.objects[0].name == "tri");
    REQUIRE_THAT(scene.triangles[0].area, Catch::Matchers::WithinAbs(0.5, 1e-12));
    REQUIRE(scene.load_stats.dropped_degenerate == 0);
    // computed vertex normals are unit length
    for (const auto& v : scene.vertices)
        REQUIRE_THAT(length(v.normal), Catch::Matchers::WithinAbs(1.0, 1e-6));
}

TEST_CASE("load errors carry context") {
    REQUIRE_THROWS_WITH(load_obj("/nonexistent/mesh.obj"),
                        Catch::Matchers::ContainsSubstring("cannot open"));
    REQUIRE_THROWS_WITH(
        test::load_obj_string("badidx.obj", "o t\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 99\n"),
        Catch::Matchers::ContainsSubstring("out-of-range vertex"));
    REQUIRE_THROWS_WITH(
        test::load_obj_string("quad.obj", "o t\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n"),
        Catch::Matchers::ContainsSubstring("triangle"));
    REQUIRE_THROWS_WITH(test::load_obj_string("mtl.obj", "usemtl red\n"),
                        Catch::Matchers::ContainsSubstring("usemtl"));
    REQUIRE_THROWS_WITH(test::load_obj_string("empty_obj.obj",
                                              "o a\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\no b\n"),
                        Catch::Matchers::ContainsSubstring("zero triangles"));
}

TEST_CASE("degenerate triangles are dropped and counted") {
    Scene scene = test::load_obj_string("degen.obj",
                                        "o t\n"
                                        "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\n"
                                        "f 1 2 3\n"
                                        "f 1 2 4\n");  // collinear
    REQUIRE(scene.triangles.size() == 1);
    REQUIRE(scene.load_stats.dropped_degenerate == 1);
}

TEST_CASE("explicit vertex normals are honored and normalized") {
    Scene scene = test::load_obj_string("withvn.obj",
                                        "o t\n"
                                        "v 0 0 0\nv 1 0 0\nv 0 1 0\n"
                                        "vn 0 0 2\nvn 0 0 2\nvn 0 0 2\n"
                                        "f 1//1 2//2 3//3\n");
    for (const auto& v : scene.vertices) {
        REQUIRE_THAT(length(v.normal), Catch::Matchers::WithinAbs(1.0, 1e-6));
        REQUIRE(v.normal.z == 1.0);
    }
}

TEST_CASE("ray through the centroid hits at barycentrics (1/3, 1/3)") {
    Scene scene = test::load_obj_string("single2.obj", kSingleTriangle);
    Vec3 centroid{1.0 / 3.0, 1.0 / 3.0, 0.0};
    auto hit = scene.intersect(centroid + Vec3{0, 0, 1}, {0, 0, -1}, 1e-4);
    REQUIRE(hit);
    REQUIRE_THAT(hit->bary_u, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-6));
    REQUIRE_THAT(hit->bary_v, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-6));
    REQUIRE_THAT(hit->distance, Catch::Matchers::WithinAbs(1.0, 1e-9));
    // position == origin + t * dir within 1e-5 relative
    Vec3 recon = centroid + Vec3{0, 0, 1} + Vec3{0, 0, -1} * hit->distance;
    REQUIRE(length(recon - hit->position) <= 1e-5 * std::max(1.0, length(hit->position)));
}

TEST_CASE("ray parallel to the triangle plane misses") {
    Scene scene = test::load_obj_string("single3.obj", kSingleTriangle);
    REQUIRE(!scene.intersect({0.2, 0.2, 0.5}, {1, 0, 0}, 1e-4));
}

TEST_CASE("BVH equals brute force on 10^4 random rays over 10^4 triangles") {
    Scene scene = triangle_soup(10000, 11);
    RngStream rng(123, 4, 5, 6);
    int hits = 0;
    for (int i = 0; i < 10000; ++i) {
        Vec3 origin{3.0 * rng.next_double() - 1.0, 3.0 * rng.next_double() - 1.0,
                    3.0 * rng.next_double() - 1.0};
        Vec3 dir = normalize(Vec3{rng.next_double() - 0.5, rng.next_double() - 0.5,
                                  rng.next_double() - 0.5});
        if (length(dir) == 0.0)
            continue;
        auto fast = scene.intersect(origin, dir, 1e-4);
        auto slow = scene.intersect_brute_force(origin, dir, 1e-4);
        REQUIRE(fast.has_value() == slow.has_value());
        if (fast) {
            ++hits;
            REQUIRE(fast->triangle_id == slow->triangle_id);
            REQUIRE_THAT(fast->distance, Catch::Matchers::WithinAbs(slow->distance, 1e-6));
        }
    }
    REQUIRE(hits > 1000);  // the comparison actually exercised hits
}

TEST_CASE("shading normals are unit length at hits") {
    Scene scene = triangle_soup(500, 3);
    RngStream rng(9, 1, 1, 1);
    for (int i = 0; i < 2000; ++i) {
        Vec3 origin{2.0 * rng.next_double() - 0.5, 2.0 * rng.next_double() - 0.5, -1.0};
        Vec3 dir = normalize(Vec3{rng.next_double() - 0.5, rng.next_double() - 0.5, 1.0});
        auto hit = scene.intersect(origin, dir, 1e-4);
        if (hit) {
            REQUIRE_THAT(length(hit->shading_normal), Catch::Matchers::WithinAbs(1.0, 1e-6));
            REQUIRE_THAT(length(hit->geometric_normal), Catch::Matchers::WithinAbs(1.0, 1e-6));
        }
    }
}

TEST_CASE("re-cast from a hit point never re-hits the same triangle within epsilon") {
    Scene scene = triangle_soup(2000, 21);
    RngStream rng(31, 2, 2, 2);
    for (int i = 0; i < 5000; ++i) {
        Vec3 origin{2.0 * rng.next_double() - 0.5, 2.0 * rng.next_double() - 0.5,
                    2.0 * rng.next_double() - 0.5};
        Vec3 dir = normalize(Vec3{rng.next_double() - 0.5, rng.next_double() - 0.5,
                                  rng.next_double() - 0.5});
        auto hit = scene.intersect(origin, dir, 1e-4);
        if (!hit)
            continue;
        auto recast = scene.intersect(hit->position, dir, kRayEpsilon);
        if (recast && recast->triangle_id == hit->triangle_id)
            REQUIRE(recast->distance >= kRayEpsilon);
    }
}

TEST_CASE("tie break prefers the lowest triangle id") {
    // Two identical triangles stacked in the same plane.
    Scene scene = test::load_obj_string("tie.obj",
                                        "o a\n"
                                        "v 0 0 0\nv 1 0 0\nv 0 1 0\n"
                                        "f 1 2 3\n"
                                        "o b\n"
                                        "v 0 0 0\nv 1 0 0\nv 0 1 0\n"
                                        "f 4 5 6\n");
    auto hit = scene.intersect({0.2, 0.2, 1.0}, {0, 0, -1}, 1e-4);
    REQUIRE(hit);
    REQUIRE(hit->triangle_id == 0);
    auto slow = scene.intersect_brute_force({0.2, 0.2, 1.0}, {0, 0, -1}, 1e-4);
    REQUIRE(slow->triangle_id == 0);
}

TEST_CASE("sample_point_on_triangle: corners, pdf, centroid moment") {
    Scene scene = test::load_obj_string("single4.obj", kSingleTriangle);
    Vec3 p, n;
    double pdf;
    scene.sample_point_on_triangle(0, 0.0, 0.0, p, n, pdf);
    REQUIRE(p == Vec3{0, 0, 0});  // first vertex
    REQUIRE_THAT(pdf, Catch::Matchers::WithinAbs(2.0, 1e-12));  // area 1/2

    // empirical centroid within 3 sigma of the analytic centroid
    RngStream rng(5, 0, 0, 0);
    const int n_samples = 100000;
    Vec3 mean(0.0);
    double second_moment = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        scene.sample_point_on_triangle(0, rng.next_double(), rng.next_double(), p, n, pdf);
        REQUIRE(pdf == 2.0);
        mean += p;
        second_moment += length_squared(p);
    }
    mean = mean / n_samples;
    Vec3 analytic{1.0 / 3.0, 1.0 / 3.0, 0.0};
    double sigma = std::sqrt((second_moment / n_samples) / n_samples);  // coarse upper bound
    REQUIRE(length(mean - analytic) < 3.0 * sigma + 1e-4);
}

TEST_CASE("subdivision preserves area and stays in the parent plane") {
    Scene scene = test::load_obj_string("subdiv.obj", kSingleTriangle);
    std::vector<bool> flags{true};
    SubdivisionResult sub = subdivide(scene, flags);
    REQUIRE(sub.scene.triangles.size() == 4);
    REQUIRE(sub.parent_of == std::vector<int32_t>{0, 0, 0, 0});
    double total = 0.0;
    for (const auto& t : sub.scene.triangles) {
        total += t.area;
        REQUIRE(t.object_id == 0);
        // children lie in the z = 0 parent plane
        for (int k = 0; k < 3; ++k)
            REQUIRE(sub.scene.vertices[t.v[k]].position.z == 0.0);
    }
    REQUIRE_THAT(total, Catch::Matchers::WithinRel(0.5, 1e-9));

    // children cover exactly the parent: random parent points hit a child
    RngStream rng(13, 0, 0, 0);
    for (int i = 0; i < 500; ++i) {
        Vec3 p, n;
        double pdf;
        scene.sample_point_on_triangle(0, rng.next_double(), rng.next_double(), p, n, pdf);
        auto hit = sub.scene.intersect(p + Vec3{0, 0, 1}, {0, 0, -1}, 1e-4);
        REQUIRE(hit);
    }
}

TEST_CASE("intersection throughput meets the performance budget") {
    // >= 1e5 rays per second per core over a box-like scene.
    test::ObjBuilder obj;
    obj.quad("floor", {-1, 0, -1}, {-1, 0, 1}, {1, 0, 1}, {1, 0, -1});
    obj.quad("ceiling", {-1, 2, -1}, {1, 2, -1}, {1, 2, 1}, {-1, 2, 1});
    obj.quad("back", {-1, 0, -1}, {1, 0, -1}, {1, 2, -1}, {-1, 2, -1});
    obj.quad("left", {-1, 0, -1}, {-1, 2, -1}, {-1, 2, 1}, {-1, 0, 1});
    obj.quad("right", {1, 0, -1}, {1, 0, 1}, {1, 2, 1}, {1, 2, -1});
    obj.quad("box", {-0.4, 0.0, -0.4}, {-0.4, 0.8, -0.4}, {0.4, 0.8, -0.4}, {0.4, 0.0, -0.4});
    obj.quad("light", {-0.3, 1.99, -0.3}, {0.3, 1.99, -0.3}, {0.3, 1.99, 0.3}, {-0.3, 1.99, 0.3});
    Scene scene = test::load_obj_string("perf.obj", obj.text);

    RngStream rng(17, 0, 0, 0);
    const int n = 200000;
    auto begin = std::chrono::steady_clock::now();
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        Vec3 origin{1.8 * rng.next_double() - 0.9, 1.8 * rng.next_double() + 0.05,
                    1.8 * rng.next_double() - 0.9};
        Vec3 dir = normalize(Vec3{rng.next_double() - 0.5, rng.next_double() - 0.5,
                                  rng.next_double() - 0.5});
        hits += scene.intersect(origin, dir, 1e-4).has_value();
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin)
                         .count();
    INFO("rays/s: " << n / seconds << ", hit fraction: " << double(hits) / n);
    REQUIRE(n / seconds > 1e5);
}
