// ipt: inverse path tracing toolkit
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ipt/materials.hpp"
#include "ipt/rng.hpp"

using namespace ipt;

namespace {

const Vec3 kN{0.0, 0.0, 1.0};

Vec3 from_cos(double cos_theta, double phi) {
    double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
    return {sin_theta * std::cos(phi), sin_theta * std::sin(phi), cos_theta};
}

Vec3 random_upper(RngStream& rng, double min_cos = 0.05) {
    double c = min_cos + (1.0 - min_cos) * rng.next_double();
    return from_cos(c, 2.0 * kPi * rng.next_double());
}

// Cosine-weighted Monte Carlo estimate of the directional albedo
// integral(f_r (wo.n) dwo) for fixed wi; returns (mean, 3*sigma) per request.
std::pair<double, double> furnace(const MaterialParams& mat, const Vec3& wi, int n,
                                  std::uint64_t seed) {
    RngStream rng(seed, 1, 2, 3);
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double u1 = rng.next_double(), u2 = rng.next_double();
        Vec3 wo = from_cos(std::sqrt(1.0 - u1), 2.0 * kPi * u2);
        double v = eval_brdf(mat, kN, wi, wo).x * kPi;  // f * cos / (cos/pi)
        sum += v;
        sum_sq += v * v;
    }
    double mean = sum / n;
    double sigma = std::sqrt(std::max(0.0, sum_sq / n - mean * mean) / n);
    return {mean, 3.0 * sigma};
}

}  // namespace

TEST_CASE("rough grey surface is diffuse-dominated near base/pi") {
    MaterialParams m{{0.6, 0.6, 0.6}, 1.0};
    RngStream rng(4, 0, 0, 0);
    for (int i = 0; i < 50; ++i) {
        Vec3 wi = random_upper(rng), wo = random_upper(rng);
        RGB f = eval_brdf(m, kN, wi, wo);
        REQUIRE(f.x == f.y);
        REQUIRE(f.y == f.z);
        // Lambertian term 0.6/pi ~ 0.1910, Fresnel-weighted plus a small
        // wide-lobe specular residue.
        REQUIRE_THAT(f.x, Catch::Matchers::WithinAbs(0.6 * kInvPi, 0.02));
        REQUIRE(f.x >= (1.0 - brdf::kF0) * 0.6 * kInvPi);
    }
}

TEST_CASE("lower hemisphere evaluates to zero") {
    MaterialParams m{{0.6, 0.6, 0.6}, 0.4};
    Vec3 wi = from_cos(0.8, 0.3);
    Vec3 wo_down = from_cos(-0.2, 1.0);
    REQUIRE(eval_brdf(m, kN, wi, wo_down) == RGB(0.0));
    REQUIRE(eval_brdf(m, kN, wo_down, wi) == RGB(0.0));
    REQUIRE(pdf_brdf(m, kN, wi, wo_down) == 0.0);
    REQUIRE(grad_brdf(m, kN, wi, wo_down).d_base_color == 0.0);
}

TEST_CASE("white furnace: within 2% of base color at roughness 1") {
    for (double base : {0.3, 0.4, 0.5}) {
        MaterialParams m{{base, base, base}, 1.0};
        auto [mean, noise] = furnace(m, from_cos(1.0, 0.0), 1000000, 42);
        REQUIRE(mean > 0.0);
        REQUIRE(mean <= 1.0 + noise);
        REQUIRE(std::abs(mean - base) <= 0.02 * base + noise);
    }
}

TEST_CASE("energy conservation over the parameter grid") {
    // 5x5 grid of (base_color, roughness), two incident angles.
    for (double base : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        for (double rough : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            MaterialParams m{{base, base, base}, rough};
            for (double ci : {1.0, 0.5}) {
                auto [mean, noise] = furnace(m, from_cos(ci, 0.0), 200000, 7);
                INFO("base " << base << " rough " << rough << " cos " << ci);
                REQUIRE(mean <= 1.0 + noise);
            }
        }
    }
}

TEST_CASE("Helmholtz reciprocity") {
    RngStream rng(11, 0, 0, 0);
    for (int i = 0; i < 1000; ++i) {
        MaterialParams m{{rng.next_double(), rng.next_double(), rng.next_double()},
                         rng.next_double()};
        Vec3 wi = random_upper(rng), wo = random_upper(rng);
        RGB a = eval_brdf(m, kN, wi, wo);
        RGB b = eval_brdf(m, kN, wo, wi);
        REQUIRE_THAT(a.x, Catch::Matchers::WithinAbs(b.x, 1e-6));
        REQUIRE_THAT(a.y, Catch::Matchers::WithinAbs(b.y, 1e-6));
        REQUIRE_THAT(a.z, Catch::Matchers::WithinAbs(b.z, 1e-6));
    }
}

TEST_CASE("pdf: cosine density at roughness 1, zero below hemisphere") {
    MaterialParams m{{0.5, 0.5, 0.5}, 1.0};
    Vec3 wi = from_cos(0.7, 0.1);
    for (double c : {0.1, 0.4, 0.9}) {
        Vec3 wo = from_cos(c, 2.2);
        REQUIRE_THAT(pdf_brdf(m, kN, wi, wo), Catch::Matchers::WithinRel(c * kInvPi, 1e-12));
    }
    REQUIRE(pdf_brdf(m, kN, wi, from_cos(-0.5, 0.0)) == 0.0);
}

TEST_CASE("pdf integrates to one over the hemisphere") {
    // At roughness 1 the mixture is pure cosine and normalizes exactly.
    MaterialParams m{{0.5, 0.5, 0.5}, 1.0};
    for (double ci : {1.0, 0.8, 0.5}) {
        Vec3 wi = from_cos(ci, 0.0);
        RngStream rng(3, 7, 7, static_cast<std::uint32_t>(ci * 100));
        const int n = 1000000;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            Vec3 wo = from_cos(rng.next_double(), 2.0 * kPi * rng.next_double());
            sum += pdf_brdf(m, kN, wi, wo) * 2.0 * kPi;
        }
        REQUIRE_THAT(sum / n, Catch::Matchers::WithinAbs(1.0, 0.01));
    }
}

TEST_CASE("pdf is a sub-density below roughness 1") {
    // Half-vector reflections below the horizon are rejected by the sampler,
    // so the mixture mass over the hemisphere stays within (0.9, 1].
    for (double rough : {0.85, 0.6, 0.4}) {
        MaterialParams m{{0.5, 0.5, 0.5}, rough};
        Vec3 wi = from_cos(0.8, 0.0);
        RngStream rng(5, 7, 7, static_cast<std::uint32_t>(rough * 100));
        const int n = 500000;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            Vec3 wo = from_cos(rng.next_double(), 2.0 * kPi * rng.next_double());
            sum += pdf_brdf(m, kN, wi, wo) * 2.0 * kPi;
        }
        REQUIRE(sum / n <= 1.0 + 0.01);
        REQUIRE(sum / n > 0.9);
    }
}

TEST_CASE("sampling: pole of the cosine map at roughness 1") {
    MaterialParams m{{0.5, 0.5, 0.5}, 1.0};  // pure-diffuse mixture weight
    REQUIRE(brdf::diffuse_select_weight(1.0) == 1.0);
    auto s = sample_brdf(m, kN, from_cos(0.9, 0.0), 0.0, 0.0, 0.0);
    REQUIRE(s);
    REQUIRE_THAT(length(s->direction - kN), Catch::Matchers::WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(s->pdf_solid_angle, Catch::Matchers::WithinRel(kInvPi, 1e-12));
}

TEST_CASE("sampled pdf equals pdf_brdf at the sampled direction") {
    RngStream rng(21, 0, 0, 0);
    for (int i = 0; i < 20000; ++i) {
        MaterialParams m{{rng.next_double(), rng.next_double(), rng.next_double()},
                         rng.next_double()};
        Vec3 wi = random_upper(rng);
        auto s = sample_brdf(m, kN, wi, rng.next_double(), rng.next_double(), rng.next_double());
        if (!s)
            continue;
        double p = pdf_brdf(m, kN, wi, s->direction);
        REQUIRE_THAT(s->pdf_solid_angle, Catch::Matchers::WithinRel(p, 1e-6));
        REQUIRE(s->pdf_solid_angle > 0.0);
    }
}

TEST_CASE("cosine moment of diffuse sampling: mean (wo.n) near 2/3") {
    MaterialParams m{{0.5, 0.5, 0.5}, 1.0};
    Vec3 wi = from_cos(0.8, 0.0);
    RngStream rng(33, 0, 0, 0);
    const int n = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        auto s = sample_brdf(m, kN, wi, rng.next_double(), rng.next_double(), rng.next_double());
        REQUIRE(s);
        double c = dot(kN, s->direction);
        sum += c;
        sum_sq += c * c;
    }
    double mean = sum / n;
    double sigma = std::sqrt((sum_sq / n - mean * mean) / n);
    REQUIRE(std::abs(mean - 2.0 / 3.0) < 3.0 * sigma);
}

TEST_CASE("base color gradient: linear diffuse term, channel-diagonal") {
    MaterialParams m{{0.0, 0.0, 0.0}, 1.0};
    Vec3 wi = from_cos(0.8, 0.0), wo = from_cos(0.6, 1.5);
    BrdfGradient g = grad_brdf(m, kN, wi, wo);
    // d f_c / d base_c = (1 - F0)/pi independent of the current base color.
    REQUIRE_THAT(g.d_base_color, Catch::Matchers::WithinRel((1.0 - brdf::kF0) * kInvPi, 1e-12));
    m.base_color = {0.3, 0.9, 0.1};
    REQUIRE(grad_brdf(m, kN, wi, wo).d_base_color == g.d_base_color);
    // value with zero base is the pure specular term, equal across channels
    RGB f0 = eval_brdf(MaterialParams{{0, 0, 0}, 1.0}, kN, wi, wo);
    REQUIRE(f0.x == f0.y);
    REQUIRE(f0.x > 0.0);
}

TEST_CASE("analytic gradients match central differences on random configurations") {
    RngStream rng(77, 0, 0, 0);
    const double h = 1e-4;
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
        MaterialParams m{{rng.next_double(), rng.next_double(), rng.next_double()},
                         0.05 + 0.95 * rng.next_double()};
        Vec3 wi = random_upper(rng), wo = random_upper(rng);
        BrdfGradient g = grad_brdf(m, kN, wi, wo);

        MaterialParams rp = m, rm = m;
        rp.roughness += h;
        rm.roughness -= h;
        double fd_rough = (eval_brdf(rp, kN, wi, wo).x - eval_brdf(rm, kN, wi, wo).x) / (2.0 * h);
        double denom = std::max({std::abs(fd_rough), std::abs(g.d_roughness), 1e-9});
        REQUIRE(std::abs(fd_rough - g.d_roughness) / denom < 1e-3);

        MaterialParams bp = m, bm = m;
        bp.base_color.y += h;
        bm.base_color.y -= h;
        double fd_base = (eval_brdf(bp, kN, wi, wo).y - eval_brdf(bm, kN, wi, wo).y) / (2.0 * h);
        REQUIRE_THAT(fd_base, Catch::Matchers::WithinAbs(g.d_base_color, 1e-6));
        ++checked;
    }
    REQUIRE(checked == 1000);
}

TEST_CASE("emission profile and its gradient") {
    EmissionParams em{{2.0, 2.0, 2.0}};
    Vec3 n{0, 0, 1};
    REQUIRE(eval_emission(em, n, from_cos(0.5, 0.0)) == RGB(1.0));
    REQUIRE(eval_emission(em, n, from_cos(-0.3, 0.0)) == RGB(0.0));
    EmissionParams rgb{{1.5, 2.5, 3.5}};
    REQUIRE(eval_emission(rgb, n, n) == RGB(1.5, 2.5, 3.5));

    REQUIRE(grad_emission(n, from_cos(0.5, 0.0)) == 0.5);
    REQUIRE(grad_emission(n, from_cos(-1.0, 0.0)) == 0.0);

    // linear model: finite differences match exactly
    const double h = 1e-4;
    Vec3 wo = from_cos(0.73, 0.4);
    EmissionParams p = em, q = em;
    p.flux.x += h;
    q.flux.x -= h;
    double fd = (eval_emission(p, n, wo).x - eval_emission(q, n, wo).x) / (2.0 * h);
    REQUIRE_THAT(fd, Catch::Matchers::WithinAbs(grad_emission(n, wo), 1e-9));
}
