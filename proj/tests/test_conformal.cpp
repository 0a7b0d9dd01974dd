#include <doctest.h>

#include <cmath>
#include <random>

#include "tractforge/conformal.hpp"

using namespace tractforge;

namespace {

constexpr double kPi = 3.14159265358979323846;

// mpmath, 30 digits
constexpr double kF6 = 11.276259652063807852;
constexpr double kFquarter = 6.7848124300078934420;
constexpr double kPre50 = 8.7059841553087415356;

const MapHandle& strip() {
    static const MapHandle h = map_build(toy_tract_build({}, 2.0, 20.0));
    return h;
}

const MapHandle& one_wiggle() {
    static const MapHandle h = map_build(toy_tract_build({{10, 30, 0.5}}, 2.0, 40.0));
    return h;
}

cplx random_interior(const ToyTract& t, std::mt19937_64& rng, double margin = 1e-3) {
    std::uniform_real_distribution<double> ux(t.x_left, t.trusted_right()), uy(-kPi, kPi);
    for (;;) {
        cplx z(ux(rng), uy(rng));
        if (t.contains(z) && t.dist_to_boundary(z) > margin) return z;
    }
}

}  // namespace

TEST_CASE("halfstrip oracle examples") {
    CHECK(std::abs(halfstrip_oracle(5.0) - 5.0) < 1e-14);
    CHECK(std::abs(halfstrip_oracle(6.0) - kF6) < 1e-12);
    cplx w = halfstrip_oracle(cplx(4, kPi / 2));
    CHECK(std::fabs(w.real()) < 1e-12);
    CHECK(std::fabs(w.imag() - kFquarter) < 1e-12);
    CHECK_THROWS_AS(halfstrip_oracle(cplx(3.9, 0)), DomainError);
    CHECK_THROWS_AS(halfstrip_oracle(cplx(6, 3.2)), DomainError);
}

TEST_CASE("strip map matches the oracle") {
    const auto& h = strip();
    CHECK(h.residual <= h.accuracy);
    std::mt19937_64 rng(7);
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        cplx z = random_interior(h.tract, rng);
        cplx w = map_eval(h, z).w, o = halfstrip_oracle(z);
        worst = std::max(worst, std::abs(w - o) / std::abs(o));
    }
    CHECK(worst <= 1e-6);
    CHECK(std::abs(map_inverse(h, kF6) - 6.0) < 1e-6);
    CHECK(std::abs(map_inverse(h, 5.0) - 5.0) < 1e-9);
}

TEST_CASE("strip map conjugation symmetry") {
    const auto& h = strip();
    for (cplx z : {cplx(5.5, 1.0), cplx(9, -2.5), cplx(15, 0.3)}) {
        cplx a = map_eval(h, std::conj(z)).w, b = std::conj(map_eval(h, z).w);
        CHECK(std::abs(a - b) <= 1e-9 * std::abs(a));
    }
    cplx z = map_inverse(h, 30.0);
    CHECK(std::fabs(z.imag()) < 1e-9);
}

TEST_CASE("one-wiggle normalization witnesses") {
    const auto& h = one_wiggle();
    CHECK(h.residual <= h.accuracy);
    CHECK(std::abs(h.base_image() - 5.0) <= h.accuracy);
    CHECK(std::abs(map_eval(h, 5.0).w - 5.0) <= h.accuracy);
    CHECK(h.boundary_monotone());
    auto j = h.to_json();
    CHECK(j["boundary_table"].size() == h.prevertices().size());
}

TEST_CASE("round trip on random interior points") {
    const auto& h = one_wiggle();
    std::mt19937_64 rng(11);
    double worst = 0;
    for (int i = 0; i < 200; ++i) {
        cplx z = random_interior(h.tract, rng);
        MapValue v = map_eval(h, z);
        CHECK(v.w.real() > 0);
        worst = std::max(worst, std::abs(map_inverse(h, v.w) - z) / (1 + std::abs(z)));
    }
    CHECK(worst <= 10 * h.accuracy);
}

TEST_CASE("map errors") {
    const auto& h = one_wiggle();
    CHECK_THROWS_AS(map_build(h.tract, 1e-12), DomainError);
    CHECK_THROWS_AS(map_build(h.tract, 1e-2), DomainError);
    CHECK_THROWS_AS(map_eval(h, cplx(20, kPi / 3)), DomainError);  // on a slit
    CHECK_THROWS_AS(map_eval(h, cplx(3, 0)), DomainError);
    CHECK_THROWS_AS(map_inverse(h, cplx(-1, 0)), DomainError);
    CHECK_THROWS_AS(map_inverse(h, cplx(1e200, 0)), TruncationError);
    CHECK(map_eval(h, cplx(45, 2.5)).truncation_warning);
    CHECK_FALSE(map_eval(h, cplx(12, 0)).truncation_warning);
}

TEST_CASE("warm start reuses the prevertex layout") {
    const auto& h = one_wiggle();
    MapHandle w = map_build(toy_with_eps(h.tract, {0.45}), 1e-10, &h);
    MapHandle c = map_build(toy_with_eps(h.tract, {0.45}));
    CHECK(w.iterations <= c.iterations);
    CHECK(std::abs(map_eval(w, cplx(25, 0.5)).w - map_eval(c, cplx(25, 0.5)).w) < 1e-8 * std::abs(map_eval(c, cplx(25, 0.5)).w));
}

TEST_CASE("geodesic traces") {
    const auto& s = strip();
    auto g = geodesic_trace(s, 5.0);
    double near = 1e9;
    for (auto z : g.polyline) near = std::min(near, std::abs(z - 5.0));
    CHECK(near <= 0.05);
    CHECK(g.start_on_boundary);
    CHECK(g.end_on_boundary);
    CHECK(g.max_modulus_error < 1e-8);
    for (std::size_t i = 0; i + 1 < g.polyline.size(); ++i) CHECK(std::abs(g.polyline[i + 1] - g.polyline[i]) <= 0.05);

    const auto& h = one_wiggle();
    auto g2 = geodesic_trace(h, 200.0);
    CHECK(g2.start_on_boundary);
    CHECK(g2.end_on_boundary);
    CHECK(g2.max_modulus_error < 1e-8);
    CHECK(g2.diameter > 0);
    CHECK_THROWS_AS(geodesic_trace(h, 1e200), TruncationError);
    CHECK(g2.to_csv().rfind("angle,re_z,im_z\n", 0) == 0);
}

TEST_CASE("hyperbolic distance") {
    const auto& s = strip();
    CHECK(std::fabs(hyp_dist(s, kPre50, 5.0) - std::log(10.0)) < 1e-8);
    cplx a(6, 1), b(9, -2);
    CHECK(hyp_dist(s, a, a) == doctest::Approx(0).epsilon(1e-12));
    CHECK(std::fabs(hyp_dist(s, a, b) - hyp_dist(s, b, a)) < 1e-12);
}

TEST_CASE("radial identity") {
    const auto& h = one_wiggle();
    for (double rho : {10.0, 100.0}) {
        cplx z = map_inverse(h, rho);
        CHECK(std::fabs(hyp_dist(h, 5.0, z) - std::log(rho / 5)) < 1e-4);
    }
}

TEST_CASE("density agrees with the oracle density") {
    const auto& s = strip();
    for (cplx z : {cplx(5, 0), cplx(7, 2), cplx(12, -1)}) {
        cplx w = halfstrip_oracle(z);
        double dw = std::abs((5.0 / std::sinh(0.5)) * std::cosh((z - 4.0) / 2.0) / 2.0);
        CHECK(hyp_density(s, z) == doctest::Approx(dw / w.real()).epsilon(1e-8));
    }
}

TEST_CASE("standard estimate bounds") {
    ToyTract t = toy_tract_build({}, 2.0, 20.0);
    auto b = hyp_length_bounds(t, {cplx(8, 0), cplx(9, 0)});
    CHECK(b.lower == doctest::Approx(1 / (2 * kPi)).epsilon(1e-10));
    CHECK(b.upper == doctest::Approx(2 / kPi).epsilon(1e-10));
    CHECK_FALSE(b.pullback.has_value());
    CHECK_THROWS_AS(hyp_length_bounds(t, {cplx(5, 0), cplx(5, 4)}), DegenerateDistance);
    CHECK_THROWS_AS(hyp_length_bounds(t, {cplx(4, 0), cplx(5, 0)}), DegenerateDistance);
}

TEST_CASE("pullback length is sandwiched") {
    const auto& h = one_wiggle();
    auto segs = h.tract.boundary_segments();
    std::mt19937_64 rng(3);
    int done = 0;
    while (done < 50) {
        std::vector<cplx> poly{random_interior(h.tract, rng, 0.05)};
        bool ok = true;
        for (int k = 0; k < 3 && ok; ++k) {
            cplx n = random_interior(h.tract, rng, 0.05);
            if (std::abs(n - poly.back()) > 6) continue;
            for (const auto& s : segs)
                if (segments_intersect({poly.back(), n}, s)) ok = false;
            if (ok) poly.push_back(n);
        }
        if (!ok || poly.size() < 2) continue;
        auto b = hyp_length_bounds(h.tract, poly, &h);
        REQUIRE(b.pullback.has_value());
        CHECK(b.lower <= *b.pullback);
        CHECK(*b.pullback <= b.upper);
        ++done;
    }
}

TEST_CASE("pullback along a gate piece") {
    MapHandle h = map_build(toy_tract_build({{10, 30, 0.1}}, 2.0, 40.0));
    double tau = h.tract.wiggles[0].tau;
    auto b = hyp_length_bounds(h.tract, {cplx(tau - 1, 2 * kPi / 3), cplx(tau + 1, 2 * kPi / 3)}, &h);
    double cf = gate_integral_closed_form(0.1);
    CHECK(*b.pullback >= cf / 4);
    CHECK(*b.pullback <= 2 * cf);
}

TEST_CASE("shrinking a gate never decreases distance from the base point") {
    const auto& big = one_wiggle();
    MapHandle small = map_build(toy_with_eps(big.tract, {0.25}), 1e-10, &big);
    for (cplx z : {cplx(8, 0), cplx(15, 2), cplx(25, 2.0), cplx(29.5, 0), cplx(35, -2)}) {
        CHECK(hyp_dist(small, 5.0, z) >= hyp_dist(big, 5.0, z) - 1e-9);
    }
}
