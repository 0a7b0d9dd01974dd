#include <doctest.h>

#include <cmath>
#include <random>

#include "tractforge/certify.hpp"

using namespace tractforge;

namespace {

constexpr double kPi = 3.14159265358979323846;

ToyTract toy(int n, double eps = 0.5) {
    std::vector<ToyWiggleParams> p;
    for (int k = 0; k < n; ++k) p.push_back({8.0 + 12 * k, 16.0 + 12 * k, eps});
    return toy_tract_build(p, 0.25, p.back().R + 12);
}

const MapHandle& four() {
    static const MapHandle h = map_build(toy(4));
    return h;
}

double center_modulus(const MapHandle& h, int j, double y = 0) {
    return std::abs(map_eval(h, cplx(h.tract.wiggles[j].tau, y)).w);
}

}  // namespace

TEST_CASE("gate condition on a solved model") {
    ToyTract t = toy(2);
    std::vector<double> planted = {0.3, 0.45};
    auto tg = forward_targets(t, planted);
    MapHandle h = map_build(toy_with_eps(t, planted));
    for (int j = 0; j < 2; ++j) {
        CertLine l = gate_condition_check(h, h.tract, j, tg[j], 1e-2);
        CHECK(l.pass);
        CHECK(l.steps.size() == 2);
        CHECK(l.rhs_value == doctest::Approx(1e-2 * 0.25));
    }
    CHECK(gate_condition_check(four(), four().tract, 1, center_modulus(four(), 1), 1e-2).pass);
}

TEST_CASE("gate condition fails at a bracket end") {
    ToyTract t = toy(1);
    auto tg = forward_targets(t, {0.3});
    Bracket b = gate_bracket(t, 0, tg[0]);
    MapHandle h = map_build(toy_with_eps(t, {b.a}));
    CertLine l = gate_condition_check(h, h.tract, 0, tg[0], 1e-2);
    CHECK_FALSE(l.pass);
    CHECK(l.note.find("delta = -1") != std::string::npos);
}

TEST_CASE("ordering chain") {
    const auto& h = four();
    for (int j = 0; j < 4; ++j) {
        CertLine l = chain_check(h, h.tract, j, center_modulus(h, j));
        CHECK(l.pass);
        for (const auto& s : l.steps) {
            if (s.id.find(".report.") != std::string::npos) continue;
            CHECK_MESSAGE(s.pass, s.id);
        }
        int reported = 0;
        for (const auto& s : l.steps) reported += s.id.find(".report.") != std::string::npos;
        CHECK(reported == (j < 3 ? 2 : 0));
    }
    // the lower companion of a point in the lower channel leaves the tract
    CHECK_THROWS_AS(chain_check(h, h.tract, 0, center_modulus(h, 0, -2 * kPi / 3)), GeometryError);
}

TEST_CASE("growth ratios are bounded and stable") {
    const auto& h = four();
    CertReport a = growth_report(h, h.tract, 100), b = growth_report(h, h.tract, 200);
    CHECK(a.pass());
    CHECK(a.lines.size() == 8);
    CHECK(a.constants.at("ratio_min") > 0);
    double ca = a.constants.at("C_emp"), cb = b.constants.at("C_emp");
    CHECK(std::isfinite(ca));
    CHECK(std::fabs(cb - ca) <= 0.1 * ca);
    CHECK(growth_report(h, h.tract, 100).to_json() == a.to_json());

    MapHandle s = map_build(toy_tract_build({}, 2.0, 20.0));
    CertReport d = growth_report(s, s.tract, 50);
    CHECK(d.pass());
    CHECK(d.lines.size() == 1);
}

TEST_CASE("monotonicity under shrinking gates") {
    ToyTract t = toy(2);
    std::vector<cplx> beyond = {cplx(10, -2), cplx(25, 0), cplx(30, 0)};
    std::vector<cplx> before = {cplx(5.5, 0), cplx(6, 1), cplx(7.5, -2)};

    CertLine same = monotonicity_check(t, {{0.5, 0.5}}, {{0.5, 0.5}}, beyond);
    CHECK(same.pass);
    CHECK(std::fabs(same.lhs_value) <= 1e-9);

    CertLine halved = monotonicity_check(t, {{0.25, 0.5}}, {{0.5, 0.5}}, beyond);
    CHECK(halved.pass);
    CHECK(halved.lhs_value > 0.1);

    CertLine near = monotonicity_check(t, {{0.25, 0.5}}, {{0.5, 0.5}}, before);
    for (const auto& s : near.steps) CHECK(std::fabs(s.lhs_value - s.rhs_value - 1e-9) <= 1e-8);

    CHECK_THROWS_AS(monotonicity_check(t, {{0.5, 0.5}}, {{0.25, 0.5}}, beyond), DomainError);
}

TEST_CASE("monotonicity on random nested pairs") {
    ToyTract t = toy(2);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> le(std::log(0.05), 0.0), ux(4.2, t.trusted_right()), uy(-kPi, kPi);
    for (int pair = 0; pair < 20; ++pair) {
        GateVector b{{std::exp(le(rng)), std::exp(le(rng))}}, a = b;
        for (double& e : a.eps) e *= std::exp(0.5 * le(rng));
        std::vector<cplx> pts;
        while (pts.size() < 10) {
            cplx z(ux(rng), uy(rng));
            ToyTract ta = toy_with_eps(t, a.eps);
            if (ta.contains(z) && ta.dist_to_boundary(z) > 1e-2) pts.push_back(z);
        }
        CertLine l = monotonicity_check(t, a, b, pts);
        CHECK_MESSAGE(l.pass, "pair " << pair << " worst margin " << l.lhs_value);
    }
}

TEST_CASE("arc doubling") {
    const auto& h = four();
    DoublingResult d = arc_doubling(h, h.tract, 3);
    REQUIRE(d.counts.size() == 4);
    CHECK(d.counts[0] == 1);
    for (int k = 0; k < 3; ++k) CHECK(d.counts[k + 1] >= 2 * d.counts[k]);
    for (std::size_t k = 1; k < d.levels.size(); ++k) {
        const auto& L = d.levels[k];
        for (const auto& arc : L.arcs) {
            CHECK(arc.size() == 2000);
            double a = std::abs(map_eval(h, arc.front()).w), b = std::abs(map_eval(h, arc.back()).w);
            double lo = std::min(a, b), hi = std::max(a, b);
            CHECK(lo == doctest::Approx(L.rho).epsilon(1e-6));
            CHECK(hi == doctest::Approx(L.rho_dot).epsilon(1e-6));
        }
    }
    CHECK(d.to_json()["counts"] == nlohmann::json({1, 2, 4, 8}));
}

TEST_CASE("arc doubling seed preconditions") {
    const auto& h = four();
    const auto& w = h.tract.wiggles[1];
    std::vector<cplx> no_cross = {cplx(w.tau, 0), cplx(w.tau, -2 * kPi / 3)};
    CHECK_THROWS_AS(arc_doubling(h, h.tract, 1, no_cross), DomainError);
    CHECK_THROWS_AS(arc_doubling(h, h.tract, 4), DomainError);
    DoublingResult one = arc_doubling(h, h.tract, 1);
    CHECK(one.counts == std::vector<int>{1, 2});
}
