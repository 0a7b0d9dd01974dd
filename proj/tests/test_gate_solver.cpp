#include <doctest.h>

#include <cmath>

#include "tractforge/gate_solver.hpp"

using namespace tractforge;

namespace {

constexpr double kPi = 3.14159265358979323846;

ToyTract shoot_toy(int n) {
    std::vector<ToyWiggleParams> all = {{8, 16, 0.5}, {20, 28, 0.5}, {32, 40, 0.5}};
    std::vector<ToyWiggleParams> p(all.begin(), all.begin() + n);
    return toy_tract_build(p, 0.25, p.back().R + 12);
}

}  // namespace

TEST_CASE("delta at the band center vanishes") {
    ToyTract t = shoot_toy(1);
    auto tg = forward_targets(t, {0.4});
    MapHandle h = map_build(toy_with_eps(t, {0.4}));
    CHECK(std::fabs(delta_j(h, h.tract, 0, tg[0])) < 1e-9);
    cplx z = map_inverse(h, tg[0]);
    CHECK(z.real() == doctest::Approx(h.tract.wiggles[0].tau).epsilon(1e-9));
    CHECK(std::fabs(z.imag()) < kPi / 3);
    CHECK_THROWS_AS(delta_j(h, h.tract, 0, -1.0), DomainError);
}

TEST_CASE("bracket endpoints carry the face signs") {
    ToyTract t = shoot_toy(1);
    MapHandle h = map_build(t);
    double target = std::abs(map_eval(h, cplx(t.wiggles[0].tau, 0)).w);
    Bracket b = gate_bracket(t, 0, target);
    CHECK(b.a < 0.5);
    CHECK(b.b > 0.5);
    CHECK(b.b <= 1.0);
    MapHandle lo = map_build(toy_with_eps(t, {b.a})), hi = map_build(toy_with_eps(t, {b.b}));
    CHECK(delta_j(lo, lo.tract, 0, target) == -1.0);
    CHECK(delta_j(hi, hi.tract, 0, target) == 1.0);
}

TEST_CASE("unreachable targets have no bracket") {
    ToyTract t = shoot_toy(1);
    CHECK_THROWS_AS(gate_bracket(t, 0, 6.0), NoBracket);
}

TEST_CASE("single gate is plain bisection") {
    ToyTract t = shoot_toy(1);
    auto tg = forward_targets(t, {0.3});
    ShootResult r = shoot_solve(t, tg, 1e-3);
    CHECK(r.delta.residual <= 1e-3);
    CHECK(r.solve_builds <= 20);
    CHECK(r.faces.pass());
    CHECK(r.faces.lines.size() == 2);
    CHECK(r.gates.eps[0] == doctest::Approx(0.3).epsilon(1e-3));
    CHECK(r.transcript["rounds"].size() == r.history.size());

    ShootResult again = shoot_solve(t, tg, 1e-3);
    CHECK(again.gates.eps == r.gates.eps);
}

TEST_CASE("two gates: faces and plant-and-recover") {
    ToyTract t = shoot_toy(2);
    std::vector<double> planted = {0.3, 0.45};
    auto tg = forward_targets(t, planted);
    ShootResult r = shoot_solve(t, tg, 1e-3);
    CHECK(r.faces.pass());
    CHECK(r.faces.lines.size() == 4);
    for (const auto& l : r.faces.lines) CHECK(l.steps.size() == 3);
    CHECK(r.delta.residual <= 1e-3);
    for (int j = 0; j < 2; ++j) {
        CHECK(r.gates.eps[j] >= r.brackets[j].a);
        CHECK(r.gates.eps[j] <= r.brackets[j].b);
        CHECK(r.gates.eps[j] == doctest::Approx(planted[j]).epsilon(1e-2));
    }
}

TEST_CASE("solver preconditions") {
    ToyTract t = shoot_toy(1);
    CHECK_THROWS_AS(shoot_solve(t, {100.0}, 1e-5), DomainError);
    CHECK_THROWS_AS(shoot_solve(t, {100.0, 200.0}, 1e-3), DomainError);
}
