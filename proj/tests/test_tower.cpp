#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "tractforge/errors.hpp"
#include "tractforge/tower.hpp"

using namespace tractforge;
using mp = boost::multiprecision::cpp_bin_float_50;

namespace {

bool same_value(const TowerScalar& a, const TowerScalar& b) { return tower_cmp(a, b) == Ordering::EQ; }

TowerScalar random_tower(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> lev(0, 5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int level = lev(rng);
    if (level == 0) return tower_normalize(0, (u(rng) * 1.007 - 0.007) * 1e5 * std::pow(10.0, -5 * u(rng)));
    double m = std::exp(std::log(kTowerLmin) + u(rng) * (std::log(kTowerLmax) - std::log(kTowerLmin)));
    return tower_normalize(level, std::min(m, 0.999999 * kTowerLmax));
}

}  // namespace

TEST_CASE("normalize keeps small level-0 values") {
    auto x = tower_normalize(0, 3.0);
    CHECK(x.level == 0);
    CHECK(x.mantissa == 3.0);
}

TEST_CASE("normalize bumps values above the cap") {
    auto x = tower_normalize(0, 1e9);
    CHECK(x.level == 1);
    double oracle = static_cast<double>(boost::multiprecision::log(mp(1e9)));
    CHECK(x.mantissa == doctest::Approx(oracle).epsilon(1e-15));
    CHECK(x.mantissa == doctest::Approx(20.7232658369464).epsilon(1e-13));
}

TEST_CASE("normalize drops levels with small mantissa") {
    auto x = tower_normalize(2, 0.1);
    CHECK(x.level == 0);
    double oracle = static_cast<double>(boost::multiprecision::exp(boost::multiprecision::exp(mp("0.1"))));
    CHECK(x.mantissa == doctest::Approx(oracle).epsilon(1e-14));
    CHECK(x.mantissa == doctest::Approx(3.0197405529455).epsilon(1e-12));
}

TEST_CASE("normalize rejects non-finite input") {
    CHECK_THROWS_AS(tower_normalize(0, NAN), InvalidScalar);
    CHECK_THROWS_AS(tower_normalize(1, INFINITY), InvalidScalar);
}

TEST_CASE("normalized level >= 1 mantissa lies in [Lmin, Lmax)") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 500; ++i) {
        auto x = random_tower(rng);
        if (x.level >= 1) {
            CHECK(x.mantissa >= kTowerLmin);
            CHECK(x.mantissa < kTowerLmax);
        } else {
            CHECK(std::fabs(x.mantissa) <= kTowerLmax);
        }
    }
}

TEST_CASE("exp examples") {
    CHECK(same_value(tower_exp(tower_normalize(0, 3)), tower_normalize(1, 3)));
    CHECK(tower_to_double(tower_exp(tower_normalize(0, 3))) == doctest::Approx(std::exp(3.0)).epsilon(1e-15));
    auto y = tower_exp(tower_normalize(1, 20.72));
    CHECK(y.level == 2);
    CHECK(y.mantissa == doctest::Approx(20.72).epsilon(1e-15));
    auto z = tower_exp(tower_normalize(0, 0));
    CHECK(z.level == 0);
    CHECK(z.mantissa == 1.0);
}

TEST_CASE("log examples") {
    CHECK(tower_to_double(tower_log(tower_normalize(1, 3))) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(tower_log(tower_normalize(0, 1)).mantissa == 0.0);
    CHECK(same_value(tower_log(tower_normalize(2, 5)), tower_normalize(1, 5)));
    CHECK_THROWS_AS(tower_log(tower_normalize(0, 0)), DomainError);
    CHECK_THROWS_AS(tower_log(tower_normalize(0, -2)), DomainError);
}

TEST_CASE("cmp examples") {
    CHECK(tower_cmp(tower_normalize(1, 100), tower_normalize(2, 1.0)) == Ordering::GT);
    CHECK(tower_cmp(tower_normalize(0, 5), tower_normalize(0, 5)) == Ordering::EQ);
    CHECK(tower_cmp(tower_normalize(0, 7), tower_normalize(1, 2)) == Ordering::LT);
    CHECK(tower_cmp(tower_normalize(3, 30), tower_normalize(3, 30 + 1e-11)) == Ordering::EQ);
    CHECK(tower_cmp(tower_normalize(3, 30), tower_normalize(3, 30 + 1e-9)) == Ordering::LT);
    CHECK(tower_cmp(tower_normalize(2, 30, -1), tower_normalize(0, -5)) == Ordering::LT);
    CHECK(tower_cmp(tower_normalize(2, 30, -1), tower_normalize(2, 40, -1)) == Ordering::GT);
}

TEST_CASE("combine examples") {
    auto s = tower_combine(tower_normalize(1, 10), tower_normalize(1, 10), TowerOp::add);
    CHECK(same_value(s, tower_normalize(1, 10 + std::log(2.0))));
    auto big = tower_add(tower_normalize(2, 21), tower_normalize(2, 21));
    CHECK(big.level == 2);
    double oracle = static_cast<double>(boost::multiprecision::log(boost::multiprecision::exp(mp(21)) + boost::multiprecision::log(mp(2))));
    CHECK(big.mantissa == doctest::Approx(oracle).epsilon(1e-14));

    auto m = tower_combine(tower_normalize(1, 5), tower_normalize(1, 7), TowerOp::mul);
    CHECK(same_value(m, tower_normalize(1, 12)));

    auto a = tower_combine(tower_normalize(2, 50), tower_normalize(0, 1), TowerOp::add);
    CHECK(a.level == 2);
    CHECK(a.mantissa == 50.0);
    CHECK(a.absorbed);

    auto p = tower_combine(tower_normalize(1, 30), tower_normalize(0, 2), TowerOp::pow);
    CHECK(same_value(p, tower_normalize(1, 60)));
}

TEST_CASE("add of close level-1 values matches log-sum-exp oracle") {
    auto a = tower_normalize(1, 500.0), b = tower_normalize(1, 497.5);
    auto s = tower_add(a, b);
    mp ex = boost::multiprecision::log(boost::multiprecision::exp(mp(500)) + boost::multiprecision::exp(mp("497.5")));
    CHECK(s.level == 1);
    CHECK(s.mantissa == doctest::Approx(static_cast<double>(ex)).epsilon(1e-14));
    CHECK_FALSE(s.absorbed);
}

TEST_CASE("subtraction of separated values and small constants") {
    auto r = tower_normalize(1, 40.0);
    auto d = tower_add_small(r, -182.0);
    mp ex = boost::multiprecision::log(boost::multiprecision::exp(mp(40)) - 182);
    CHECK(d.mantissa == doctest::Approx(static_cast<double>(ex)).epsilon(1e-15));
    auto x = tower_sub(tower_normalize(3, 25), tower_normalize(2, 25));
    CHECK(same_value(x, tower_normalize(3, 25)));
    CHECK(x.absorbed);
    auto neg = tower_sub(tower_normalize(0, 5), tower_normalize(2, 25));
    CHECK(tower_is_negative(neg));
}

TEST_CASE("property: log(exp(x)) round trip for 1000 random towers") {
    std::mt19937_64 rng(1234);
    for (int i = 0; i < 1000; ++i) {
        auto x = random_tower(rng);
        auto y = tower_log(tower_exp(x));
        CHECK(y.level == x.level);
        double scale = std::max(1.0, std::fabs(x.mantissa));
        CHECK(std::fabs(y.mantissa - x.mantissa) <= 1e-12 * scale);
    }
}

TEST_CASE("property: order embedding for level-0 values") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1e8, 1e8);
    for (int i = 0; i < 1000; ++i) {
        double a = u(rng), b = u(rng);
        if (i % 5 == 0) b = a;
        Ordering o = tower_cmp(tower_from_double(a), tower_from_double(b));
        if (std::fabs(a - b) <= kTowerEqTol)
            CHECK(o == Ordering::EQ);
        else
            CHECK(o == (a < b ? Ordering::LT : Ordering::GT));
    }
}

TEST_CASE("property: exp and log are order preserving") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 1000; ++i) {
        auto x = random_tower(rng), y = random_tower(rng);
        Ordering o = tower_cmp(x, y);
        if (o == Ordering::EQ) continue;
        CHECK(tower_cmp(tower_exp(x), tower_exp(y)) == o);
        if (!tower_is_negative(x) && !tower_is_negative(y) && !tower_is_zero(x) && !tower_is_zero(y))
            CHECK(tower_cmp(tower_log(x), tower_log(y)) == o);
    }
}

TEST_CASE("property: add is commutative and associative at equal levels") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(20.0, 600.0);
    for (int level = 1; level <= 3; ++level) {
        for (int i = 0; i < 200; ++i) {
            auto a = tower_normalize(level, u(rng)), b = tower_normalize(level, u(rng)), c = tower_normalize(level, u(rng));
            auto ab = tower_add(a, b), ba = tower_add(b, a);
            CHECK(ab.level == ba.level);
            CHECK(std::fabs(ab.mantissa - ba.mantissa) <= 1e-12 * ab.mantissa);
            auto l = tower_add(tower_add(a, b), c), r = tower_add(a, tower_add(b, c));
            CHECK(l.level == r.level);
            CHECK(std::fabs(l.mantissa - r.mantissa) <= 1e-12 * l.mantissa);
        }
    }
}

TEST_CASE("string and json forms round trip") {
    auto x = tower_normalize(3, 21.3);
    CHECK(tower_to_string(x) == "exp^3(21.300000000000001)");
    CHECK(same_value(tower_parse(tower_to_string(x)), x));
    CHECK(same_value(tower_parse("1e6"), tower_from_double(1e6)));
    CHECK(same_value(tower_parse("exp^2(21.3)"), tower_normalize(2, 21.3)));
    CHECK(same_value(tower_parse("-exp^2(21.3)"), tower_normalize(2, 21.3, -1)));
    CHECK_THROWS_AS(tower_parse("exp^2(abc)"), InvalidScalar);
    CHECK_THROWS_AS(tower_parse("12x"), InvalidScalar);
    auto j = tower_to_json(x);
    CHECK(j["level"] == 3);
    CHECK(same_value(tower_from_json(j), x));
    auto n = tower_normalize(4, 30, -1);
    CHECK(same_value(tower_from_json(tower_to_json(n)), n));
}
