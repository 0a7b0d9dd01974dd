#include "tractforge/tower.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "tractforge/errors.hpp"

namespace tractforge {

const double kTowerLmin = std::log(kTowerLmax);

namespace {

constexpr double kAbsorbGap = 34.538776394910684;  // -log(1e-15)

int value_sign(const TowerScalar& x) {
    if (x.level == 0) return x.mantissa > 0 ? 1 : (x.mantissa < 0 ? -1 : 0);
    return x.sign;
}

TowerScalar magnitude(const TowerScalar& x) {
    TowerScalar r = x;
    if (r.level == 0)
        r.mantissa = std::fabs(r.mantissa);
    else
        r.sign = 1;
    return r;
}

Ordering mag_cmp(const TowerScalar& x, const TowerScalar& y) {
    double mx = x.level == 0 ? std::fabs(x.mantissa) : x.mantissa;
    double my = y.level == 0 ? std::fabs(y.mantissa) : y.mantissa;
    if (x.level != y.level) return x.level < y.level ? Ordering::LT : Ordering::GT;
    if (std::fabs(mx - my) <= kTowerEqTol) return Ordering::EQ;
    return mx < my ? Ordering::LT : Ordering::GT;
}

TowerScalar with_flag(TowerScalar x, bool flag) {
    x.absorbed = x.absorbed || flag;
    return x;
}

// la - lb for la >= lb, +inf once the gap is beyond double range
double log_gap(const TowerScalar& la, const TowerScalar& lb) {
    if (tower_cmp(la, lb) == Ordering::EQ) return 0.0;
    double a = tower_to_double(la);
    double b = tower_to_double(lb);
    if (std::isfinite(a) && std::isfinite(b)) return a - b;
    return std::numeric_limits<double>::infinity();
}

}  // namespace

TowerScalar tower_normalize(int level, double mantissa, int sign) {
    if (!std::isfinite(mantissa)) throw InvalidScalar("non-finite mantissa");
    if (level < 0) throw InvalidScalar("negative level");
    sign = sign < 0 ? -1 : 1;
    TowerScalar r;
    if (level == 0) {
        double v = sign * mantissa;
        if (std::fabs(v) <= kTowerLmax) {
            r.mantissa = v;
            return r;
        }
        sign = v < 0 ? -1 : 1;
        mantissa = std::log(std::fabs(v));
        level = 1;
    }
    while (mantissa >= kTowerLmax) {
        mantissa = std::log(mantissa);
        ++level;
    }
    while (level >= 1 && mantissa < kTowerLmin) {
        mantissa = std::exp(mantissa);
        --level;
    }
    if (level == 0) {
        r.mantissa = sign * mantissa;
        return r;
    }
    r.level = level;
    r.mantissa = mantissa;
    r.sign = sign;
    return r;
}

TowerScalar tower_from_double(double x) { return tower_normalize(0, x); }

TowerScalar tower_exp(const TowerScalar& x) {
    TowerScalar r;
    if (x.level == 0)
        r = tower_normalize(1, x.mantissa);
    else if (x.sign < 0)
        r = TowerScalar{};
    else
        r = tower_normalize(x.level + 1, x.mantissa);
    return with_flag(r, x.absorbed);
}

TowerScalar tower_log(const TowerScalar& x) {
    if (x.level == 0) {
        if (!(x.mantissa > 0)) throw DomainError("log of non-positive value");
        return with_flag(tower_normalize(0, std::log(x.mantissa)), x.absorbed);
    }
    if (x.sign < 0) throw DomainError("log of negative tower value");
    return with_flag(tower_normalize(x.level - 1, x.mantissa), x.absorbed);
}

TowerScalar tower_neg(const TowerScalar& x) {
    TowerScalar r = x;
    if (r.level == 0)
        r.mantissa = -r.mantissa;
    else
        r.sign = -r.sign;
    return r;
}

Ordering tower_cmp(const TowerScalar& x0, const TowerScalar& y0) {
    TowerScalar x = tower_normalize(x0.level, x0.mantissa, x0.sign);
    TowerScalar y = tower_normalize(y0.level, y0.mantissa, y0.sign);
    int sx = value_sign(x), sy = value_sign(y);
    if (sx != sy) {
        if (x.level == 0 && y.level == 0 && std::fabs(x.mantissa - y.mantissa) <= kTowerEqTol)
            return Ordering::EQ;
        return sx < sy ? Ordering::LT : Ordering::GT;
    }
    if (sx == 0) return Ordering::EQ;
    Ordering m = mag_cmp(x, y);
    if (sx > 0 || m == Ordering::EQ) return m;
    return m == Ordering::LT ? Ordering::GT : Ordering::LT;
}

bool tower_lt(const TowerScalar& x, const TowerScalar& y) { return tower_cmp(x, y) == Ordering::LT; }
bool tower_gt(const TowerScalar& x, const TowerScalar& y) { return tower_cmp(x, y) == Ordering::GT; }

TowerScalar tower_add_small(const TowerScalar& t, double c) {
    if (c == 0.0) return t;
    if (t.level == 0) return with_flag(tower_normalize(0, t.mantissa + c), t.absorbed);
    if (t.sign < 0) return tower_neg(tower_add_small(tower_neg(t), -c));
    if (t.level >= 2) return with_flag(t, true);
    double rel = c * std::exp(-t.mantissa);
    if (std::fabs(rel) < kAbsorbRel) return with_flag(t, true);
    if (rel <= -1.0) return with_flag(tower_normalize(0, std::exp(t.mantissa) + c), t.absorbed);
    return with_flag(tower_normalize(1, t.mantissa + std::log1p(rel)), t.absorbed);
}

TowerScalar tower_add(const TowerScalar& x0, const TowerScalar& y0) {
    TowerScalar x = with_flag(tower_normalize(x0.level, x0.mantissa, x0.sign), x0.absorbed);
    TowerScalar y = with_flag(tower_normalize(y0.level, y0.mantissa, y0.sign), y0.absorbed);
    bool flag = x.absorbed || y.absorbed;
    if (x.level == 0 && y.level == 0) return with_flag(tower_normalize(0, x.mantissa + y.mantissa), flag);
    if (value_sign(y) == 0) return x;
    if (value_sign(x) == 0) return y;

    Ordering m = mag_cmp(x, y);
    const TowerScalar& a = (m == Ordering::LT) ? y : x;
    const TowerScalar& b = (m == Ordering::LT) ? x : y;
    bool same = value_sign(a) == value_sign(b);
    if (m == Ordering::EQ && !same) return with_flag(TowerScalar{}, true);

    TowerScalar amag = magnitude(a);
    TowerScalar res;
    if (b.level == 0) {
        double c = std::fabs(b.mantissa) * (same ? 1.0 : -1.0);
        res = tower_add_small(amag, c);
    } else {
        TowerScalar la = tower_log(amag);
        TowerScalar lb = tower_log(magnitude(b));
        double g = log_gap(la, lb);
        if (g > kAbsorbGap) {
            res = with_flag(amag, true);
        } else {
            double r = std::exp(-g);
            res = tower_exp(tower_add_small(la, std::log1p(same ? r : -r)));
        }
    }
    if (value_sign(a) < 0) res = tower_neg(res);
    return with_flag(res, flag);
}

TowerScalar tower_sub(const TowerScalar& x, const TowerScalar& y) { return tower_add(x, tower_neg(y)); }

TowerScalar tower_mul(const TowerScalar& x0, const TowerScalar& y0) {
    TowerScalar x = with_flag(tower_normalize(x0.level, x0.mantissa, x0.sign), x0.absorbed);
    TowerScalar y = with_flag(tower_normalize(y0.level, y0.mantissa, y0.sign), y0.absorbed);
    bool flag = x.absorbed || y.absorbed;
    int s = value_sign(x) * value_sign(y);
    if (s == 0) return with_flag(TowerScalar{}, flag);
    if (x.level == 0 && y.level == 0) return with_flag(tower_normalize(0, x.mantissa * y.mantissa), flag);
    TowerScalar r = tower_exp(tower_add(tower_log(magnitude(x)), tower_log(magnitude(y))));
    if (s < 0) r = tower_neg(r);
    return with_flag(r, flag);
}

TowerScalar tower_scale(const TowerScalar& x, double c) { return tower_mul(x, tower_from_double(c)); }

TowerScalar tower_pow(const TowerScalar& x, double p) {
    if (value_sign(x) <= 0) throw DomainError("pow of non-positive tower value");
    if (p == 0.0) return with_flag(tower_from_double(1.0), x.absorbed);
    return tower_exp(tower_scale(tower_log(x), p));
}

TowerScalar tower_combine(const TowerScalar& x, const TowerScalar& y, TowerOp op) {
    switch (op) {
        case TowerOp::add: return tower_add(x, y);
        case TowerOp::mul: return tower_mul(x, y);
        case TowerOp::pow:
            if (y.level != 0) throw DomainError("pow exponent must be level 0");
            return tower_pow(x, y.mantissa);
    }
    return x;
}

TowerScalar tower_iter_log(TowerScalar x, int k) {
    for (int i = 0; i < k; ++i) x = tower_log(x);
    return x;
}

double tower_to_double(const TowerScalar& x) {
    if (x.level == 0) return x.mantissa;
    double v = x.level == 1 ? std::exp(x.mantissa) : std::numeric_limits<double>::infinity();
    return x.sign * v;
}

bool tower_is_zero(const TowerScalar& x) { return x.level == 0 && x.mantissa == 0.0; }
bool tower_is_negative(const TowerScalar& x) { return value_sign(x) < 0; }

std::string tower_to_string(const TowerScalar& x) {
    char buf[64];
    if (x.level == 0)
        std::snprintf(buf, sizeof buf, "%.17g", x.mantissa);
    else
        std::snprintf(buf, sizeof buf, "%sexp^%d(%.17g)", x.sign < 0 ? "-" : "", x.level, x.mantissa);
    return buf;
}

TowerScalar tower_parse(const std::string& s0) {
    auto b = s0.find_first_not_of(" \t");
    auto e = s0.find_last_not_of(" \t");
    if (b == std::string::npos) throw InvalidScalar("empty tower string");
    std::string s = s0.substr(b, e - b + 1);
    int sign = 1;
    if (s[0] == '-' && s.compare(1, 3, "exp") == 0) {
        sign = -1;
        s = s.substr(1);
    }
    try {
        if (s.compare(0, 3, "exp") == 0) {
            int level = 1;
            std::size_t pos = 3;
            if (pos < s.size() && s[pos] == '^') {
                std::size_t used = 0;
                level = std::stoi(s.substr(pos + 1), &used);
                pos += 1 + used;
            }
            if (pos >= s.size() || s[pos] != '(' || s.back() != ')') throw InvalidScalar("malformed tower string: " + s0);
            std::string inner = s.substr(pos + 1, s.size() - pos - 2);
            std::size_t used = 0;
            double m = std::stod(inner, &used);
            if (used != inner.size()) throw InvalidScalar("malformed tower mantissa: " + s0);
            return tower_normalize(level, m, sign);
        }
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw InvalidScalar("malformed number: " + s0);
        return tower_from_double(v);
    } catch (const std::logic_error&) {
        throw InvalidScalar("malformed tower string: " + s0);
    }
}

nlohmann::json tower_to_json(const TowerScalar& x) {
    nlohmann::json j = {{"level", x.level}, {"mantissa", x.mantissa}};
    if (x.level >= 1 && x.sign < 0) j["sign"] = -1;
    return j;
}

TowerScalar tower_from_json(const nlohmann::json& j) {
    if (j.is_string()) return tower_parse(j.get<std::string>());
    if (j.is_number()) return tower_from_double(j.get<double>());
    if (!j.is_object() || !j.contains("level") || !j.contains("mantissa"))
        throw InvalidScalar("tower json needs level and mantissa");
    int sign = j.value("sign", 1);
    return tower_normalize(j.at("level").get<int>(), j.at("mantissa").get<double>(), sign);
}

}  // namespace tractforge
