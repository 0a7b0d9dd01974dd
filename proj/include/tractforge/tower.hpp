#pragma once

#include <string>

#include <json.hpp>

namespace tractforge {

// exp applied `level` times to `mantissa`, optionally negated.
struct TowerScalar {
    int level = 0;
    double mantissa = 0.0;
    int sign = 1;           // only meaningful for level >= 1
    bool absorbed = false;  // a smaller term was dropped somewhere upstream
};

inline constexpr double kTowerLmax = 1e8;
extern const double kTowerLmin;  // ln(kTowerLmax)
inline constexpr double kTowerEqTol = 1e-10;
inline constexpr double kAbsorbRel = 1e-15;

enum class Ordering { LT, EQ, GT };

TowerScalar tower_normalize(int level, double mantissa, int sign = 1);
TowerScalar tower_from_double(double x);
TowerScalar tower_exp(const TowerScalar& x);
TowerScalar tower_log(const TowerScalar& x);
TowerScalar tower_neg(const TowerScalar& x);

Ordering tower_cmp(const TowerScalar& x, const TowerScalar& y);
bool tower_lt(const TowerScalar& x, const TowerScalar& y);
bool tower_gt(const TowerScalar& x, const TowerScalar& y);

enum class TowerOp { add, mul, pow };
TowerScalar tower_combine(const TowerScalar& x, const TowerScalar& y, TowerOp op);

TowerScalar tower_add(const TowerScalar& x, const TowerScalar& y);
TowerScalar tower_sub(const TowerScalar& x, const TowerScalar& y);
TowerScalar tower_mul(const TowerScalar& x, const TowerScalar& y);
TowerScalar tower_pow(const TowerScalar& x, double p);
TowerScalar tower_scale(const TowerScalar& x, double c);
TowerScalar tower_add_small(const TowerScalar& x, double c);

// log applied k times; throws DomainError if an intermediate value is <= 0
TowerScalar tower_iter_log(TowerScalar x, int k);

// machine value, +-inf when out of range
double tower_to_double(const TowerScalar& x);
bool tower_is_zero(const TowerScalar& x);
bool tower_is_negative(const TowerScalar& x);

std::string tower_to_string(const TowerScalar& x);
TowerScalar tower_parse(const std::string& s);

nlohmann::json tower_to_json(const TowerScalar& x);
TowerScalar tower_from_json(const nlohmann::json& j);

}  // namespace tractforge
