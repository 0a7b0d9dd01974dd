#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tractforge/tower.hpp"

namespace tractforge {

struct TableInterp;

struct GrowthProfile {
    enum class Kind { loglog_alpha, scaled_theta, table };

    Kind kind = Kind::loglog_alpha;
    double alpha = 1.0;
    double factor = 1.0;
    std::shared_ptr<const GrowthProfile> base;
    std::vector<std::pair<double, double>> knots;  // (t, Phi(t))
    double t_min = 1.0;
    std::shared_ptr<const TableInterp> interp;

    static GrowthProfile loglog(double alpha, double t_min = 1.0);
    static GrowthProfile scaled(const GrowthProfile& base, double factor);
    static GrowthProfile table(std::vector<std::pair<double, double>> knots, double t_min = 0.0);

    // exp(exp(alpha)) for the log-log family (and scaled versions of it), t_min otherwise
    double t0() const;
    std::string describe() const;
};

GrowthProfile profile_from_json(const nlohmann::json& j);
nlohmann::json profile_to_json(const GrowthProfile& p);
// "loglog:1", "loglog:1:16", "scaled:0.9:loglog:1", or inline JSON
GrowthProfile profile_parse(const std::string& spec);

// log Phi as a function of lt = log t. raw=true uses the closed form of the law
// even below t0 (no extension); extension is set when the linear-in-log-t piece is used.
TowerScalar log_phi_of_logt(const GrowthProfile& p, const TowerScalar& lt, bool raw = false,
                            bool* extension = nullptr);
double phi_exponent(const GrowthProfile& p, const TowerScalar& t, bool* extension = nullptr);
// Phi(t) * log t, kept in tower form
TowerScalar phi_excess(const GrowthProfile& p, const TowerScalar& t);

TowerScalar phi_eval(const GrowthProfile& p, const TowerScalar& t);

struct PhiInverseResult {
    TowerScalar t;
    TowerScalar bracket_lo;
    TowerScalar bracket_hi;
    bool bracket_held = false;  // the M-bracket contained the root without widening
    int widenings = 0;
    int iterations = 0;
    double residual = 0.0;  // |phi(t) - w| / w (log-domain measure at tower level)
};

PhiInverseResult phi_inverse_detail(const GrowthProfile& p, const TowerScalar& w, double rel_tol,
                                    double M = 2.0);
TowerScalar phi_inverse(const GrowthProfile& p, const TowerScalar& w, double rel_tol);

struct PsiValue {
    double Psi = 0.0;
    TowerScalar log_Psi;
    TowerScalar psi;
};
PsiValue psi_eval(const GrowthProfile& p, const TowerScalar& t);

struct LawSample {
    TowerScalar t;
    double value = 0.0;
    double log_value = 0.0;
    bool pass = false;
};

struct LawProperty {
    std::string name;
    std::string description;
    std::vector<LawSample> samples;
    double monotone_fraction = 0.0;
    double last_value = 0.0;
    bool trend = false;  // limit-type property judged on the tail of the grid
    bool pass = false;
    std::string flag;
};

struct LawReport {
    std::string profile;
    double beta = 0.0;
    std::vector<LawProperty> properties;
    std::map<std::string, double> stats;
    bool pass = false;

    const LawProperty& property(const std::string& name) const;
    nlohmann::json to_json() const;
    std::string to_csv() const;
};

std::vector<TowerScalar> grid_geometric(int n, double lo, double hi);
// t = exp(exp(L)) with L geometric in [L_lo, L_hi]
std::vector<TowerScalar> grid_loglog(int n, double L_lo, double L_hi);
std::vector<TowerScalar> grid_parse(const std::string& spec);

LawReport theta_properties(const GrowthProfile& p, const std::vector<TowerScalar>& grid, double beta = 0.5);
LawReport theta_properties(const GrowthProfile& p, const std::vector<double>& grid, double beta = 0.5);

double theta_raw(const GrowthProfile& p, double t);
double theta_derivative(const GrowthProfile& p, double t);
double theta_fd_error(const GrowthProfile& p, double t, double h);
LawReport theta_derivative_check(const GrowthProfile& p, const std::vector<double>& grid,
                                 double h_rel = 1e-4, double tol = 1e-6);

struct PhiShiftResult {
    double t_star = 0.0;
    double phi_at_one = 0.0;
    int checked = 0;
    int passed = 0;
    bool pass = false;
};
PhiShiftResult phi_shift_threshold(const GrowthProfile& p, double alpha, double M, int samples = 50);

}  // namespace tractforge
