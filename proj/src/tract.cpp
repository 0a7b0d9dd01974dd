#include "tractforge/tract.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "tractforge/errors.hpp"

namespace tractforge {

namespace {

constexpr double kPi = 3.14159265358979323846;

TowerScalar T(double x) { return tower_from_double(x); }
std::string S(const TowerScalar& x) { return tower_to_string(x); }

// log(e^D - 1) for D > 0
TowerScalar log_expm1(const TowerScalar& D) {
    if (D.level == 0 && D.mantissa < 30) return T(std::log(std::expm1(D.mantissa)));
    if (D.level == 0) return tower_add_small(D, std::log1p(-std::exp(-D.mantissa)));
    return D;
}

// hi - lo > c where lo = exp(log_lo) and hi = lo * exp(D)
CertLine gap_line(const std::string& id, const std::string& claim, const TowerScalar& log_lo, const TowerScalar& D,
                  double c) {
    CertLine l;
    l.id = id;
    l.claim = claim;
    if (!tower_gt(D, T(0.0))) {
        l.lhs = "log-gap " + S(D);
        l.rhs = "0";
        l.pass = false;
        l.note = "upper value does not exceed lower value";
        return l;
    }
    TowerScalar lhs = tower_add(log_lo, log_expm1(D));
    l.lhs = "log(difference) = " + S(lhs);
    l.rhs = "log(" + fmt17(c) + ") = " + fmt17(std::log(c));
    l.lhs_value = tower_to_double(lhs);
    l.rhs_value = std::log(c);
    l.pass = tower_gt(lhs, T(std::log(c)));
    return l;
}

CertLine cmp_line(const std::string& id, const std::string& claim, const TowerScalar& lhs, const TowerScalar& rhs,
                  bool strict = true) {
    CertLine l;
    l.id = id;
    l.claim = claim;
    l.lhs = S(lhs);
    l.rhs = S(rhs);
    l.lhs_value = tower_to_double(lhs);
    l.rhs_value = tower_to_double(rhs);
    Ordering o = tower_cmp(lhs, rhs);
    l.pass = strict ? o == Ordering::GT : o != Ordering::LT;
    if (lhs.absorbed || rhs.absorbed) l.note = "absorbed terms present";
    return l;
}

CertLine eq_line(const std::string& id, const std::string& claim, const TowerScalar& lhs, const TowerScalar& rhs) {
    CertLine l = cmp_line(id, claim, lhs, rhs);
    l.pass = tower_cmp(lhs, rhs) == Ordering::EQ;
    l.tolerance = kTowerEqTol;
    return l;
}

std::string idx(const std::string& base, int j) { return base + "[" + std::to_string(j) + "]"; }

}  // namespace

WiggleRecord wiggle_from_logs(const GrowthProfile& profile, int j, const TowerScalar& log_r, const TowerScalar& log_R,
                              double C, double nu0) {
    WiggleRecord w;
    w.j = j;
    w.log_r = log_r;
    w.log_R = log_R;
    w.r = tower_exp(log_r);
    w.R = tower_exp(log_R);
    w.tau = tower_add_small(w.R, -(2.0 + 3.0 * nu0));
    w.phi_R = phi_eval(profile, w.R);
    w.excess = phi_excess(profile, w.R);
    w.log_a = tower_neg(tower_scale(w.phi_R, 2.0 * C));
    w.log_b = tower_neg(tower_scale(w.phi_R, 1.0 / (2.0 * C)));
    w.log_gap = tower_sub(log_R, log_r);
    w.gap_exact = false;
    return w;
}

TractDatum datum_generate(const GrowthProfile& profile, const TowerScalar& r0, double C, double nu0, int N) {
    if (N < 1) throw InvalidDatum("N must be at least 1");
    if (!(C > 1)) throw InvalidDatum("C must exceed 1");
    if (!(nu0 > 0)) throw InvalidDatum("nu0 must be positive");
    if (!tower_gt(r0, T(6.0))) throw InvalidDatum("r0 too small: need r0 > 6");

    TractDatum d;
    d.profile = profile;
    d.r0 = r0;
    d.C = C;
    d.nu0 = nu0;

    TowerScalar lr = tower_log(r0);
    TowerScalar w = tower_add_small(lr, 1.0);
    if (tower_lt(w, phi_eval(profile, T(profile.t_min)))) throw InvalidDatum("r0 too small: log r0 + 1 below phi(t_min)");
    TowerScalar R_prev = phi_inverse(profile, w, 1e-12);  // phi(R_{-1}) = log r0 + 1
    TowerScalar D = tower_add_small(tower_scale(R_prev, 9.0), 1.0);
    TowerScalar lR = tower_add(lr, D);

    for (int j = 0; j < N; ++j) {
        WiggleRecord rec = wiggle_from_logs(profile, j, lr, lR, C, nu0);
        rec.log_gap = D;
        rec.gap_exact = true;
        d.terms.push_back(rec);
        if (j == 0) {
            double c = std::max(5.0 + 3.0 * nu0, 30.0);
            if (!gap_line("", "", rec.log_r, rec.log_gap, c).pass) throw InvalidDatum("r0 too small: spacing fails at j=0");
        }
        lr = tower_add_small(rec.phi_R, -1.0);
        TowerScalar nineR = tower_scale(rec.R, 9.0);
        lR = tower_add(rec.phi_R, nineR);
        D = tower_add_small(nineR, 1.0);
    }
    return d;
}

bool ValidationReport::pass() const {
    for (auto& c : checks)
        if (!c.pass) return false;
    return true;
}

std::vector<std::string> ValidationReport::failures() const {
    std::vector<std::string> out;
    for (auto& c : checks)
        if (!c.pass) out.push_back(c.id);
    return out;
}

bool ValidationReport::check_pass(const std::string& id) const {
    for (auto& c : checks)
        if (c.id == id) return c.pass;
    throw DomainError("no such check: " + id);
}

nlohmann::json ValidationReport::to_json() const {
    nlohmann::json j = {{"pass", pass()}, {"failures", failures()}};
    j["checks"] = nlohmann::json::array();
    for (auto& c : checks) j["checks"].push_back(c.to_json());
    return j;
}

ValidationReport datum_validate(const TractDatum& d) {
    ValidationReport rep;
    const double nu0 = d.nu0, C = d.C, M = 2.0 * C * C;
    const double cR = std::max(5.0 + 3.0 * nu0, 30.0);
    const double cr = std::max(2.0 * nu0, 60.0);
    const int n = static_cast<int>(d.terms.size());
    TowerScalar sum_phi = T(0.0);

    for (int j = 0; j < n; ++j) {
        const WiggleRecord& w = d.terms[j];
        rep.checks.push_back(gap_line(idx("datasets.R", j), "R_j > r_j + 30", w.log_r, w.log_gap, 30.0));
        rep.checks.push_back(gap_line(idx("rRspacing.R", j), "R_j > r_j + max(5+3nu0, 30)", w.log_r, w.log_gap, cR));
        if (j + 1 < n) {
            const WiggleRecord& nx = d.terms[j + 1];
            TowerScalar D = tower_sub(nx.log_r, w.log_R);
            rep.checks.push_back(gap_line(idx("datasets.r", j + 1), "r_{j+1} > R_j + 60", w.log_R, D, 60.0));
            rep.checks.push_back(gap_line(idx("rRspacing.r", j + 1), "r_{j+1} > R_j + max(2nu0, 60)", w.log_R, D, cr));
        }
        rep.checks.push_back(gap_line(idx("datasets.tau_lo", j), "r_j < tau_j = R_j - 2 - 3nu0", w.log_r, w.log_gap,
                                      2.0 + 3.0 * nu0));
        {
            CertLine l;
            l.id = idx("datasets.tau_hi", j);
            l.claim = "tau_j < R_j - 1 - 3pi  (R_j - tau_j = 2 + 3nu0 against 1 + 3pi)";
            l.lhs_value = 2.0 + 3.0 * nu0;
            l.rhs_value = 1.0 + 3.0 * kPi;
            l.lhs = fmt17(l.lhs_value);
            l.rhs = fmt17(l.rhs_value);
            l.pass = l.lhs_value > l.rhs_value;
            rep.checks.push_back(l);
        }
        rep.checks.push_back(cmp_line(idx("rjbounds.R", j), "R_j > 36 + 90j", w.R, T(36.0 + 90.0 * j)));
        rep.checks.push_back(cmp_line(idx("rjbounds.r", j), "r_j > 6 + 90j", w.r, T(6.0 + 90.0 * j)));

        TowerScalar lhs = tower_scale(sum_phi, M);
        CertLine sl = cmp_line(idx("sumlem", j), "sum_{k<j} M phi(R_k) < R_j, M = 2C^2", w.R, lhs);
        std::swap(sl.lhs, sl.rhs);
        std::swap(sl.lhs_value, sl.rhs_value);
        rep.checks.push_back(sl);
        sum_phi = tower_add(sum_phi, w.phi_R);

        {
            CertLine l;
            l.id = idx("ab_order", j);
            l.claim = "log a_j < log b_j < 0  (ratio 4C^2 of the same negative multiple of phi(R_j))";
            l.lhs = S(w.log_a);
            l.rhs = S(w.log_b);
            l.lhs_value = 4.0 * C * C;
            l.rhs_value = 1.0;
            l.pass = 4.0 * C * C > 1.0 && tower_gt(w.phi_R, T(0.0)) && tower_is_negative(w.log_b);
            rep.checks.push_back(l);
        }

        if (j + 1 < n) {
            const WiggleRecord& nx = d.terms[j + 1];
            CertLine l;
            l.id = idx("recurrence", j + 1);
            l.claim = "log r_{j+1} = phi(R_j) - 1 and log R_{j+1} = phi(R_j) + 9R_j";
            TowerScalar er = tower_add_small(w.phi_R, -1.0);
            TowerScalar eR = tower_add(w.phi_R, tower_scale(w.R, 9.0));
            l.steps.push_back(eq_line("log_r", "log r_{j+1} = phi(R_j) - 1", nx.log_r, er));
            l.steps.push_back(eq_line("log_R", "log R_{j+1} = phi(R_j) + 9R_j", nx.log_R, eR));
            if (nx.gap_exact)
                l.steps.push_back(eq_line("gap", "log R_{j+1} - log r_{j+1} = 9R_j + 1", nx.log_gap,
                                          tower_add_small(tower_scale(w.R, 9.0), 1.0)));
            l.pass = true;
            for (auto& s : l.steps) l.pass = l.pass && s.pass;
            l.lhs = S(nx.log_R);
            l.rhs = S(eR);
            l.tolerance = kTowerEqTol;
            rep.checks.push_back(l);
        }
    }
    return rep;
}

CertLine range_bounds_certify(const TractDatum& d, int j) {
    const int n = static_cast<int>(d.terms.size());
    if (j < 0 || j >= n) throw DomainError("range_bounds_certify: j out of range");
    const double C = d.C;
    const WiggleRecord& w = d.terms[j];

    TowerScalar Sphi = T(0.0);
    for (int k = 0; k < j; ++k) Sphi = tower_add(Sphi, d.terms[k].phi_R);
    TowerScalar twoC_S = tower_scale(Sphi, 2.0 * C);  // sum of log(1/a_k)

    CertLine out;
    out.id = idx("range", j);
    out.claim = "both derivation chains of the range bounds";

    // chain (i)
    {
        TowerScalar raw = tower_scale(tower_add(tower_add(w.R, twoC_S), tower_scale(w.phi_R, 2.0 * C)), 1.0 / C);
        TowerScalar margin = tower_scale(tower_add(w.R, twoC_S), 1.0 / C);
        CertLine l = cmp_line("i.a", "(1/C)(R_j + sum log(1/eps_k) + 2C phi(R_j)) >= 2 phi(R_j)  <=>  (R_j + sum)/C >= 0",
                              margin, T(0.0), false);
        l.note = "raw sides " + S(raw) + " vs " + S(tower_scale(w.phi_R, 2.0));
        out.steps.push_back(l);
    }
    out.steps.push_back(cmp_line("i.b", "2 phi(R_j) > phi(R_j) + 9R_j  <=>  Phi(R_j) log R_j > log 9", w.excess,
                                 T(std::log(9.0))));
    if (j + 1 < n) {
        out.steps.push_back(eq_line("i.c", "phi(R_j) + 9R_j = log R_{j+1}",
                                    tower_add(w.phi_R, tower_scale(w.R, 9.0)), d.terms[j + 1].log_R));
    }

    // chain (ii)
    {
        double q = 0.0;
        if (!tower_is_zero(Sphi)) q = tower_to_double(tower_exp(tower_sub(tower_log(Sphi), w.log_R)));
        double rhs = std::log(6.0 * C) + std::log1p(2.0 * C * q);
        CertLine l = cmp_line("ii.a",
                              "C(R_j + sum 2C phi(R_k) + phi(R_j)/(2C)) < (2/3) phi(R_j)  <=>  Phi(R_j) log R_j > "
                              "log(6C) + log(1 + 2C sum/R_j)",
                              w.excess, T(rhs));
        TowerScalar raw = tower_scale(tower_add(tower_add(w.R, twoC_S), tower_scale(w.phi_R, 1.0 / (2.0 * C))), C);
        l.note = "raw sides " + S(raw) + " vs " + S(tower_scale(w.phi_R, 2.0 / 3.0));
        out.steps.push_back(l);
    }
    out.steps.push_back(cmp_line("ii.b", "(2/3) phi(R_j) < phi(R_j) - 1  <=>  phi(R_j) > 3", w.phi_R, T(3.0)));
    if (j + 1 < n)
        out.steps.push_back(
            eq_line("ii.c", "phi(R_j) - 1 = log r_{j+1}", tower_add_small(w.phi_R, -1.0), d.terms[j + 1].log_r));

    out.pass = true;
    for (auto& s : out.steps) {
        if (!s.pass && out.pass) out.note = "first failing inequality: " + s.id + "  " + s.claim;
        out.pass = out.pass && s.pass;
    }
    out.lhs = out.pass ? "all links hold" : out.note;
    out.rhs = std::to_string(out.steps.size()) + " links";
    return out;
}

nlohmann::json datum_to_json(const TractDatum& d) {
    nlohmann::json terms = nlohmann::json::array();
    for (auto& w : d.terms) {
        nlohmann::json t = {{"j", w.j},
                            {"log_r", tower_to_json(w.log_r)},
                            {"log_R", tower_to_json(w.log_R)},
                            {"tau", tower_to_json(w.tau)},
                            {"log_a", tower_to_json(w.log_a)},
                            {"log_b", tower_to_json(w.log_b)}};
        if (w.gap_exact) t["log_gap"] = tower_to_json(w.log_gap);
        if (w.eps) t["eps"] = *w.eps;
        terms.push_back(t);
    }
    return {{"profile", profile_to_json(d.profile)},
            {"r0", tower_to_json(d.r0)},
            {"C", d.C},
            {"nu0", d.nu0},
            {"terms", terms}};
}

TractDatum datum_from_json(const nlohmann::json& j) {
    TractDatum d;
    try {
        d.profile = profile_from_json(j.at("profile"));
        d.r0 = tower_from_json(j.at("r0"));
        d.C = j.value("C", 30.0);
        d.nu0 = j.value("nu0", 60.0);
        for (auto& t : j.at("terms")) {
            WiggleRecord w = wiggle_from_logs(d.profile, t.at("j").get<int>(), tower_from_json(t.at("log_r")),
                                              tower_from_json(t.at("log_R")), d.C, d.nu0);
            if (t.contains("log_gap")) {
                w.log_gap = tower_from_json(t.at("log_gap"));
                w.gap_exact = true;
            }
            if (t.contains("eps")) w.eps = t.at("eps").get<double>();
            d.terms.push_back(w);
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidDatum(std::string("malformed datum json: ") + e.what());
    }
    return d;
}

// ---- toys -----------------------------------------------------------------

ToyTract toy_tract_build(const std::vector<ToyWiggleParams>& params, double nu0_toy, double x_close) {
    if (!(nu0_toy > 0)) throw InvalidGeometry("nu0_toy must be positive");
    ToyTract t;
    t.nu0_toy = nu0_toy;
    t.x_close = x_close;
    double prev_R = -1e300;
    for (std::size_t j = 0; j < params.size(); ++j) {
        const auto& p = params[j];
        if (j == 0 && !(p.r > 4.0)) throw InvalidGeometry("first wiggle must start right of x = 4");
        if (!(p.R - p.r > 2.0)) throw InvalidGeometry("wiggle " + std::to_string(j) + ": need R - r > 2");
        if (!(p.r > prev_R + 1.0)) throw InvalidGeometry("wiggle " + std::to_string(j) + ": need r_j > R_{j-1} + 1");
        if (!(p.eps > 0 && p.eps <= 1)) throw InvalidGeometry("wiggle " + std::to_string(j) + ": eps outside (0,1]");
        double tau = p.R - 2.0 - 3.0 * nu0_toy;
        if (!(tau > p.r && tau < p.R - 1.0))
            throw InvalidGeometry("wiggle " + std::to_string(j) + ": gate abscissa must satisfy r < tau < R - 1");
        t.wiggles.push_back({p.r, p.R, tau, p.eps});
        prev_R = p.R;
    }
    double last = t.wiggles.empty() ? t.x_left : t.wiggles.back().R;
    if (!(x_close > last + 1.0)) throw InvalidGeometry("x_close must exceed the last R by more than 1");
    return t;
}

ToyTract toy_with_eps(const ToyTract& t, const std::vector<double>& eps) {
    if (eps.size() != t.wiggles.size()) throw InvalidGeometry("eps vector length does not match wiggle count");
    std::vector<ToyWiggleParams> p;
    for (std::size_t j = 0; j < eps.size(); ++j) p.push_back({t.wiggles[j].r, t.wiggles[j].R, eps[j]});
    return toy_tract_build(p, t.nu0_toy, t.x_close);
}

std::vector<cplx> ToyTract::vertices() const {
    const double h = half_height, p3 = kPi / 3;
    std::vector<cplx> v;
    v.push_back({x_left, -h});
    for (const auto& w : wiggles) {
        v.push_back({w.r, -h});
        v.push_back({w.r, p3});
        if (w.eps < 1) {
            v.push_back({w.tau, p3});
            v.push_back({w.tau, kPi * (2 - w.eps) / 3});
            v.push_back({w.tau, p3});
        }
        v.push_back({w.R - 1, p3});
        v.push_back({w.r, p3});
        v.push_back({w.r, -h});
    }
    v.push_back({x_close, -h});
    v.push_back({x_close, h});
    for (auto it = wiggles.rbegin(); it != wiggles.rend(); ++it) {
        const auto& w = *it;
        v.push_back({w.R, h});
        v.push_back({w.R, -p3});
        v.push_back({w.r + 1, -p3});
        v.push_back({w.R, -p3});
        v.push_back({w.R, h});
        if (w.eps < 1) {
            v.push_back({w.tau, h});
            v.push_back({w.tau, kPi * (2 + w.eps) / 3});
            v.push_back({w.tau, h});
        }
    }
    v.push_back({x_left, h});
    return v;
}

std::vector<Segment> ToyTract::boundary_segments() const {
    const double h = half_height, p3 = kPi / 3, far = 1e15;
    std::vector<Segment> s;
    s.push_back({{x_left, -h}, {x_left, h}});
    std::vector<double> bottom = {x_left}, top = {x_left};
    for (const auto& w : wiggles) {
        bottom.push_back(w.r);
        top.push_back(w.R);
        s.push_back({{w.r, -h}, {w.r, p3}});
        if (w.eps < 1) {
            s.push_back({{w.r, p3}, {w.tau, p3}});
            s.push_back({{w.tau, p3}, {w.R - 1, p3}});
            s.push_back({{w.tau, p3}, {w.tau, kPi * (2 - w.eps) / 3}});
            s.push_back({{w.tau, kPi * (2 + w.eps) / 3}, {w.tau, h}});
            top.push_back(w.tau);
        } else {
            s.push_back({{w.r, p3}, {w.R - 1, p3}});
        }
        s.push_back({{w.R, -p3}, {w.R, h}});
        s.push_back({{w.r + 1, -p3}, {w.R, -p3}});
    }
    bottom.push_back(far);
    top.push_back(far);
    std::sort(top.begin(), top.end());
    for (std::size_t i = 0; i + 1 < bottom.size(); ++i) s.push_back({{bottom[i], -h}, {bottom[i + 1], -h}});
    for (std::size_t i = 0; i + 1 < top.size(); ++i) s.push_back({{top[i], h}, {top[i + 1], h}});
    return s;
}

double point_segment_distance(cplx z, const Segment& s) {
    cplx d = s.b - s.a;
    double len2 = std::norm(d);
    if (len2 == 0) return std::abs(z - s.a);
    double u = std::clamp(((z - s.a) * std::conj(d)).real() / len2, 0.0, 1.0);
    return std::abs(z - (s.a + u * d));
}

bool segments_intersect(const Segment& s, const Segment& t, cplx* where) {
    auto cross = [](cplx a, cplx b) { return a.real() * b.imag() - a.imag() * b.real(); };
    cplx r = s.b - s.a, q = t.b - t.a;
    double den = cross(r, q);
    cplx w = t.a - s.a;
    if (std::fabs(den) < 1e-300) {
        if (std::fabs(cross(w, r)) > 1e-12 * std::max(1.0, std::abs(r))) return false;
        double rr = std::norm(r);
        if (rr == 0) return false;
        double t0 = (w * std::conj(r)).real() / rr;
        double t1 = t0 + (q * std::conj(r)).real() / rr;
        double lo = std::max(0.0, std::min(t0, t1)), hi = std::min(1.0, std::max(t0, t1));
        if (lo > hi) return false;
        if (where) *where = s.a + lo * r;
        return true;
    }
    double u = cross(w, q) / den, v = cross(w, r) / den;
    if (u < 0 || u > 1 || v < 0 || v > 1) return false;
    if (where) *where = s.a + u * r;
    return true;
}

bool ToyTract::on_slit(cplx z, double tol) const {
    const double h = half_height, p3 = kPi / 3;
    for (const auto& w : wiggles) {
        std::vector<Segment> sl = {{{w.r, -h}, {w.r, p3}},
                                   {{w.r, p3}, {w.R - 1, p3}},
                                   {{w.R, -p3}, {w.R, h}},
                                   {{w.r + 1, -p3}, {w.R, -p3}}};
        if (w.eps < 1) {
            sl.push_back({{w.tau, p3}, {w.tau, kPi * (2 - w.eps) / 3}});
            sl.push_back({{w.tau, kPi * (2 + w.eps) / 3}, {w.tau, h}});
        }
        for (auto& s : sl)
            if (point_segment_distance(z, s) <= tol) return true;
    }
    return false;
}

bool ToyTract::contains(cplx z) const {
    if (!(z.real() > x_left) || !(std::fabs(z.imag()) < half_height)) return false;
    return !on_slit(z);
}

double ToyTract::dist_to_boundary(cplx z) const {
    double d = 1e300;
    for (const auto& s : boundary_segments()) d = std::min(d, point_segment_distance(z, s));
    return d;
}

double ToyTract::trusted_right() const {
    if (wiggles.empty()) return x_close;
    return x_close - (wiggles.back().R - wiggles.back().r);
}

nlohmann::json ToyTract::to_json() const {
    nlohmann::json ws = nlohmann::json::array();
    nlohmann::json gates = nlohmann::json::array(), bands = nlohmann::json::array();
    for (const auto& w : wiggles) {
        ws.push_back({{"r", w.r}, {"R", w.R}, {"tau", w.tau}, {"eps", w.eps}});
        gates.push_back({w.tau, 2 * kPi / 3});
        bands.push_back({w.R - 2 - 4 * nu0_toy, w.R - 2 - 2 * nu0_toy});
    }
    nlohmann::json verts = nlohmann::json::array();
    for (auto& v : vertices()) verts.push_back({v.real(), v.imag()});
    return {{"wiggles", ws},
            {"nu0_toy", nu0_toy},
            {"x_left", x_left},
            {"half_height", half_height},
            {"x_close", x_close},
            {"vertices", verts},
            {"anchors",
             {{"base_point", {base_point.real(), base_point.imag()}},
              {"infinity_proxy", {x_close, 0.0}},
              {"gate_centers", gates},
              {"band_edges", bands}}}};
}

ToyTract toy_from_json(const nlohmann::json& j) {
    std::vector<ToyWiggleParams> p;
    try {
        for (auto& w : j.at("wiggles")) p.push_back({w.at("r").get<double>(), w.at("R").get<double>(), w.value("eps", 1.0)});
        return toy_tract_build(p, j.at("nu0_toy").get<double>(), j.at("x_close").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw InvalidGeometry(std::string("malformed toy json: ") + e.what());
    }
}

std::string RegionTag::label() const {
    std::string s = std::string(side == Side::X ? "X" : side == Side::Y ? "Y" : "Z") + "_" + std::to_string(j);
    if (w_plus) s += " W+";
    if (w_minus) s += " W-";
    if (gate) s += " gate";
    return s;
}

double signed_distance(const ToyTract& t, cplx z, int j) {
    const auto& w = t.wiggles.at(j);
    const double nu = t.nu0_toy, p3 = kPi / 3;
    double x = z.real(), y = z.imag();
    if (x < w.r) return -1.0;
    if (x > w.R) return 1.0;
    if (y > p3) return -1.0;
    if (y < -p3) return 1.0;
    double east = w.R - 2 - 2 * nu, west = w.R - 2 - 4 * nu;
    if (x > east) return -1.0;
    if (x < west) return 1.0;
    return (w.R - 2 - 3 * nu - x) / nu;
}

RegionTag region_classify(const ToyTract& t, cplx z, int j) {
    if (j < 0 || j >= static_cast<int>(t.wiggles.size())) throw DomainError("region_classify: no such wiggle");
    if (!t.contains(z)) throw NotInTract("point is not inside the tract");
    const auto& w = t.wiggles[j];
    const double nu = t.nu0_toy, p3 = kPi / 3;
    if (w.R - w.r < 3 + 4 * nu) throw InvalidGeometry("band Y_j does not fit inside the middle channel of wiggle " + std::to_string(j));
    RegionTag tag;
    tag.j = j;
    tag.delta = signed_distance(t, z, j);
    double x = z.real(), y = z.imag();
    bool middle = x >= w.r && x <= w.R && std::fabs(y) <= p3;
    if (middle && x >= w.R - 2 - 4 * nu && x <= w.R - 2 - 2 * nu && std::fabs(y) < p3)
        tag.side = Side::Y;
    else
        tag.side = tag.delta < 0 ? Side::X : Side::Z;
    bool inW = x >= w.r && x <= w.R && y <= p3;
    tag.w_plus = inW && std::fabs(y) < p3;
    tag.w_minus = inW && y < -p3;
    tag.gate = std::fabs(x - w.tau) <= 1.0 && y > p3;
    return tag;
}

AlphaPath alpha_path(const ToyTract& t) {
    AlphaPath a;
    const double up = 2 * kPi / 3;
    a.polyline.push_back(t.base_point);
    for (const auto& w : t.wiggles) {
        for (cplx p : {cplx(w.r - 0.5, 0), cplx(w.r - 0.5, up), cplx(w.R - 0.5, up), cplx(w.R - 0.5, 0), cplx(w.r + 0.5, 0),
                       cplx(w.r + 0.5, -up), cplx(w.R + 0.5, -up), cplx(w.R + 0.5, 0)})
            a.polyline.push_back(p);
        a.gate_integrals.push_back(gate_integral_closed_form(w.eps));
    }
    a.polyline.push_back({t.x_close, 0});

    for (std::size_t i = 0; i + 1 < a.polyline.size(); ++i) {
        Segment s{a.polyline[i], a.polyline[i + 1]};
        bool split = false;
        if (std::fabs(s.a.imag() - up) < 1e-12 && std::fabs(s.b.imag() - up) < 1e-12) {
            for (const auto& w : t.wiggles) {
                double lo = std::min(s.a.real(), s.b.real()), hi = std::max(s.a.real(), s.b.real());
                double g0 = std::max(lo, w.tau - 1), g1 = std::min(hi, w.tau + 1);
                if (g1 <= g0) continue;
                if (g0 > lo) a.alpha1.push_back({{lo, up}, {g0, up}});
                a.alpha0.push_back({{g0, up}, {g1, up}});
                if (hi > g1) a.alpha1.push_back({{g1, up}, {hi, up}});
                split = true;
            }
        }
        if (!split) a.alpha1.push_back(s);
    }
    return a;
}

double gate_integral_closed_form(double eps) { return 2 * std::log(3 / (kPi * eps)) + 2; }

double gate_integral_quadrature(double eps) {
    const double m = kPi * eps / 3;
    auto f = [m](double s) { return 1.0 / std::max(std::fabs(s), m); };
    std::vector<double> cuts = {-1.0, 1.0, 0.0};
    if (m < 1) {
        cuts.push_back(-m);
        cuts.push_back(m);
    }
    std::sort(cuts.begin(), cuts.end());
    double total = 0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, cuts[i], cuts[i + 1], 15, 1e-15);
    return total;
}

double polyline_length(const std::vector<cplx>& pts) {
    double L = 0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) L += std::abs(pts[i + 1] - pts[i]);
    return L;
}

double segments_length(const std::vector<Segment>& segs) {
    double L = 0;
    for (auto& s : segs) L += std::abs(s.b - s.a);
    return L;
}

}  // namespace tractforge
