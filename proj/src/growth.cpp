#include "tractforge/growth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

// boost 1.74 pchip calls isnan unqualified
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>

#include "tractforge/errors.hpp"
#include "tractforge/report.hpp"

namespace tractforge {

// monotone cubic in (log log t, log Phi) with linear extension past the end knots
struct TableInterp {
    std::vector<double> L, v;
    double slope_lo = 0.0, slope_hi = 0.0;
    std::shared_ptr<boost::math::interpolators::pchip<std::vector<double>>> spline;

    double value(double x) const {
        if (x <= L.front()) return v.front() + slope_lo * (x - L.front());
        if (x >= L.back()) return v.back() + slope_hi * (x - L.back());
        return (*spline)(x);
    }
    double slope(double x) const {
        if (x <= L.front()) return slope_lo;
        if (x >= L.back()) return slope_hi;
        return spline->prime(x);
    }
};

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const GrowthProfile& innermost(const GrowthProfile& p) {
    const GrowthProfile* q = &p;
    while (q->kind == GrowthProfile::Kind::scaled_theta) q = q->base.get();
    return *q;
}

double total_factor(const GrowthProfile& p) {
    double f = 1.0;
    const GrowthProfile* q = &p;
    while (q->kind == GrowthProfile::Kind::scaled_theta) {
        f *= q->factor;
        q = q->base.get();
    }
    return f;
}

struct SlopeInfo {
    double value = kNaN;  // d log Theta / d log log t
    int sign = 0;
    int b_sign = 0;       // sign of value + 1
};

SlopeInfo raw_slope(const GrowthProfile& p, const TowerScalar& L) {
    const GrowthProfile& q = innermost(p);
    SlopeInfo s;
    if (q.kind == GrowthProfile::Kind::loglog_alpha) {
        if (tower_cmp(L, tower_from_double(0.0)) != Ordering::GT) return s;
        double Ld = tower_to_double(L);
        s.value = -q.alpha / Ld;
        s.sign = -1;
        Ordering c = tower_cmp(L, tower_from_double(q.alpha));
        s.b_sign = c == Ordering::GT ? 1 : (c == Ordering::LT ? -1 : 0);
        return s;
    }
    double Ld = tower_to_double(L);
    s.value = std::isfinite(Ld) ? q.interp->slope(Ld) : q.interp->slope_hi;
    s.sign = s.value < 0 ? -1 : (s.value > 0 ? 1 : 0);
    double b = s.value + 1.0;
    s.b_sign = b > 0 ? 1 : (b < 0 ? -1 : 0);
    return s;
}

}  // namespace

GrowthProfile GrowthProfile::loglog(double alpha, double t_min) {
    if (!(alpha > 0) || !std::isfinite(alpha)) throw DomainError("alpha must be positive");
    if (!(t_min >= 1.0)) throw DomainError("t_min must be >= 1");
    GrowthProfile p;
    p.kind = Kind::loglog_alpha;
    p.alpha = alpha;
    p.t_min = t_min;
    return p;
}

GrowthProfile GrowthProfile::scaled(const GrowthProfile& base, double factor) {
    if (!(factor > 0 && factor <= 1)) throw DomainError("scale factor must lie in (0,1]");
    GrowthProfile p;
    p.kind = Kind::scaled_theta;
    p.factor = factor;
    p.base = std::make_shared<const GrowthProfile>(base);
    p.t_min = base.t_min;
    return p;
}

GrowthProfile GrowthProfile::table(std::vector<std::pair<double, double>> knots, double t_min) {
    if (knots.size() < 2) throw DomainError("table profile needs at least two knots");
    auto ip = std::make_shared<TableInterp>();
    for (std::size_t i = 0; i < knots.size(); ++i) {
        auto [t, phi] = knots[i];
        if (!(t > 1.0) || !(phi > 0)) throw DomainError("table knots need t > 1 and Phi > 0");
        if (i > 0 && !(t > knots[i - 1].first && phi < knots[i - 1].second))
            throw DomainError("table knots must have increasing t and decreasing Phi");
        ip->L.push_back(std::log(std::log(t)));
        ip->v.push_back(std::log(phi));
    }
    std::size_t n = ip->L.size();
    ip->slope_lo = (ip->v[1] - ip->v[0]) / (ip->L[1] - ip->L[0]);
    ip->slope_hi = (ip->v[n - 1] - ip->v[n - 2]) / (ip->L[n - 1] - ip->L[n - 2]);
    if (n >= 3) {
        auto x = ip->L;
        auto y = ip->v;
        ip->spline = std::make_shared<boost::math::interpolators::pchip<std::vector<double>>>(
            std::move(x), std::move(y), ip->slope_lo, ip->slope_hi);
    } else {
        // two knots: pchip needs four points, a straight line is the monotone interpolant
        std::vector<double> x = {ip->L[0], ip->L[0] + (ip->L[1] - ip->L[0]) / 3,
                                 ip->L[0] + 2 * (ip->L[1] - ip->L[0]) / 3, ip->L[1]};
        std::vector<double> y;
        for (double xi : x) y.push_back(ip->v[0] + ip->slope_lo * (xi - ip->L[0]));
        ip->spline = std::make_shared<boost::math::interpolators::pchip<std::vector<double>>>(
            std::move(x), std::move(y), ip->slope_lo, ip->slope_hi);
    }
    GrowthProfile p;
    p.kind = Kind::table;
    p.t_min = t_min > 0 ? t_min : knots.front().first;
    if (p.t_min < 1.0) throw DomainError("t_min must be >= 1");
    p.knots = std::move(knots);
    p.interp = ip;
    return p;
}

double GrowthProfile::t0() const {
    const GrowthProfile& q = innermost(*this);
    if (q.kind == Kind::loglog_alpha) return std::exp(std::exp(q.alpha));
    return q.t_min;
}

std::string GrowthProfile::describe() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::loglog_alpha: os << "loglog_alpha(" << alpha << ")"; break;
        case Kind::scaled_theta: os << "scaled_theta(" << factor << "*" << base->describe() << ")"; break;
        case Kind::table: os << "table(" << knots.size() << " knots)"; break;
    }
    return os.str();
}

nlohmann::json profile_to_json(const GrowthProfile& p) {
    nlohmann::json j;
    switch (p.kind) {
        case GrowthProfile::Kind::loglog_alpha:
            j = {{"kind", "loglog_alpha"}, {"alpha", p.alpha}, {"t_min", p.t_min}};
            break;
        case GrowthProfile::Kind::scaled_theta:
            j = {{"kind", "scaled_theta"}, {"factor", p.factor}, {"base", profile_to_json(*p.base)}};
            break;
        case GrowthProfile::Kind::table: {
            nlohmann::json k = nlohmann::json::array();
            for (auto& [t, phi] : p.knots) k.push_back({t, phi});
            j = {{"kind", "table"}, {"knots", k}, {"t_min", p.t_min}};
            break;
        }
    }
    return j;
}

GrowthProfile profile_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind")) throw DomainError("profile json needs a kind");
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "loglog_alpha") return GrowthProfile::loglog(j.at("alpha").get<double>(), j.value("t_min", 1.0));
    if (kind == "scaled_theta")
        return GrowthProfile::scaled(profile_from_json(j.at("base")), j.at("factor").get<double>());
    if (kind == "table") {
        std::vector<std::pair<double, double>> knots;
        for (auto& k : j.at("knots")) knots.emplace_back(k.at(0).get<double>(), k.at(1).get<double>());
        return GrowthProfile::table(std::move(knots), j.value("t_min", 0.0));
    }
    throw DomainError("unknown profile kind: " + kind);
}

GrowthProfile profile_parse(const std::string& spec) {
    if (!spec.empty() && spec.front() == '{') return profile_from_json(nlohmann::json::parse(spec));
    auto colon = spec.find(':');
    std::string head = spec.substr(0, colon);
    std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (head == "loglog") {
        auto c2 = rest.find(':');
        double alpha = std::stod(rest.substr(0, c2));
        double tmin = c2 == std::string::npos ? 1.0 : std::stod(rest.substr(c2 + 1));
        return GrowthProfile::loglog(alpha, tmin);
    }
    if (head == "scaled") {
        auto c2 = rest.find(':');
        if (c2 == std::string::npos) throw DomainError("scaled profile needs factor:base");
        return GrowthProfile::scaled(profile_parse(rest.substr(c2 + 1)), std::stod(rest.substr(0, c2)));
    }
    throw DomainError("unknown profile spec: " + spec);
}

TowerScalar log_phi_of_logt(const GrowthProfile& p, const TowerScalar& lt, bool raw, bool* extension) {
    if (extension) *extension = false;
    switch (p.kind) {
        case GrowthProfile::Kind::scaled_theta:
            return tower_add_small(log_phi_of_logt(*p.base, lt, raw, extension), std::log(p.factor));
        case GrowthProfile::Kind::loglog_alpha: {
            const double a = p.alpha;
            const double lt0 = std::exp(a);
            if (tower_is_negative(lt)) throw DomainError("log t < 0");
            if (!raw && lt.level == 0 && lt.mantissa < lt0) {
                if (extension) *extension = true;
                double theta0 = std::pow(a, -a);
                double s = -1.0 / (std::exp(a) * std::pow(a, a));
                return tower_from_double(std::log(theta0 + s * (lt.mantissa - lt0)));
            }
            if (tower_is_zero(lt)) throw DomainError("log log t undefined at t = 1");
            TowerScalar L = tower_log(lt);
            if (tower_cmp(L, tower_from_double(0.0)) != Ordering::GT)
                throw DomainError("closed form needs log log t > 0");
            return tower_scale(tower_log(L), -a);
        }
        case GrowthProfile::Kind::table: {
            if (!(tower_cmp(lt, tower_from_double(0.0)) == Ordering::GT)) throw DomainError("table profile needs t > 1");
            TowerScalar L = tower_log(lt);
            const TableInterp& ip = *p.interp;
            if (L.level == 0) return tower_from_double(ip.value(L.mantissa));
            if (ip.slope_hi == 0.0) return tower_from_double(ip.v.back());
            return tower_add_small(tower_scale(L, ip.slope_hi), ip.v.back() - ip.slope_hi * ip.L.back());
        }
    }
    return {};
}

double phi_exponent(const GrowthProfile& p, const TowerScalar& t, bool* extension) {
    return tower_to_double(tower_exp(log_phi_of_logt(p, tower_log(t), false, extension)));
}

TowerScalar phi_excess(const GrowthProfile& p, const TowerScalar& t) {
    TowerScalar lt = tower_log(t);
    if (tower_is_zero(lt)) return tower_from_double(0.0);
    return tower_exp(tower_add(log_phi_of_logt(p, lt), tower_log(lt)));
}

TowerScalar phi_eval(const GrowthProfile& p, const TowerScalar& t) {
    if (tower_lt(t, tower_from_double(p.t_min))) throw DomainError("phi_eval: t below t_min");
    TowerScalar lt = tower_log(t);
    if (tower_is_zero(lt)) return tower_from_double(1.0);
    return tower_exp(tower_add(lt, phi_excess(p, t)));
}

PhiInverseResult phi_inverse_detail(const GrowthProfile& p, const TowerScalar& w, double rel_tol, double M) {
    if (!(rel_tol > 1e-14 && rel_tol < 1e-3)) throw DomainError("phi_inverse: rel_tol outside (1e-14, 1e-3)");
    TowerScalar tmin = tower_from_double(p.t_min);
    if (tower_lt(w, phi_eval(p, tmin))) throw DomainError("phi_inverse: w below phi(t_min)");

    const int d = std::max(1, w.level);
    const double Y = tower_to_double(tower_iter_log(w, d));
    const double inf = std::numeric_limits<double>::infinity();

    double y_min;
    try {
        y_min = tower_to_double(tower_iter_log(tmin, d));
    } catch (const DomainError&) {
        y_min = -50.0;
    }
    auto F = [&](double y) -> double {
        if (y < y_min) return -inf;
        TowerScalar t = tower_normalize(d, y);
        try {
            return tower_to_double(tower_iter_log(phi_eval(p, t), d)) - Y;
        } catch (const DomainError&) {
            return -inf;
        }
    };
    auto y_of = [&](const TowerScalar& t) -> double {
        try {
            return std::max(y_min, tower_to_double(tower_iter_log(t, d)));
        } catch (const DomainError&) {
            return y_min;
        }
    };

    PhiInverseResult res;
    double Phi_w = phi_exponent(p, w);
    double e_lo = 1.0 - M * Phi_w;
    res.bracket_lo = tower_exp(tower_scale(tower_log(w), e_lo));
    res.bracket_hi = tower_pow(w, 1.0 - Phi_w / M);

    double lo = y_of(res.bracket_lo);
    double hi = y_of(res.bracket_hi);
    double flo = F(lo), fhi = F(hi);
    res.bracket_held = flo <= 0 && fhi >= 0;
    while (!(flo <= 0 && fhi >= 0)) {
        if (++res.widenings > 60) throw ConvergenceError("phi_inverse: bracket could not be established");
        if (flo > 0) {
            if (lo <= y_min) throw ConvergenceError("phi_inverse: lower bracket stuck at t_min");
            lo = lo > 0 ? std::max(y_min, lo / 2) : std::max(y_min, lo - 1.0);
            flo = F(lo);
        }
        if (fhi < 0) {
            hi = hi > 0 ? 2 * hi : hi + 1.0;
            fhi = F(hi);
        }
    }
    double mid = 0.5 * (lo + hi), fmid = 0.0;
    for (res.iterations = 0; res.iterations < 200; ++res.iterations) {
        mid = 0.5 * (lo + hi);
        fmid = F(mid);
        if (fmid == 0 || hi - lo <= 2e-16 * std::max({1.0, std::fabs(lo), std::fabs(hi)})) break;
        if (fmid < 0)
            lo = mid;
        else
            hi = mid;
    }
    if (std::fabs(F(lo)) < std::fabs(fmid)) mid = lo, fmid = F(lo);
    if (std::fabs(F(hi)) < std::fabs(fmid)) mid = hi, fmid = F(hi);
    res.t = tower_normalize(d, mid);
    res.residual = d == 1 ? std::fabs(std::expm1(fmid)) : std::fabs(fmid);
    if (d == 1 && res.residual > rel_tol) throw ConvergenceError("phi_inverse: residual above tolerance");
    return res;
}

TowerScalar phi_inverse(const GrowthProfile& p, const TowerScalar& w, double rel_tol) {
    return phi_inverse_detail(p, w, rel_tol).t;
}

PsiValue psi_eval(const GrowthProfile& p, const TowerScalar& t) {
    TowerScalar lt = tower_log(t);
    if (tower_lt(lt, phi_eval(p, tower_from_double(p.t_min)))) throw DomainError("psi_eval: log t below phi(t_min)");
    TowerScalar pinv = phi_inverse(p, lt, 1e-12);
    // phi(pinv) = log t gives log(pinv / log t) = -Phi(pinv) log pinv
    PsiValue out;
    out.log_Psi = tower_add_small(tower_neg(phi_excess(p, pinv)), std::log(10.0));
    out.Psi = tower_to_double(tower_exp(out.log_Psi));
    out.psi = tower_exp(tower_add(lt, tower_exp(tower_add(out.log_Psi, tower_log(lt)))));
    return out;
}

const LawProperty& LawReport::property(const std::string& name) const {
    for (auto& pr : properties)
        if (pr.name == name) return pr;
    throw DomainError("no such property: " + name);
}

nlohmann::json LawReport::to_json() const {
    nlohmann::json props = nlohmann::json::array();
    for (auto& pr : properties) {
        std::size_t fails = 0;
        for (auto& s : pr.samples) fails += !s.pass;
        props.push_back({{"name", pr.name},
                         {"description", pr.description},
                         {"points", pr.samples.size()},
                         {"failed_points", fails},
                         {"monotone_fraction", pr.monotone_fraction},
                         {"last_value", pr.last_value},
                         {"trend", pr.trend},
                         {"flag", pr.flag},
                         {"pass", pr.pass}});
    }
    nlohmann::json st = nlohmann::json::object();
    for (auto& [k, v] : stats) st[k] = v;
    return {{"profile", profile}, {"beta", beta}, {"properties", props}, {"stats", st}, {"pass", pass}};
}

std::string LawReport::to_csv() const {
    std::ostringstream os;
    os << "t";
    for (auto& pr : properties) os << "," << pr.name << "_value," << pr.name << "_log_value," << pr.name << "_pass";
    os << "\n";
    std::size_t n = properties.empty() ? 0 : properties.front().samples.size();
    for (std::size_t i = 0; i < n; ++i) {
        os << tower_to_string(properties.front().samples[i].t);
        for (auto& pr : properties) {
            const LawSample& s = pr.samples[i];
            os << "," << fmt17(s.value) << "," << fmt17(s.log_value) << "," << (s.pass ? 1 : 0);
        }
        os << "\n";
    }
    return os.str();
}

std::vector<TowerScalar> grid_geometric(int n, double lo, double hi) {
    if (n < 2 || !(lo > 0) || !(hi > lo)) throw DomainError("geometric grid needs n >= 2 and 0 < lo < hi");
    std::vector<TowerScalar> g;
    double a = std::log(lo), b = std::log(hi);
    for (int i = 0; i < n; ++i) g.push_back(tower_normalize(1, a + (b - a) * i / (n - 1)));
    return g;
}

std::vector<TowerScalar> grid_loglog(int n, double L_lo, double L_hi) {
    if (n < 2 || !(L_lo > 0) || !(L_hi > L_lo)) throw DomainError("loglog grid needs n >= 2 and 0 < L_lo < L_hi");
    std::vector<TowerScalar> g;
    double a = std::log(L_lo), b = std::log(L_hi);
    for (int i = 0; i < n; ++i) g.push_back(tower_normalize(2, std::exp(a + (b - a) * i / (n - 1))));
    return g;
}

std::vector<TowerScalar> grid_parse(const std::string& spec) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
    if (parts.size() != 4) throw DomainError("grid spec must be kind:n:lo:hi");
    int n = std::stoi(parts[1]);
    double lo = std::stod(parts[2]), hi = std::stod(parts[3]);
    if (parts[0] == "geometric") return grid_geometric(n, lo, hi);
    if (parts[0] == "loglog") return grid_loglog(n, lo, hi);
    throw DomainError("unknown grid kind: " + parts[0]);
}

namespace {

double to_d(const TowerScalar& x) { return tower_to_double(x); }

void finish_trend(LawProperty& pr, const std::vector<int>& ok) {
    std::size_t steps = ok.size();
    std::size_t good = 0;
    for (int o : ok) good += o > 0;
    pr.monotone_fraction = steps ? double(good) / steps : 1.0;
    std::size_t tail = (steps + 1) / 2;
    bool tail_ok = true, tail_bad = tail > 0;
    for (std::size_t i = steps - tail; i < steps; ++i) {
        tail_ok = tail_ok && ok[i] > 0;
        tail_bad = tail_bad && ok[i] < 0;
    }
    pr.trend = true;
    pr.pass = tail_ok;
    if (tail_bad) pr.flag = "reverse_trend";
}

}  // namespace

LawReport theta_properties(const GrowthProfile& p, const std::vector<TowerScalar>& grid, double beta) {
    if (grid.size() < 20) throw DomainError("theta_properties needs at least 20 grid points");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!tower_gt(grid[i], grid[i - 1])) throw DomainError("grid must be strictly increasing");
    if (!(beta > 0 && beta < 1)) throw DomainError("beta must lie in (0,1)");

    LawReport rep;
    rep.profile = p.describe();
    rep.beta = beta;
    rep.stats["t0"] = p.t0();
    rep.stats["beta"] = beta;

    LawProperty a{"a_decreasing", "Theta decreasing (sign of derivative)"};
    LawProperty b{"b_increasing", "Theta(t) log t increasing (sign of derivative)"};
    LawProperty c{"c_divergence", "Theta(t) log t grows without bound"};
    LawProperty d{"d_square_ratio", "Theta(t^2)/Theta(t) tends to 1"};
    LawProperty e{"e_product", "(log t)^(beta Theta(log t)) Theta(t) grows without bound"};

    std::vector<TowerScalar> logq, loge;
    std::vector<double> dev;
    std::vector<bool> qok, eok;
    const GrowthProfile& inner = innermost(p);
    bool closed = inner.kind == GrowthProfile::Kind::loglog_alpha;

    for (const TowerScalar& t : grid) {
        LawSample sa{t, kNaN, kNaN, false}, sb = sa, sc = sa, sd = sa, se = sa;
        TowerScalar lt, L, lth;
        bool ok = true;
        try {
            lt = tower_log(t);
            L = tower_log(lt);
            lth = log_phi_of_logt(p, lt, true);
        } catch (const DomainError&) {
            ok = false;
        }
        if (ok) {
            SlopeInfo sl = raw_slope(p, L);
            sa.log_value = to_d(lth);
            sa.value = std::exp(sa.log_value);
            sa.pass = sl.sign < 0;
            TowerScalar lq = tower_add(lth, L);
            sb.log_value = sc.log_value = to_d(lq);
            sb.value = sc.value = to_d(tower_exp(lq));
            sb.pass = sl.b_sign > 0;
            logq.push_back(lq);
            qok.push_back(true);

            double ratio;
            if (closed) {
                double Ld = to_d(L);
                ratio = std::isfinite(Ld) ? std::exp(-inner.alpha * std::log1p(std::log(2.0) / Ld)) : 1.0;
            } else {
                double Ld = to_d(L);
                const TableInterp& ip = *inner.interp;
                double diff = std::isfinite(Ld) ? ip.value(Ld + std::log(2.0)) - ip.value(Ld)
                                                : ip.slope_hi * std::log(2.0);
                ratio = std::exp(diff);
            }
            sd.value = ratio;
            sd.log_value = std::log(ratio);
            dev.push_back(std::fabs(1.0 - ratio));

            try {
                TowerScalar lthx = log_phi_of_logt(p, L, true);
                TowerScalar term = tower_scale(tower_exp(tower_add(lthx, tower_log(L))), beta);
                TowerScalar le = tower_add(term, lth);
                se.log_value = to_d(le);
                se.value = to_d(tower_exp(le));
                loge.push_back(le);
                eok.push_back(true);
            } catch (const DomainError&) {
                loge.push_back({});
                eok.push_back(false);
            }
        } else {
            logq.push_back({});
            qok.push_back(false);
            dev.push_back(kNaN);
            loge.push_back({});
            eok.push_back(false);
        }
        a.samples.push_back(sa);
        b.samples.push_back(sb);
        c.samples.push_back(sc);
        d.samples.push_back(sd);
        e.samples.push_back(se);
    }

    auto pointwise = [](LawProperty& pr) {
        std::size_t good = 0;
        for (auto& s : pr.samples) good += s.pass;
        pr.monotone_fraction = double(good) / pr.samples.size();
        pr.pass = good == pr.samples.size();
        pr.last_value = pr.samples.back().value;
    };
    pointwise(a);
    pointwise(b);

    std::vector<int> cs, ds, es;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        int cstep = 0, dstep = 0, estep = 0;
        if (qok[i] && qok[i - 1]) {
            Ordering o = tower_cmp(logq[i], logq[i - 1]);
            cstep = o == Ordering::GT ? 1 : (o == Ordering::LT ? -1 : 0);
            dstep = dev[i] <= dev[i - 1] ? 1 : -1;
        }
        if (eok[i] && eok[i - 1]) {
            Ordering o = tower_cmp(loge[i], loge[i - 1]);
            estep = o == Ordering::GT ? 1 : (o == Ordering::LT ? -1 : 0);
        }
        cs.push_back(cstep);
        ds.push_back(dstep);
        es.push_back(estep);
        c.samples[i].pass = cstep > 0;
        d.samples[i].pass = dstep > 0;
        e.samples[i].pass = estep > 0;
    }
    c.samples[0].pass = qok[0];
    d.samples[0].pass = qok[0];
    e.samples[0].pass = eok[0];
    finish_trend(c, cs);
    finish_trend(d, ds);
    finish_trend(e, es);
    c.last_value = c.samples.back().value;
    d.last_value = d.samples.back().value;
    e.last_value = e.samples.back().log_value;
    if (e.flag == "reverse_trend") e.flag = "decay_regime";

    rep.properties = {a, b, c, d, e};
    rep.pass = true;
    for (auto& pr : rep.properties) rep.pass = rep.pass && pr.pass;
    return rep;
}

LawReport theta_properties(const GrowthProfile& p, const std::vector<double>& grid, double beta) {
    std::vector<TowerScalar> g;
    for (double t : grid) g.push_back(tower_from_double(t));
    return theta_properties(p, g, beta);
}

double theta_raw(const GrowthProfile& p, double t) {
    return std::exp(tower_to_double(log_phi_of_logt(p, tower_from_double(std::log(t)), true)));
}

double theta_derivative(const GrowthProfile& p, double t) {
    const GrowthProfile& q = innermost(p);
    if (q.kind != GrowthProfile::Kind::loglog_alpha) throw DomainError("closed-form derivative needs a loglog_alpha profile");
    double lt = std::log(t), L = std::log(lt);
    if (!(L > 0)) throw DomainError("closed-form derivative needs log log t > 0");
    return -total_factor(p) * q.alpha / (t * lt * std::pow(L, 1.0 + q.alpha));
}

double theta_fd_error(const GrowthProfile& p, double t, double h) {
    double exact = theta_derivative(p, t);
    double fd = (theta_raw(p, t + h) - theta_raw(p, t - h)) / (2 * h);
    return std::fabs(fd - exact) / std::fabs(exact);
}

LawReport theta_derivative_check(const GrowthProfile& p, const std::vector<double>& grid, double h_rel, double tol) {
    LawReport rep;
    rep.profile = p.describe();
    LawProperty pr{"derivative", "closed-form Theta' against central differences (relative error)"};
    double worst = 0.0;
    for (double t : grid) {
        double err = theta_fd_error(p, t, h_rel * t);
        worst = std::max(worst, err);
        pr.samples.push_back({tower_from_double(t), err, std::log10(err), err <= tol});
    }
    std::size_t good = 0;
    for (auto& s : pr.samples) good += s.pass;
    pr.monotone_fraction = pr.samples.empty() ? 1.0 : double(good) / pr.samples.size();
    pr.pass = good == pr.samples.size();
    pr.last_value = pr.samples.empty() ? 0.0 : pr.samples.back().value;
    rep.stats["max_rel_error"] = worst;
    rep.stats["h_rel"] = h_rel;
    rep.stats["tol"] = tol;
    rep.properties = {pr};
    rep.pass = pr.pass;
    return rep;
}

PhiShiftResult phi_shift_threshold(const GrowthProfile& p, double alpha, double M, int samples) {
    if (!(alpha > 0) || !(M > 1)) throw DomainError("phi_shift_threshold needs alpha > 0 and M > 1");
    PhiShiftResult r;
    r.phi_at_one = phi_exponent(p, tower_from_double(std::max(1.0, p.t_min)));
    r.t_star = alpha / (std::pow(M, 1.0 / (1.0 + r.phi_at_one)) - 1.0);
    double start = std::max(r.t_star, p.t_min) * (1 + 1e-9);
    for (int i = 0; i < samples; ++i) {
        double t = start * std::pow(1e6, double(i) / std::max(1, samples - 1));
        double lhs = tower_to_double(tower_log(phi_eval(p, tower_from_double(t + alpha))));
        double rhs = tower_to_double(tower_log(phi_eval(p, tower_from_double(t)))) + std::log(M);
        ++r.checked;
        if (lhs <= rhs + 1e-12 * std::fabs(rhs)) ++r.passed;
    }
    r.pass = r.checked == r.passed;
    return r;
}

}  // namespace tractforge
