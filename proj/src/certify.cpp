#include "tractforge/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace tractforge {

namespace {

constexpr double kPi = 3.14159265358979323846;

CertLine line(std::string id, std::string claim, std::string lhs, double lv, std::string rhs, double rv, bool pass,
              double tol = 0) {
    CertLine l;
    l.id = std::move(id);
    l.claim = std::move(claim);
    l.lhs = std::move(lhs);
    l.rhs = std::move(rhs);
    l.lhs_value = lv;
    l.rhs_value = rv;
    l.tolerance = tol;
    l.pass = pass;
    return l;
}

void check_wiggle(const ToyTract& t, int j, const char* who) {
    if (j < 0 || j >= static_cast<int>(t.wiggles.size())) throw DomainError(std::string(who) + ": no such wiggle");
}

double log_inv_eps_sum(const ToyTract& t, int j) {
    double s = 0;
    for (int k = 0; k <= j; ++k) s += std::log(1 / t.wiggles[k].eps);
    return s;
}

// vertices of the geodesic outside the closed strip y_lo <= im z <= y_hi, r <= re z <= R
int count_outside(const std::vector<cplx>& poly, double r, double R, double y_lo, double y_hi) {
    const double e = 1e-6;
    int n = 0;
    for (cplx z : poly)
        if (z.real() < r - e || z.real() > R + e || z.imag() < y_lo - e || z.imag() > y_hi + e) ++n;
    return n;
}

}  // namespace

CertLine gate_condition_check(const MapHandle& h, const ToyTract& tract, int j, double target, double tol) {
    check_wiggle(tract, j, "gate_condition_check");
    if (!(target > 0) || !(tol > 0)) throw DomainError("gate_condition_check: target and tol must be positive");
    cplx z = map_inverse(h, target);
    const auto& w = tract.wiggles[j];
    double off = std::fabs(z.real() - w.tau);
    CertLine l = line("gate[" + std::to_string(j) + "]", "gate condition at wiggle " + std::to_string(j),
                      "|re z* - tau_j|", off, "tol * nu0_toy", tol * tract.nu0_toy, false, tol);
    l.steps.push_back(line(l.id + ".re", "re z* at tau_j", l.lhs, off, l.rhs, l.rhs_value, off <= l.rhs_value, tol));
    l.steps.push_back(line(l.id + ".im", "im z* in the middle channel", "|im z*|", std::fabs(z.imag()), "pi/3",
                           kPi / 3, std::fabs(z.imag()) < kPi / 3));
    l.pass = l.steps[0].pass && l.steps[1].pass;
    double delta = signed_distance(tract, z, j);
    l.note = "z* = " + fmt17(z.real()) + " + " + fmt17(z.imag()) + "i, delta = " + fmt17(delta);
    return l;
}

CertLine chain_check(const MapHandle& h, const ToyTract& tract, int j, double target) {
    check_wiggle(tract, j, "chain_check");
    if (!(target > 0)) throw DomainError("chain_check: target must be positive");
    const auto& wg = tract.wiggles[j];
    const double nu = tract.nu0_toy;
    cplx w = map_inverse(h, target);
    cplx wd = w - cplx(0, 2 * kPi / 3);
    if (!tract.contains(wd)) throw GeometryError("chain_check: lower companion point is outside the tract");
    double rho = std::abs(map_eval(h, w).w), rho_dot = std::abs(map_eval(h, wd).w);
    double lr = std::log(rho_dot) - std::log(rho);
    const std::string id = "chain[" + std::to_string(j) + "]";

    CertLine l = line(id, "ordering chain at wiggle " + std::to_string(j), "|F(w_j)|", rho, "|F(w'_j)| / 2",
                      rho_dot / 2, false);
    l.steps.push_back(line(id + ".half", "|F(w_j)| < |F(w'_j)| / 2", "|F(w_j)|", rho, "|F(w'_j)| / 2", rho_dot / 2,
                           rho < rho_dot / 2));
    double lower = 3 / kPi * (wg.R - wg.r - 4 * nu - 3);
    l.steps.push_back(line(id + ".lower", "log ratio at least the channel estimate", "log|F(w'_j)| - log|F(w_j)|", lr,
                           "(3/pi)(R_j - r_j - 4 nu0 - 3)", lower, lr >= lower));
    l.steps.push_back(line(id + ".lower.log2", "channel estimate exceeds log 2", "(3/pi)(R_j - r_j - 4 nu0 - 3)",
                           lower, "log 2", std::log(2.0), lower > std::log(2.0)));
    double upper = 8 * (wg.R - wg.r) + 8 * kPi / 3;
    l.steps.push_back(line(id + ".upper", "log ratio below the upper estimate", "log|F(w'_j)| - log|F(w_j)|", lr,
                           "8(R_j - r_j) + 8 pi / 3", upper, lr < upper));

    GeodesicTrace g = geodesic_trace(h, rho), gd = geodesic_trace(h, rho_dot);
    int out_plus = count_outside(g.polyline, wg.r, wg.R, -kPi / 3, kPi / 3);
    int out_minus = count_outside(gd.polyline, wg.r, wg.R, -kPi, -kPi / 3);
    l.steps.push_back(line(id + ".geodesic.plus", "geodesic through w_j lies in W_j^+", "vertices outside", out_plus,
                           "0", 0, out_plus == 0));
    l.steps.push_back(line(id + ".geodesic.minus", "geodesic through w'_j lies in W_j^-", "vertices outside",
                           out_minus, "0", 0, out_minus == 0));
    l.pass = std::all_of(l.steps.begin(), l.steps.end(), [](const CertLine& s) { return s.pass; });

    if (j + 1 < static_cast<int>(tract.wiggles.size())) {
        const auto& nx = tract.wiggles[j + 1];
        double left = nx.r + wg.R + 1 + 2 * kPi;
        l.steps.push_back(line(id + ".report.next_r", "r_{j+1} + R_j + 1 + 2 pi < |F(w_j)|", "r_{j+1} + R_j + 1 + 2 pi",
                               left, "|F(w_j)|", rho, left < rho));
        double right = nx.R - 2 - 4 * nu;
        l.steps.push_back(line(id + ".report.next_R", "|F(w'_j)| < R_{j+1} - 2 - 4 nu0", "|F(w'_j)|", rho_dot,
                               "R_{j+1} - 2 - 4 nu0", right, rho_dot < right));
    }
    l.note = "w_j = " + fmt17(w.real()) + " + " + fmt17(w.imag()) + "i, geodesic diameters " + fmt17(g.diameter) +
             ", " + fmt17(gd.diameter);
    return l;
}

CertReport growth_report(const MapHandle& h, const ToyTract& tract, int samples, std::uint64_t seed) {
    if (samples < 1) throw DomainError("growth_report: samples must be positive");
    CertReport rep;
    rep.title = "growth comparability";
    std::mt19937_64 rng(seed);
    double gmin = std::numeric_limits<double>::infinity(), gmax = 0;

    auto region = [&](const std::string& id, double x0, double x1, double y0, double y1, auto denom) {
        std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        int got = 0, tries = 0;
        while (got < samples && tries < 1000 * samples) {
            ++tries;
            cplx z(ux(rng), uy(rng));
            if (!tract.contains(z) || tract.dist_to_boundary(z) < 1e-3) continue;
            double ratio = std::log(std::abs(map_eval(h, z).w)) / denom(z);
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
            ++got;
        }
        if (got == 0) return;
        CertLine l = line(id, "log|F| ratio bounded and positive on " + id, "min ratio", lo, "0", 0,
                          lo > 0 && std::isfinite(hi));
        l.note = "max ratio " + fmt17(hi) + ", samples " + std::to_string(got);
        rep.lines.push_back(l);
        rep.constants[id + ".min"] = lo;
        rep.constants[id + ".max"] = hi;
        gmin = std::min(gmin, lo);
        gmax = std::max(gmax, hi);
    };

    const int n = static_cast<int>(tract.wiggles.size());
    if (n == 0) region("U", tract.x_left + 2, tract.trusted_right(), -kPi, kPi, [](cplx z) { return z.real(); });
    for (int j = 0; j < n; ++j) {
        const auto& w = tract.wiggles[j];
        double s = log_inv_eps_sum(tract, j);
        region("W[" + std::to_string(j) + "]", w.r, w.R, -kPi, kPi / 3, [&](cplx) { return w.R + s; });
        double x1 = j + 1 < n ? tract.wiggles[j + 1].r : tract.trusted_right();
        region("U[" + std::to_string(j + 1) + "]", w.R, x1, -kPi, kPi, [&](cplx z) { return z.real() + s; });
    }
    rep.constants["ratio_min"] = gmin;
    rep.constants["ratio_max"] = gmax;
    rep.constants["C_emp"] = std::max(gmax, 1 / gmin);
    return rep;
}

CertLine monotonicity_check(const MapHandle& a, const MapHandle& b, const std::vector<cplx>& points, double tol) {
    if (a.tract.wiggles.size() != b.tract.wiggles.size()) throw DomainError("monotonicity_check: gate counts differ");
    for (std::size_t k = 0; k < a.tract.wiggles.size(); ++k)
        if (a.tract.wiggles[k].eps > b.tract.wiggles[k].eps)
            throw DomainError("monotonicity_check: eps_a must be componentwise at most eps_b");
    CertLine l = line("monotonicity", "smaller gates never decrease d(5, z)", "min d_a - d_b", 0, "-tol", -tol, true,
                      tol);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i) {
        cplx z = points[i];
        double da = hyp_dist(a, a.tract.base_point, z), db = hyp_dist(b, b.tract.base_point, z);
        CertLine s = line("monotonicity.point[" + std::to_string(i) + "]", "d_a(5, z) >= d_b(5, z) - tol", "d_a", da,
                          "d_b - tol", db - tol, da >= db - tol, tol);
        s.note = "z = " + fmt17(z.real()) + " + " + fmt17(z.imag()) + "i";
        worst = std::min(worst, da - db);
        l.pass = l.pass && s.pass;
        l.steps.push_back(s);
    }
    l.lhs_value = points.empty() ? 0 : worst;
    return l;
}

CertLine monotonicity_check(const ToyTract& tract, const GateVector& eps_a, const GateVector& eps_b,
                            const std::vector<cplx>& points, double tol) {
    for (std::size_t k = 0; k < eps_a.eps.size() && k < eps_b.eps.size(); ++k)
        if (eps_a.eps[k] > eps_b.eps[k])
            throw DomainError("monotonicity_check: eps_a must be componentwise at most eps_b");
    MapHandle b = map_build(toy_with_eps(tract, eps_b.eps));
    MapHandle a = map_build(toy_with_eps(tract, eps_a.eps), b.accuracy, &b);
    return monotonicity_check(a, b, points, tol);
}

// ---- arc doubling ------------------------------------------------------------

nlohmann::json DoublingResult::to_json() const {
    nlohmann::json lv = nlohmann::json::array();
    for (const auto& l : levels)
        lv.push_back({{"wiggle", l.wiggle},
                      {"rho", l.rho},
                      {"rho_dot", l.rho_dot},
                      {"inner", l.inner},
                      {"outer", l.outer},
                      {"arcs", l.arcs.size()}});
    return {{"counts", counts}, {"levels", lv}};
}

namespace {

cplx at(const std::vector<cplx>& p, double t) {
    auto i = std::min(static_cast<std::size_t>(t), p.size() - 2);
    double f = t - static_cast<double>(i);
    return p[i] + f * (p[i + 1] - p[i]);
}

// parameter in [i, i + 1] where |p(t)| crosses level; |p| is convex along a segment so the crossing is unique
double crossing(const std::vector<cplx>& p, std::size_t i, double level) {
    double lo = static_cast<double>(i), hi = lo + 1;
    bool lo_below = std::abs(p[i]) <= level;
    for (int k = 0; k < 60; ++k) {
        double m = 0.5 * (lo + hi);
        ((std::abs(at(p, m)) <= level) == lo_below ? lo : hi) = m;
    }
    return 0.5 * (lo + hi);
}

std::vector<cplx> resample(const std::vector<cplx>& p, int n) {
    std::vector<double> cum{0};
    for (std::size_t i = 1; i < p.size(); ++i) cum.push_back(cum.back() + std::abs(p[i] - p[i - 1]));
    std::vector<cplx> out;
    for (int k = 0; k < n; ++k) {
        double s = cum.back() * k / (n - 1);
        auto it = std::upper_bound(cum.begin(), cum.end(), s);
        std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - cum.begin() - 1, 0), p.size() - 2);
        double len = cum[i + 1] - cum[i];
        out.push_back(at(p, static_cast<double>(i) + (len > 0 ? (s - cum[i]) / len : 0)));
    }
    return out;
}

double max_step(const std::vector<cplx>& p) {
    double m = 0;
    for (std::size_t i = 1; i < p.size(); ++i) m = std::max(m, std::abs(p[i] - p[i - 1]));
    return m;
}

Segment crossing_segment(const ToyWiggle& w) { return {cplx(w.r, -kPi / 3), cplx(w.r + 1, -kPi / 3)}; }

}  // namespace

DoublingResult arc_doubling(const MapHandle& h, const ToyTract& tract, int levels, int samples) {
    if (levels < 0 || levels >= static_cast<int>(tract.wiggles.size()))
        throw DomainError("arc_doubling: needs at least levels + 1 wiggles");
    const auto& w = tract.wiggles[levels];
    const double y = -2 * kPi / 3, xr = w.r + 0.5;
    return arc_doubling(h, tract, levels, {cplx(w.tau, 0), cplx(xr, 0), cplx(xr, y), cplx(w.tau, y)}, samples);
}

DoublingResult arc_doubling(const MapHandle& h, const ToyTract& tract, int levels, const std::vector<cplx>& seed,
                            int samples) {
    if (levels < 0 || levels >= static_cast<int>(tract.wiggles.size()))
        throw DomainError("arc_doubling: needs at least levels + 1 wiggles");
    if (samples < 10) throw DomainError("arc_doubling: too few samples");
    if (seed.size() < 2) throw DomainError("arc_doubling: seed arc needs two points");
    const int top = levels;
    Segment cross = crossing_segment(tract.wiggles[top]);
    bool crosses = false;
    for (std::size_t i = 0; i + 1 < seed.size() && !crosses; ++i) crosses = segments_intersect({seed[i], seed[i + 1]}, cross);
    if (!crosses) throw DomainError("arc_doubling: seed arc does not cross the segment (r - pi i/3, r + 1 - pi i/3)");

    DoublingResult res;
    for (int k = 0; k <= levels; ++k) {
        DoublingLevel L;
        L.wiggle = top - k;
        const auto& wg = tract.wiggles[L.wiggle];
        L.rho = std::abs(map_eval(h, cplx(wg.tau, 0)).w);
        L.rho_dot = std::abs(map_eval(h, cplx(wg.tau, -2 * kPi / 3)).w);
        L.inner = std::abs(cplx(wg.r + 1, -kPi / 3));
        L.outer = std::numeric_limits<double>::infinity();
        for (double rho : {L.rho, L.rho_dot})
            for (cplx z : geodesic_trace(h, rho).polyline) L.outer = std::min(L.outer, std::abs(z));
        res.levels.push_back(std::move(L));
    }
    res.levels[0].arcs.push_back(resample(seed, samples));
    res.counts.push_back(1);

    for (int k = 0; k < levels; ++k) {
        DoublingLevel& cur = res.levels[k];
        const DoublingLevel& nxt = res.levels[k + 1];
        double tol = 0;
        for (const auto& a : cur.arcs) tol = std::max(tol, max_step(a));
        // crossing tolerance of one sample step around the segment at r
        const double lo = cur.inner + tol, hi = cur.outer;
        if (!(lo < hi))
            throw GeometryError("arc_doubling: sampling too coarse to separate the levels at wiggle " +
                                std::to_string(cur.wiggle));
        const double l0 = std::log(nxt.rho), l1 = std::log(nxt.rho_dot);
        // radial model: |z| = lo lands on |F| = rho, |z| = hi on |F| = rho_dot
        auto pull = [&](cplx z) {
            double m = std::abs(z);
            double lw = l0 + (m - lo) / (hi - lo) * (l1 - l0);
            return map_inverse(h, std::exp(lw) * z / m);
        };
        auto state = [&](cplx z) {
            double m = std::abs(z);
            return m <= lo ? -1 : (m >= hi ? 1 : 0);
        };
        for (const auto& arc : cur.arcs) {
            int st = 0;
            std::size_t last = 0;
            for (std::size_t i = 0; i < arc.size(); ++i) {
                int s = state(arc[i]);
                if (s == 0) continue;
                if (st != 0 && s != st) {
                    double t0 = crossing(arc, last, st < 0 ? lo : hi);
                    double t1 = crossing(arc, i - 1, s < 0 ? lo : hi);
                    std::vector<cplx> piece;
                    piece.reserve(samples);
                    for (int q = 0; q < samples; ++q) piece.push_back(pull(at(arc, t0 + (t1 - t0) * q / (samples - 1))));
                    res.levels[k + 1].arcs.push_back(std::move(piece));
                }
                st = s;
                last = i;
            }
        }
        res.counts.push_back(static_cast<int>(res.levels[k + 1].arcs.size()));
    }
    return res;
}

}  // namespace tractforge
