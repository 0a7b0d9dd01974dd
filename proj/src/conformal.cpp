#include "tractforge/conformal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "quadrature.hpp"
#include "tractforge/errors.hpp"

namespace tractforge {

namespace {

constexpr double kPi = 3.14159265358979323846;
const double kLog2 = std::log(2.0);
constexpr int kNodes = 12;
const cplx kI(0, 1);

double lsinh(double x) { return x > 18 ? x - kLog2 : std::log(std::sinh(x)); }
double lcosh(double x) {
    x = std::fabs(x);
    return x > 18 ? x - kLog2 : std::log(std::cosh(x));
}

cplx clog_cosh(cplx u) {
    if (u.real() < 0) u = -u;
    if (u.real() < 18) return std::log(std::cosh(u));
    return u - kLog2 + std::exp(-2.0 * u);
}

cplx clog_sinh(cplx u) {
    if (u.real() < 0) return clog_sinh(-u) + cplx(0, kPi);
    if (u.real() < 18) return std::log(std::sinh(u));
    return u - kLog2 - std::exp(-2.0 * u);
}

// argument normalized into [-pi/2, 3pi/2): the principal branch on the closed upper half-plane
cplx upper_branch(cplx l) {
    double a = std::remainder(l.imag(), 2 * kPi);
    if (a < -kPi / 2) a += 2 * kPi;
    return {l.real(), a};
}

int eidx(double e) { return e < -0.25 ? 0 : (e > 0.25 ? 2 : 1); }

// rule for weight |s-a|^ea |b-s|^eb, ea, eb in {-1/2, 0, 1/2}
const detail::Rule& jacobi_rule(double ea, double eb) {
    static const std::array<detail::Rule, 9> table = [] {
        std::array<detail::Rule, 9> t;
        const double e[3] = {-0.5, 0.0, 0.5};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) t[3 * i + j] = detail::gauss_jacobi(kNodes, e[j], e[i]);
        return t;
    }();
    return table[3 * eidx(ea) + eidx(eb)];
}

double exponent_of(double beta, bool corner) {
    if (corner) return 0.0;
    double r = std::round(beta);
    return std::fabs(beta - r) < 1e-12 ? 0.0 : beta;
}

double dist_point_segment(cplx p, cplx a, cplx b) { return point_segment_distance(p, Segment{a, b}); }

// ---- vertex lists of the untruncated tract --------------------------------

struct LineVertex {
    cplx z;
    double beta;
};

void sc_vertices(const ToyTract& t, std::vector<LineVertex>& bottom, std::vector<LineVertex>& top) {
    const double h = t.half_height, p3 = kPi / 3;
    bottom.clear();
    top.clear();
    bottom.push_back({{t.x_left, -h}, -0.5});
    for (const auto& w : t.wiggles) {
        bottom.push_back({{w.r, -h}, -0.5});
        bottom.push_back({{w.r, p3}, 0.5});
        if (w.eps < 1) {
            bottom.push_back({{w.tau, p3}, -0.5});
            bottom.push_back({{w.tau, kPi * (2 - w.eps) / 3}, 1.0});
            bottom.push_back({{w.tau, p3}, -0.5});
        }
        bottom.push_back({{w.R - 1, p3}, 1.0});
        bottom.push_back({{w.r, p3}, -0.5});
        bottom.push_back({{w.r, -h}, -0.5});
    }
    // walk order from infinity westward, stored reversed so that s increases
    std::vector<LineVertex> walk;
    for (auto it = t.wiggles.rbegin(); it != t.wiggles.rend(); ++it) {
        const auto& w = *it;
        walk.push_back({{w.R, h}, -0.5});
        walk.push_back({{w.R, -p3}, 0.5});
        walk.push_back({{w.r + 1, -p3}, 1.0});
        walk.push_back({{w.R, -p3}, -0.5});
        walk.push_back({{w.R, h}, -0.5});
        if (w.eps < 1) {
            walk.push_back({{w.tau, h}, -0.5});
            walk.push_back({{w.tau, kPi * (2 + w.eps) / 3}, 1.0});
            walk.push_back({{w.tau, h}, -0.5});
        }
    }
    walk.push_back({{t.x_left, h}, -0.5});
    top.assign(walk.rbegin(), walk.rend());
}

// free vertical extent of the tract through p
double vertical_extent(const std::vector<Segment>& segs, cplx p) {
    double up = 1e300, down = 1e300;
    for (const auto& s : segs) {
        if (std::fabs(s.a.imag() - s.b.imag()) > 1e-12) continue;
        double lo = std::min(s.a.real(), s.b.real()), hi = std::max(s.a.real(), s.b.real());
        if (p.real() < lo || p.real() > hi) continue;
        double dy = s.a.imag() - p.imag();
        if (dy > 0) up = std::min(up, dy);
        if (dy < 0) down = std::min(down, -dy);
    }
    return up + down;
}

// ---- parameter problem -----------------------------------------------------

struct Problem {
    std::vector<double> beta[2], expo[2];
    std::vector<cplx> z[2];
    std::vector<double> target[2];  // side lengths
    int n[2] = {0, 0};
    int nvar() const { return n[0] - 1 + n[1] - 1; }
    int var(int L, int m) const { return L == 0 ? m - 1 : n[0] - 1 + m - 1; }
};

struct QNode {
    double s, logw;
};

class SideQuad {
  public:
    SideQuad(const Problem& P, const std::vector<double>* s) : P_(P), s_(s) {}

    double f(int L, double x) const {
        double acc = lsinh(x / 2);
        for (int Lp = 0; Lp < 2; ++Lp) {
            const auto& sv = s_[Lp];
            const auto& bv = P_.beta[Lp];
            for (std::size_t m = 0; m < sv.size(); ++m) {
                double g = Lp == L ? kLog2 + lsinh((x + sv[m]) / 4) + lsinh(std::fabs(x - sv[m]) / 4)
                                   : kLog2 + lcosh((x + sv[m]) / 4) + lcosh((x - sv[m]) / 4);
                acc += bv[m] * g;
            }
        }
        return acc;
    }

    double dist(int L, double a, double b, int exclA, int exclB) const {
        auto di = [a, b](double p) { return p < a ? a - p : (p > b ? p - b : 0.0); };
        double d = 2 * kPi;
        const auto& sv = s_[L];
        for (std::size_t m = 0; m < sv.size(); ++m) {
            if (P_.expo[L][m] == 0) continue;
            if (static_cast<int>(m) != exclA && static_cast<int>(m) != exclB) d = std::min(d, di(sv[m]));
            d = std::min(d, di(-sv[m]));
        }
        return d;
    }

    void plan(int L, double a, double b, double ea, double eb, int exclA, int exclB, int depth,
              std::vector<QNode>& out) const {
        double len = b - a;
        if (len <= dist(L, a, b, exclA, exclB) || depth > 50) {
            const auto& r = jacobi_rule(ea, eb);
            double lscale = (1 + ea + eb) * std::log(len / 2);
            for (int i = 0; i < kNodes; ++i) {
                double ua = len * (1 + r.x[i]) / 2, ub = len * (1 - r.x[i]) / 2;
                double lw = std::log(r.w[i]) + lscale;
                if (ea != 0) lw -= ea * std::log(ua);
                if (eb != 0) lw -= eb * std::log(ub);
                out.push_back({a + ua, lw});
            }
            return;
        }
        double mid = 0.5 * (a + b);
        plan(L, a, mid, ea, 0, exclA, -1, depth + 1, out);
        plan(L, mid, b, 0, eb, -1, exclB, depth + 1, out);
    }

    void nodes(int L, int k, std::vector<QNode>& out) const {
        out.clear();
        double ea = P_.expo[L][k], eb = P_.expo[L][k + 1];
        plan(L, s_[L][k], s_[L][k + 1], ea, eb, ea != 0 ? k : -1, eb != 0 ? k + 1 : -1, 0, out);
    }

    double length(int L, int k, std::vector<QNode>& nd, std::vector<double>* contrib = nullptr) const {
        nodes(L, k, nd);
        double sum = 0;
        if (contrib) contrib->resize(nd.size());
        for (std::size_t i = 0; i < nd.size(); ++i) {
            double c = std::exp(nd[i].logw + f(L, nd[i].s));
            if (contrib) (*contrib)[i] = c;
            sum += c;
        }
        return sum;
    }

  private:
    const Problem& P_;
    const std::vector<double>* s_;
};

void positions_from_u(const Problem& P, const Eigen::VectorXd& u, std::vector<double> s[2]) {
    for (int L = 0; L < 2; ++L) {
        s[L].assign(P.n[L], 0.0);
        for (int m = 1; m < P.n[L]; ++m) s[L][m] = s[L][m - 1] + std::exp(u(P.var(L, m)));
    }
}

Eigen::VectorXd residual(const Problem& P, const Eigen::VectorXd& u) {
    std::vector<double> s[2];
    positions_from_u(P, u, s);
    SideQuad q(P, s);
    Eigen::VectorXd r(P.nvar());
    std::vector<QNode> nd;
    for (int L = 0; L < 2; ++L)
        for (int k = 0; k + 1 < P.n[L]; ++k) r(P.var(L, k + 1)) = std::log(q.length(L, k, nd)) - std::log(P.target[L][k]);
    return r;
}

Eigen::MatrixXd jacobian(const Problem& P, const Eigen::VectorXd& u) {
    const int nv = P.nvar();
    std::vector<double> s[2];
    positions_from_u(P, u, s);
    SideQuad q(P, s);
    Eigen::MatrixXd Js = Eigen::MatrixXd::Zero(nv, nv);
    std::vector<QNode> nd;
    std::vector<double> c;
    for (int L = 0; L < 2; ++L)
        for (int k = 0; k + 1 < P.n[L]; ++k) {
            int row = P.var(L, k + 1);
            double len = q.length(L, k, nd, &c);
            for (int Lp = 0; Lp < 2; ++Lp)
                for (int m = 1; m < P.n[Lp]; ++m) {
                    if (Lp == L && (m == k || m == k + 1)) continue;
                    double sm = s[Lp][m], acc = 0;
                    for (std::size_t i = 0; i < nd.size(); ++i) {
                        double x = nd[i].s, dg;
                        if (Lp == L)
                            dg = 0.25 * (1 / std::tanh((x + sm) / 4) - 1 / std::tanh((x - sm) / 4));
                        else
                            dg = 0.25 * (std::tanh((x + sm) / 4) - std::tanh((x - sm) / 4));
                        acc += c[i] * dg;
                    }
                    Js(row, P.var(Lp, m)) = P.beta[Lp][m] * acc / len;
                }
            // moving endpoints by central differences
            for (int m : {k, k + 1}) {
                if (m == 0) continue;
                double gl = s[L][m] - s[L][m - 1];
                double gr = m + 1 < P.n[L] ? s[L][m + 1] - s[L][m] : gl;
                double h = 1e-6 * std::min(gl, gr);
                double keep = s[L][m];
                s[L][m] = keep + h;
                double lp = SideQuad(P, s).length(L, k, nd);
                s[L][m] = keep - h;
                double lm = SideQuad(P, s).length(L, k, nd);
                s[L][m] = keep;
                Js(row, P.var(L, m)) = (std::log(lp) - std::log(lm)) / (2 * h);
            }
        }
    Eigen::MatrixXd Ju(nv, nv);
    for (int L = 0; L < 2; ++L) {
        Eigen::VectorXd suffix = Eigen::VectorXd::Zero(nv);
        for (int m = P.n[L] - 1; m >= 1; --m) {
            suffix += Js.col(P.var(L, m));
            Ju.col(P.var(L, m)) = std::exp(u(P.var(L, m))) * suffix;
        }
    }
    return Ju;
}

// gate opening if side k on line L is a gate face, else 0
double gate_face_eps(const Problem& P, int L, int k) {
    cplx a = P.z[L][k], b = P.z[L][k + 1];
    if (std::fabs(a.real() - b.real()) > 1e-12) return 0;
    if (P.beta[L][k] != 1.0 && P.beta[L][k + 1] != 1.0) return 0;
    return std::max(1 - 3 * P.target[L][k] / kPi, 1e-300);
}

double gate_gap(double eps) { return 2 * std::log(1 / eps) + 0.5; }

Eigen::VectorXd initial_guess(const Problem& P, const ToyTract& t) {
    auto segs = t.boundary_segments();
    Eigen::VectorXd u(P.nvar());
    for (int L = 0; L < 2; ++L)
        for (int k = 0; k + 1 < P.n[L]; ++k) {
            cplx a = P.z[L][k], b = P.z[L][k + 1];
            cplx dir = L == 0 ? b - a : a - b;  // walk direction
            cplx normal = kI * dir / std::abs(dir);
            double len = P.target[L][k], ds = 0;
            if (double e = gate_face_eps(P, L, k); e > 0) {
                ds = gate_gap(e);
            } else if (std::fabs(dir.real()) < 1e-12) {
                ds = 1.5 * len;
            } else {
                constexpr int n = 16;
                for (int i = 0; i < n; ++i) {
                    cplx probe = a + (b - a) * ((i + 0.5) / n) + 1e-3 * normal;
                    ds += 2 * kPi / std::min(vertical_extent(segs, probe), 2 * kPi) * len / n;
                }
            }
            u(P.var(L, k + 1)) = std::log(std::max(ds, 1e-3));
        }
    return u;
}

// damped Newton on the log-gaps with a Levenberg-Marquardt fallback; returns the final max residual
double solve(const Problem& P, Eigen::VectorXd& u, double accuracy, int& iters, int& evals) {
    if (P.nvar() == 0) return 0;
    Eigen::VectorXd r = residual(P, u);
    ++evals;
    double cost = r.squaredNorm();
    double mu = 1e-3;
    const double stop = std::min(1e-13, accuracy);
    for (int it = 0; it < 200 && r.cwiseAbs().maxCoeff() > stop; ++it, ++iters) {
        Eigen::MatrixXd J = jacobian(P, u);
        bool accepted = false;
        Eigen::VectorXd step = -J.partialPivLu().solve(r);
        double sm = step.cwiseAbs().maxCoeff();
        if (std::isfinite(sm)) {
            if (sm > 2) step *= 2 / sm;
            for (int k = 0; k < 6 && !accepted; ++k, step *= 0.5) {
                Eigen::VectorXd un = u + step;
                Eigen::VectorXd rn = residual(P, un);
                ++evals;
                double cn = rn.squaredNorm();
                if (std::isfinite(cn) && cn < cost) {
                    u = un;
                    r = rn;
                    cost = cn;
                    accepted = true;
                }
            }
        }
        if (accepted) continue;
        Eigen::MatrixXd JtJ = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * r;
        for (int tries = 0; tries < 12 && !accepted; ++tries) {
            Eigen::MatrixXd A = JtJ;
            A.diagonal() += mu * JtJ.diagonal().cwiseMax(1e-12);
            Eigen::VectorXd st = -A.ldlt().solve(g);
            double m = st.cwiseAbs().maxCoeff();
            if (!std::isfinite(m)) {
                mu *= 10;
                continue;
            }
            if (m > 2) st *= 2 / m;
            Eigen::VectorXd un = u + st;
            Eigen::VectorXd rn = residual(P, un);
            ++evals;
            double cn = rn.squaredNorm();
            if (std::isfinite(cn) && cn < cost) {
                u = un;
                r = rn;
                cost = cn;
                mu = std::max(mu / 10, 1e-12);
                accepted = true;
            } else {
                mu *= 10;
            }
        }
        if (!accepted) break;
    }
    return r.cwiseAbs().maxCoeff();
}

Problem make_problem(const ToyTract& t) {
    std::vector<LineVertex> lv[2];
    sc_vertices(t, lv[0], lv[1]);
    Problem P;
    for (int L = 0; L < 2; ++L) {
        P.n[L] = static_cast<int>(lv[L].size());
        for (int m = 0; m < P.n[L]; ++m) {
            P.beta[L].push_back(lv[L][m].beta);
            P.expo[L].push_back(exponent_of(lv[L][m].beta, m == 0));
            P.z[L].push_back(lv[L][m].z);
        }
        for (int k = 0; k + 1 < P.n[L]; ++k) P.target[L].push_back(std::abs(P.z[L][k + 1] - P.z[L][k]));
    }
    return P;
}

}  // namespace

// ---- frozen map ------------------------------------------------------------

class SCMap {
  public:
    std::vector<Prevertex> pv;
    std::vector<double> expo;
    std::vector<cplx> sing;
    std::vector<Segment> boundary;
    double s_max = 0;

    void finalize() {
        expo.clear();
        sing.clear();
        for (std::size_t m = 0; m < pv.size(); ++m) {
            bool corner = pv[m].s == 0.0;
            expo.push_back(exponent_of(pv[m].beta, corner));
            if (expo.back() != 0) {
                sing.push_back(pv[m].sigma());
                sing.push_back({-pv[m].s, pv[m].sigma().imag()});
            }
            s_max = std::max(s_max, pv[m].s);
        }
    }

    cplx log_dz(cplx sg) const {
        cplx acc = cplx(0, kPi / 2) + clog_cosh(sg / 2.0);
        const cplx l2i = cplx(kLog2, kPi / 2);
        for (const auto& p : pv) {
            cplx sm = p.sigma();
            cplx l = upper_branch(l2i + clog_cosh((sg + sm) / 4.0) + clog_sinh((sg - sm) / 4.0));
            acc += p.beta * l;
        }
        return acc;
    }

    cplx dz(cplx sg) const { return std::exp(log_dz(sg)); }

    void cquad(cplx a, cplx b, double ea, int excl, int depth, cplx& acc) const {
        double len = std::abs(b - a);
        if (len == 0) return;
        double d = 1e300;
        for (std::size_t i = 0; i < sing.size(); ++i) {
            if (excl >= 0 && std::abs(sing[i] - pv[excl].sigma()) < 1e-300) continue;
            d = std::min(d, dist_point_segment(sing[i], a, b));
        }
        if (len <= d || depth > 48) {
            const auto& r = jacobi_rule(ea, 0);
            cplx sum = 0;
            for (int i = 0; i < kNodes; ++i) {
                double ua = len * (1 + r.x[i]) / 2;
                cplx node = a + (b - a) * ((1 + r.x[i]) / 2);
                cplx l = log_dz(node);
                if (ea != 0) l -= ea * std::log(ua);
                sum += r.w[i] * std::exp(l);
            }
            acc += sum * ((b - a) / len) * std::pow(len / 2, 1 + ea);
            return;
        }
        cplx mid = 0.5 * (a + b);
        cquad(a, mid, ea, excl, depth + 1, acc);
        cquad(mid, b, 0, -1, depth + 1, acc);
    }

    cplx integrate(cplx a, cplx b) const {
        cplx acc = 0;
        cquad(a, b, 0, -1, 0, acc);
        return acc;
    }

    cplx z_of_sigma(cplx sg) const {
        int best = 0;
        double bd = 1e300;
        for (std::size_t m = 0; m < pv.size(); ++m) {
            double d = std::abs(sg - pv[m].sigma());
            if (d < bd) {
                bd = d;
                best = static_cast<int>(m);
            }
        }
        cplx acc = 0;
        cquad(pv[best].sigma(), sg, expo[best], expo[best] != 0 ? best : -1, 0, acc);
        return pv[best].z + acc;
    }

    double dist_to_boundary(cplx z) const {
        double d = 1e300;
        for (const auto& s : boundary) d = std::min(d, point_segment_distance(z, s));
        return d;
    }

    bool clear_path(cplx a, cplx b) const {
        Segment s{a, b};
        for (const auto& e : boundary)
            if (segments_intersect(s, e)) return false;
        return true;
    }

    static bool in_domain(cplx sg) { return sg.real() >= 0 && std::fabs(sg.imag()) <= kPi; }

    // follow z(sigma) along the straight path from zc = z(sig) to target
    bool track(cplx& sig, cplx& zc, cplx target) const {
        for (int iter = 0; iter < 100000; ++iter) {
            cplx d = target - zc;
            double ad = std::abs(d);
            if (ad < 1e-13 * (1 + std::abs(target))) return true;
            double room = dist_to_boundary(zc);
            double h = std::min({ad, 0.3 * room, 1.0});
            bool ok = false;
            for (int shrink = 0; shrink < 30 && !ok; ++shrink, h *= 0.5) {
                cplx zn = (h >= ad) ? target : zc + d * (h / ad);
                cplx sn = sig + (zn - zc) / dz(sig);
                cplx zs;
                for (int k = 0; k < 30; ++k) {
                    if (!in_domain(sn)) break;
                    zs = zc + integrate(sig, sn);
                    cplx e = zs - zn;
                    if (std::abs(e) < 1e-14 * (1 + std::abs(zn))) {
                        ok = true;
                        break;
                    }
                    sn -= e / dz(sn);
                }
                if (ok) {
                    sig = sn;
                    zc = zs;
                }
            }
            if (!ok) return false;
        }
        return false;
    }

    void build_seeds() const {
        std::call_once(seed_once_, [this] {
            const double ims[] = {-2.4, -1.2, 0.0, 1.2, 2.4};
            for (double c : ims) {
                cplx sg(0.25, c);
                cplx z = z_of_sigma(sg);
                seeds_.push_back({sg, z});
                for (double x = 0.75; x < s_max + 6; x += 0.5) {
                    cplx sn(x, c);
                    z += integrate(sg, sn);
                    sg = sn;
                    seeds_.push_back({sg, z});
                }
            }
        });
    }

    cplx sigma_of_z(cplx z) const {
        build_seeds();
        std::vector<std::pair<double, int>> order;
        order.reserve(seeds_.size());
        for (std::size_t i = 0; i < seeds_.size(); ++i) order.push_back({std::abs(seeds_[i].second - z), static_cast<int>(i)});
        std::sort(order.begin(), order.end());
        // seeds across a wall can be the nearest ones; only seeds with a clear path count as attempts
        int attempts = 0;
        for (std::size_t i = 0; i < order.size() && attempts < 40; ++i) {
            auto [sg, zc] = seeds_[order[i].second];
            if (!clear_path(zc, z)) continue;
            ++attempts;
            if (track(sg, zc, z)) return polish(sg, z);
        }
        throw ConvergenceError("map evaluation: no seed reaches the point");
    }

    cplx polish(cplx sg, cplx z) const {
        for (int k = 0; k < 3; ++k) {
            cplx e = z_of_sigma(sg) - z;
            if (std::abs(e) < 1e-14 * (1 + std::abs(z))) break;
            sg -= e / dz(sg);
        }
        return sg;
    }

  private:
    mutable std::once_flag seed_once_;
    mutable std::vector<std::pair<cplx, cplx>> seeds_;
};

// ---- public API ------------------------------------------------------------

cplx halfstrip_oracle(cplx z) {
    if (!(z.real() >= 4) || !(std::fabs(z.imag()) <= kPi)) throw DomainError("halfstrip_oracle: point outside the closed half-strip");
    return (5.0 / std::sinh(0.5)) * std::sinh((z - 4.0) / 2.0);
}

const std::vector<Prevertex>& MapHandle::prevertices() const { return sc->pv; }

cplx MapHandle::image_of_sigma(cplx s) const { return norm_a * std::sinh(s / 2.0) + cplx(0, norm_b); }

cplx MapHandle::sigma_of_image(cplx w) const {
    cplx s = 2.0 * std::asinh((w - cplx(0, norm_b)) / norm_a);
    if (s.real() < 0) s = {0.0, s.imag()};
    if (s.imag() > kPi) s = {s.real(), kPi};
    if (s.imag() < -kPi) s = {s.real(), -kPi};
    return s;
}

cplx MapHandle::base_image() const { return image_of_sigma(sigma_base); }

cplx MapHandle::proxy_image() const { return image_of_sigma(sc->sigma_of_z({tract.x_close, 0.0})); }

bool MapHandle::boundary_monotone() const {
    // walk order: top line with decreasing s, left segment, bottom line with increasing s
    std::vector<double> im;
    std::vector<const Prevertex*> top, bot;
    for (const auto& p : sc->pv) (p.line == 1 ? top : bot).push_back(&p);
    for (auto it = top.rbegin(); it != top.rend(); ++it) im.push_back(image_of_sigma((*it)->sigma()).imag());
    for (auto* p : bot) im.push_back(image_of_sigma(p->sigma()).imag());
    for (std::size_t i = 0; i + 1 < im.size(); ++i)
        if (!(im[i + 1] < im[i])) return false;
    return true;
}

nlohmann::json MapHandle::to_json() const {
    nlohmann::json pvj = nlohmann::json::array();
    for (const auto& p : sc->pv) {
        cplx w = image_of_sigma(p.sigma());
        pvj.push_back({{"z", {p.z.real(), p.z.imag()}},
                       {"beta", p.beta},
                       {"line", p.line},
                       {"s", p.s},
                       {"image", {w.real(), w.imag()}}});
    }
    cplx b = base_image();
    return {{"accuracy", accuracy},
            {"residual", residual},
            {"iterations", iterations},
            {"norm_a", norm_a},
            {"norm_b", norm_b},
            {"base_image", {b.real(), b.imag()}},
            {"boundary_table", pvj},
            {"tract", tract.to_json()}};
}

namespace {

MapHandle map_build_once(const ToyTract& tract, double accuracy, const MapHandle* warm) {
    if (!(accuracy >= 1e-10 && accuracy <= 1e-3)) throw DomainError("map_build: accuracy must lie in [1e-10, 1e-3]");
    Problem P = make_problem(tract);
    MapHandle h;
    h.tract = tract;
    h.accuracy = accuracy;
    const int nv = P.nvar();

    Eigen::VectorXd u;
    bool warm_ok = false;
    if (warm && warm->sc) {
        Problem W = make_problem(warm->tract);
        warm_ok = W.beta[0] == P.beta[0] && W.beta[1] == P.beta[1];
        if (warm_ok) {
            u.resize(nv);
            std::vector<double> s[2];
            for (const auto& p : warm->sc->pv) s[p.line].push_back(p.s);
            for (int L = 0; L < 2; ++L)
                for (int m = 1; m < P.n[L]; ++m) {
                    double gap = s[L][m] - s[L][m - 1];
                    double en = gate_face_eps(P, L, m - 1), eo = gate_face_eps(W, L, m - 1);
                    if (en > 0 && eo > 0) gap = std::max(gap + gate_gap(en) - gate_gap(eo), 0.1);
                    u(P.var(L, m)) = std::log(gap);
                }
        }
    }
    if (!warm_ok) u = initial_guess(P, tract);

    int evals = 0, iters = 0;
    double best = solve(P, u, accuracy, iters, evals);
    if (warm_ok && !(best <= accuracy)) {
        u = initial_guess(P, tract);
        best = solve(P, u, accuracy, iters, evals);
    }
    h.iterations = iters;
    h.residual_evals = evals;
    h.residual = best;
    if (!(best <= accuracy)) throw BuildError("map_build: side-length residual above the requested accuracy", best);

    auto sc = std::make_shared<SCMap>();
    std::vector<double> s[2];
    positions_from_u(P, u, s);
    for (int L = 0; L < 2; ++L)
        for (int m = 0; m < P.n[L]; ++m) sc->pv.push_back({P.z[L][m], P.beta[L][m], s[L][m], L});
    sc->boundary = tract.boundary_segments();
    sc->finalize();
    h.sc = sc;

    // normalization F(5) = 5
    cplx sg(tract.base_point.real() - tract.x_left, 0.0);
    cplx zc = sc->z_of_sigma(sg);
    cplx sb;
    if (sc->clear_path(zc, tract.base_point) && sc->track(sg, zc, tract.base_point))
        sb = sc->polish(sg, tract.base_point);
    else
        sb = sc->sigma_of_z(tract.base_point);
    h.sigma_base = sb;
    cplx sh = std::sinh(sb / 2.0);
    h.norm_a = tract.base_point.real() / sh.real();
    h.norm_b = -h.norm_a * sh.imag();
    return h;
}

}  // namespace

MapHandle map_build(const ToyTract& tract, double accuracy, const MapHandle* warm) {
    constexpr double kStart = 0.25;
    bool small = false;
    for (const auto& w : tract.wiggles) small = small || w.eps < kStart * kStart;
    try {
        // cold guesses for very small gates rarely converge, go straight to continuation
        if (warm || !small) return map_build_once(tract, accuracy, warm);
        throw BuildError("map_build: small gates", 1.0);
    } catch (const BuildError&) {
        std::vector<double> eps, start;
        double ratio = 1;
        for (const auto& w : tract.wiggles) {
            eps.push_back(w.eps);
            start.push_back(std::max(w.eps, kStart));
            ratio = std::min(ratio, w.eps / start.back());
        }
        if (ratio == 1) throw;
        // continuation in log eps from moderate gates, halving the smallest gate per step
        const int steps = static_cast<int>(std::ceil(-std::log2(ratio)));
        MapHandle prev = map_build_once(toy_with_eps(tract, start), accuracy, nullptr);
        for (int k = 1; k <= steps; ++k) {
            std::vector<double> e(eps.size());
            for (std::size_t i = 0; i < eps.size(); ++i)
                e[i] = start[i] * std::pow(eps[i] / start[i], static_cast<double>(k) / steps);
            if (k == steps) e = eps;
            prev = map_build_once(toy_with_eps(tract, e), accuracy, &prev);
        }
        return prev;
    }
}

cplx map_sigma(const MapHandle& h, cplx z) {
    if (!h.tract.contains(z)) throw DomainError("map_eval: point outside the tract");
    return h.sc->sigma_of_z(z);
}

MapValue map_eval(const MapHandle& h, cplx z) {
    MapValue v;
    v.w = h.image_of_sigma(map_sigma(h, z));
    v.truncation_warning = z.real() > h.tract.trusted_right();
    return v;
}

cplx map_inverse(const MapHandle& h, cplx w) {
    if (!(w.real() > 0)) throw DomainError("map_inverse: w must lie in the right half-plane");
    cplx z = h.sc->z_of_sigma(h.sigma_of_image(w));
    if (z.real() > h.tract.trusted_right()) throw TruncationError("map_inverse: preimage beyond the trusted region");
    return z;
}

std::string GeodesicTrace::to_csv() const {
    std::ostringstream os;
    os << "angle,re_z,im_z\n";
    for (std::size_t i = 0; i < polyline.size(); ++i)
        os << fmt17(angle[i]) << "," << fmt17(polyline[i].real()) << "," << fmt17(polyline[i].imag()) << "\n";
    return os.str();
}

GeodesicTrace geodesic_trace(const MapHandle& h, double rho, double step, int samples) {
    if (!(rho > 0) || !(step > 0) || samples < 3) throw DomainError("geodesic_trace: need rho > 0, step > 0");
    GeodesicTrace g;
    g.rho = rho;
    const double trusted = h.tract.trusted_right();
    auto at = [&](double th) {
        cplx w = std::polar(rho, th);
        if (std::fabs(th) == kPi / 2) w = {0.0, w.imag()};
        cplx z = h.sc->z_of_sigma(h.sigma_of_image(w));
        if (z.real() > trusted) throw TruncationError("geodesic_trace: trace leaves the trusted region");
        return z;
    };
    std::vector<double> th;
    std::vector<cplx> zs;
    for (int k = 0; k < samples; ++k) {
        double t = -kPi / 2 + kPi * k / (samples - 1);
        th.push_back(t);
        zs.push_back(at(t));
    }
    // refine where consecutive vertices are further apart than step
    for (int pass = 0; pass < 12; ++pass) {
        std::vector<double> th2;
        std::vector<cplx> z2;
        bool added = false;
        for (std::size_t i = 0; i < th.size(); ++i) {
            th2.push_back(th[i]);
            z2.push_back(zs[i]);
            if (i + 1 < th.size() && std::abs(zs[i + 1] - zs[i]) > step) {
                double m = 0.5 * (th[i] + th[i + 1]);
                th2.push_back(m);
                z2.push_back(at(m));
                added = true;
            }
        }
        th.swap(th2);
        zs.swap(z2);
        if (!added) break;
    }
    g.angle = th;
    g.polyline = zs;
    for (std::size_t i = 0; i < zs.size(); ++i)
        for (std::size_t j = i + 1; j < zs.size(); ++j) g.diameter = std::max(g.diameter, std::abs(zs[i] - zs[j]));
    g.start_on_boundary = h.tract.dist_to_boundary(zs.front()) <= step;
    g.end_on_boundary = h.tract.dist_to_boundary(zs.back()) <= step;
    std::size_t stride = std::max<std::size_t>(1, zs.size() / 20);
    for (std::size_t i = stride; i + 1 < zs.size(); i += stride) {
        if (!h.tract.contains(zs[i]) || h.tract.dist_to_boundary(zs[i]) < 1e-6) continue;
        double m = std::abs(map_eval(h, zs[i]).w);
        g.max_modulus_error = std::max(g.max_modulus_error, std::fabs(m - rho) / rho);
    }
    return g;
}

double hyp_dist(const MapHandle& h, cplx z1, cplx z2) {
    cplx w1 = map_eval(h, z1).w, w2 = map_eval(h, z2).w;
    return 2 * std::asinh(std::abs(w1 - w2) / (2 * std::sqrt(w1.real() * w2.real())));
}

namespace {

double density_at(const SCMap& sc, cplx sg) {
    double x = sg.real() / 2, y = sg.imag() / 2;
    double c = std::cos(y), q = c / std::sinh(x);
    return std::sqrt(1 + q * q) / (2 * std::abs(sc.dz(sg)) * c);
}

}  // namespace

double hyp_density(const MapHandle& h, cplx z) { return density_at(*h.sc, map_sigma(h, z)); }

LengthBounds hyp_length_bounds(const ToyTract& tract, const std::vector<cplx>& polyline, const MapHandle* h) {
    if (polyline.size() < 2) throw DomainError("hyp_length_bounds: polyline needs two points");
    auto segs = tract.boundary_segments();
    for (std::size_t i = 0; i < polyline.size(); ++i) {
        if (!tract.contains(polyline[i])) throw DegenerateDistance("polyline vertex on or outside the boundary");
        if (i + 1 < polyline.size())
            for (const auto& s : segs)
                if (segments_intersect({polyline[i], polyline[i + 1]}, s))
                    throw DegenerateDistance("polyline touches the boundary");
    }
    LengthBounds out;
    using boost::math::quadrature::gauss_kronrod;
    for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
        cplx a = polyline[i], b = polyline[i + 1];
        double len = std::abs(b - a);
        auto inv_d = [&](double t) { return 1.0 / tract.dist_to_boundary(a + (b - a) * t); };
        double I = gauss_kronrod<double, 15>::integrate(inv_d, 0.0, 1.0, 20, 1e-12) * len;
        out.lower += I / 2;
        out.upper += 2 * I;
    }
    if (h) {
        const SCMap& sc = *h->sc;
        static const detail::Rule gl = detail::gauss_jacobi(8, 0, 0);
        cplx sg = map_sigma(*h, polyline[0]);
        cplx zc = polyline[0];
        double total = 0;
        for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
            cplx a = polyline[i], b = polyline[i + 1];
            double len = std::abs(b - a), t = 0;
            while (t < len) {
                cplx p = a + (b - a) * (t / len);
                double pl = std::min({0.25, 0.25 * tract.dist_to_boundary(p), len - t});
                for (int k = 0; k < 8; ++k) {
                    double tk = t + pl * (1 + gl.x[k]) / 2;
                    cplx zk = a + (b - a) * (tk / len);
                    if (!sc.track(sg, zc, zk)) throw ConvergenceError("pullback: lost track of the preimage");
                    total += gl.w[k] * pl / 2 * density_at(sc, sg);
                }
                t += pl;
            }
        }
        out.pullback = total;
    }
    return out;
}

}  // namespace tractforge
