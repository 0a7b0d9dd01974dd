#include "tractforge/gate_solver.hpp"

#include <cmath>
#include <map>
#include <random>

namespace tractforge {

namespace {

constexpr double kFlat = 1e-12;  // delta is exactly +-1 outside the band

bool at_minus(double v) { return v <= -1 + kFlat; }
bool at_plus(double v) { return v >= 1 - kFlat; }

nlohmann::json brackets_json(const std::vector<Bracket>& br) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& b : br) j.push_back({b.a, b.b});
    return j;
}

}  // namespace

nlohmann::json GateVector::to_json() const { return {{"eps", eps}}; }

nlohmann::json DeltaVector::to_json() const { return {{"delta", delta}, {"residual", residual}}; }

double Bracket::mid() const { return std::sqrt(a * b); }

double delta_j(const MapHandle& h, const ToyTract& tract, int j, double target_modulus) {
    if (!(target_modulus > 0)) throw DomainError("delta_j: target modulus must be positive");
    cplx z = map_inverse(h, target_modulus);
    return region_classify(tract, z, j).delta;
}

GateEvaluator::GateEvaluator(ToyTract tmpl, std::vector<double> targets, double accuracy)
    : tmpl_(std::move(tmpl)), targets_(std::move(targets)), accuracy_(accuracy) {
    if (targets_.size() != tmpl_.wiggles.size()) throw DomainError("one target per gate is required");
}

const MapHandle& GateEvaluator::build(const std::vector<double>& eps) {
    if (have_last_ && eps == last_eps_) return last_;
    MapHandle h = map_build(toy_with_eps(tmpl_, eps), accuracy_, have_last_ ? &last_ : nullptr);
    ++builds_;
    last_ = std::move(h);
    last_eps_ = eps;
    have_last_ = true;
    return last_;
}

double GateEvaluator::delta(const std::vector<double>& eps, int j) {
    const MapHandle& h = build(eps);
    return delta_j(h, h.tract, j, targets_.at(j));
}

DeltaVector GateEvaluator::deltas(const std::vector<double>& eps) {
    DeltaVector d;
    for (int j = 0; j < size(); ++j) {
        d.delta.push_back(delta(eps, j));
        d.residual = std::max(d.residual, std::fabs(d.delta.back()));
    }
    return d;
}

DeltaVector GateEvaluator::deltas_fresh(const std::vector<double>& eps) {
    MapHandle h = map_build(toy_with_eps(tmpl_, eps), accuracy_);
    ++builds_;
    DeltaVector d;
    for (int j = 0; j < size(); ++j) {
        d.delta.push_back(delta_j(h, h.tract, j, targets_[j]));
        d.residual = std::max(d.residual, std::fabs(d.delta.back()));
    }
    return d;
}

Bracket gate_bracket(GateEvaluator& ev, const std::vector<double>& eps, int j) {
    std::vector<double> e = eps;
    auto d = [&](double x) {
        e[j] = x;
        return ev.delta(e, j);
    };
    const std::string who = "gate " + std::to_string(j);
    if (!at_plus(d(1.0))) throw NoBracket(who + ": delta stays below +1 at eps = 1");

    // geometric sweep downward
    double b_hi = 1.0, b_lo = 0, a_hi = 0, a_lo = 0;
    double prev = 1.0;
    for (int k = 1; k <= 40; ++k) {
        double x = std::ldexp(1.0, -k), v = d(x);
        if (at_plus(v)) b_hi = x;
        else if (b_lo == 0) b_lo = x;
        if (at_minus(v)) {
            a_lo = x;
            a_hi = prev;
            break;
        }
        prev = x;
    }
    if (a_lo == 0) throw NoBracket(who + ": delta never reaches -1 for eps down to 2^-40");
    if (b_lo == 0) b_lo = a_lo;

    // bisection in log eps on each side
    for (int k = 0; k < 6; ++k) {
        double m = std::sqrt(b_lo * b_hi);
        (at_plus(d(m)) ? b_hi : b_lo) = m;
    }
    for (int k = 0; k < 6; ++k) {
        double m = std::sqrt(a_lo * a_hi);
        (at_minus(d(m)) ? a_lo : a_hi) = m;
    }

    // back off from the flat-region edges so that small changes elsewhere keep the face signs
    Bracket br{a_lo / std::sqrt(2.0), std::min(1.0, b_hi * std::sqrt(2.0))};
    if (!at_minus(d(br.a))) br.a = a_lo;
    if (!at_plus(d(br.b))) br.b = b_hi;
    return br;
}

Bracket gate_bracket(const ToyTract& tmpl, int j, double target_modulus) {
    std::vector<double> targets(tmpl.wiggles.size(), target_modulus);
    GateEvaluator ev(tmpl, targets);
    std::vector<double> eps;
    for (const auto& w : tmpl.wiggles) eps.push_back(w.eps);
    return gate_bracket(ev, eps, j);
}

CertReport endpoint_sign_check(GateEvaluator& ev, const std::vector<Bracket>& brackets, int perturbations,
                               std::uint64_t seed) {
    const int n = ev.size();
    if (static_cast<int>(brackets.size()) != n) throw DomainError("endpoint_sign_check: one bracket per gate");
    CertReport rep;
    rep.title = "gate cube face conditions";
    std::vector<double> mid;
    for (const auto& b : brackets) mid.push_back(b.mid());
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int j = 0; j < n; ++j)
        for (int side = 0; side < 2; ++side) {
            const double want = side == 0 ? -1 : 1;
            auto face = [&](std::vector<double> e) {
                e[j] = side == 0 ? brackets[j].a : brackets[j].b;
                CertLine l;
                l.claim = "delta_j on the face eps_j = " + std::string(side == 0 ? "a_j" : "b_j");
                l.lhs = "delta_" + std::to_string(j);
                l.rhs = side == 0 ? "-1" : "+1";
                l.lhs_value = ev.delta(e, j);
                l.rhs_value = want;
                l.tolerance = kFlat;
                l.pass = side == 0 ? at_minus(l.lhs_value) : at_plus(l.lhs_value);
                nlohmann::json ej = e;
                l.note = "eps = " + ej.dump();
                return l;
            };
            CertLine line = face(mid);
            line.id = "face[" + std::to_string(j) + "]." + (side == 0 ? "a" : "b");
            for (int p = 0; p < perturbations && n > 1; ++p) {
                std::vector<double> e = mid;
                for (int k = 0; k < n; ++k)
                    if (k != j) e[k] = mid[k] * std::exp(0.1 * u(rng) * 0.5 * std::log(brackets[k].b / brackets[k].a));
                CertLine s = face(e);
                s.id = line.id + ".perturbed[" + std::to_string(p) + "]";
                line.pass = line.pass && s.pass;
                line.steps.push_back(s);
            }
            rep.lines.push_back(line);
        }
    return rep;
}

ShootResult shoot_solve(const ToyTract& tmpl, const std::vector<double>& targets, double tol, int max_rounds) {
    if (!(tol >= 1e-4)) throw DomainError("shoot_solve: tol must be at least 1e-4");
    if (max_rounds < 1) throw DomainError("shoot_solve: max_rounds must be positive");
    GateEvaluator ev(tmpl, targets);
    const int n = ev.size();
    ShootResult res;
    std::vector<double> eps;
    for (const auto& w : tmpl.wiggles) eps.push_back(w.eps);

    for (int j = 0; j < n; ++j) {
        res.brackets.push_back(gate_bracket(ev, eps, j));
        eps[j] = res.brackets[j].mid();
    }
    res.faces = endpoint_sign_check(ev, res.brackets);
    const int setup = ev.builds();
    res.transcript["brackets"] = brackets_json(res.brackets);
    res.transcript["faces"] = res.faces.to_json();
    res.transcript["rounds"] = nlohmann::json::array();

    GateVector best{eps};
    double best_res = 1e300;
    for (int round = 1; round <= max_rounds; ++round) {
        std::vector<int> rebracketed;
        for (int j = 0; j < n; ++j) {
            std::vector<double> e = eps;
            auto d = [&](double x) {
                e[j] = x;
                return ev.delta(e, j);
            };
            if (!(d(res.brackets[j].a) < 0 && d(res.brackets[j].b) > 0)) {
                res.brackets[j] = gate_bracket(ev, eps, j);
                rebracketed.push_back(j);
            }
            double lo = res.brackets[j].a, hi = res.brackets[j].b, m = std::sqrt(lo * hi);
            for (int it = 0; it < 80; ++it) {
                m = std::sqrt(lo * hi);
                double v = d(m);
                if (std::fabs(v) <= tol / 2) break;
                (v < 0 ? lo : hi) = m;
            }
            eps[j] = m;
        }
        DeltaVector dv = ev.deltas(eps);
        res.history.push_back(dv.residual);
        if (dv.residual < best_res) {
            best_res = dv.residual;
            best.eps = eps;
        }
        res.transcript["rounds"].push_back({{"round", round},
                                            {"residual", dv.residual},
                                            {"eps", eps},
                                            {"brackets", brackets_json(res.brackets)},
                                            {"rebracketed", rebracketed}});
        if (dv.residual <= tol) {
            DeltaVector fresh = ev.deltas_fresh(eps);
            if (fresh.residual <= tol) {
                if (!res.faces.pass()) throw NonConvergence("face conditions fail at the brackets", best, res.history);
                res.gates.eps = eps;
                res.delta = fresh;
                res.builds = ev.builds();
                res.solve_builds = ev.builds() - setup;
                res.transcript["builds"] = res.builds;
                res.transcript["final"] = fresh.to_json();
                return res;
            }
        }
        if (round >= 4 && res.history.back() >= 0.999 * res.history[round - 4])
            throw NonConvergence("shoot_solve: residual stagnates", best, res.history);
    }
    throw NonConvergence("shoot_solve: max_rounds exhausted", best, res.history);
}

std::vector<double> forward_targets(const ToyTract& tmpl, const std::vector<double>& eps) {
    MapHandle h = map_build(toy_with_eps(tmpl, eps));
    std::vector<double> out;
    for (int j = 0; j < static_cast<int>(tmpl.wiggles.size()); ++j) {
        const auto& w = h.tract.wiggles[j];
        double xc = w.R - 2 - 3 * h.tract.nu0_toy;
        auto f = [&](double l) { return signed_distance(h.tract, map_inverse(h, std::exp(l)), j); };
        double l0 = std::log(std::abs(map_eval(h, cplx(xc, 0)).w));
        double lo = l0 - 1, hi = l0 + 1;
        for (int k = 0; k < 60 && f(lo) >= 0; ++k) lo -= 1;
        for (int k = 0; k < 60 && f(hi) <= 0; ++k) hi += 1;
        for (int k = 0; k < 200 && hi - lo > 1e-14 * std::fabs(hi); ++k) {
            double m = 0.5 * (lo + hi);
            (f(m) < 0 ? lo : hi) = m;
        }
        out.push_back(std::exp(0.5 * (lo + hi)));
    }
    return out;
}

}  // namespace tractforge
