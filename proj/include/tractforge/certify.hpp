#pragma once

#include <cstdint>
#include <vector>

#include "tractforge/conformal.hpp"
#include "tractforge/gate_solver.hpp"
#include "tractforge/report.hpp"

namespace tractforge {

// re F^-1(target) = tau_j within tol * nu0_toy and |im F^-1(target)| < pi/3
CertLine gate_condition_check(const MapHandle& h, const ToyTract& tract, int j, double target, double tol);

// ordering chain for w_j = F^-1(target) and w_j - 2 pi i / 3; the comparisons against the next wiggle
// are reported in steps whose ids start with "report." and do not affect pass
CertLine chain_check(const MapHandle& h, const ToyTract& tract, int j, double target);

// log|F| against R_j + sum log(1/eps_k) on W_j and against re z + sum log(1/eps_k) on U_{j+1}
CertReport growth_report(const MapHandle& h, const ToyTract& tract, int samples, std::uint64_t seed = 1);

// d_a(5, z) >= d_b(5, z) - tol at every point, where a has the componentwise smaller gates
CertLine monotonicity_check(const MapHandle& a, const MapHandle& b, const std::vector<cplx>& points,
                            double tol = 1e-9);
CertLine monotonicity_check(const ToyTract& tract, const GateVector& eps_a, const GateVector& eps_b,
                            const std::vector<cplx>& points, double tol = 1e-9);

struct DoublingLevel {
    int wiggle = 0;     // arcs of this level connect C_wiggle and its lower companion
    double rho = 0;     // |F| at the band center of the middle channel
    double rho_dot = 0; // |F| at the band center of the lower channel
    double inner = 0;   // max |z| on the crossing segment at r_wiggle
    double outer = 0;   // min |z| on the two geodesics
    std::vector<std::vector<cplx>> arcs;
};

struct DoublingResult {
    std::vector<int> counts;
    std::vector<DoublingLevel> levels;
    nlohmann::json to_json() const;
};

// the default seed runs from the band center of wiggle `levels` west along the middle channel,
// down through the crossing segment and east along the lower channel
DoublingResult arc_doubling(const MapHandle& h, const ToyTract& tract, int levels, int samples = 2000);
DoublingResult arc_doubling(const MapHandle& h, const ToyTract& tract, int levels, const std::vector<cplx>& seed,
                            int samples = 2000);

}  // namespace tractforge
