#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "tractforge/conformal.hpp"
#include "tractforge/errors.hpp"
#include "tractforge/report.hpp"

namespace tractforge {

struct GateVector {
    std::vector<double> eps;
    nlohmann::json to_json() const;
};

struct DeltaVector {
    std::vector<double> delta;
    double residual = 0;  // max |delta_j|
    nlohmann::json to_json() const;
};

struct Bracket {
    double a = 0, b = 1;
    double mid() const;  // geometric midpoint
};

struct NonConvergence : Error {
    NonConvergence(const std::string& what, GateVector best_gates, std::vector<double> residuals)
        : Error(what), best(std::move(best_gates)), history(std::move(residuals)) {}
    GateVector best;
    std::vector<double> history;
};

// delta of the preimage of the positive real point target_modulus, classified against wiggle j
double delta_j(const MapHandle& h, const ToyTract& tract, int j, double target_modulus);

// map builds over gate vectors of a fixed template, warm-started from the previous build
class GateEvaluator {
  public:
    GateEvaluator(ToyTract tmpl, std::vector<double> targets, double accuracy = 1e-10);

    const MapHandle& build(const std::vector<double>& eps);
    double delta(const std::vector<double>& eps, int j);
    DeltaVector deltas(const std::vector<double>& eps);
    // same, from a cold build that ignores all cached state
    DeltaVector deltas_fresh(const std::vector<double>& eps);

    int builds() const { return builds_; }
    int size() const { return static_cast<int>(tmpl_.wiggles.size()); }
    const ToyTract& templ() const { return tmpl_; }
    const std::vector<double>& targets() const { return targets_; }

  private:
    ToyTract tmpl_;
    std::vector<double> targets_;
    double accuracy_;
    std::vector<double> last_eps_;
    MapHandle last_;
    bool have_last_ = false;
    int builds_ = 0;
};

// interval [a, b] of eps_j with delta_j(a) = -1 and delta_j(b) = +1, others fixed at eps
Bracket gate_bracket(GateEvaluator& ev, const std::vector<double>& eps, int j);
Bracket gate_bracket(const ToyTract& tmpl, int j, double target_modulus);

// face conditions of the gate cube: eps_j pinned to a_j gives delta_j = -1, pinned to b_j gives +1,
// with the other gates at mid-bracket and at random perturbations of it
CertReport endpoint_sign_check(GateEvaluator& ev, const std::vector<Bracket>& brackets, int perturbations = 3,
                               std::uint64_t seed = 1);

struct ShootResult {
    GateVector gates;
    DeltaVector delta;  // from a fresh build
    std::vector<Bracket> brackets;
    std::vector<double> history;  // residual per round
    int builds = 0;
    int solve_builds = 0;  // builds after the brackets and face checks
    CertReport faces;
    nlohmann::json transcript;
};

ShootResult shoot_solve(const ToyTract& tmpl, const std::vector<double>& targets, double tol = 1e-3,
                        int max_rounds = 25);

// targets whose preimages sit at the band centers for the given gate vector
std::vector<double> forward_targets(const ToyTract& tmpl, const std::vector<double>& eps);

}  // namespace tractforge
