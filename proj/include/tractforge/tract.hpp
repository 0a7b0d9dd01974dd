#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tractforge/growth.hpp"
#include "tractforge/report.hpp"
#include "tractforge/tower.hpp"

namespace tractforge {

using cplx = std::complex<double>;

// ---- full-constant data -------------------------------------------------

struct WiggleRecord {
    int j = 0;
    TowerScalar r, R, tau, log_a, log_b;
    std::optional<double> eps;

    TowerScalar log_r, log_R;
    TowerScalar phi_R;    // phi(R_j)
    TowerScalar excess;   // Phi(R_j) log R_j = log(phi(R_j) / R_j)
    TowerScalar log_gap;  // log R_j - log r_j
    bool gap_exact = false;  // log_gap taken from the recurrence rather than by subtraction
};

struct TractDatum {
    GrowthProfile profile;
    TowerScalar r0;
    double C = 30.0;
    double nu0 = 60.0;
    std::vector<WiggleRecord> terms;
};

TractDatum datum_generate(const GrowthProfile& profile, const TowerScalar& r0, double C, double nu0, int N);
// rebuild the derived fields of a record from log_r / log_R (used for hand-built and loaded data)
WiggleRecord wiggle_from_logs(const GrowthProfile& profile, int j, const TowerScalar& log_r, const TowerScalar& log_R,
                              double C, double nu0);

struct ValidationReport {
    std::vector<CertLine> checks;  // ids carry the index, e.g. "rRspacing.R[3]"
    bool pass() const;
    std::vector<std::string> failures() const;
    bool check_pass(const std::string& id) const;
    nlohmann::json to_json() const;
};

ValidationReport datum_validate(const TractDatum& d);
CertLine range_bounds_certify(const TractDatum& d, int j);

nlohmann::json datum_to_json(const TractDatum& d);
TractDatum datum_from_json(const nlohmann::json& j);

// ---- desk-scale toys --------------------------------------------------------

struct ToyWiggle {
    double r = 0, R = 0, tau = 0, eps = 1;
};

struct ToyWiggleParams {
    double r = 0, R = 0, eps = 1;
};

struct Segment {
    cplx a, b;
};

struct ToyTract {
    std::vector<ToyWiggle> wiggles;
    double nu0_toy = 2.0;
    double x_left = 4.0;
    double half_height = 3.14159265358979323846;
    double x_close = 10.0;
    cplx base_point{5.0, 0.0};

    bool has_gate(int j) const { return wiggles[j].eps < 1.0; }
    // closed counterclockwise boundary walk of the truncated polygon (slits are walked on both sides)
    std::vector<cplx> vertices() const;
    // boundary of the untruncated tract as undirected segments split at junctions
    std::vector<Segment> boundary_segments() const;
    bool on_slit(cplx z, double tol = 1e-12) const;
    bool contains(cplx z) const;
    double dist_to_boundary(cplx z) const;
    // right end of the trusted region
    double trusted_right() const;
    nlohmann::json to_json() const;
};

ToyTract toy_tract_build(const std::vector<ToyWiggleParams>& params, double nu0_toy, double x_close);
ToyTract toy_from_json(const nlohmann::json& j);
ToyTract toy_with_eps(const ToyTract& t, const std::vector<double>& eps);

enum class Side { X, Y, Z };

struct RegionTag {
    int j = 0;
    Side side = Side::X;
    double delta = -1.0;
    bool w_plus = false;
    bool w_minus = false;
    bool gate = false;
    std::string label() const;
};

RegionTag region_classify(const ToyTract& t, cplx z, int j);
// signed distance with the band geometry only (no membership test)
double signed_distance(const ToyTract& t, cplx z, int j);

struct AlphaPath {
    std::vector<cplx> polyline;
    std::vector<Segment> alpha0;  // pieces with |re z - tau_k| <= 1 at height 2pi/3
    std::vector<Segment> alpha1;
    std::vector<double> gate_integrals;
};

AlphaPath alpha_path(const ToyTract& t);
double gate_integral_closed_form(double eps);
// adaptive quadrature of the integral of 1/max(|t - tau|, pi eps / 3) over [tau - 1, tau + 1]
double gate_integral_quadrature(double eps);
double polyline_length(const std::vector<cplx>& pts);
double segments_length(const std::vector<Segment>& segs);

double point_segment_distance(cplx z, const Segment& s);
bool segments_intersect(const Segment& s, const Segment& t, cplx* where = nullptr);

}  // namespace tractforge
