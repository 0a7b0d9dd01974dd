#pragma once

#include <complex>
#include <memory>
#include <optional>
#include <vector>

#include <json.hpp>

#include "tractforge/errors.hpp"
#include "tractforge/tract.hpp"

namespace tractforge {

// closed-form map of the half-strip {re z > 4, |im z| < pi} onto the right half-plane with 5 -> 5
cplx halfstrip_oracle(cplx z);

// Schwarz-Christoffel data in half-strip coordinates.
// The canonical domain is S = {re s > 0, |im s| < pi}; s -> i sinh(s/2) maps it onto the upper half-plane
// and the tract boundary (minus its end at infinity) corresponds to the two lines im s = -pi (lower chains)
// and im s = +pi (upper chains) joined by the segment re s = 0.
struct Prevertex {
    cplx z;         // tract vertex
    double beta;    // interior angle / pi - 1
    double s;       // position on its line
    int line;       // 0: im s = -pi, 1: im s = +pi
    cplx sigma() const { return {s, line == 0 ? -M_PI : M_PI}; }
};

class SCMap;

struct MapHandle {
    ToyTract tract;
    double accuracy = 1e-10;
    double residual = 0;  // max relative side-length error
    int iterations = 0;
    int residual_evals = 0;
    std::shared_ptr<const SCMap> sc;
    cplx sigma_base;  // preimage of the base point
    double norm_a = 1, norm_b = 0;  // F = norm_a sinh(s/2) + i norm_b

    const std::vector<Prevertex>& prevertices() const;
    cplx image_of_sigma(cplx s) const;
    cplx sigma_of_image(cplx w) const;
    // witnesses: F(5), F at the infinity proxy, monotone boundary images
    cplx base_image() const;
    cplx proxy_image() const;
    bool boundary_monotone() const;
    nlohmann::json to_json() const;
};

MapHandle map_build(const ToyTract& tract, double accuracy = 1e-10, const MapHandle* warm = nullptr);

struct MapValue {
    cplx w;
    bool truncation_warning = false;
};

MapValue map_eval(const MapHandle& h, cplx z);
cplx map_inverse(const MapHandle& h, cplx w);
// preimage in the canonical coordinate (no truncation check)
cplx map_sigma(const MapHandle& h, cplx z);

struct GeodesicTrace {
    double rho = 0;
    std::vector<double> angle;
    std::vector<cplx> polyline;
    double diameter = 0;
    bool start_on_boundary = false;
    bool end_on_boundary = false;
    double max_modulus_error = 0;  // max | |F(vertex)| - rho | / rho
    std::string to_csv() const;
};

GeodesicTrace geodesic_trace(const MapHandle& h, double rho, double step = 0.05, int samples = 1000);

double hyp_dist(const MapHandle& h, cplx z1, cplx z2);
// hyperbolic density of the tract at z
double hyp_density(const MapHandle& h, cplx z);

struct LengthBounds {
    double lower = 0;
    double upper = 0;
    std::optional<double> pullback;
};

LengthBounds hyp_length_bounds(const ToyTract& tract, const std::vector<cplx>& polyline, const MapHandle* h = nullptr);

}  // namespace tractforge
