#pragma once

// Numerical certificates: finite-difference divergence, slice-flux and pillbox
// flux estimators, the energy distance with a permutation null, and the
// flow<->field duality report.

#include <string>

#include "json.hpp"

#include "flowfield/superposition.hpp"

namespace flowfield {

// Central-difference divergence of a field on R^{D+1} (D spatial axes plus
// time). O(h^2) in the step; exactly 0 on constant fields and D+1 on the
// identity field regardless of h.
double divergence_fd(const FieldFn& field, const ExtendedPoint& p, double h);

struct FluxEstimate {
    double value = 0.0;
    double std_error = 0.0;
    int n_samples = 0;
};

// Importance distribution over a time slice: sampler plus exact log-pdf.
struct ImportanceDistribution {
    std::function<Point(RngStream&)> sample;
    std::function<double(const Point&)> log_pdf;
};

// Monte-Carlo slice flux integral(E_t(x, t) dx) with draws from q:
// mean of E_t/q with its standard error.
FluxEstimate slice_flux(const FieldFn& field, const ImportanceDistribution& q, double t, int n,
                        RngStream& rng);

// The slice proposal matched to the field's tails: the mixture of conditional
// slice densities for from-flow kinds (the integrand is then exactly
// proportional to q), an isotropic Cauchy on the chord for the Coulomb kinds
// (matching their power-law tails; a Gaussian proposal would have infinite
// variance there), and a widened Gaussian tube for the canonical realization.
ImportanceDistribution slice_importance(const InteractionFieldSpec& spec,
                                        const Coupling& coupling, double t);

// Outward flux through a flat pillbox around the t = 0 plate: a ball of the
// given radius centered at `center`, extended over t in [-half_height,
// +half_height]. Bottom face, top face, and the lateral wall are integrated by
// Gauss-Legendre product rules. D <= 2 only.
double pillbox_flux(const FieldFn& field, const Point& center, double radius, double half_height,
                    int n_nodes);

// Squared energy distance, V-statistic form:
// 2 mean||a_i - b_j|| - mean||a_i - a_j|| - mean||b_i - b_j||.
double energy_distance(const std::vector<Point>& a, const std::vector<Point>& b);

// The given quantile of the permutation null of energy_distance (pool both
// samples, reshuffle the labels n_perm times).
double energy_permutation_quantile(const std::vector<Point>& a, const std::vector<Point>& b,
                                   int n_perm, double quantile, RngStream& rng);

// Constructive duality certificate for one flow kind over a coupling:
//  - velocity_roundtrip / density_roundtrip: flow -> field -> flow per pair;
//  - global_route: exact multisample velocity vs the linear-space global field
//    component ratio E_x/E_t;
//  - canonical_field (ifm-canonical only): the closed-form realization field,
//    divided back into a flow, against the backing interpolant.
// Probes are drawn on conditional paths at moderate times. Returns a JSON
// report with per-check max/mean relative errors, tolerances, and "pass".
nlohmann::json duality_report(const ConditionalFlowSpec& flow, const Coupling& coupling,
                              int n_probes, std::uint64_t seed);

} // namespace flowfield
