#pragma once

// Conditional flows: per-pair velocity fields v_t and path densities p_t that
// satisfy the continuity equation d/dt p + div(v p) = 0 and pin the endpoints.
// Gaussian-path kinds share one parameterization, x_t ~ N(I_t, sigma_t^2 I)
// with velocity Idot_t + (sigmadot_t/sigma_t)(x - I_t); the heavy-tailed
// perturbation kinds carry their own closed forms.

#include <string>

#include "flowfield/core.hpp"

namespace flowfield {

enum class FlowKind {
    TwoSidedInterpolant, // I_t linear between x0 and xT, sigma = s*sqrt(2*tau*(1-tau))
    OneSidedInterpolant, // I_t = x0*(1-tau), sigma = tau
    LinearFlowMatching,  // same path as OneSidedInterpolant; velocity (x-x0)/t
    VeDiffusion,         // as tabulated: velocity x-x0 with density N((1-tau)x0, tau^2 I);
                         // that pairing fails the continuity check (see continuity_residual
                         // tests); ve_mean_x0 switches to the consistent variant
                         // velocity (x-x0)/t, density N(x0, tau^2 I)
    Pfgm,                // heavy-tailed perturbation, augmentation dim d = 1
    PfgmPlusPlus,        // same family, d = spec.aug_dim
    IfmCanonical,        // linear two-sided mean with sigma = |sin(2*pi*tau)|
};

const char* to_string(FlowKind k);
FlowKind flow_kind_from_string(const std::string& name); // config_error lists valid names
const char* flow_kind_names(); // comma-separated, for CLI messages

// Kinds whose path law involves the target endpoint xT.
bool is_two_sided(FlowKind k);

// Kinds whose density is Gaussian around an interpolant mean.
bool is_gaussian_path(FlowKind k);

struct ConditionalFlowSpec {
    FlowKind kind = FlowKind::LinearFlowMatching;
    int dim = 1;        // data dimension D
    double horizon = 1.0; // time horizon T; tau = t/T
    double scale = 0.1;   // two-sided noise scale s
    int aug_dim = 1;      // augmentation dimension d (PfgmPlusPlus)
    bool ve_mean_x0 = false; // VeDiffusion: use the continuity-consistent variant
    // Schedule-based evaluations clamp t into [eps, T-eps], eps = endpoint_clamp*T.
    // 0 disables clamping; singular endpoints then raise endpoint_singularity_error.
    double endpoint_clamp = 1e-4;

    void validate() const; // throws config_error
};

// Clamped evaluation time used by velocity/density (sample_xt uses raw t).
double clamp_time(const ConditionalFlowSpec& spec, double t);

// Path mean: I_t for two-sided kinds, J_t for one-sided kinds, the perturbation
// center x0 for the heavy-tailed kinds. Equals x0 at t=0 (and xT at t=T when
// two-sided). Not clamped.
Point interpolant_mean(const ConditionalFlowSpec& spec, const EndpointPair& pair, double t);

// Time derivative of interpolant_mean. Not clamped (the means are linear in t).
Point interpolant_mean_rate(const ConditionalFlowSpec& spec, const EndpointPair& pair, double t);

// Noise scale sigma_t >= 0. Not clamped. For the heavy-tailed kinds this is the
// perturbation scale t (their density is not Gaussian).
double noise_schedule(const ConditionalFlowSpec& spec, double t);

// Signed logarithmic schedule derivative sigmadot_t/sigma_t at clamped time;
// raises endpoint_singularity_error / degenerate_path_error where sigma = 0.
double schedule_log_derivative(const ConditionalFlowSpec& spec, double t);

// Conditional velocity at (x, t). Clamps t.
Point cond_velocity(const ConditionalFlowSpec& spec, const EndpointPair& pair,
                    const Point& x, double t);

// Log of the conditional path density at (x, t). Clamps t; sigma = 0 after
// clamping raises degenerate_path_error.
double cond_log_density(const ConditionalFlowSpec& spec, const EndpointPair& pair,
                        const Point& x, double t);

// Draw x_t from the conditional path law. Exact endpoints are returned without
// consuming randomness: t = 0 yields x0, t = T yields xT for two-sided kinds.
Point sample_xt(const ConditionalFlowSpec& spec, const EndpointPair& pair, double t,
                RngStream& rng);

// Central-difference residual of d/dt p + div(v p) at (x, t) with step h.
// O(h^2) for consistent (velocity, density) pairs. Caller keeps t +- h and the
// spatial stencil inside the open slab away from the clamp band.
double continuity_residual(const ConditionalFlowSpec& spec, const EndpointPair& pair,
                           const Point& x, double t, double h);

// Gamma(alpha, 1) via Marsaglia-Tsang squeeze (boosted for alpha < 1) and
// Beta(a, b) as G1/(G1+G2); used by the heavy-tailed sampler and exposed for
// distribution tests.
double gamma_sample(RngStream& rng, double alpha);
double beta_sample(RngStream& rng, double a, double b);

} // namespace flowfield
