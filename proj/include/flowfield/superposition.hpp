#pragma once

// Superposition over couplings: Monte-Carlo global fields, the multi-sample
// weighted velocity estimator, its denoiser-style x0 target, and the
// complementary Gini score of the estimator weights.

#include <optional>

#include "flowfield/fields.hpp"

namespace flowfield {

struct WeightedVelocityEstimate {
    Point velocity;                  // sum_i w_i v_i
    std::vector<double> weights;     // normalized, sum to 1; slot 0 is the anchor when given
    std::vector<double> log_weights; // unnormalized conditional log-densities
    std::vector<EndpointPair> pairs; // slot order matches weights
};

// Shared reduction used by every velocity route: shift log-weights by their
// max, exponentiate, and take the weighted mean of the velocities in slot
// order. Centralizing this makes the conditional-flow route and the
// field-superposition route byte-identical, since both reduce through the
// exact same floating-point sequence.
Point weighted_mean_velocity(const std::vector<Point>& velocities,
                             const std::vector<double>& log_weights,
                             std::vector<double>* weights_out = nullptr);

// Linear-space Monte-Carlo superposition: the mean pair field over n coupling
// draws, or over every listed pair in order for an explicit coupling when
// n_samples <= 0 (rng may then be null). Inherits the per-pair total flux.
FieldValue global_field(const InteractionFieldSpec& spec, const Coupling& coupling,
                        const ExtendedPoint& p, int n_samples = 0, RngStream* rng = nullptr);

// FieldFn over the full explicit coupling, for diagnostics.
FieldFn global_field_fn(const InteractionFieldSpec& spec, const Coupling& coupling);

// N-sample posterior-weighted velocity at (x, t): weights are the conditional
// densities of the drawn pairs at (x, t), normalized. The anchor pair (the one
// that generated x, when known) occupies slot 0. Explicit couplings draw
// without replacement while the request fits in the dataset, with replacement
// otherwise. rng == nullptr enumerates an explicit coupling exactly in listed
// order (the exact global velocity); anchor must then be absent.
WeightedVelocityEstimate multisample_velocity(const ConditionalFlowSpec& flow,
                                              const Coupling& coupling, const Point& x, double t,
                                              int n_samples, RngStream* rng,
                                              const std::optional<EndpointPair>& anchor = {});

// Denoiser-style data estimate x0_hat = x_sigma - sigma * v_hat(x_sigma, t = sigma),
// for kinds whose velocity is (x - x0)/sigma with sigma == t.
Point multisample_x0_target(const ConditionalFlowSpec& flow, const Coupling& coupling,
                            const Point& x_sigma, double sigma, int n_samples, RngStream* rng,
                            const std::optional<EndpointPair>& anchor = {});

// Complementary Gini score of normalized weights: 1 - G*N/(N-1) with G the
// standard Gini coefficient. 0 for a degenerate (one-hot) weight vector, 1 for
// uniform weights. Requires N >= 2 and weights summing to 1.
double gini_paper(const std::vector<double>& weights);

} // namespace flowfield
