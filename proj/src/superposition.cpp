#include "flowfield/superposition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace flowfield {

Point weighted_mean_velocity(const std::vector<Point>& velocities,
                             const std::vector<double>& log_weights,
                             std::vector<double>* weights_out) {
    if (velocities.empty() || velocities.size() != log_weights.size()) {
        throw config_error("weighted_mean_velocity: need matching nonempty inputs");
    }
    double max_lw = -std::numeric_limits<double>::infinity();
    for (double lw : log_weights) max_lw = std::max(max_lw, lw);
    if (!std::isfinite(max_lw)) {
        throw degenerate_weights_error("all candidate log-weights are -inf at the query point");
    }
    Vec num = zeros(velocities.front().size());
    double den = 0.0;
    std::vector<double> shifted(log_weights.size());
    for (std::size_t i = 0; i < log_weights.size(); ++i) {
        const double s = std::exp(log_weights[i] - max_lw);
        shifted[i] = s;
        axpy(s, velocities[i], num);
        den += s;
    }
    if (weights_out) {
        weights_out->resize(shifted.size());
        for (std::size_t i = 0; i < shifted.size(); ++i) (*weights_out)[i] = shifted[i] / den;
    }
    return scale(1.0 / den, num);
}

FieldValue global_field(const InteractionFieldSpec& spec, const Coupling& coupling,
                        const ExtendedPoint& p, int n_samples, RngStream* rng) {
    spec.validate();
    FieldValue acc{zeros(p.x.size()), 0.0};
    std::size_t n = 0;
    if (n_samples <= 0) {
        if (coupling.mode() != CouplingMode::ExplicitPairs) {
            throw config_error("global_field: full enumeration needs an explicit coupling");
        }
        for (const auto& pair : coupling.pairs()) {
            const FieldValue v = eval_pair_field(spec, pair, p);
            axpy(1.0, v.spatial, acc.spatial);
            acc.temporal += v.temporal;
        }
        n = coupling.pairs().size();
    } else {
        if (!rng) throw config_error("global_field: sampled superposition needs an rng");
        for (int i = 0; i < n_samples; ++i) {
            const EndpointPair pair = sample_pair(coupling, *rng);
            const FieldValue v = eval_pair_field(spec, pair, p);
            axpy(1.0, v.spatial, acc.spatial);
            acc.temporal += v.temporal;
        }
        n = static_cast<std::size_t>(n_samples);
    }
    acc.spatial = scale(1.0 / static_cast<double>(n), acc.spatial);
    acc.temporal /= static_cast<double>(n);
    return acc;
}

FieldFn global_field_fn(const InteractionFieldSpec& spec, const Coupling& coupling) {
    return [spec, coupling](const ExtendedPoint& p) {
        return global_field(spec, coupling, p, 0, nullptr);
    };
}

namespace {

// Draw n pair indices without replacement by a partial Fisher-Yates pass.
std::vector<std::size_t> draw_indices_without_replacement(std::size_t size, std::size_t n,
                                                          RngStream& rng) {
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.below(size - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(n);
    return idx;
}

} // namespace

WeightedVelocityEstimate multisample_velocity(const ConditionalFlowSpec& flow,
                                              const Coupling& coupling, const Point& x, double t,
                                              int n_samples, RngStream* rng,
                                              const std::optional<EndpointPair>& anchor) {
    flow.validate();
    WeightedVelocityEstimate est;

    if (!rng) {
        if (anchor) throw config_error("multisample_velocity: exact enumeration takes no anchor");
        if (coupling.mode() != CouplingMode::ExplicitPairs) {
            throw config_error("multisample_velocity: exact enumeration needs an explicit coupling");
        }
        if (n_samples > 0 && static_cast<std::size_t>(n_samples) != coupling.size()) {
            throw config_error("multisample_velocity: exact enumeration uses the full coupling");
        }
        est.pairs = coupling.pairs();
    } else {
        if (n_samples < 1) throw config_error("multisample_velocity: n_samples must be >= 1");
        std::size_t draws = static_cast<std::size_t>(n_samples);
        if (anchor) {
            est.pairs.push_back(*anchor);
            draws -= 1;
        }
        if (coupling.mode() == CouplingMode::ExplicitPairs && draws <= coupling.size()) {
            for (std::size_t i : draw_indices_without_replacement(coupling.size(), draws, *rng)) {
                est.pairs.push_back(coupling.pair(i));
            }
        } else {
            for (std::size_t i = 0; i < draws; ++i) est.pairs.push_back(sample_pair(coupling, *rng));
        }
    }

    std::vector<Point> velocities;
    velocities.reserve(est.pairs.size());
    est.log_weights.reserve(est.pairs.size());
    for (const auto& pair : est.pairs) {
        velocities.push_back(cond_velocity(flow, pair, x, t));
        est.log_weights.push_back(cond_log_density(flow, pair, x, t));
    }
    est.velocity = weighted_mean_velocity(velocities, est.log_weights, &est.weights);
    return est;
}

Point multisample_x0_target(const ConditionalFlowSpec& flow, const Coupling& coupling,
                            const Point& x_sigma, double sigma, int n_samples, RngStream* rng,
                            const std::optional<EndpointPair>& anchor) {
    if (!(sigma > 0.0)) throw config_error("multisample_x0_target: sigma must be positive");
    const WeightedVelocityEstimate est =
        multisample_velocity(flow, coupling, x_sigma, sigma, n_samples, rng, anchor);
    Point x0 = x_sigma;
    axpy(-sigma, est.velocity, x0);
    return x0;
}

double gini_paper(const std::vector<double>& weights) {
    const std::size_t n = weights.size();
    if (n < 2) throw config_error("gini_paper: needs at least two weights");
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw config_error("gini_paper: weights must be nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-8) throw config_error("gini_paper: weights must sum to 1");
    std::vector<double> sorted = weights;
    std::sort(sorted.begin(), sorted.end());
    // Standard Gini via the sorted form sum_i (2i - n - 1) w_(i) / n; the
    // complementary score rescales by n/(n-1) so one-hot -> 0, uniform -> 1.
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += (2.0 * static_cast<double>(i + 1) - static_cast<double>(n) - 1.0) * sorted[i];
    }
    const double scaled = acc / static_cast<double>(n - 1); // G * n/(n-1), sum == 1
    return 1.0 - scaled;
}

} // namespace flowfield
