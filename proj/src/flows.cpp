#include "flowfield/flows.hpp"

#include <algorithm>
#include <cmath>

namespace flowfield {

namespace {

constexpr double PI = 3.14159265358979323846;

// Effective augmentation dimension: Pfgm is the d = 1 member of the family.
double aug_dim_of(const ConditionalFlowSpec& spec) {
    return spec.kind == FlowKind::Pfgm ? 1.0 : static_cast<double>(spec.aug_dim);
}

void require_pair_dims(const ConditionalFlowSpec& spec, const EndpointPair& pair) {
    require_dim(pair.x0, static_cast<std::size_t>(spec.dim), "flow pair x0");
    if (is_two_sided(spec.kind)) {
        require_dim(pair.target("flow pair"), static_cast<std::size_t>(spec.dim), "flow pair xT");
    }
}

double gaussian_log_density(const Point& x, const Point& mean, double sigma) {
    const double d = static_cast<double>(x.size());
    const double r2 = norm2(sub(x, mean));
    return -0.5 * d * std::log(2.0 * PI) - d * std::log(sigma) - r2 / (2.0 * sigma * sigma);
}

} // namespace

const char* to_string(FlowKind k) {
    switch (k) {
        case FlowKind::TwoSidedInterpolant: return "two-sided-interpolant";
        case FlowKind::OneSidedInterpolant: return "one-sided-interpolant";
        case FlowKind::LinearFlowMatching: return "linear-flow-matching";
        case FlowKind::VeDiffusion: return "ve-diffusion";
        case FlowKind::Pfgm: return "pfgm";
        case FlowKind::PfgmPlusPlus: return "pfgm-plus-plus";
        case FlowKind::IfmCanonical: return "ifm-canonical";
    }
    return "unknown";
}

const char* flow_kind_names() {
    return "two-sided-interpolant, one-sided-interpolant, linear-flow-matching, "
           "ve-diffusion, pfgm, pfgm-plus-plus, ifm-canonical";
}

FlowKind flow_kind_from_string(const std::string& name) {
    // Canonical names first, then common shorthands.
    if (name == "two-sided-interpolant" || name == "two-sided-linear") {
        return FlowKind::TwoSidedInterpolant;
    }
    if (name == "one-sided-interpolant") return FlowKind::OneSidedInterpolant;
    if (name == "linear-flow-matching" || name == "linear-fm") return FlowKind::LinearFlowMatching;
    if (name == "ve-diffusion") return FlowKind::VeDiffusion;
    if (name == "pfgm") return FlowKind::Pfgm;
    if (name == "pfgm-plus-plus") return FlowKind::PfgmPlusPlus;
    if (name == "ifm-canonical") return FlowKind::IfmCanonical;
    throw config_error("unknown flow kind '" + name + "'; valid kinds: " + flow_kind_names());
}

bool is_two_sided(FlowKind k) {
    return k == FlowKind::TwoSidedInterpolant || k == FlowKind::IfmCanonical;
}

bool is_gaussian_path(FlowKind k) {
    return k != FlowKind::Pfgm && k != FlowKind::PfgmPlusPlus;
}

void ConditionalFlowSpec::validate() const {
    if (dim < 1) throw config_error("flow spec: dim must be >= 1");
    if (!(horizon > 0.0)) throw config_error("flow spec: horizon must be positive");
    if (kind == FlowKind::TwoSidedInterpolant && !(scale > 0.0)) {
        throw config_error("flow spec: two-sided noise scale must be positive");
    }
    if (kind == FlowKind::PfgmPlusPlus && aug_dim < 1) {
        throw config_error("flow spec: augmentation dim must be >= 1");
    }
    if (endpoint_clamp < 0.0 || endpoint_clamp >= 0.5) {
        throw config_error("flow spec: endpoint clamp fraction must lie in [0, 0.5)");
    }
}

double clamp_time(const ConditionalFlowSpec& spec, double t) {
    const double eps = spec.endpoint_clamp * spec.horizon;
    if (eps > 0.0) return std::clamp(t, eps, spec.horizon - eps);
    return t;
}

Point interpolant_mean(const ConditionalFlowSpec& spec, const EndpointPair& pair, double t) {
    spec.validate();
    require_pair_dims(spec, pair);
    const double tau = t / spec.horizon;
    switch (spec.kind) {
        case FlowKind::TwoSidedInterpolant:
        case FlowKind::IfmCanonical: {
            Point m = scale(1.0 - tau, pair.x0);
            axpy(tau, pair.target("interpolant_mean"), m);
            return m;
        }
        case FlowKind::OneSidedInterpolant:
        case FlowKind::LinearFlowMatching:
            return scale(1.0 - tau, pair.x0);
        case FlowKind::VeDiffusion:
            return spec.ve_mean_x0 ? pair.x0 : scale(1.0 - tau, pair.x0);
        case FlowKind::Pfgm:
        case FlowKind::PfgmPlusPlus:
            return pair.x0;
    }
    throw config_error("interpolant_mean: unhandled kind");
}

Point interpolant_mean_rate(const ConditionalFlowSpec& spec, const EndpointPair& pair, double t) {
    spec.validate();
    require_pair_dims(spec, pair);
    (void)t; // the means are linear (or constant) in t
    switch (spec.kind) {
        case FlowKind::TwoSidedInterpolant:
        case FlowKind::IfmCanonical: {
            Point r = sub(pair.target("interpolant_mean_rate"), pair.x0);
            return scale(1.0 / spec.horizon, r);
        }
        case FlowKind::OneSidedInterpolant:
        case FlowKind::LinearFlowMatching:
            return scale(-1.0 / spec.horizon, pair.x0);
        case FlowKind::VeDiffusion:
            return spec.ve_mean_x0 ? zeros(pair.x0.size())
                                   : scale(-1.0 / spec.horizon, pair.x0);
        case FlowKind::Pfgm:
        case FlowKind::PfgmPlusPlus:
            return zeros(pair.x0.size());
    }
    throw config_error("interpolant_mean_rate: unhandled kind");
}

double noise_schedule(const ConditionalFlowSpec& spec, double t) {
    spec.validate();
    const double tau = t / spec.horizon;
    switch (spec.kind) {
        case FlowKind::TwoSidedInterpolant:
            return spec.scale * std::sqrt(std::max(0.0, 2.0 * tau * (1.0 - tau)));
        case FlowKind::OneSidedInterpolant:
        case FlowKind::LinearFlowMatching:
        case FlowKind::VeDiffusion:
            return tau;
        case FlowKind::Pfgm:
        case FlowKind::PfgmPlusPlus:
            return t; // perturbation scale, sigma == t
        case FlowKind::IfmCanonical:
            return std::abs(std::sin(2.0 * PI * tau));
    }
    throw config_error("noise_schedule: unhandled kind");
}

double schedule_log_derivative(const ConditionalFlowSpec& spec, double t) {
    spec.validate();
    const double tc = clamp_time(spec, t);
    const double T = spec.horizon;
    const double tau = tc / T;
    switch (spec.kind) {
        case FlowKind::TwoSidedInterpolant:
            if (tau <= 0.0 || tau >= 1.0) {
                throw endpoint_singularity_error("schedule ratio diverges at the endpoints; clamp t");
            }
            return (1.0 - 2.0 * tau) / (2.0 * T * tau * (1.0 - tau));
        case FlowKind::OneSidedInterpolant:
        case FlowKind::LinearFlowMatching:
        case FlowKind::VeDiffusion: // consistent variant only; tabulated row bypasses this
            if (tc <= 0.0) {
                throw endpoint_singularity_error("schedule ratio diverges at t = 0; clamp t");
            }
            return 1.0 / tc;
        case FlowKind::Pfgm:
        case FlowKind::PfgmPlusPlus:
            if (tc <= 0.0) {
                throw endpoint_singularity_error("perturbation scale ratio diverges at t = 0");
            }
            return 1.0 / tc;
        case FlowKind::IfmCanonical: {
            const double s = std::sin(2.0 * PI * tau);
            if (s == 0.0) {
                if (tau <= 0.0 || tau >= 1.0) {
                    throw endpoint_singularity_error("schedule ratio diverges at the endpoints; clamp t");
                }
                throw degenerate_path_error("sin schedule vanishes at the mid-horizon pinch");
            }
            // d|s|/dt / |s| equals sdot/s regardless of the sign of s.
            return (2.0 * PI / T) * std::cos(2.0 * PI * tau) / s;
        }
    }
    throw config_error("schedule_log_derivative: unhandled kind");
}

Point cond_velocity(const ConditionalFlowSpec& spec, const EndpointPair& pair,
                    const Point& x, double t) {
    spec.validate();
    require_pair_dims(spec, pair);
    require_dim(x, static_cast<std::size_t>(spec.dim), "cond_velocity x");
    const double tc = clamp_time(spec, t);

    // Tabulated row: velocity x - x0, independent of t.
    if (spec.kind == FlowKind::VeDiffusion && !spec.ve_mean_x0) return sub(x, pair.x0);

    if (spec.kind == FlowKind::Pfgm || spec.kind == FlowKind::PfgmPlusPlus ||
        (spec.kind == FlowKind::VeDiffusion && spec.ve_mean_x0)) {
        if (tc <= 0.0) throw endpoint_singularity_error("velocity (x - x0)/t diverges at t = 0");
        return scale(1.0 / tc, sub(x, pair.x0));
    }

    // Gaussian interpolant kinds: Idot + (sigmadot/sigma) (x - I).
    const Point mean = interpolant_mean(spec, pair, tc);
    Point v = interpolant_mean_rate(spec, pair, tc);
    axpy(schedule_log_derivative(spec, tc), sub(x, mean), v);
    return v;
}

double cond_log_density(const ConditionalFlowSpec& spec, const EndpointPair& pair,
                        const Point& x, double t) {
    spec.validate();
    require_pair_dims(spec, pair);
    require_dim(x, static_cast<std::size_t>(spec.dim), "cond_log_density x");
    const double tc = clamp_time(spec, t);

    if (spec.kind == FlowKind::Pfgm || spec.kind == FlowKind::PfgmPlusPlus) {
        if (tc <= 0.0) throw degenerate_path_error("perturbation law is a point mass at t = 0");
        const double D = static_cast<double>(spec.dim);
        const double d = aug_dim_of(spec);
        const double r2 = norm2(sub(x, pair.x0));
        // Normalized heavy-tailed law: p = t^d * Gamma((D+d)/2) /
        //   (pi^{D/2} Gamma(d/2) * (r^2 + t^2)^{(D+d)/2}).
        return d * std::log(tc) - 0.5 * (D + d) * std::log(r2 + tc * tc) +
               std::lgamma(0.5 * (D + d)) - 0.5 * D * std::log(PI) - std::lgamma(0.5 * d);
    }

    const double sigma = noise_schedule(spec, tc);
    if (sigma <= 0.0) throw degenerate_path_error("path density degenerates where sigma = 0");
    return gaussian_log_density(x, interpolant_mean(spec, pair, tc), sigma);
}

Point sample_xt(const ConditionalFlowSpec& spec, const EndpointPair& pair, double t,
                RngStream& rng) {
    spec.validate();
    require_pair_dims(spec, pair);
    if (t < 0.0 || t > spec.horizon) {
        throw config_error("sample_xt: t outside [0, T]");
    }
    if (t == 0.0) return pair.x0;
    if (t == spec.horizon && is_two_sided(spec.kind)) return pair.target("sample_xt");

    if (spec.kind == FlowKind::Pfgm || spec.kind == FlowKind::PfgmPlusPlus) {
        const double D = static_cast<double>(spec.dim);
        const double d = aug_dim_of(spec);
        // Radius law r = t*sqrt(B/(1-B)), B ~ Beta(D/2, d/2), direction uniform:
        // together they reproduce the heavy-tailed density of cond_log_density.
        const double b = beta_sample(rng, 0.5 * D, 0.5 * d);
        const double r = t * std::sqrt(b / (1.0 - b));
        Point dir = gaussian_draw(rng, static_cast<std::size_t>(spec.dim));
        const double n = norm(dir);
        Point x = pair.x0;
        if (n > 0.0) axpy(r / n, dir, x);
        return x;
    }

    const double sigma = noise_schedule(spec, t);
    Point x = interpolant_mean(spec, pair, t);
    if (sigma > 0.0) axpy(sigma, gaussian_draw(rng, x.size()), x);
    return x;
}

double continuity_residual(const ConditionalFlowSpec& spec, const EndpointPair& pair,
                           const Point& x, double t, double h) {
    if (!(h > 0.0)) throw config_error("continuity_residual: h must be positive");
    const auto density = [&](const Point& xx, double tt) {
        return std::exp(cond_log_density(spec, pair, xx, tt));
    };
    double res = (density(x, t + h) - density(x, t - h)) / (2.0 * h);
    Point xp = x, xm = x;
    for (std::size_t k = 0; k < x.size(); ++k) {
        xp[k] = x[k] + h;
        xm[k] = x[k] - h;
        const double fp = cond_velocity(spec, pair, xp, t)[k] * density(xp, t);
        const double fm = cond_velocity(spec, pair, xm, t)[k] * density(xm, t);
        res += (fp - fm) / (2.0 * h);
        xp[k] = x[k];
        xm[k] = x[k];
    }
    return res;
}

double gamma_sample(RngStream& rng, double alpha) {
    if (!(alpha > 0.0)) throw config_error("gamma_sample: alpha must be positive");
    if (alpha < 1.0) {
        // Boost: G(alpha) = G(alpha + 1) * U^{1/alpha}.
        const double g = gamma_sample(rng, alpha + 1.0);
        return g * std::pow(rng.uniform(), 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double z;
        double v;
        do {
            z = rng.normal();
            v = 1.0 + c * z;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        if (u < 1.0 - 0.0331 * z * z * z * z) return d * v;
        if (std::log(u) < 0.5 * z * z + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double beta_sample(RngStream& rng, double a, double b) {
    const double g1 = gamma_sample(rng, a);
    const double g2 = gamma_sample(rng, b);
    return g1 / (g1 + g2);
}

} // namespace flowfield
