#include "flowfield/fields.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace flowfield {

namespace {

constexpr double PI = 3.14159265358979323846;

// Coulomb term of a unit charge at extended location c, evaluated at p:
// (p - c) / ||p - c||^{D+1}, the divergence-free point-source law in D+1 dims.
FieldValue coulomb_term(const ExtendedPoint& p, const Point& cx, double ct, double guard,
                        double sign) {
    const std::size_t D = p.x.size();
    Vec r = sub(p.x, cx);
    const double rt = p.t - ct;
    const double rr = std::sqrt(norm2(r) + rt * rt);
    if (rr < guard) {
        throw singular_evaluation_error("field evaluated within the charge guard radius");
    }
    const double inv = sign / std::pow(rr, static_cast<double>(D) + 1.0);
    FieldValue v;
    v.spatial = scale(inv, r);
    v.temporal = inv * rt;
    return v;
}

void accumulate(FieldValue& acc, const FieldValue& term) {
    for (std::size_t i = 0; i < acc.spatial.size(); ++i) acc.spatial[i] += term.spatial[i];
    acc.temporal += term.temporal;
}

} // namespace

bool FieldValue::is_zero() const {
    if (temporal != 0.0) return false;
    for (double c : spatial) {
        if (c != 0.0) return false;
    }
    return true;
}

const char* to_string(FieldKind k) {
    switch (k) {
        case FieldKind::FromFlow: return "from-flow";
        case FieldKind::EfmCoulomb: return "efm-coulomb";
        case FieldKind::PfgmCoulomb: return "pfgm-coulomb";
        case FieldKind::IfmCanonicalRealization: return "ifm-canonical-realization";
    }
    return "unknown";
}

const char* field_kind_names() {
    return "from-flow, efm-coulomb, pfgm-coulomb, ifm-canonical-realization";
}

FieldKind field_kind_from_string(const std::string& name) {
    if (name == "from-flow") return FieldKind::FromFlow;
    if (name == "efm-coulomb") return FieldKind::EfmCoulomb;
    if (name == "pfgm-coulomb") return FieldKind::PfgmCoulomb;
    if (name == "ifm-canonical-realization") return FieldKind::IfmCanonicalRealization;
    throw config_error("unknown field kind '" + name + "'; valid kinds: " + field_kind_names());
}

void InteractionFieldSpec::validate() const {
    if (dim < 1) throw config_error("field spec: dim must be >= 1");
    if (!(horizon > 0.0)) throw config_error("field spec: horizon must be positive");
    if (kind == FieldKind::FromFlow) {
        if (!base_flow) throw config_error("field spec: from-flow requires a backing flow");
        base_flow->validate();
        if (base_flow->dim != dim || base_flow->horizon != horizon) {
            throw config_error("field spec: from-flow dim/horizon must match the backing flow");
        }
    }
    if (!(singularity_guard > 0.0)) throw config_error("field spec: guard radius must be positive");
    if (endpoint_clamp < 0.0 || endpoint_clamp >= 0.5) {
        throw config_error("field spec: endpoint clamp fraction must lie in [0, 0.5)");
    }
}

InteractionFieldSpec field_from_flow(const ConditionalFlowSpec& flow) {
    flow.validate();
    InteractionFieldSpec s;
    s.kind = FieldKind::FromFlow;
    s.dim = flow.dim;
    s.horizon = flow.horizon;
    s.base_flow = flow;
    s.endpoint_clamp = flow.endpoint_clamp;
    return s;
}

FieldValue eval_pair_field(const InteractionFieldSpec& spec, const EndpointPair& pair,
                           const ExtendedPoint& p) {
    spec.validate();
    require_dim(p.x, static_cast<std::size_t>(spec.dim), "eval_pair_field point");
    require_dim(pair.x0, static_cast<std::size_t>(spec.dim), "eval_pair_field pair x0");

    FieldValue zero{zeros(p.x.size()), 0.0};
    const double T = spec.horizon;

    switch (spec.kind) {
        case FieldKind::FromFlow: {
            if (p.t <= 0.0 || p.t >= T) return zero; // forward-only support convention
            const ConditionalFlowSpec& flow = *spec.base_flow;
            const double density = std::exp(cond_log_density(flow, pair, p.x, p.t));
            FieldValue v;
            v.spatial = scale(density, cond_velocity(flow, pair, p.x, p.t));
            v.temporal = density;
            return v;
        }
        case FieldKind::EfmCoulomb: {
            const Point& xT = pair.target("efm-coulomb pair");
            FieldValue v = coulomb_term(p, pair.x0, 0.0, spec.singularity_guard, +1.0);
            accumulate(v, coulomb_term(p, xT, T, spec.singularity_guard, -1.0));
            return v;
        }
        case FieldKind::PfgmCoulomb: {
            if (p.t < 0.0) return zero; // data-plane convention
            return coulomb_term(p, pair.x0, 0.0, spec.singularity_guard, +1.0);
        }
        case FieldKind::IfmCanonicalRealization: {
            if (p.t <= 0.0 || p.t >= T) return zero;
            const Point& xT = pair.target("canonical realization pair");
            const double tau = p.t / T;
            const double s = std::sin(2.0 * PI * tau);
            if (s == 0.0) return zero; // pinch plane
            // Transverse offset from the moving center I(t) and drift u.
            Point center = scale(1.0 - tau, pair.x0);
            axpy(tau, xT, center);
            const Vec perp = sub(p.x, center);
            const double r2 = norm2(perp);
            const double D = static_cast<double>(spec.dim);
            const double mag = std::exp(-r2 / (2.0 * s * s)) / std::pow(std::abs(s), D);
            // sdot/s; the transverse tilt e_perp*tan(alpha) equals perp * ratio.
            const double ratio = (2.0 * PI / T) * std::cos(2.0 * PI * tau) / s;
            Point ex = scale(1.0 / T, sub(xT, pair.x0)); // chord drift u
            axpy(ratio, perp, ex);
            FieldValue v;
            v.spatial = scale(mag, ex);
            v.temporal = mag;
            return v;
        }
    }
    throw config_error("eval_pair_field: unhandled kind");
}

ForwardOnlyReport is_forward_only(const InteractionFieldSpec& spec, const EndpointPair& pair,
                                  const std::vector<ExtendedPoint>& probes) {
    ForwardOnlyReport rep;
    for (const auto& p : probes) {
        const FieldValue v = eval_pair_field(spec, pair, p);
        if (v.is_zero()) continue;
        if (v.temporal <= 0.0) {
            rep.forward_only = false;
            rep.witness = p;
            rep.witness_temporal = v.temporal;
            return rep;
        }
    }
    return rep;
}

std::vector<ExtendedPoint> default_forward_probes(const InteractionFieldSpec& spec,
                                                  const EndpointPair& pair,
                                                  std::uint64_t seed, int n) {
    spec.validate();
    const double T = spec.horizon;
    const std::size_t D = static_cast<std::size_t>(spec.dim);
    const Point& top = pair.xT ? *pair.xT : pair.x0;
    std::vector<ExtendedPoint> probes;
    probes.reserve(static_cast<std::size_t>(n) + 2);

    // Deterministic anchors just outside each plate, where a forward-only
    // field must vanish: directly "above" the top endpoint and "below" the
    // bottom one, offset slightly off-axis to dodge charge guards.
    const double span = 1.0 + dist(pair.x0, top);
    ExtendedPoint above{top, T * 1.05};
    above.x[0] += 0.02 * span;
    probes.push_back(above);
    ExtendedPoint below{pair.x0, -0.05 * T};
    below.x[0] -= 0.02 * span;
    probes.push_back(below);

    RngStream rng(seed, 0x50524F42); // probe stream
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        double t;
        if (i % 4 == 0) {
            t = T * (1.01 + 0.3 * u); // above the top plate
        } else if (i % 4 == 1) {
            t = -T * (0.01 + 0.3 * u); // below the bottom plate
        } else {
            t = T * (0.05 + 0.9 * u); // inside the slab
        }
        const double tau = std::clamp(t / T, 0.0, 1.0);
        Point c = scale(1.0 - tau, pair.x0);
        axpy(tau, top, c);
        axpy(0.25 * span, gaussian_draw(rng, D), c);
        probes.push_back(ExtendedPoint{std::move(c), t});
    }
    return probes;
}

FieldBackedFlow::FieldBackedFlow(InteractionFieldSpec spec, double total_flux)
    : spec_(std::move(spec)), flux_(total_flux) {
    spec_.validate();
    if (!(flux_ > 0.0)) throw config_error("flow_from_field: total flux must be positive");
}

Point FieldBackedFlow::velocity(const EndpointPair& pair, const Point& x, double t) const {
    const double eps = spec_.endpoint_clamp * spec_.horizon;
    const double tc = eps > 0.0 ? std::clamp(t, eps, spec_.horizon - eps) : t;
    const FieldValue v = eval_pair_field(spec_, pair, ExtendedPoint{x, tc});
    if (v.temporal <= 0.0) {
        throw not_forward_only_error("velocity undefined where E_t <= 0", ExtendedPoint{x, tc},
                                     v.temporal);
    }
    return scale(1.0 / v.temporal, v.spatial);
}

double FieldBackedFlow::log_density(const EndpointPair& pair, const Point& x, double t) const {
    const double eps = spec_.endpoint_clamp * spec_.horizon;
    const double tc = eps > 0.0 ? std::clamp(t, eps, spec_.horizon - eps) : t;
    const FieldValue v = eval_pair_field(spec_, pair, ExtendedPoint{x, tc});
    if (v.temporal < 0.0) {
        throw not_forward_only_error("density undefined where E_t < 0", ExtendedPoint{x, tc},
                                     v.temporal);
    }
    return std::log(v.temporal) - std::log(flux_);
}

FieldBackedFlow flow_from_field(const InteractionFieldSpec& spec, double total_flux,
                                const EndpointPair& pair, std::vector<ExtendedPoint> probes) {
    spec.validate();
    if (probes.empty()) probes = default_forward_probes(spec, pair, 0xF0E1D2C3, 64);
    const ForwardOnlyReport rep = is_forward_only(spec, pair, probes);
    if (!rep.forward_only) {
        throw not_forward_only_error(
            "flow_from_field: field is not forward-only (witness has E_t <= 0)", *rep.witness,
            rep.witness_temporal);
    }
    return FieldBackedFlow(spec, total_flux);
}

FieldFn pair_field_fn(const InteractionFieldSpec& spec, const EndpointPair& pair) {
    return [spec, pair](const ExtendedPoint& p) { return eval_pair_field(spec, pair, p); };
}

FieldLineTrace trace_field_line(const FieldFn& field, const ExtendedPoint& start,
                                const FieldLineConfig& cfg, double horizon,
                                double endpoint_clamp) {
    if (cfg.n_steps < 1) throw config_error("trace_field_line: n_steps must be >= 1");
    const double eps = endpoint_clamp * horizon;
    const double t_lo = std::isnan(cfg.t_lo) ? eps : cfg.t_lo;
    const double t_hi = std::isnan(cfg.t_hi) ? horizon - eps : cfg.t_hi;

    FieldLineTrace trace;
    trace.param.reserve(static_cast<std::size_t>(cfg.n_steps) + 1);
    trace.points.reserve(static_cast<std::size_t>(cfg.n_steps) + 1);

    if (cfg.parameter == TraceParameter::Time) {
        const double t_end = cfg.forward ? t_hi : t_lo;
        const double h = (t_end - start.t) / cfg.n_steps;
        ExtendedPoint p = start;
        trace.param.push_back(p.t);
        trace.points.push_back(p);
        const auto slope = [&](const ExtendedPoint& q) {
            const FieldValue v = field(q);
            if (v.temporal <= 0.0) {
                throw not_forward_only_error("time-parameterized trace hit E_t <= 0", q,
                                             v.temporal);
            }
            return scale(1.0 / v.temporal, v.spatial);
        };
        for (int i = 0; i < cfg.n_steps; ++i) {
            const Point k1 = slope(p);
            ExtendedPoint mid{p.x, p.t + h};
            axpy(h, k1, mid.x);
            const Point k2 = slope(mid);
            // Heun: x += h/2 (k1 + k2)
            axpy(0.5 * h, k1, p.x);
            axpy(0.5 * h, k2, p.x);
            p.t = start.t + (i + 1) * h;
            trace.param.push_back(p.t);
            trace.points.push_back(p);
        }
        trace.reached_plate = true;
        return trace;
    }

    // Field-parameter trace: dX/dtau = E(X).
    const double h = cfg.forward ? cfg.step : -cfg.step;
    ExtendedPoint p = start;
    double tau = 0.0;
    trace.param.push_back(tau);
    trace.points.push_back(p);
    for (int i = 0; i < cfg.n_steps; ++i) {
        const FieldValue k1 = field(p);
        ExtendedPoint mid = p;
        axpy(h, k1.spatial, mid.x);
        mid.t += h * k1.temporal;
        const FieldValue k2 = field(mid);
        axpy(0.5 * h, k1.spatial, p.x);
        axpy(0.5 * h, k2.spatial, p.x);
        p.t += 0.5 * h * (k1.temporal + k2.temporal);
        tau += h;
        trace.param.push_back(tau);
        trace.points.push_back(p);
        if (p.t >= t_hi || p.t <= t_lo) {
            trace.reached_plate = true;
            return trace;
        }
    }
    throw truncated_trace_error("field-parameter trace exhausted its step budget before a plate",
                                std::move(trace));
}

void write_trace_csv(std::ostream& os, const FieldLineTrace& trace) {
    const std::size_t D = trace.points.empty() ? 0 : trace.points.front().x.size();
    os << "param,t";
    for (std::size_t k = 1; k <= D; ++k) os << ",x_" << k;
    os << "\n";
    char buf[32];
    for (std::size_t i = 0; i < trace.points.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", trace.param[i]);
        os << buf;
        std::snprintf(buf, sizeof buf, "%.17g", trace.points[i].t);
        os << ',' << buf;
        for (double c : trace.points[i].x) {
            std::snprintf(buf, sizeof buf, "%.17g", c);
            os << ',' << buf;
        }
        os << "\n";
    }
}

} // namespace flowfield
