#include "flowfield/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "flowfield/quadrature.hpp"

namespace flowfield {

namespace {

constexpr double PI = 3.14159265358979323846;

double quantile_nearest(std::vector<double> xs, double q) {
    std::sort(xs.begin(), xs.end());
    const std::size_t idx = std::min(
        xs.size() - 1, static_cast<std::size_t>(q * static_cast<double>(xs.size())));
    return xs[idx];
}

} // namespace

double divergence_fd(const FieldFn& field, const ExtendedPoint& p, double h) {
    if (!(h > 0.0)) throw config_error("divergence_fd: h must be positive");
    double div = 0.0;
    ExtendedPoint q = p;
    for (std::size_t k = 0; k < p.x.size(); ++k) {
        q.x[k] = p.x[k] + h;
        const double fp = field(q).spatial[k];
        q.x[k] = p.x[k] - h;
        const double fm = field(q).spatial[k];
        q.x[k] = p.x[k];
        div += (fp - fm) / (2.0 * h);
    }
    q.t = p.t + h;
    const double gp = field(q).temporal;
    q.t = p.t - h;
    const double gm = field(q).temporal;
    div += (gp - gm) / (2.0 * h);
    return div;
}

FluxEstimate slice_flux(const FieldFn& field, const ImportanceDistribution& q, double t, int n,
                        RngStream& rng) {
    if (n < 2) throw config_error("slice_flux: need at least two draws");
    double sum = 0.0;
    double sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const Point x = q.sample(rng);
        const double et = field(ExtendedPoint{x, t}).temporal;
        const double w = et * std::exp(-q.log_pdf(x));
        sum += w;
        sum2 += w * w;
    }
    FluxEstimate est;
    est.n_samples = n;
    est.value = sum / n;
    const double var = std::max(0.0, sum2 / n - est.value * est.value);
    est.std_error = std::sqrt(var / n);
    return est;
}

ImportanceDistribution slice_importance(const InteractionFieldSpec& spec,
                                        const Coupling& coupling, double t) {
    spec.validate();
    if (coupling.mode() != CouplingMode::ExplicitPairs) {
        throw config_error("slice_importance: needs an explicit coupling");
    }
    const auto pairs = coupling.pairs();
    const std::size_t D = coupling.dim();
    const double T = spec.horizon;
    const double log_n = std::log(static_cast<double>(pairs.size()));

    switch (spec.kind) {
        case FieldKind::FromFlow: {
            // Equal-weight mixture of the conditional slice densities; for the
            // global from-flow field the integrand is exactly q, so the
            // estimator has zero variance up to rounding.
            const ConditionalFlowSpec flow = *spec.base_flow;
            ImportanceDistribution q;
            q.sample = [flow, pairs, t](RngStream& rng) {
                const EndpointPair& pair = pairs[rng.below(pairs.size())];
                return sample_xt(flow, pair, t, rng);
            };
            q.log_pdf = [flow, pairs, t, log_n](const Point& x) {
                double max_lp = -std::numeric_limits<double>::infinity();
                std::vector<double> lps(pairs.size());
                for (std::size_t i = 0; i < pairs.size(); ++i) {
                    lps[i] = cond_log_density(flow, pairs[i], x, t);
                    max_lp = std::max(max_lp, lps[i]);
                }
                double s = 0.0;
                for (double lp : lps) s += std::exp(lp - max_lp);
                return max_lp + std::log(s) - log_n;
            };
            return q;
        }
        case FieldKind::PfgmCoulomb:
        case FieldKind::EfmCoulomb: {
            // Isotropic Cauchy mixture on the chord: its r^{-(D+1)} tail
            // matches the Coulomb slice decay, keeping the weight variance
            // finite (a Gaussian proposal would not).
            const double gamma = spec.kind == FieldKind::PfgmCoulomb ? std::max(t, 0.05 * T)
                                                                     : 0.5 * T;
            std::vector<Point> centers;
            centers.reserve(pairs.size());
            const double tau = std::clamp(t / T, 0.0, 1.0);
            for (const auto& pair : pairs) {
                if (spec.kind == FieldKind::PfgmCoulomb || !pair.xT) {
                    centers.push_back(pair.x0);
                } else {
                    Point c = scale(1.0 - tau, pair.x0);
                    axpy(tau, *pair.xT, c);
                    centers.push_back(std::move(c));
                }
            }
            ImportanceDistribution q;
            q.sample = [centers, gamma, D](RngStream& rng) {
                Point x = centers[rng.below(centers.size())];
                const Point z = gaussian_draw(rng, D);
                const double w = std::abs(rng.normal()); // chi with one degree of freedom
                axpy(gamma / std::max(w, 1e-300), z, x);
                return x;
            };
            const double dd = static_cast<double>(D);
            q.log_pdf = [centers, gamma, dd, log_n](const Point& x) {
                double max_lp = -std::numeric_limits<double>::infinity();
                std::vector<double> lps(centers.size());
                for (std::size_t i = 0; i < centers.size(); ++i) {
                    const double r2 = norm2(sub(x, centers[i]));
                    lps[i] = std::lgamma(0.5 * (dd + 1.0)) - 0.5 * (dd + 1.0) * std::log(PI) -
                             dd * std::log(gamma) -
                             0.5 * (dd + 1.0) * std::log1p(r2 / (gamma * gamma));
                    max_lp = std::max(max_lp, lps[i]);
                }
                double s = 0.0;
                for (double lp : lps) s += std::exp(lp - max_lp);
                return max_lp + std::log(s) - log_n;
            };
            return q;
        }
        case FieldKind::IfmCanonicalRealization: {
            // Widened Gaussian tube around the chord.
            const double tau = t / T;
            const double sigma = std::abs(std::sin(2.0 * PI * tau));
            std::vector<Point> centers;
            double span = 1.0;
            for (const auto& pair : pairs) {
                const Point& xT = pair.target("slice_importance canonical pair");
                Point c = scale(1.0 - tau, pair.x0);
                axpy(tau, xT, c);
                span = std::max(span, 1.0 + dist(pair.x0, xT));
                centers.push_back(std::move(c));
            }
            const double width = 2.0 * sigma + 0.05 * span;
            ImportanceDistribution q;
            q.sample = [centers, width, D](RngStream& rng) {
                Point x = centers[rng.below(centers.size())];
                axpy(width, gaussian_draw(rng, D), x);
                return x;
            };
            const double dd = static_cast<double>(D);
            q.log_pdf = [centers, width, dd, log_n](const Point& x) {
                double max_lp = -std::numeric_limits<double>::infinity();
                std::vector<double> lps(centers.size());
                for (std::size_t i = 0; i < centers.size(); ++i) {
                    const double r2 = norm2(sub(x, centers[i]));
                    lps[i] = -0.5 * dd * std::log(2.0 * PI) - dd * std::log(width) -
                             r2 / (2.0 * width * width);
                    max_lp = std::max(max_lp, lps[i]);
                }
                double s = 0.0;
                for (double lp : lps) s += std::exp(lp - max_lp);
                return max_lp + std::log(s) - log_n;
            };
            return q;
        }
    }
    throw config_error("slice_importance: unhandled kind");
}

double pillbox_flux(const FieldFn& field, const Point& center, double radius, double half_height,
                    int n_nodes) {
    if (!(radius > 0.0) || !(half_height > 0.0)) {
        throw config_error("pillbox_flux: radius and half_height must be positive");
    }
    if (n_nodes < 4) throw config_error("pillbox_flux: need at least 4 nodes");
    const std::size_t D = center.size();
    const double eps = half_height;

    if (D == 1) {
        const double c = center[0];
        const double top = integrate_interval(
            [&](double x) { return field(ExtendedPoint{{x}, eps}).temporal; }, c - radius,
            c + radius, n_nodes);
        const double bottom = integrate_interval(
            [&](double x) { return -field(ExtendedPoint{{x}, -eps}).temporal; }, c - radius,
            c + radius, n_nodes);
        const double lateral = integrate_interval(
            [&](double t) {
                return field(ExtendedPoint{{c + radius}, t}).spatial[0] -
                       field(ExtendedPoint{{c - radius}, t}).spatial[0];
            },
            -eps, eps, n_nodes);
        return top + bottom + lateral;
    }
    if (D == 2) {
        const int n_theta = 4 * n_nodes;
        const double top = integrate_disk(
            [&](double x, double y) { return field(ExtendedPoint{{x, y}, eps}).temporal; },
            center[0], center[1], radius, n_nodes, n_theta);
        const double bottom = integrate_disk(
            [&](double x, double y) { return -field(ExtendedPoint{{x, y}, -eps}).temporal; },
            center[0], center[1], radius, n_nodes, n_theta);
        // Lateral wall: outward radial component integrated over angle and t.
        const double lateral = integrate_interval(
            [&](double t) {
                double ring = 0.0;
                for (int j = 0; j < n_theta; ++j) {
                    const double theta = 2.0 * PI * (j + 0.5) / n_theta;
                    const double cx = std::cos(theta);
                    const double cy = std::sin(theta);
                    const FieldValue v = field(
                        ExtendedPoint{{center[0] + radius * cx, center[1] + radius * cy}, t});
                    ring += v.spatial[0] * cx + v.spatial[1] * cy;
                }
                return ring * (2.0 * PI / n_theta) * radius;
            },
            -eps, eps, n_nodes);
        return top + bottom + lateral;
    }
    throw config_error("pillbox_flux: implemented for D <= 2 only");
}

double energy_distance(const std::vector<Point>& a, const std::vector<Point>& b) {
    if (a.empty() || b.empty()) throw config_error("energy_distance: empty sample");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    double ab = 0.0;
    for (const auto& x : a) {
        for (const auto& y : b) ab += dist(x, y);
    }
    double aa = 0.0;
    for (const auto& x : a) {
        for (const auto& y : a) aa += dist(x, y);
    }
    double bb = 0.0;
    for (const auto& x : b) {
        for (const auto& y : b) bb += dist(x, y);
    }
    return 2.0 * ab / (na * nb) - aa / (na * na) - bb / (nb * nb);
}

double energy_permutation_quantile(const std::vector<Point>& a, const std::vector<Point>& b,
                                   int n_perm, double quantile, RngStream& rng) {
    if (n_perm < 1) throw config_error("energy_permutation_quantile: n_perm must be >= 1");
    const std::size_t na = a.size();
    const std::size_t m = na + b.size();
    // Pool once and cache all pairwise distances; each permutation is then
    // pure index bookkeeping.
    std::vector<Point> pool = a;
    pool.insert(pool.end(), b.begin(), b.end());
    std::vector<double> dmat(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            const double d = dist(pool[i], pool[j]);
            dmat[i * m + j] = d;
            dmat[j * m + i] = d;
        }
    }
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<double> stats;
    stats.reserve(static_cast<std::size_t>(n_perm));
    const double fa = static_cast<double>(na);
    const double fb = static_cast<double>(m - na);
    for (int p = 0; p < n_perm; ++p) {
        for (std::size_t i = m - 1; i > 0; --i) {
            const std::size_t j = rng.below(i + 1);
            std::swap(idx[i], idx[j]);
        }
        double ab = 0.0, aa = 0.0, bb = 0.0;
        for (std::size_t i = 0; i < na; ++i) {
            const std::size_t ii = idx[i] * m;
            for (std::size_t j = 0; j < na; ++j) aa += dmat[ii + idx[j]];
            for (std::size_t j = na; j < m; ++j) ab += dmat[ii + idx[j]];
        }
        for (std::size_t i = na; i < m; ++i) {
            const std::size_t ii = idx[i] * m;
            for (std::size_t j = na; j < m; ++j) bb += dmat[ii + idx[j]];
        }
        stats.push_back(2.0 * ab / (fa * fb) - aa / (fa * fa) - bb / (fb * fb));
    }
    return quantile_nearest(std::move(stats), quantile);
}

namespace {

struct ErrorAccumulator {
    double max = 0.0;
    double sum = 0.0;
    int n = 0;
    void add(double e) {
        max = std::max(max, e);
        sum += e;
        ++n;
    }
    nlohmann::json report(double tolerance) const {
        return {{"max", max},
                {"mean", n ? sum / n : 0.0},
                {"tolerance", tolerance},
                {"pass", max < tolerance}};
    }
};

// Scaled error with a unit floor in the denominator, so near-zero references
// do not inflate rounding noise into fake failures.
double rel_err(const Point& got, const Point& want) {
    return dist(got, want) / (1.0 + norm(want));
}

} // namespace

nlohmann::json duality_report(const ConditionalFlowSpec& flow, const Coupling& coupling,
                              int n_probes, std::uint64_t seed) {
    flow.validate();
    if (n_probes < 1) throw config_error("duality_report: n_probes must be >= 1");
    const double T = flow.horizon;
    const double D = static_cast<double>(flow.dim);
    RngStream rng(seed, 0xD0A117);

    const InteractionFieldSpec field = field_from_flow(flow);
    const FieldBackedFlow roundtrip(field, 1.0);

    std::optional<FieldBackedFlow> canonical;
    if (flow.kind == FlowKind::IfmCanonical) {
        InteractionFieldSpec cf;
        cf.kind = FieldKind::IfmCanonicalRealization;
        cf.dim = flow.dim;
        cf.horizon = T;
        cf.endpoint_clamp = flow.endpoint_clamp;
        canonical.emplace(cf, std::pow(2.0 * PI, 0.5 * D));
    }

    ErrorAccumulator vel_rt, den_rt, global_rt, canon_vel, canon_den;
    const double tol_rt = 1e-10;
    const double tol_canon = 1e-6;

    for (int i = 0; i < n_probes; ++i) {
        const EndpointPair pair = sample_pair(coupling, rng);
        double tau;
        do {
            tau = 0.15 + 0.7 * rng.uniform();
            // keep clear of the pinch plane where the canonical density degenerates
        } while (flow.kind == FlowKind::IfmCanonical && std::abs(tau - 0.5) < 0.03);
        const double t = tau * T;
        const Point x = sample_xt(flow, pair, t, rng);

        const Point v = cond_velocity(flow, pair, x, t);
        const double p = std::exp(cond_log_density(flow, pair, x, t));

        vel_rt.add(rel_err(roundtrip.velocity(pair, x, t), v));
        const double p_rt = std::exp(roundtrip.log_density(pair, x, t));
        den_rt.add(std::abs(p_rt - p) / p);

        const Point v_exact = multisample_velocity(flow, coupling, x, t, 0, nullptr).velocity;
        const FieldValue g = global_field(field, coupling, ExtendedPoint{x, t});
        global_rt.add(rel_err(scale(1.0 / g.temporal, g.spatial), v_exact));

        if (canonical) {
            canon_vel.add(rel_err(canonical->velocity(pair, x, t), v));
            const double p_cf = std::exp(canonical->log_density(pair, x, t));
            canon_den.add(std::abs(p_cf - p) / p);
        }
    }

    nlohmann::json checks;
    checks["velocity_roundtrip"] = vel_rt.report(tol_rt);
    checks["density_roundtrip"] = den_rt.report(tol_rt);
    checks["global_route"] = global_rt.report(tol_rt);
    if (canonical) {
        checks["canonical_field_velocity"] = canon_vel.report(tol_canon);
        checks["canonical_field_density"] = canon_den.report(tol_canon);
    }
    bool pass = true;
    for (const auto& [name, c] : checks.items()) pass = pass && c["pass"].get<bool>();

    return nlohmann::json{{"flow_kind", to_string(flow.kind)},
                          {"dim", flow.dim},
                          {"horizon", T},
                          {"n_probes", n_probes},
                          {"seed", seed},
                          {"checks", checks},
                          {"pass", pass}};
}

} // namespace flowfield
