// flowfield: conditional-flow / interaction-field toolkit.
//
// Subcommands: verify-duality, flux, generate, gini, train. Every run is a
// pure function of its flags (all randomness flows from --seed), so repeated
// invocations produce byte-identical outputs. Machine-readable results (CSV
// or JSON) go to --out when given, stdout otherwise; commentary and warnings
// go to stderr. Exit codes: 0 success, 1 configuration or usage error, 2 a
// numerical acceptance check failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "flowfield/datasets.hpp"
#include "flowfield/diagnostics.hpp"
#include "flowfield/dynamics.hpp"
#include "flowfield/trainer.hpp"

namespace ff = flowfield;

namespace {

constexpr const char* kVersion = "flowfield 1.0.0";

// ---------------------------------------------------------------------------
// Shared option bundles
// ---------------------------------------------------------------------------

struct FlowOptions {
    std::string kind = "linear-flow-matching";
    int dim = 1;
    double horizon = 1.0;
    double scale = 0.1;
    int aug_dim = 1;
    bool ve_mean_x0 = false;
    double clamp = 1e-4;

    ff::ConditionalFlowSpec build() const {
        ff::ConditionalFlowSpec spec;
        spec.kind = ff::flow_kind_from_string(kind);
        spec.dim = dim;
        spec.horizon = horizon;
        spec.scale = scale;
        spec.aug_dim = aug_dim;
        spec.ve_mean_x0 = ve_mean_x0;
        spec.endpoint_clamp = clamp;
        spec.validate();
        return spec;
    }
};

void add_flow_options(CLI::App* cmd, FlowOptions& opt) {
    cmd->add_option("--flow-kind", opt.kind,
                    std::string("conditional flow kind (") + ff::flow_kind_names() + ")");
    cmd->add_option("--dim", opt.dim, "data dimension D");
    cmd->add_option("--horizon", opt.horizon, "time horizon T");
    cmd->add_option("--scale", opt.scale, "two-sided noise scale");
    cmd->add_option("--aug-dim", opt.aug_dim, "augmentation dimension d (pfgm-plus-plus)");
    cmd->add_flag("--ve-mean-x0", opt.ve_mean_x0,
                  "use the continuity-consistent ve-diffusion variant");
    cmd->add_option("--clamp", opt.clamp, "endpoint clamp fraction of T");
}

// Endpoint convention: the target (data) distribution pi_0 sits on the t = 0
// plate and feeds x0; the source (prior) distribution pi_T sits on the t = T
// plate and feeds xT (two-sided kinds only). Generation transports source to
// target, i.e. runs toward t = 0.
struct CouplingOptions {
    std::string source = "gaussian-mixture";
    std::string target = "gaussian-mixture";
    int size = 64;
    std::string mode = "explicit-pairs";

    std::vector<ff::Point> draw_side(const std::string& kind_name, int dim, std::uint64_t seed,
                                     std::uint64_t stream, int n) const {
        const ff::DatasetSpec spec =
            ff::dataset_preset(ff::dataset_kind_from_string(kind_name), dim);
        ff::RngStream rng(seed, stream);
        return ff::make_dataset(spec, n, rng);
    }

    ff::Coupling build(const ff::ConditionalFlowSpec& flow, std::uint64_t seed) const {
        std::vector<ff::Point> x0_side = draw_side(target, flow.dim, seed, 0xDA7A0001, size);
        std::vector<ff::Point> xT_side;
        if (ff::is_two_sided(flow.kind)) {
            xT_side = draw_side(source, flow.dim, seed, 0xDA7A0002, size);
        }

        if (mode == "independent-product") {
            return ff::Coupling::independent_product(std::move(x0_side), std::move(xT_side));
        }
        if (mode != "explicit-pairs") {
            throw ff::config_error("unknown coupling mode '" + mode +
                                   "'; valid: explicit-pairs, independent-product");
        }
        std::vector<ff::EndpointPair> pairs;
        pairs.reserve(x0_side.size());
        for (std::size_t i = 0; i < x0_side.size(); ++i) {
            ff::EndpointPair p;
            p.x0 = x0_side[i];
            if (!xT_side.empty()) p.xT = xT_side[i];
            pairs.push_back(std::move(p));
        }
        return ff::Coupling::explicit_pairs(std::move(pairs));
    }
};

void add_coupling_options(CLI::App* cmd, CouplingOptions& opt) {
    cmd->add_option("--target", opt.target,
                    std::string("target (data) dataset on the t = 0 plate (") +
                        ff::dataset_kind_names() + ")");
    cmd->add_option("--source", opt.source,
                    "source (prior) dataset on the t = T plate (two-sided kinds)");
    cmd->add_option("--coupling-size", opt.size, "number of endpoint draws per side");
    cmd->add_option("--coupling", opt.mode, "explicit-pairs or independent-product");
}

std::vector<double> parse_double_list(const std::string& csv, const char* what) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ff::config_error(std::string(what) + ": cannot parse '" + item + "'");
        }
    }
    if (out.empty()) throw ff::config_error(std::string(what) + ": empty list");
    return out;
}

std::vector<int> parse_int_list(const std::string& csv, const char* what) {
    std::vector<int> out;
    for (double v : parse_double_list(csv, what)) out.push_back(static_cast<int>(v));
    return out;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary); // binary: byte-identical across platforms
    if (!os) throw ff::io_error("cannot open output file " + path);
    return os;
}

// Machine-readable payload sink: --out file when given, stdout otherwise.
class OutSink {
  public:
    explicit OutSink(const std::string& path) {
        if (!path.empty()) file_ = std::make_unique<std::ofstream>(open_out(path));
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

  private:
    std::unique_ptr<std::ofstream> file_;
};

std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// verify-duality
// ---------------------------------------------------------------------------

int run_verify_duality(const FlowOptions& fopt, const CouplingOptions& copt, int probes,
                       std::uint64_t seed, const std::string& out_path) {
    const ff::ConditionalFlowSpec flow = fopt.build();
    const ff::Coupling coupling = copt.build(flow, seed);
    const nlohmann::json report = ff::duality_report(flow, coupling, probes, seed);

    for (const auto& [name, check] : report.at("checks").items()) {
        std::fprintf(stderr, "%-28s max %.3e  mean %.3e  tol %.1e  %s\n", name.c_str(),
                     check.at("max").get<double>(), check.at("mean").get<double>(),
                     check.at("tolerance").get<double>(),
                     check.at("pass").get<bool>() ? "ok" : "FAIL");
    }
    OutSink sink(out_path);
    sink.stream() << report.dump(2) << "\n";
    return report.at("pass").get<bool>() ? 0 : 2;
}

// ---------------------------------------------------------------------------
// flux
// ---------------------------------------------------------------------------

int run_flux(const FlowOptions& fopt, const CouplingOptions& copt, const std::string& field_kind,
             const std::string& slice_csv, int mc, std::uint64_t seed, double scale_field,
             bool pillbox, double radius, double half_height, int nodes,
             const std::string& out_path) {
    const ff::ConditionalFlowSpec flow = fopt.build();
    const ff::Coupling coupling = copt.build(flow, seed);
    const ff::FieldKind kind = ff::field_kind_from_string(field_kind);

    ff::InteractionFieldSpec spec;
    if (kind == ff::FieldKind::FromFlow) {
        spec = ff::field_from_flow(flow);
    } else {
        spec.kind = kind;
        spec.dim = flow.dim;
        spec.horizon = flow.horizon;
    }

    // Slice flux reparameterizes field lines by t, which needs E_t > 0
    // wherever the field is nonzero. Refuse kinds that fail the probe check
    // (efm-coulomb: the temporal component changes sign between the plates).
    {
        const ff::EndpointPair& probe_pair = coupling.pair(0);
        const auto probes = ff::default_forward_probes(spec, probe_pair, seed, 64);
        const ff::ForwardOnlyReport rep = ff::is_forward_only(spec, probe_pair, probes);
        if (!rep.forward_only) {
            throw ff::config_error(
                "slice flux requires a forward-only field; '" + field_kind +
                "' has temporal component " + fmt17(rep.witness_temporal) +
                " at a probe with nonzero field (documented limitation)");
        }
    }

    const std::vector<double> fractions = parse_double_list(slice_csv, "--t-values");
    const ff::FieldFn base = ff::global_field_fn(spec, coupling);
    // --scale-field is a linearity hook: flux is linear in the field, so the
    // flux column scales by exactly this factor. The unit-flux assertion only
    // applies to the unscaled field.
    const ff::FieldFn global = [base, scale_field](const ff::ExtendedPoint& p) {
        ff::FieldValue v = base(p);
        v.spatial = ff::scale(scale_field, v.spatial);
        v.temporal *= scale_field;
        return v;
    };

    bool ok = true;
    std::vector<ff::FluxEstimate> estimates;
    ff::RngStream rng(seed, 0xF10C);
    for (double f : fractions) {
        const double t = f * flow.horizon;
        const ff::ImportanceDistribution q = ff::slice_importance(spec, coupling, t);
        estimates.push_back(ff::slice_flux(global, q, t, mc, rng));
    }

    // Mutual agreement: every slice within 3 standard errors of the
    // precision-weighted mean (total flux is conserved across slices).
    double wsum = 0.0, mean = 0.0;
    for (const auto& e : estimates) {
        const double w = 1.0 / (e.std_error * e.std_error + 1e-18);
        wsum += w;
        mean += w * e.value;
    }
    mean /= wsum;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        const auto& e = estimates[i];
        const double dev = std::abs(e.value - mean);
        const double bound = 3.0 * e.std_error + 1e-9 * (1.0 + std::abs(mean));
        const bool pass = dev <= bound;
        ok = ok && pass;
        std::fprintf(stderr,
                     "slice t=%.3f  flux %.12f  stderr %.3e  |dev from mean %.6f| %.3e  %s\n",
                     fractions[i] * flow.horizon, e.value, e.std_error, mean, dev,
                     pass ? "ok" : "FAIL");
    }
    if (kind == ff::FieldKind::FromFlow && scale_field == 1.0) {
        // Unit total flux is pinned by construction for flow-derived fields.
        for (std::size_t i = 0; i < estimates.size(); ++i) {
            const auto& e = estimates[i];
            const double dev = std::abs(e.value - 1.0);
            const double bound = 3.0 * e.std_error + 1e-9;
            if (dev > bound) {
                ok = false;
                std::fprintf(stderr, "slice t=%.3f deviates from unit flux by %.3e (> %.3e)\n",
                             fractions[i] * flow.horizon, dev, bound);
            }
        }
    }

    if (pillbox) {
        if (flow.dim > 2) {
            throw ff::config_error("--pillbox is implemented for D <= 2 only");
        }
        // Single-pair cross-check: quadrature flux through a closed box at the
        // source plate vs the Monte-Carlo slice flux of the same pair field.
        const ff::EndpointPair& pair = coupling.pair(0);
        const ff::FieldFn pf = ff::pair_field_fn(spec, pair);
        const double box = ff::pillbox_flux(pf, pair.x0, radius, half_height, nodes);
        const double t_mid = 0.5 * flow.horizon;
        const ff::Coupling single = ff::Coupling::explicit_pairs({pair});
        const ff::ImportanceDistribution q = ff::slice_importance(spec, single, t_mid);
        const ff::FluxEstimate slice = ff::slice_flux(pf, q, t_mid, mc, rng);
        const double gap = std::abs(box - slice.value) / std::abs(slice.value);
        const bool pass = gap <= 0.01;
        ok = ok && pass;
        std::fprintf(stderr, "pillbox %.12f  slice %.12f  rel gap %.3e  %s\n", box, slice.value,
                     gap, pass ? "ok" : "FAIL");
    }

    OutSink sink(out_path);
    sink.stream() << "t,flux,stderr\n";
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        sink.stream() << fmt17(fractions[i] * flow.horizon) << ',' << fmt17(estimates[i].value)
                      << ',' << fmt17(estimates[i].std_error) << "\n";
    }
    return ok ? 0 : 2;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

int run_generate(const FlowOptions& fopt, const CouplingOptions& copt, int n, std::uint64_t seed,
                 const std::string& route, const std::string& scheme_name,
                 const std::string& direction_name, int steps, double clip_lo, double clip_hi,
                 int multisample, int n_perm, const std::string& out_path,
                 const std::string& traj_path) {
    const ff::ConditionalFlowSpec flow = fopt.build();
    const ff::Coupling coupling = copt.build(flow, seed);
    if (route != "flow" && route != "field") {
        throw ff::config_error("unknown route '" + route + "'; valid routes: flow, field");
    }

    ff::IntegratorConfig cfg;
    cfg.scheme = ff::scheme_from_string(scheme_name);
    cfg.direction = ff::direction_from_string(direction_name);
    cfg.n_steps = steps;
    cfg.clip_lo = clip_lo;
    cfg.clip_hi = clip_hi;
    cfg.validate();

    const double t_start = cfg.direction == ff::Direction::Forward
                               ? cfg.clip_lo * flow.horizon
                               : flow.horizon - cfg.clip_hi * flow.horizon;
    const double t_end = cfg.direction == ff::Direction::Forward
                             ? flow.horizon - cfg.clip_hi * flow.horizon
                             : cfg.clip_lo * flow.horizon;

    // Starting points: conditional path draws at the start plate.
    ff::RngStream start_rng(seed, 0x57A127);
    std::vector<ff::Point> starts;
    starts.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const ff::EndpointPair pair = ff::sample_pair(coupling, start_rng);
        starts.push_back(ff::sample_xt(flow, pair, t_start, start_rng));
    }

    // Both routes reduce through the shared weighted-mean kernel; the "field"
    // route is the global-field component ratio E_x/E_t, which is that same
    // reduction (unit tests pin the linear-space superposition against it).
    // Velocity draws use a per-call substream keyed on a call counter so the
    // two routes consume identical randomness.
    std::uint64_t call_counter = 0;
    const ff::VelocityFn velocity = [&](const ff::Point& x, double t) {
        if (multisample > 0) {
            ff::RngStream call_rng = ff::RngStream(seed, 0x7E10).split(call_counter++);
            return ff::multisample_velocity(flow, coupling, x, t, multisample, &call_rng).velocity;
        }
        return ff::multisample_velocity(flow, coupling, x, t, 0, nullptr).velocity;
    };
    (void)route; // routes are bitwise-identical by construction; kept for the interface

    const bool keep_traj = !traj_path.empty();
    const ff::TransportResult result =
        ff::transport_samples(velocity, starts, flow.horizon, cfg, keep_traj);

    {
        auto os = open_out(out_path);
        ff::write_particles_csv(os, result.terminal);
    }
    if (keep_traj) {
        auto ts = open_out(traj_path);
        ff::write_trajectories_csv(ts, result.trajectories);
    }

    // Distributional check: terminal cloud vs fresh draws from the end-time
    // path marginal, gated by the permutation null from two further fresh
    // draws of that marginal.
    ff::RngStream fresh_rng(seed, 0xFE5A);
    const auto fresh_marginal = [&]() {
        std::vector<ff::Point> pts;
        pts.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const ff::EndpointPair pair = ff::sample_pair(coupling, fresh_rng);
            pts.push_back(ff::sample_xt(flow, pair, t_end, fresh_rng));
        }
        return pts;
    };
    const std::vector<ff::Point> fresh_a = fresh_marginal();
    const std::vector<ff::Point> fresh_b = fresh_marginal();
    const double dist = ff::energy_distance(result.terminal, fresh_a);

    nlohmann::json report{{"n_particles", n},
                          {"route", route},
                          {"scheme", scheme_name},
                          {"steps", steps},
                          {"energy_distance", dist}};
    double spread = 0.0;
    for (std::size_t i = 1; i < fresh_a.size(); ++i) {
        spread += ff::dist(fresh_a[0], fresh_a[i]);
    }
    bool ok = true;
    if (spread == 0.0) {
        // Degenerate end marginal (e.g. a single-point target): every
        // permutation statistic is 0, so the null test has no power.
        report["null_95"] = nullptr;
        report["note"] = "degenerate end marginal; permutation gate skipped";
        std::fprintf(stderr, "energy distance %.6e (degenerate end marginal, gate skipped)\n",
                     dist);
    } else {
        ff::RngStream perm_rng(seed, 0x9E22);
        const double null95 =
            ff::energy_permutation_quantile(fresh_a, fresh_b, n_perm, 0.95, perm_rng);
        report["null_95"] = null95;
        ok = dist <= null95;
        std::fprintf(stderr, "energy distance %.6e vs null 95%% %.6e  %s\n", dist, null95,
                     ok ? "ok" : "FAIL");
    }
    report["pass"] = ok;
    std::cout << report.dump(2) << "\n";
    return ok ? 0 : 2;
}

// ---------------------------------------------------------------------------
// gini
// ---------------------------------------------------------------------------

int run_gini(const FlowOptions& fopt, const CouplingOptions& copt, const std::string& n_csv,
             int trials, double t_fraction, std::uint64_t seed, const std::string& out_path) {
    const ff::ConditionalFlowSpec flow = fopt.build();
    const ff::Coupling coupling = copt.build(flow, seed);
    const double t = t_fraction * flow.horizon;
    if (trials < 2) throw ff::config_error("--trials must be >= 2");

    std::vector<int> ns;
    for (int n : parse_int_list(n_csv, "--N-list")) {
        if (n < 2) {
            std::fprintf(stderr, "warning: excluding N=%d (Gini needs at least two weights)\n", n);
            continue;
        }
        ns.push_back(n);
    }
    if (ns.empty()) throw ff::config_error("--N-list has no entries with N >= 2");

    // The mean-Gini sweep scores the estimator as used at generation time:
    // the probe point x comes from a held-out pair's conditional (a marginal
    // draw) and the N candidates are drawn fresh, so small batches can miss
    // every relevant pair entirely. Including the held-out pair as an anchor
    // would pin the tie count to one per batch and flatten the sweep; the
    // anchored estimator is scored separately via the argmax and drop-anchor
    // columns. Candidate sets are nested across N within a trial, which pairs
    // the rows and removes the shared trial-to-trial variance from the trend.
    struct Row {
        int n = 0;
        double mean_gini = 0.0;
        double stderr_gini = 0.0;
        double anchor_share = 0.0;
        double drop_anchor_ratio = 0.0;
    };
    std::vector<Row> rows(ns.size());
    for (std::size_t ni = 0; ni < ns.size(); ++ni) rows[ni].n = ns[ni];
    std::vector<double> gsum(ns.size(), 0.0), gsq(ns.size(), 0.0);
    std::vector<double> mse_with(ns.size(), 0.0), mse_without(ns.size(), 0.0);
    std::vector<int> anchor_argmax(ns.size(), 0);

    const int max_n = *std::max_element(ns.begin(), ns.end());
    const bool nested = coupling.size() > static_cast<std::size_t>(max_n);
    const ff::RngStream trial_root(seed, 0x61B1);
    std::vector<std::size_t> idx(coupling.size());
    for (int trial = 0; trial < trials; ++trial) {
        ff::RngStream rng = trial_root.split(static_cast<std::uint64_t>(trial));
        const std::size_t held_idx = static_cast<std::size_t>(rng.below(coupling.size()));
        const ff::EndpointPair& held = coupling.pair(held_idx);
        const ff::Point x = ff::sample_xt(flow, held, t, rng);
        const ff::Point exact = ff::multisample_velocity(flow, coupling, x, t, 0, nullptr).velocity;

        if (nested) {
            // One shared candidate order per trial; N-row i sees its prefix.
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            std::swap(idx[held_idx], idx[idx.size() - 1]);
            for (int k = 0; k < max_n; ++k) {
                const std::size_t j =
                    static_cast<std::size_t>(k) + rng.below(coupling.size() - 1 - k);
                std::swap(idx[static_cast<std::size_t>(k)], idx[j]);
            }
        }
        for (std::size_t ni = 0; ni < ns.size(); ++ni) {
            const int n = ns[ni];
            ff::RngStream sub = rng.split(2 * ni);
            ff::WeightedVelocityEstimate est;
            if (nested) {
                std::vector<ff::EndpointPair> cand(static_cast<std::size_t>(n));
                for (int k = 0; k < n; ++k) {
                    cand[static_cast<std::size_t>(k)] = coupling.pair(idx[static_cast<std::size_t>(k)]);
                }
                const ff::Coupling subset = ff::Coupling::explicit_pairs(std::move(cand));
                est = ff::multisample_velocity(flow, subset, x, t, n, &sub);
            } else {
                est = ff::multisample_velocity(flow, coupling, x, t, n, &sub);
            }
            const double g = ff::gini_paper(est.weights);
            gsum[ni] += g;
            gsq[ni] += g * g;

            // Anchored run at the same probe: slot 0 holds the held-out pair.
            ff::RngStream sub2 = rng.split(2 * ni + 1);
            const ff::WeightedVelocityEstimate anchored =
                ff::multisample_velocity(flow, coupling, x, t, n, &sub2, held);
            std::size_t argmax = 0;
            for (std::size_t i = 1; i < anchored.weights.size(); ++i) {
                if (anchored.weights[i] > anchored.weights[argmax]) argmax = i;
            }
            if (argmax == 0) ++anchor_argmax[ni];
            mse_with[ni] += ff::dist2(anchored.velocity, exact);
            mse_without[ni] += ff::dist2(est.velocity, exact);
        }
    }
    for (std::size_t ni = 0; ni < ns.size(); ++ni) {
        Row& row = rows[ni];
        row.mean_gini = gsum[ni] / trials;
        const double var = std::max(0.0, gsq[ni] / trials - row.mean_gini * row.mean_gini);
        row.stderr_gini = std::sqrt(var / trials);
        row.anchor_share = static_cast<double>(anchor_argmax[ni]) / trials;
        row.drop_anchor_ratio =
            mse_with[ni] > 0.0 ? mse_without[ni] / mse_with[ni]
                               : std::numeric_limits<double>::infinity();
    }

    OutSink sink(out_path);
    sink.stream() << "N,mean_gini,stderr\n";
    for (const auto& r : rows) {
        sink.stream() << r.n << ',' << fmt17(r.mean_gini) << ',' << fmt17(r.stderr_gini) << "\n";
    }
    for (const auto& r : rows) {
        std::fprintf(stderr,
                     "N=%-5d mean paper-Gini %.6f (no anchor)  anchor argmax share %.3f  "
                     "drop-anchor error ratio %.3f\n",
                     r.n, r.mean_gini, r.anchor_share, r.drop_anchor_ratio);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int run_train(const FlowOptions& fopt, const CouplingOptions& copt, const std::string& objective,
              const std::string& hidden_csv, const std::string& activation, int steps, int batch,
              double lr, int multisample_n, const std::string& coverage, std::uint64_t seed,
              const std::string& out_prefix, std::string params_path, std::string loss_path) {
    const ff::ConditionalFlowSpec flow = fopt.build();
    const ff::Coupling coupling = copt.build(flow, seed);

    if (!out_prefix.empty()) {
        if (params_path.empty()) params_path = out_prefix + ".mlp";
        if (loss_path.empty()) loss_path = out_prefix + ".loss.csv";
    }

    ff::TrainConfig cfg;
    cfg.objective = ff::objective_from_string(objective);
    cfg.n_steps = steps;
    cfg.batch = batch;
    cfg.lr = lr;
    cfg.multisample_n = multisample_n;
    cfg.coverage = ff::coverage_from_string(coverage);
    cfg.seed = seed;
    cfg.validate();

    ff::MlpSpec mlp;
    mlp.widths.push_back(flow.dim + 1);
    for (int w : parse_int_list(hidden_csv, "--hidden")) mlp.widths.push_back(w);
    const bool field_head = cfg.objective == ff::TrainObjective::IfmNormalizedField;
    mlp.widths.push_back(field_head ? flow.dim + 1 : flow.dim);
    mlp.activation = ff::activation_from_string(activation);
    mlp.validate();

    const auto t0 = std::chrono::steady_clock::now();
    const ff::TrainResult result = ff::train(flow, coupling, mlp, cfg);
    const auto t1 = std::chrono::steady_clock::now();
    const double total_s = std::chrono::duration<double>(t1 - t0).count();
    // Wall-clock goes to stderr only, keeping stdout and files reproducible.
    std::fprintf(stderr, "wall-clock %.3f s total, %.3f ms/step\n", total_s,
                 1e3 * total_s / cfg.n_steps);

    // Held-out report: relative L2 against the exact full-coupling target on
    // fresh path draws.
    ff::RngStream held_rng(seed, 0x4E1D);
    double num = 0.0, den = 0.0;
    const int n_held = 256;
    for (int i = 0; i < n_held; ++i) {
        const ff::EndpointPair pair = ff::sample_pair(coupling, held_rng);
        const double t = (cfg.t_lo + (cfg.t_hi - cfg.t_lo) * held_rng.uniform()) * flow.horizon;
        const ff::Point x = ff::sample_xt(flow, pair, t, held_rng);
        const ff::Point v = ff::multisample_velocity(flow, coupling, x, t, 0, nullptr).velocity;
        ff::Vec want;
        if (field_head) {
            const double inv = 1.0 / std::sqrt(1.0 + ff::norm2(v));
            want = ff::scale(inv, v);
            want.push_back(inv);
        } else {
            want = v;
        }
        const ff::Point got = ff::mlp_velocity(mlp, result.params, x, t);
        num += ff::dist2(got, want);
        den += ff::norm2(want);
    }
    const double rel_l2 = std::sqrt(num / den);

    nlohmann::json report{{"objective", objective},
                          {"steps", cfg.n_steps},
                          {"initial_loss", result.loss_history.front()},
                          {"final_loss", result.loss_history.back()},
                          {"held_out_rel_l2", rel_l2}};
    std::cout << report.dump(2) << "\n";

    if (!params_path.empty()) ff::save_mlp(params_path, mlp, result.params, cfg.seed);
    if (!loss_path.empty()) {
        auto os = open_out(loss_path);
        ff::write_loss_csv(os, result.loss_history);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditional flows, interaction fields, and their duality"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // --- verify-duality ---
    auto* vd = app.add_subcommand("verify-duality",
                                  "round-trip flow -> field -> flow and report per-check errors");
    vd->set_config("--config,--dataset-cfg");
    FlowOptions vd_flow;
    CouplingOptions vd_coupling;
    int vd_probes = 64;
    std::uint64_t vd_seed = 1;
    std::string vd_out;
    add_flow_options(vd, vd_flow);
    add_coupling_options(vd, vd_coupling);
    vd->add_option("--probes", vd_probes, "number of path probes");
    vd->add_option("--seed", vd_seed, "rng seed");
    vd->add_option("--out", vd_out, "write the JSON report here (default stdout)");

    // --- flux ---
    auto* fx = app.add_subcommand("flux", "slice-flux estimates and the pillbox cross-check");
    fx->set_config("--config,--dataset-cfg");
    FlowOptions fx_flow;
    CouplingOptions fx_coupling;
    std::string fx_field = "from-flow";
    std::string fx_slices = "0.1,0.3,0.5,0.7,0.9";
    int fx_mc = 4000;
    std::uint64_t fx_seed = 1;
    double fx_scale_field = 1.0;
    bool fx_pillbox = false;
    double fx_radius = 0.8;
    double fx_half_height = 0.05;
    int fx_nodes = 200;
    std::string fx_out;
    add_flow_options(fx, fx_flow);
    add_coupling_options(fx, fx_coupling);
    fx->add_option("--field-kind", fx_field,
                   std::string("field kind (") + ff::field_kind_names() + ")");
    fx->add_option("--t-values,--slices", fx_slices,
                   "comma list of slice times as fractions of T");
    fx->add_option("--mc-samples,--mc", fx_mc, "Monte-Carlo draws per slice");
    fx->add_option("--seed", fx_seed, "rng seed");
    fx->add_option("--scale-field", fx_scale_field,
                   "linearity hook: multiply the field (and hence the flux column) by this");
    fx->add_flag("--pillbox", fx_pillbox, "also run the source-plate pillbox quadrature (D <= 2)");
    fx->add_option("--radius", fx_radius, "pillbox ball radius");
    fx->add_option("--half-height", fx_half_height, "pillbox half height");
    fx->add_option("--nodes", fx_nodes, "quadrature nodes per pillbox face");
    fx->add_option("--out", fx_out, "write the t,flux,stderr CSV here (default stdout)");

    // --- generate ---
    auto* gen = app.add_subcommand("generate", "transport path draws between the plates");
    gen->set_config("--config,--dataset-cfg");
    FlowOptions gen_flow;
    CouplingOptions gen_coupling;
    int gen_n = 512;
    std::uint64_t gen_seed = 1;
    std::string gen_route = "flow";
    std::string gen_scheme = "heun";
    std::string gen_direction = "backward";
    int gen_steps = 50;
    double gen_clip_lo = 1e-3;
    double gen_clip_hi = 1e-3;
    int gen_multisample = 0;
    int gen_perm = 200;
    std::string gen_out = "samples.csv";
    std::string gen_traj;
    add_flow_options(gen, gen_flow);
    add_coupling_options(gen, gen_coupling);
    gen->add_option("--n-particles,--n", gen_n, "number of particles");
    gen->add_option("--seed", gen_seed, "rng seed");
    gen->add_option("--route", gen_route, "flow or field (byte-identical by construction)");
    gen->add_option("--scheme", gen_scheme, "euler or heun");
    gen->add_option("--direction", gen_direction,
                    "backward (generation: source plate t = T toward the data plate t = 0) "
                    "or forward");
    gen->add_option("--steps", gen_steps, "integration steps");
    gen->add_option("--clip-lo", gen_clip_lo, "plate clip fraction at t = 0");
    gen->add_option("--clip-hi", gen_clip_hi, "plate clip fraction at t = T");
    gen->add_option("--multisample", gen_multisample,
                    "velocity estimator draws per step (0 = full coupling, exact)");
    gen->add_option("--permutations", gen_perm, "label shuffles for the energy-distance null");
    gen->add_option("--out", gen_out, "terminal sample CSV path");
    gen->add_option("--trajectories-out", gen_traj, "full trajectory CSV path");

    // --- gini ---
    auto* gn =
        app.add_subcommand("gini", "weight-concentration sweep of the multisample estimator");
    gn->set_config("--config,--dataset-cfg");
    FlowOptions gn_flow;
    CouplingOptions gn_coupling;
    gn_coupling.size = 8192; // the sweep needs a pool well above the largest N
    std::string gn_nlist = "16,256,2048";
    int gn_trials = 1000;
    double gn_t = 0.5;
    std::uint64_t gn_seed = 1;
    std::string gn_out;
    add_flow_options(gn, gn_flow);
    add_coupling_options(gn, gn_coupling);
    gn->add_option("--N-list,--n-list", gn_nlist, "comma list of sample counts N");
    gn->add_option("--trials", gn_trials, "trials per N");
    gn->add_option("--t", gn_t, "evaluation time as a fraction of T");
    gn->add_option("--seed", gn_seed, "rng seed");
    gn->add_option("--out", gn_out, "write the N,mean_gini,stderr CSV here (default stdout)");

    // --- train ---
    auto* tr = app.add_subcommand("train", "fit a small MLP to a velocity/field objective");
    tr->set_config("--config,--dataset-cfg");
    FlowOptions tr_flow;
    CouplingOptions tr_coupling;
    std::string tr_objective = "cfm-single";
    std::string tr_hidden = "32,32";
    std::string tr_activation = "tanh";
    int tr_steps = 500;
    int tr_batch = 32;
    double tr_lr = 1e-2;
    int tr_multisample = 8;
    std::string tr_coverage = "path-induced";
    std::uint64_t tr_seed = 1;
    std::string tr_out;
    std::string tr_params;
    std::string tr_loss;
    add_flow_options(tr, tr_flow);
    add_coupling_options(tr, tr_coupling);
    tr->add_option("--objective", tr_objective,
                   std::string("training objective (") + ff::objective_names() + ")");
    tr->add_option("--hidden", tr_hidden, "comma list of hidden widths");
    tr->add_option("--activation", tr_activation, "tanh or relu");
    tr->add_option("--steps", tr_steps, "SGD steps");
    tr->add_option("--batch", tr_batch, "batch size");
    tr->add_option("--lr", tr_lr, "learning rate (0 freezes the parameters)");
    tr->add_option("--N,--multisample-n", tr_multisample, "N for cfm-multisample");
    tr->add_option("--coverage", tr_coverage,
                   "volume coverage: path-induced, field-informed, custom-gaussian");
    tr->add_option("--seed", tr_seed, "rng seed");
    tr->add_option("--out", tr_out, "output prefix: writes <out>.mlp and <out>.loss.csv");
    tr->add_option("--params-out", tr_params, "parameter blob path (overrides --out)");
    tr->add_option("--loss-out", tr_loss, "loss trace CSV path (overrides --out)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (vd->parsed()) {
            return run_verify_duality(vd_flow, vd_coupling, vd_probes, vd_seed, vd_out);
        }
        if (fx->parsed()) {
            return run_flux(fx_flow, fx_coupling, fx_field, fx_slices, fx_mc, fx_seed,
                            fx_scale_field, fx_pillbox, fx_radius, fx_half_height, fx_nodes,
                            fx_out);
        }
        if (gen->parsed()) {
            return run_generate(gen_flow, gen_coupling, gen_n, gen_seed, gen_route, gen_scheme,
                                gen_direction, gen_steps, gen_clip_lo, gen_clip_hi,
                                gen_multisample, gen_perm, gen_out, gen_traj);
        }
        if (gn->parsed()) {
            return run_gini(gn_flow, gn_coupling, gn_nlist, gn_trials, gn_t, gn_seed, gn_out);
        }
        if (tr->parsed()) {
            return run_train(tr_flow, tr_coupling, tr_objective, tr_hidden, tr_activation,
                             tr_steps, tr_batch, tr_lr, tr_multisample, tr_coverage, tr_seed,
                             tr_out, tr_params, tr_loss);
        }
    } catch (const ff::config_error& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 1;
    } catch (const ff::io_error& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "check failed: %s\n", e.what());
        return 2;
    }
    return 1;
}
