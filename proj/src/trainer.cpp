#include "flowfield/trainer.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>

#include "json.hpp"

namespace flowfield {

Activation activation_from_string(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    throw config_error("unknown activation '" + name + "'; valid: tanh, relu");
}

const char* to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

TrainObjective objective_from_string(const std::string& name) {
    if (name == "cfm-single") return TrainObjective::CfmSingle;
    if (name == "cfm-multisample") return TrainObjective::CfmMultisample;
    if (name == "ifm-normalized-field") return TrainObjective::IfmNormalizedField;
    throw config_error("unknown objective '" + name + "'; valid: " + objective_names());
}

const char* to_string(TrainObjective o) {
    switch (o) {
        case TrainObjective::CfmSingle: return "cfm-single";
        case TrainObjective::CfmMultisample: return "cfm-multisample";
        case TrainObjective::IfmNormalizedField: return "ifm-normalized-field";
    }
    return "unknown";
}

const char* objective_names() { return "cfm-single, cfm-multisample, ifm-normalized-field"; }

VolumeCoverage coverage_from_string(const std::string& name) {
    if (name == "path-induced") return VolumeCoverage::PathInduced;
    if (name == "field-informed") return VolumeCoverage::FieldInformed;
    if (name == "custom-gaussian") return VolumeCoverage::CustomGaussian;
    throw config_error("unknown coverage '" + name +
                       "'; valid: path-induced, field-informed, custom-gaussian");
}

void MlpSpec::validate() const {
    if (widths.size() < 2) throw config_error("mlp: need at least input and output widths");
    for (int w : widths) {
        if (w < 1) throw config_error("mlp: widths must be positive");
    }
}

std::size_t MlpSpec::n_params() const {
    validate();
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        n += static_cast<std::size_t>(widths[l] + 1) * static_cast<std::size_t>(widths[l + 1]);
    }
    return n;
}

Vec mlp_init(const MlpSpec& spec, RngStream& rng) {
    spec.validate();
    Vec params(spec.n_params());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
        const int fan_in = spec.widths[l];
        const int fan_out = spec.widths[l + 1];
        const double s = std::sqrt(2.0 / fan_in); // He-style; also fine for tanh at this scale
        for (int i = 0; i < fan_out * fan_in; ++i) params[off++] = s * rng.normal();
        for (int i = 0; i < fan_out; ++i) params[off++] = 0.0; // biases start at zero (consume no draws)
    }
    return params;
}

namespace {

double act(Activation a, double z) { return a == Activation::Tanh ? std::tanh(z) : std::max(0.0, z); }

double act_grad(Activation a, double y, double z) {
    // y = act(z) is passed so tanh reuses its output.
    return a == Activation::Tanh ? 1.0 - y * y : (z > 0.0 ? 1.0 : 0.0);
}

// Forward pass storing pre-activations and activations per layer.
void forward_cached(const MlpSpec& spec, const Vec& params, const Vec& input,
                    std::vector<Vec>& acts, std::vector<Vec>& pre) {
    const std::size_t L = spec.widths.size() - 1;
    acts.assign(L + 1, Vec{});
    pre.assign(L, Vec{});
    acts[0] = input;
    std::size_t off = 0;
    for (std::size_t l = 0; l < L; ++l) {
        const int in = spec.widths[l];
        const int out = spec.widths[l + 1];
        pre[l].assign(static_cast<std::size_t>(out), 0.0);
        const double* W = params.data() + off;
        const double* b = params.data() + off + static_cast<std::size_t>(out) * in;
        for (int i = 0; i < out; ++i) {
            double z = b[i];
            const double* row = W + static_cast<std::size_t>(i) * in;
            for (int j = 0; j < in; ++j) z += row[j] * acts[l][static_cast<std::size_t>(j)];
            pre[l][static_cast<std::size_t>(i)] = z;
        }
        acts[l + 1].assign(static_cast<std::size_t>(out), 0.0);
        const bool last = l + 1 == L; // linear output layer
        for (int i = 0; i < out; ++i) {
            const double z = pre[l][static_cast<std::size_t>(i)];
            acts[l + 1][static_cast<std::size_t>(i)] = last ? z : act(spec.activation, z);
        }
        off += static_cast<std::size_t>(out) * in + static_cast<std::size_t>(out);
    }
}

} // namespace

Vec mlp_forward(const MlpSpec& spec, const Vec& params, const Vec& input) {
    spec.validate();
    require_dim(input, static_cast<std::size_t>(spec.widths.front()), "mlp input");
    if (params.size() != spec.n_params()) throw config_error("mlp: parameter size mismatch");
    std::vector<Vec> acts, pre;
    forward_cached(spec, params, input, acts, pre);
    return acts.back();
}

double mlp_loss_grad(const MlpSpec& spec, const Vec& params, const Vec& input, const Vec& target,
                     Vec& grad) {
    spec.validate();
    require_dim(input, static_cast<std::size_t>(spec.widths.front()), "mlp input");
    require_dim(target, static_cast<std::size_t>(spec.widths.back()), "mlp target");
    if (params.size() != spec.n_params() || grad.size() != spec.n_params()) {
        throw config_error("mlp: parameter/gradient size mismatch");
    }
    std::vector<Vec> acts, pre;
    forward_cached(spec, params, input, acts, pre);

    const std::size_t L = spec.widths.size() - 1;
    Vec delta = sub(acts.back(), target); // dLoss/d(output) for 0.5||f-y||^2
    const double loss = 0.5 * norm2(delta);

    // Layer parameter offsets, to sweep backwards.
    std::vector<std::size_t> offset(L);
    std::size_t off = 0;
    for (std::size_t l = 0; l < L; ++l) {
        offset[l] = off;
        off += static_cast<std::size_t>(spec.widths[l + 1]) * spec.widths[l] +
               static_cast<std::size_t>(spec.widths[l + 1]);
    }

    for (std::size_t l = L; l-- > 0;) {
        const int in = spec.widths[l];
        const int out = spec.widths[l + 1];
        const bool last = l + 1 == L;
        // delta currently holds dLoss/d(activation of layer l+1); convert to
        // dLoss/d(pre-activation).
        if (!last) {
            for (int i = 0; i < out; ++i) {
                delta[static_cast<std::size_t>(i)] *=
                    act_grad(spec.activation, acts[l + 1][static_cast<std::size_t>(i)],
                             pre[l][static_cast<std::size_t>(i)]);
            }
        }
        double* gW = grad.data() + offset[l];
        double* gb = grad.data() + offset[l] + static_cast<std::size_t>(out) * in;
        const double* W = params.data() + offset[l];
        Vec prev(static_cast<std::size_t>(in), 0.0);
        for (int i = 0; i < out; ++i) {
            const double d = delta[static_cast<std::size_t>(i)];
            double* gRow = gW + static_cast<std::size_t>(i) * in;
            const double* row = W + static_cast<std::size_t>(i) * in;
            for (int j = 0; j < in; ++j) {
                gRow[j] += d * acts[l][static_cast<std::size_t>(j)];
                prev[static_cast<std::size_t>(j)] += d * row[j];
            }
            gb[i] += d;
        }
        delta = std::move(prev);
    }
    return loss;
}

void TrainConfig::validate() const {
    if (n_steps < 1) throw config_error("train: n_steps must be >= 1");
    if (batch < 1) throw config_error("train: batch must be >= 1");
    if (!(lr >= 0.0)) throw config_error("train: learning rate must be nonnegative");
    if (multisample_n < 1) throw config_error("train: multisample_n must be >= 1");
    if (!(coverage_sigma > 0.0)) throw config_error("train: coverage_sigma must be positive");
    if (!(t_lo > 0.0) || !(t_hi < 1.0) || !(t_lo < t_hi)) {
        throw config_error("train: need 0 < t_lo < t_hi < 1");
    }
    if (eval_size < 1) throw config_error("train: eval_size must be >= 1");
}

TrainResult train(const ConditionalFlowSpec& flow, const Coupling& coupling, const MlpSpec& mlp,
                  const TrainConfig& cfg) {
    flow.validate();
    mlp.validate();
    cfg.validate();
    const int D = flow.dim;
    const int out_dim = cfg.objective == TrainObjective::IfmNormalizedField ? D + 1 : D;
    if (mlp.widths.front() != D + 1) {
        throw config_error("train: mlp input width must be dim + 1 (x and t)");
    }
    if (mlp.widths.back() != out_dim) {
        throw config_error("train: mlp output width does not match the objective");
    }

    RngStream init_rng(cfg.seed, 0);
    RngStream data_rng(cfg.seed, 1);
    RngStream eval_rng(cfg.seed, 2);

    TrainResult result;
    result.params = mlp_init(mlp, init_rng);
    result.loss_history.reserve(static_cast<std::size_t>(cfg.n_steps) + 1);

    const double T = flow.horizon;

    // One (input, target) example per the configured objective.
    const auto draw_example = [&](RngStream& rng) {
        const EndpointPair pair = sample_pair(coupling, rng);
        const double t = (cfg.t_lo + (cfg.t_hi - cfg.t_lo) * rng.uniform()) * T;

        Point x;
        if (cfg.objective == TrainObjective::IfmNormalizedField &&
            cfg.coverage == VolumeCoverage::CustomGaussian) {
            x = scale(cfg.coverage_sigma, gaussian_draw(rng, static_cast<std::size_t>(D)));
        } else {
            // PathInduced; FieldInformed coincides with it for from-flow
            // fields (the slice density is the mixture of conditionals)
            // and routes through the same sampler.
            x = sample_xt(flow, pair, t, rng);
        }

        Vec target;
        switch (cfg.objective) {
            case TrainObjective::CfmSingle:
                // N = 1 multisample with the anchor in slot 0 reduces to
                // the conditional velocity bitwise; one shared code path.
                target = multisample_velocity(flow, coupling, x, t, 1, &rng, pair).velocity;
                break;
            case TrainObjective::CfmMultisample:
                target =
                    multisample_velocity(flow, coupling, x, t, cfg.multisample_n, &rng, pair)
                        .velocity;
                break;
            case TrainObjective::IfmNormalizedField: {
                // E/||E|| = (v_hat, 1)/sqrt(1 + ||v_hat||^2): the density
                // magnitude cancels, so the direction is computed from the
                // exact full-coupling weighted velocity.
                const Point v = multisample_velocity(flow, coupling, x, t, 0, nullptr).velocity;
                target.assign(static_cast<std::size_t>(D) + 1, 0.0);
                const double inv = 1.0 / std::sqrt(1.0 + norm2(v));
                for (int k = 0; k < D; ++k) {
                    target[static_cast<std::size_t>(k)] = inv * v[static_cast<std::size_t>(k)];
                }
                target[static_cast<std::size_t>(D)] = inv;
                break;
            }
        }

        Vec input(static_cast<std::size_t>(D) + 1);
        for (int k = 0; k < D; ++k) input[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(k)];
        input[static_cast<std::size_t>(D)] = t;
        return std::make_pair(std::move(input), std::move(target));
    };

    // Frozen evaluation batch: the recorded loss is a pure function of the
    // parameters, so lr = 0 yields an exactly constant trace.
    std::vector<std::pair<Vec, Vec>> eval_set;
    eval_set.reserve(static_cast<std::size_t>(cfg.eval_size));
    for (int i = 0; i < cfg.eval_size; ++i) eval_set.push_back(draw_example(eval_rng));

    const auto eval_loss = [&](int step) {
        double loss = 0.0;
        for (const auto& [input, target] : eval_set) {
            const Vec out = mlp_forward(mlp, result.params, input);
            loss += 0.5 * norm2(sub(out, target));
        }
        loss /= cfg.eval_size;
        if (!std::isfinite(loss)) {
            throw training_diverged_error("evaluation loss is not finite", step);
        }
        return loss;
    };

    Vec grad(result.params.size(), 0.0);
    result.loss_history.push_back(eval_loss(0));

    for (int step = 0; step < cfg.n_steps; ++step) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            const auto [input, target] = draw_example(data_rng);
            loss += mlp_loss_grad(mlp, result.params, input, target, grad);
        }
        loss /= cfg.batch;
        if (!std::isfinite(loss)) {
            throw training_diverged_error("training loss is not finite", step);
        }
        const double scale_lr = cfg.lr / cfg.batch;
        for (std::size_t i = 0; i < grad.size(); ++i) result.params[i] -= scale_lr * grad[i];
        result.loss_history.push_back(eval_loss(step));
    }
    return result;
}

Point mlp_velocity(const MlpSpec& spec, const Vec& params, const Point& x, double t) {
    Vec input(x.size() + 1);
    for (std::size_t k = 0; k < x.size(); ++k) input[k] = x[k];
    input[x.size()] = t;
    return mlp_forward(spec, params, input);
}

void save_mlp(const std::string& path, const MlpSpec& spec, const Vec& params,
              std::uint64_t seed) {
    spec.validate();
    if (params.size() != spec.n_params()) throw config_error("save_mlp: parameter size mismatch");
    nlohmann::json header{{"widths", spec.widths},
                          {"activation", to_string(spec.activation)},
                          {"seed", seed},
                          {"param_count", params.size()},
                          {"dtype", "f64-le"}};
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("save_mlp: cannot open " + path);
    os << header.dump() << "\n";
    for (double v : params) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        if constexpr (std::endian::native == std::endian::big) {
            bits = __builtin_bswap64(bits);
        }
        os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    if (!os) throw io_error("save_mlp: write failed for " + path);
}

std::pair<MlpSpec, Vec> load_mlp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("load_mlp: cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw io_error("load_mlp: missing header line");
    const nlohmann::json header = nlohmann::json::parse(line);
    MlpSpec spec;
    spec.widths = header.at("widths").get<std::vector<int>>();
    spec.activation = activation_from_string(header.at("activation").get<std::string>());
    const std::size_t count = header.at("param_count").get<std::size_t>();
    if (header.at("dtype").get<std::string>() != "f64-le") {
        throw io_error("load_mlp: unsupported dtype");
    }
    spec.validate();
    if (count != spec.n_params()) throw io_error("load_mlp: header count does not match widths");
    Vec params(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits;
        is.read(reinterpret_cast<char*>(&bits), sizeof bits);
        if (!is) throw io_error("load_mlp: truncated parameter block");
        if constexpr (std::endian::native == std::endian::big) {
            bits = __builtin_bswap64(bits);
        }
        double v;
        std::memcpy(&v, &bits, sizeof v);
        params[i] = v;
    }
    return {spec, params};
}

void write_loss_csv(std::ostream& os, const std::vector<double>& loss_history) {
    os << "step,loss\n";
    char buf[32];
    for (std::size_t i = 0; i < loss_history.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", loss_history[i]);
        os << i << ',' << buf << "\n";
    }
}

} // namespace flowfield
