#pragma once

// A small fully-connected network with hand-rolled reverse-mode gradients,
// plain SGD, and the three regression objectives: single-sample conditional
// velocity, multi-sample weighted velocity, and the normalized global field
// direction on the augmented space.

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "flowfield/superposition.hpp"

namespace flowfield {

enum class Activation { Tanh, Relu };

Activation activation_from_string(const std::string& name);
const char* to_string(Activation a);

struct MlpSpec {
    std::vector<int> widths; // [input, hidden..., output]
    Activation activation = Activation::Tanh;

    void validate() const;
    std::size_t n_params() const; // sum over layers of (in+1)*out
};

// Fan-in scaled Gaussian weights, two uniforms per weight; biases start at
// zero and consume no draws.
Vec mlp_init(const MlpSpec& spec, RngStream& rng);

Vec mlp_forward(const MlpSpec& spec, const Vec& params, const Vec& input);

// Squared-error loss 0.5*||f(x) - y||^2 for one sample; accumulates the
// parameter gradient into grad (which must be zeroed by the caller for a
// fresh batch).
double mlp_loss_grad(const MlpSpec& spec, const Vec& params, const Vec& input, const Vec& target,
                     Vec& grad);

enum class TrainObjective {
    CfmSingle,         // target: conditional velocity of the anchor pair
    CfmMultisample,    // target: N-sample weighted velocity (anchor in slot 0)
    IfmNormalizedField // target: global field direction E/||E|| on R^{D+1}
};

TrainObjective objective_from_string(const std::string& name);
const char* to_string(TrainObjective o);
const char* objective_names();

enum class VolumeCoverage {
    PathInduced,   // x ~ conditional path of a drawn pair
    FieldInformed, // x ~ slice density E_t/flux; equals PathInduced for
                   // from-flow fields, and is routed through the same sampler
    CustomGaussian // x ~ N(0, coverage_sigma^2 I)
};

VolumeCoverage coverage_from_string(const std::string& name);

struct TrainConfig {
    TrainObjective objective = TrainObjective::CfmSingle;
    int n_steps = 500;
    int batch = 32;
    double lr = 1e-2;
    int multisample_n = 8;      // N for CfmMultisample
    VolumeCoverage coverage = VolumeCoverage::PathInduced;
    double coverage_sigma = 2.0;
    double t_lo = 0.05; // sampled time range as fractions of the horizon
    double t_hi = 0.95;
    int eval_size = 64; // frozen evaluation batch backing the loss trace
    std::uint64_t seed = 1;

    void validate() const;
};

struct TrainResult {
    Vec params;
    // Loss on a frozen evaluation batch, recorded before the first update and
    // after every step (n_steps + 1 entries). Being a pure function of the
    // parameters, the trace is exactly constant when lr = 0.
    std::vector<double> loss_history;
};

// SGD on the chosen objective. Deterministic given (spec, config): parameter
// init uses stream (seed, 0), batch draws use stream (seed, 1), the frozen
// evaluation batch uses stream (seed, 2). Throws training_diverged_error when
// the loss stops being finite.
TrainResult train(const ConditionalFlowSpec& flow, const Coupling& coupling, const MlpSpec& mlp,
                  const TrainConfig& cfg);

// Velocity evaluator backed by a trained net (input [x, t], output R^D).
Point mlp_velocity(const MlpSpec& spec, const Vec& params, const Point& x, double t);

// Single-file format: one JSON header line (widths, activation, seed, count,
// byte order) followed by the raw little-endian float64 parameter block.
void save_mlp(const std::string& path, const MlpSpec& spec, const Vec& params,
              std::uint64_t seed = 0);
std::pair<MlpSpec, Vec> load_mlp(const std::string& path);

// CSV: "step,loss", %.17g.
void write_loss_csv(std::ostream& os, const std::vector<double>& loss_history);

} // namespace flowfield
