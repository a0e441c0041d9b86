#pragma once

// Interaction fields on the augmented space R^{D+1}: divergence-free vector
// fields E = (E_x, E_t) whose field lines transport mass between the t = 0 and
// t = T plates. A field is forward-only when E_t > 0 wherever the field is
// nonzero; such fields are equivalent to conditional flows via
//   E = (v p, p) * (Phi0 / slice flux),  v = E_x / E_t,  p = E_t / Phi0.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "flowfield/flows.hpp"

namespace flowfield {

enum class FieldKind {
    FromFlow,                // (v p, p) of a backing conditional flow, zero outside the open slab
    EfmCoulomb,              // source charge at (x0, 0), sink charge at (xT, T)
    PfgmCoulomb,             // source charge only; zero below the data plane t < 0
    IfmCanonicalRealization, // Gaussian tube around the linear chord, sin pinch schedule
};

const char* to_string(FieldKind k);
FieldKind field_kind_from_string(const std::string& name);
const char* field_kind_names();

struct FieldValue {
    Vec spatial;         // E_x
    double temporal = 0; // E_t

    bool is_zero() const;
};

struct InteractionFieldSpec {
    FieldKind kind = FieldKind::FromFlow;
    int dim = 1;          // data dimension D
    double horizon = 1.0; // plate separation T
    std::optional<ConditionalFlowSpec> base_flow; // required for FromFlow
    double singularity_guard = 1e-8; // Coulomb: evaluations closer to a charge raise
    double endpoint_clamp = 1e-4;    // t-clamp fraction used by derived flows and traces

    void validate() const;
};

// Wrap a conditional flow as the forward-only field (v p, p); total flux 1.
InteractionFieldSpec field_from_flow(const ConditionalFlowSpec& flow);

// Field of a single endpoint pair at an extended point. Conventions: FromFlow
// and IfmCanonicalRealization vanish outside the open slab 0 < t < T;
// PfgmCoulomb vanishes below the data plane t < 0; EfmCoulomb is nonzero on
// all of R^{D+1} minus the charges.
FieldValue eval_pair_field(const InteractionFieldSpec& spec, const EndpointPair& pair,
                           const ExtendedPoint& p);

struct ForwardOnlyReport {
    bool forward_only = true;
    std::optional<ExtendedPoint> witness; // first probe with nonzero field and E_t <= 0
    double witness_temporal = 0.0;
};

// Probe-based forward-onlyness check: fails iff some probe sees a nonzero
// field with E_t <= 0. Probes where the field vanishes are skipped.
ForwardOnlyReport is_forward_only(const InteractionFieldSpec& spec, const EndpointPair& pair,
                                  const std::vector<ExtendedPoint>& probes);

// Deterministic probe cloud: points along the chord inside the slab plus
// shells below the bottom plate and above the top plate (where a forward-only
// field must vanish; the two-charge field betrays itself there).
std::vector<ExtendedPoint> default_forward_probes(const InteractionFieldSpec& spec,
                                                  const EndpointPair& pair,
                                                  std::uint64_t seed, int n);

struct not_forward_only_error : std::runtime_error {
    not_forward_only_error(const std::string& msg, ExtendedPoint w, double temporal)
        : std::runtime_error(msg), witness(std::move(w)), witness_temporal(temporal) {}
    ExtendedPoint witness;
    double witness_temporal;
};

// A conditional flow recovered from a forward-only field:
//   velocity = E_x / E_t, density = E_t / total_flux.
class FieldBackedFlow {
  public:
    FieldBackedFlow(InteractionFieldSpec spec, double total_flux);

    Point velocity(const EndpointPair& pair, const Point& x, double t) const;
    double log_density(const EndpointPair& pair, const Point& x, double t) const;
    double total_flux() const { return flux_; }
    const InteractionFieldSpec& spec() const { return spec_; }

  private:
    InteractionFieldSpec spec_;
    double flux_;
};

// Checks the forward-only precondition on the probe set (default probes when
// empty), then wraps the field. Throws not_forward_only_error with a witness.
FieldBackedFlow flow_from_field(const InteractionFieldSpec& spec, double total_flux,
                                const EndpointPair& pair,
                                std::vector<ExtendedPoint> probes = {});

// ---------------------------------------------------------------------------
// Field-line tracing
// ---------------------------------------------------------------------------

using FieldFn = std::function<FieldValue(const ExtendedPoint&)>;

FieldFn pair_field_fn(const InteractionFieldSpec& spec, const EndpointPair& pair);

enum class TraceParameter {
    Time,          // integrate dx/dt = E_x/E_t on a fixed t-grid (always reaches the plate)
    FieldParameter // integrate dX/dtau = E(X) until a plate or the step budget
};

struct FieldLineConfig {
    TraceParameter parameter = TraceParameter::Time;
    bool forward = true; // toward the t = T plate
    int n_steps = 1000;  // t-grid size, or the tau step budget
    double step = 1e-3;  // tau step size (FieldParameter only)
    // Plate clamps; NaN means [eps, T-eps] with eps = endpoint_clamp * horizon.
    double t_lo = std::numeric_limits<double>::quiet_NaN();
    double t_hi = std::numeric_limits<double>::quiet_NaN();
};

struct FieldLineTrace {
    std::vector<double> param;        // t or tau at each recorded point
    std::vector<ExtendedPoint> points;
    bool reached_plate = false;
};

struct truncated_trace_error : std::runtime_error {
    truncated_trace_error(const std::string& msg, FieldLineTrace t)
        : std::runtime_error(msg), partial(std::move(t)) {}
    FieldLineTrace partial;
};

// Heun trace of a forward-only field. Time parameterization always terminates
// on its fixed grid; tau parameterization stops at a plate or throws
// truncated_trace_error with the partial trace once the budget is exhausted.
FieldLineTrace trace_field_line(const FieldFn& field, const ExtendedPoint& start,
                                const FieldLineConfig& cfg, double horizon,
                                double endpoint_clamp = 1e-4);

// CSV: header "param,t,x_1,...,x_D", one row per recorded point, %.17g.
void write_trace_csv(std::ostream& os, const FieldLineTrace& trace);

} // namespace flowfield
