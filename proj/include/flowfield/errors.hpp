#pragma once

#include <stdexcept>
#include <string>

namespace flowfield {

// Thrown when points of unequal dimension are mixed before any arithmetic runs.
struct dimension_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Invalid configuration value (unknown kind, non-positive horizon, bad layer list, ...).
struct config_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Evaluation at a time where the drift ratio sdot/s diverges and clamping is disabled.
struct endpoint_singularity_error : std::domain_error {
    using std::domain_error::domain_error;
};

// Density requested where the path distribution is degenerate (sigma_t == 0 exactly).
struct degenerate_path_error : std::domain_error {
    using std::domain_error::domain_error;
};

// Evaluation inside the guard radius of a Coulomb charge.
struct singular_evaluation_error : std::domain_error {
    using std::domain_error::domain_error;
};

// A two-sided construction was given a pair without a target endpoint.
struct missing_endpoint_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// All candidate log-weights are -inf: no sample carries mass at the query point.
struct degenerate_weights_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training loss became non-finite; carries the step at which it happened.
struct training_diverged_error : std::runtime_error {
    training_diverged_error(const std::string& msg, long step_)
        : std::runtime_error(msg), step(step_) {}
    long step;
};

// File/serialization failure.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace flowfield
