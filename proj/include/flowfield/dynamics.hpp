#pragma once

// Fixed-step ODE transport in data space: dx/dt = v(x, t) between the clipped
// plates t = clip_lo*T and t = T - clip_hi*T.

#include <functional>
#include <iosfwd>
#include <vector>

#include "flowfield/core.hpp"

namespace flowfield {

enum class Scheme { Euler, Heun };
enum class Direction {
    Forward,  // source plate (t ~ 0) toward target plate (t ~ T)
    Backward, // target plate toward source plate
};

Scheme scheme_from_string(const std::string& name);
Direction direction_from_string(const std::string& name);

struct IntegratorConfig {
    Scheme scheme = Scheme::Heun;
    int n_steps = 50;
    Direction direction = Direction::Forward;
    double clip_lo = 1e-3; // fraction of T clipped at the t = 0 plate
    double clip_hi = 1e-3; // fraction of T clipped at the t = T plate

    void validate() const;
};

using VelocityFn = std::function<Point(const Point&, double)>;

struct TrajectoryPoint {
    double t;
    Point x;
};

// One explicit step from (x, t) with signed step h.
Point integrator_step(Scheme scheme, const VelocityFn& v, double t, const Point& x, double h);

// Full trajectory on the fixed grid between the clipped plates; n_steps+1
// points including the start.
std::vector<TrajectoryPoint> integrate_trajectory(const VelocityFn& v, const Point& start,
                                                  double horizon, const IntegratorConfig& cfg);

struct TransportResult {
    std::vector<Point> terminal;
    std::vector<std::vector<TrajectoryPoint>> trajectories; // filled when requested
};

TransportResult transport_samples(const VelocityFn& v, const std::vector<Point>& starts,
                                  double horizon, const IntegratorConfig& cfg,
                                  bool keep_trajectories = false);

// CSV: "particle_id,t,x_1,...,x_D".
void write_trajectories_csv(std::ostream& os,
                            const std::vector<std::vector<TrajectoryPoint>>& trajectories);

// CSV: "particle_id,x_1,...,x_D".
void write_particles_csv(std::ostream& os, const std::vector<Point>& points);

} // namespace flowfield
