#include "flowfield/dynamics.hpp"

#include <cstdio>
#include <ostream>
#include <string>

namespace flowfield {

Scheme scheme_from_string(const std::string& name) {
    if (name == "euler") return Scheme::Euler;
    if (name == "heun") return Scheme::Heun;
    throw config_error("unknown scheme '" + name + "'; valid schemes: euler, heun");
}

Direction direction_from_string(const std::string& name) {
    if (name == "forward") return Direction::Forward;
    if (name == "backward") return Direction::Backward;
    throw config_error("unknown direction '" + name + "'; valid directions: forward, backward");
}

void IntegratorConfig::validate() const {
    if (n_steps < 1) throw config_error("integrator: n_steps must be >= 1");
    if (clip_lo < 0.0 || clip_hi < 0.0 || clip_lo + clip_hi >= 1.0) {
        throw config_error("integrator: clip fractions must be nonnegative and leave a nonempty span");
    }
}

Point integrator_step(Scheme scheme, const VelocityFn& v, double t, const Point& x, double h) {
    const Point k1 = v(x, t);
    Point out = x;
    if (scheme == Scheme::Euler) {
        axpy(h, k1, out);
        return out;
    }
    Point predictor = x;
    axpy(h, k1, predictor);
    const Point k2 = v(predictor, t + h);
    axpy(0.5 * h, k1, out);
    axpy(0.5 * h, k2, out);
    return out;
}

std::vector<TrajectoryPoint> integrate_trajectory(const VelocityFn& v, const Point& start,
                                                  double horizon, const IntegratorConfig& cfg) {
    cfg.validate();
    if (!(horizon > 0.0)) throw config_error("integrate_trajectory: horizon must be positive");
    const double t_lo = cfg.clip_lo * horizon;
    const double t_hi = horizon - cfg.clip_hi * horizon;
    const double t0 = cfg.direction == Direction::Forward ? t_lo : t_hi;
    const double t1 = cfg.direction == Direction::Forward ? t_hi : t_lo;
    const double h = (t1 - t0) / cfg.n_steps;

    std::vector<TrajectoryPoint> traj;
    traj.reserve(static_cast<std::size_t>(cfg.n_steps) + 1);
    Point x = start;
    traj.push_back({t0, x});
    for (int i = 0; i < cfg.n_steps; ++i) {
        const double t = t0 + i * h;
        x = integrator_step(cfg.scheme, v, t, x, h);
        traj.push_back({t0 + (i + 1) * h, x});
    }
    return traj;
}

TransportResult transport_samples(const VelocityFn& v, const std::vector<Point>& starts,
                                  double horizon, const IntegratorConfig& cfg,
                                  bool keep_trajectories) {
    TransportResult result;
    result.terminal.reserve(starts.size());
    if (keep_trajectories) result.trajectories.reserve(starts.size());
    for (const Point& s : starts) {
        auto traj = integrate_trajectory(v, s, horizon, cfg);
        result.terminal.push_back(traj.back().x);
        if (keep_trajectories) result.trajectories.push_back(std::move(traj));
    }
    return result;
}

namespace {

void print_g17(std::ostream& os, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}

} // namespace

void write_trajectories_csv(std::ostream& os,
                            const std::vector<std::vector<TrajectoryPoint>>& trajectories) {
    std::size_t D = 0;
    for (const auto& traj : trajectories) {
        if (!traj.empty()) {
            D = traj.front().x.size();
            break;
        }
    }
    os << "particle_id,t";
    for (std::size_t k = 1; k <= D; ++k) os << ",x_" << k;
    os << "\n";
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        for (const auto& tp : trajectories[i]) {
            os << i << ',';
            print_g17(os, tp.t);
            for (double c : tp.x) {
                os << ',';
                print_g17(os, c);
            }
            os << "\n";
        }
    }
}

void write_particles_csv(std::ostream& os, const std::vector<Point>& points) {
    const std::size_t D = points.empty() ? 0 : points.front().size();
    os << "particle_id";
    for (std::size_t k = 1; k <= D; ++k) os << ",x_" << k;
    os << "\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        os << i;
        for (double c : points[i]) {
            os << ',';
            print_g17(os, c);
        }
        os << "\n";
    }
}

} // namespace flowfield
