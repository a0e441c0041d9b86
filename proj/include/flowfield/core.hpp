#pragma once

// Domain primitives: points in data space R^D, extended points in R^{D+1}
// (data x time), endpoint pairs, and couplings over endpoint datasets.

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "flowfield/errors.hpp"
#include "flowfield/rng.hpp"
#include "flowfield/vec.hpp"

namespace flowfield {

using Point = Vec;

// A point of the augmented space R^{D+1}: spatial coordinates plus time/height.
struct ExtendedPoint {
    Point x;
    double t = 0.0;
};

// Endpoint pair: x0 is the target-side (data) point on the t = 0 plate, xT
// the source-side point on the t = T plate. xT is absent for one-sided
// constructions, whose source end is an implicit prior rather than a point.
struct EndpointPair {
    Point x0;
    std::optional<Point> xT;

    bool two_sided() const { return xT.has_value(); }

    const Point& target(const char* what = "EndpointPair::target") const {
        if (!xT) throw missing_endpoint_error(std::string(what) + ": pair has no target endpoint");
        return *xT;
    }
};

enum class CouplingMode {
    ExplicitPairs,      // a fixed list of (x0, xT) pairs; a draw picks one uniformly
    IndependentProduct, // endpoints drawn independently from source and target lists
};

// Discrete coupling between endpoint datasets. All points must share one
// dimension D, validated at construction.
class Coupling {
  public:
    static Coupling explicit_pairs(std::vector<EndpointPair> pairs) {
        if (pairs.empty()) throw config_error("Coupling: empty pair list");
        const std::size_t d = pairs.front().x0.size();
        for (const auto& p : pairs) {
            require_dim(p.x0, d, "Coupling pair x0");
            if (p.xT) require_dim(*p.xT, d, "Coupling pair xT");
        }
        Coupling c;
        c.mode_ = CouplingMode::ExplicitPairs;
        c.pairs_ = std::move(pairs);
        c.dim_ = d;
        return c;
    }

    // Independent coupling of the two endpoint datasets. The x0 side holds
    // target (t = 0 plate) points, the xT side source (t = T plate) points;
    // an empty xT side yields one-sided pairs.
    static Coupling independent_product(std::vector<Point> x0_points,
                                        std::vector<Point> xT_points) {
        if (x0_points.empty()) throw config_error("Coupling: empty x0 list");
        const std::size_t d = x0_points.front().size();
        for (const auto& p : x0_points) require_dim(p, d, "Coupling x0 point");
        for (const auto& p : xT_points) require_dim(p, d, "Coupling xT point");
        Coupling c;
        c.mode_ = CouplingMode::IndependentProduct;
        c.x0_points_ = std::move(x0_points);
        c.xT_points_ = std::move(xT_points);
        c.dim_ = d;
        return c;
    }

    CouplingMode mode() const { return mode_; }
    std::size_t dim() const { return dim_; }

    // Number of listed pairs (explicit mode) or of x0 points (product mode);
    // used as the without-replacement budget for multi-sample draws.
    std::size_t size() const {
        return mode_ == CouplingMode::ExplicitPairs ? pairs_.size() : x0_points_.size();
    }

    const std::vector<EndpointPair>& pairs() const { return pairs_; }
    const std::vector<Point>& x0_points() const { return x0_points_; }
    const std::vector<Point>& xT_points() const { return xT_points_; }

    // Pair with a given index under explicit mode.
    const EndpointPair& pair(std::size_t i) const { return pairs_.at(i); }

  private:
    Coupling() = default;
    CouplingMode mode_ = CouplingMode::ExplicitPairs;
    std::vector<EndpointPair> pairs_;
    std::vector<Point> x0_points_;
    std::vector<Point> xT_points_;
    std::size_t dim_ = 0;
};

// One coupling draw. Explicit mode consumes one integer draw; product mode
// consumes one for the x0 side and, if xT points exist, one for the xT side.
inline EndpointPair sample_pair(const Coupling& c, RngStream& rng) {
    if (c.mode() == CouplingMode::ExplicitPairs) {
        return c.pairs()[rng.below(c.pairs().size())];
    }
    EndpointPair p;
    p.x0 = c.x0_points()[rng.below(c.x0_points().size())];
    if (!c.xT_points().empty()) p.xT = c.xT_points()[rng.below(c.xT_points().size())];
    return p;
}

// Standard normal vector in R^dim; consumes exactly 2*dim uniforms.
inline Point gaussian_draw(RngStream& rng, std::size_t dim) {
    Point z(dim);
    for (std::size_t i = 0; i < dim; ++i) z[i] = rng.normal();
    return z;
}

} // namespace flowfield
