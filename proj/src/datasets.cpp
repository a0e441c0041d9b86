#include "flowfield/datasets.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace flowfield {

namespace {
constexpr double PI = 3.14159265358979323846;
}

const char* to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::GaussianMixture: return "gaussian-mixture";
        case DatasetKind::TwoMoons: return "two-moons";
        case DatasetKind::Checkerboard: return "checkerboard";
        case DatasetKind::SinglePoint: return "single-point";
    }
    return "unknown";
}

const char* dataset_kind_names() {
    return "gaussian-mixture, two-moons, checkerboard, single-point";
}

DatasetKind dataset_kind_from_string(const std::string& name) {
    if (name == "gaussian-mixture") return DatasetKind::GaussianMixture;
    if (name == "two-moons") return DatasetKind::TwoMoons;
    if (name == "checkerboard") return DatasetKind::Checkerboard;
    if (name == "single-point") return DatasetKind::SinglePoint;
    throw config_error("unknown dataset kind '" + name + "'; valid kinds: " + dataset_kind_names());
}

void DatasetSpec::validate() const {
    if (dim < 1) throw config_error("dataset spec: dim must be >= 1");
    switch (kind) {
        case DatasetKind::GaussianMixture: {
            const std::size_t k = mixture.means.size();
            if (k == 0) throw config_error("gaussian-mixture: needs at least one component");
            if (mixture.stds.size() != k || mixture.weights.size() != k) {
                throw config_error("gaussian-mixture: means/stds/weights sizes must match");
            }
            double sum = 0.0;
            for (double w : mixture.weights) {
                if (w < 0.0) throw config_error("gaussian-mixture: weights must be nonnegative");
                sum += w;
            }
            if (!(sum > 0.0)) throw config_error("gaussian-mixture: weights must not all vanish");
            for (std::size_t i = 0; i < k; ++i) {
                require_dim(mixture.means[i], static_cast<std::size_t>(dim), "mixture mean");
                require_dim(mixture.stds[i], static_cast<std::size_t>(dim), "mixture std");
                for (double s : mixture.stds[i]) {
                    if (!(s >= 0.0)) throw config_error("gaussian-mixture: stds must be >= 0");
                }
            }
            break;
        }
        case DatasetKind::TwoMoons:
            if (dim != 2) throw config_error("two-moons: defined for dim = 2 only");
            if (!(moons_radius > 0.0)) throw config_error("two-moons: radius must be positive");
            if (moons_noise < 0.0) throw config_error("two-moons: noise must be >= 0");
            break;
        case DatasetKind::Checkerboard:
            if (dim != 2) throw config_error("checkerboard: defined for dim = 2 only");
            if (checker_cells < 2) throw config_error("checkerboard: needs >= 2 cells per axis");
            if (!(checker_extent > 0.0)) throw config_error("checkerboard: extent must be positive");
            break;
        case DatasetKind::SinglePoint:
            require_dim(point, static_cast<std::size_t>(dim), "single-point location");
            break;
    }
}

DatasetSpec dataset_preset(DatasetKind kind, int dim) {
    DatasetSpec spec;
    spec.kind = kind;
    spec.dim = kind == DatasetKind::TwoMoons || kind == DatasetKind::Checkerboard ? 2 : dim;
    switch (kind) {
        case DatasetKind::GaussianMixture: {
            Point m1(static_cast<std::size_t>(spec.dim), 0.0);
            Point m2 = m1;
            m1[0] = -1.5;
            m2[0] = 1.5;
            spec.mixture.means = {m1, m2};
            spec.mixture.stds = {Vec(static_cast<std::size_t>(spec.dim), 0.3),
                                 Vec(static_cast<std::size_t>(spec.dim), 0.3)};
            spec.mixture.weights = {0.5, 0.5};
            break;
        }
        case DatasetKind::TwoMoons:
        case DatasetKind::Checkerboard:
            break; // struct defaults
        case DatasetKind::SinglePoint:
            spec.point = Point(static_cast<std::size_t>(spec.dim), 0.0);
            break;
    }
    return spec;
}

std::vector<Point> make_dataset(const DatasetSpec& spec, int n, RngStream& rng) {
    spec.validate();
    if (n < 0) throw config_error("make_dataset: n must be >= 0");
    std::vector<Point> out;
    out.reserve(static_cast<std::size_t>(n));

    switch (spec.kind) {
        case DatasetKind::GaussianMixture: {
            double total = 0.0;
            for (double w : spec.mixture.weights) total += w;
            for (int i = 0; i < n; ++i) {
                // Inverse-CDF component pick, one uniform per point.
                double u = rng.uniform() * total;
                std::size_t c = 0;
                while (c + 1 < spec.mixture.weights.size() && u >= spec.mixture.weights[c]) {
                    u -= spec.mixture.weights[c];
                    ++c;
                }
                Point x = spec.mixture.means[c];
                const Point z = gaussian_draw(rng, x.size());
                for (std::size_t k = 0; k < x.size(); ++k) x[k] += spec.mixture.stds[c][k] * z[k];
                out.push_back(std::move(x));
            }
            break;
        }
        case DatasetKind::TwoMoons: {
            for (int i = 0; i < n; ++i) {
                const bool upper = rng.below(2) == 0;
                const double theta = PI * rng.uniform();
                const double r = spec.moons_radius;
                Point x(2);
                if (upper) {
                    x[0] = r * std::cos(theta);
                    x[1] = r * std::sin(theta);
                } else {
                    x[0] = r - r * std::cos(theta);
                    x[1] = 0.5 * r - r * std::sin(theta);
                }
                x[0] += spec.moons_noise * rng.normal();
                x[1] += spec.moons_noise * rng.normal();
                out.push_back(std::move(x));
            }
            break;
        }
        case DatasetKind::Checkerboard: {
            // Cells with even (i+j) parity are occupied; pick one uniformly,
            // then place the point uniformly inside it.
            const int cells = spec.checker_cells;
            std::vector<std::pair<int, int>> occupied;
            for (int i = 0; i < cells; ++i) {
                for (int j = 0; j < cells; ++j) {
                    if ((i + j) % 2 == 0) occupied.emplace_back(i, j);
                }
            }
            const double cell = spec.checker_extent / cells;
            const double lo = -0.5 * spec.checker_extent;
            for (int k = 0; k < n; ++k) {
                const auto [i, j] = occupied[rng.below(occupied.size())];
                Point x(2);
                x[0] = lo + (i + rng.uniform()) * cell;
                x[1] = lo + (j + rng.uniform()) * cell;
                out.push_back(std::move(x));
            }
            break;
        }
        case DatasetKind::SinglePoint:
            out.assign(static_cast<std::size_t>(n), spec.point);
            break;
    }
    return out;
}

void write_dataset_csv(std::ostream& os, const std::vector<Point>& points) {
    const std::size_t D = points.empty() ? 0 : points.front().size();
    for (std::size_t k = 1; k <= D; ++k) os << (k == 1 ? "" : ",") << "x_" << k;
    os << "\n";
    char buf[32];
    for (const auto& p : points) {
        for (std::size_t k = 0; k < p.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", p[k]);
            if (k) os << ',';
            os << buf;
        }
        os << "\n";
    }
}

} // namespace flowfield
