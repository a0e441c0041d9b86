#pragma once

// Deterministic toy datasets used as endpoint distributions.

#include <iosfwd>
#include <string>
#include <vector>

#include "flowfield/core.hpp"

namespace flowfield {

enum class DatasetKind {
    GaussianMixture, // explicit means / diagonal stds / weights
    TwoMoons,        // D = 2, interleaved half circles
    Checkerboard,    // D = 2, alternating cells of a square grid
    SinglePoint,     // a point mass
};

const char* to_string(DatasetKind k);
DatasetKind dataset_kind_from_string(const std::string& name);
const char* dataset_kind_names();

struct GaussianMixtureParams {
    std::vector<Point> means;
    std::vector<Vec> stds;          // per-component diagonal scales
    std::vector<double> weights;    // nonnegative, normalized internally
};

struct DatasetSpec {
    DatasetKind kind = DatasetKind::GaussianMixture;
    int dim = 2;
    GaussianMixtureParams mixture;
    double moons_radius = 1.0;
    double moons_noise = 0.05;
    int checker_cells = 4;      // cells per axis
    double checker_extent = 4.0; // board spans [-extent/2, extent/2]^2
    Point point;                // SinglePoint location

    void validate() const;
};

// Factory presets matching the CLI dataset names. dim applies to
// gaussian-mixture (symmetric two-component) and single-point.
DatasetSpec dataset_preset(DatasetKind kind, int dim);

std::vector<Point> make_dataset(const DatasetSpec& spec, int n, RngStream& rng);

// CSV: header "x_1,...,x_D", one row per point, %.17g.
void write_dataset_csv(std::ostream& os, const std::vector<Point>& points);

} // namespace flowfield
