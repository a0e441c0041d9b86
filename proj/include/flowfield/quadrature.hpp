#pragma once

// Gauss-Legendre rules on [-1, 1] plus interval/disk helpers used by the flux
// quadratures and the density normalization checks.

#include <functional>
#include <vector>

namespace flowfield {

struct QuadratureRule {
    std::vector<double> nodes;   // on [-1, 1]
    std::vector<double> weights; // sum to 2
};

// Nodes/weights by Newton iteration on the Legendre recurrence; n up to a few
// thousand is fine.
QuadratureRule gauss_legendre(int n);

// Integral of f over [a, b] with an n-point rule.
double integrate_interval(const std::function<double(double)>& f, double a, double b, int n);

// Integral of f over the disk of given radius centered at (cx, cy), as a polar
// product rule (n_r radial Gauss points x n_theta uniform angles).
double integrate_disk(const std::function<double(double, double)>& f, double cx, double cy,
                      double radius, int n_r, int n_theta);

} // namespace flowfield
