#include "flowfield/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace flowfield {

QuadratureRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double pi = 3.14159265358979323846;
    // Roots come in +- pairs; solve the upper half and mirror.
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Tricomi-style initial guess, then Newton on P_n.
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            // Legendre recurrence: (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}.
            double p0 = 1.0, p1 = x;
            for (int k = 1; k < n; ++k) {
                const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

double integrate_interval(const std::function<double(double)>& f, double a, double b, int n) {
    const QuadratureRule rule = gauss_legendre(n);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (b + a);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        s += rule.weights[i] * f(mid + half * rule.nodes[i]);
    }
    return half * s;
}

double integrate_disk(const std::function<double(double, double)>& f, double cx, double cy,
                      double radius, int n_r, int n_theta) {
    const QuadratureRule radial = gauss_legendre(n_r);
    const double pi = 3.14159265358979323846;
    double s = 0.0;
    for (int i = 0; i < n_r; ++i) {
        const double r = 0.5 * radius * (radial.nodes[i] + 1.0);
        const double wr = 0.5 * radius * radial.weights[i];
        double ring = 0.0;
        for (int j = 0; j < n_theta; ++j) {
            const double theta = 2.0 * pi * (j + 0.5) / n_theta;
            ring += f(cx + r * std::cos(theta), cy + r * std::sin(theta));
        }
        ring *= 2.0 * pi / n_theta;
        s += wr * r * ring;
    }
    return s;
}

} // namespace flowfield
