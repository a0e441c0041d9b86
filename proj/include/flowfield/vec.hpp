#pragma once

// Small dense-vector helpers on std::vector<double>. Dimensions are validated
// before any arithmetic; mixed-dimension operands raise dimension_error.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "flowfield/errors.hpp"

namespace flowfield {

using Vec = std::vector<double>;

inline void require_same_dim(const Vec& a, const Vec& b, const char* what) {
    if (a.size() != b.size()) {
        throw dimension_error(std::string(what) + ": dimensions " +
                              std::to_string(a.size()) + " and " +
                              std::to_string(b.size()) + " do not match");
    }
}

inline void require_dim(const Vec& a, std::size_t d, const char* what) {
    if (a.size() != d) {
        throw dimension_error(std::string(what) + ": expected dimension " +
                              std::to_string(d) + ", got " + std::to_string(a.size()));
    }
}

inline Vec add(const Vec& a, const Vec& b) {
    require_same_dim(a, b, "add");
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec sub(const Vec& a, const Vec& b) {
    require_same_dim(a, b, "sub");
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec scale(double c, const Vec& a) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = c * a[i];
    return r;
}

// r += c*a
inline void axpy(double c, const Vec& a, Vec& r) {
    require_same_dim(a, r, "axpy");
    for (std::size_t i = 0; i < a.size(); ++i) r[i] += c * a[i];
}

inline double dot(const Vec& a, const Vec& b) {
    require_same_dim(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return dot(a, a); }

inline double norm(const Vec& a) { return std::sqrt(norm2(a)); }

inline double dist2(const Vec& a, const Vec& b) {
    require_same_dim(a, b, "dist2");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double dist(const Vec& a, const Vec& b) { return std::sqrt(dist2(a, b)); }

inline Vec zeros(std::size_t d) { return Vec(d, 0.0); }

} // namespace flowfield
