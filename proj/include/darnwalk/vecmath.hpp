#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "darnwalk/rng.hpp"

namespace darnwalk {

using Vec = std::vector<double>;

inline double norm(const Vec& v)
{
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return std::sqrt(s);
}

inline double distance(const Vec& a, const Vec& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

/// Writes a uniformly distributed unit vector of the given dimension into `out`.
/// dim 1 gives +-1 with probability 1/2 each.
inline void random_direction(std::size_t dim, Stream& rng, double* out)
{
    switch (dim) {
    case 1:
        out[0] = (rng.next_u32() & 1u) ? 1.0 : -1.0;
        return;
    case 2: {
        // Normalized uniform point of the unit disk.
        double u, v, s;
        do {
            u = 2.0 * rng.uniform32() - 1.0;
            v = 2.0 * rng.uniform32() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        s = 1.0 / std::sqrt(s);
        out[0] = u * s;
        out[1] = v * s;
        return;
    }
    case 3: {
        // Marsaglia (1972).
        double u, v, s;
        do {
            u = 2.0 * rng.uniform32() - 1.0;
            v = 2.0 * rng.uniform32() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0);
        const double f = 2.0 * std::sqrt(1.0 - s);
        out[0] = u * f;
        out[1] = v * f;
        out[2] = 1.0 - 2.0 * s;
        return;
    }
    default: {
        double s = 0.0;
        do {
            s = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                out[i] = rng.normal();
                s += out[i] * out[i];
            }
        } while (s == 0.0);
        s = 1.0 / std::sqrt(s);
        for (std::size_t i = 0; i < dim; ++i)
            out[i] *= s;
    }
    }
}

inline Vec random_direction(std::size_t dim, Stream& rng)
{
    Vec v(dim);
    random_direction(dim, rng, v.data());
    return v;
}

}  // namespace darnwalk
