#pragma once

#include <cstddef>
#include <vector>

namespace darnwalk {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

GaussRule gauss_legendre(std::size_t n);

/// Cubature for the normalized surface measure on the unit sphere S^{dim-1}.
/// Product rule in hyperspherical angles: Gauss-Gegenbauer in the cosine of
/// each polar angle, equispaced azimuth. Exact for polynomials of degree below
/// the number of polar nodes per level.
struct SphereRule {
    std::size_t dim = 0;
    std::vector<double> nodes;  // row-major, size() * dim
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
    const double* node(std::size_t i) const { return nodes.data() + i * dim; }
};

/// Rule with roughly `approx_points` nodes (never fewer than 2).
SphereRule sphere_rule(std::size_t dim, std::size_t approx_points);

}  // namespace darnwalk
