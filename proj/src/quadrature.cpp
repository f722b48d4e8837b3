#include "darnwalk/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "darnwalk/errors.hpp"

namespace darnwalk {

GaussRule gauss_legendre(std::size_t n)
{
    if (n == 0)
        throw PreconditionError("gauss_legendre: need at least one node");
    GaussRule rule{std::vector<double>(n), std::vector<double>(n)};
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
        // Newton iteration from the Chebyshev-like initial guess.
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) {
                p1 = x;
                p0 = 1.0;
            }
            dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    if (n % 2 == 1)
        rule.nodes[n / 2] = 0.0;
    return rule;
}

namespace {

// Gauss rule for the weight (1 - t^2)^(lambda - 1/2) on [-1, 1] (unnormalized
// weights): eigenvalues of the Jacobi matrix by Sturm bisection, weights from
// the Christoffel function.
GaussRule gauss_gegenbauer(std::size_t n, double lambda)
{
    std::vector<double> b(n, 0.0);  // b[k] couples degrees k-1 and k
    for (std::size_t k = 1; k < n; ++k) {
        const double kk = static_cast<double>(k);
        b[k] = std::sqrt(kk * (kk + 2.0 * lambda - 1.0) / (4.0 * (kk + lambda) * (kk + lambda - 1.0)));
    }
    auto count_below = [&](double x) {
        std::size_t count = 0;
        double q = -x;
        for (std::size_t k = 0; k < n; ++k) {
            if (k > 0)
                q = -x - b[k] * b[k] / q;
            if (q == 0.0)
                q = -1e-300;
            if (q < 0.0)
                ++count;
        }
        return count;
    };
    GaussRule rule{std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        double lo = -1.0, hi = 1.0;
        for (int iter = 0; iter < 200 && hi - lo > 1e-17; ++iter) {
            const double mid = 0.5 * (lo + hi);
            (count_below(mid) > i ? hi : lo) = mid;
        }
        const double x = 0.5 * (lo + hi);
        double q_prev = 0.0, q = 1.0, sum = 1.0;
        for (std::size_t k = 1; k < n; ++k) {
            const double next = (x * q - b[k - 1] * q_prev) / b[k];
            q_prev = q;
            q = next;
            sum += q * q;
        }
        rule.nodes[i] = x;
        rule.weights[i] = 1.0 / sum;
    }
    for (std::size_t i = 0; i < n / 2; ++i) {
        const double x = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = rule.weights[n - 1 - i] = 0.5 * (rule.weights[i] + rule.weights[n - 1 - i]);
    }
    if (n % 2 == 1)
        rule.nodes[n / 2] = 0.0;
    return rule;
}

// Normalized product rule on S^{dim-1} with `polar` nodes per polar angle.
void build(std::size_t dim, std::size_t polar, std::vector<double>& nodes, std::vector<double>& weights)
{
    if (dim == 1) {
        nodes = {-1.0, 1.0};
        weights = {0.5, 0.5};
        return;
    }
    if (dim == 2) {
        const std::size_t m = 2 * polar;
        nodes.resize(2 * m);
        weights.assign(m, 1.0 / static_cast<double>(m));
        for (std::size_t k = 0; k < m; ++k) {
            const double phi = 2.0 * std::numbers::pi * (static_cast<double>(k) + 0.5) / static_cast<double>(m);
            nodes[2 * k] = std::cos(phi);
            nodes[2 * k + 1] = std::sin(phi);
        }
        return;
    }
    std::vector<double> sub_nodes, sub_weights;
    build(dim - 1, polar, sub_nodes, sub_weights);
    // t = cos(theta) carries the weight (1 - t^2)^((dim - 3) / 2)
    const GaussRule g = gauss_gegenbauer(polar, 0.5 * static_cast<double>(dim - 2));
    const std::size_t sub_count = sub_weights.size();
    nodes.clear();
    weights.clear();
    nodes.reserve(polar * sub_count * dim);
    weights.reserve(polar * sub_count);
    double total = 0.0;
    for (std::size_t i = 0; i < polar; ++i) {
        const double c = g.nodes[i], s = std::sqrt(std::max(0.0, 1.0 - c * c));
        for (std::size_t j = 0; j < sub_count; ++j) {
            nodes.push_back(c);
            for (std::size_t k = 0; k < dim - 1; ++k)
                nodes.push_back(s * sub_nodes[j * (dim - 1) + k]);
            weights.push_back(g.weights[i] * sub_weights[j]);
            total += g.weights[i] * sub_weights[j];
        }
    }
    for (double& w : weights)
        w /= total;
}

}  // namespace

SphereRule sphere_rule(std::size_t dim, std::size_t approx_points)
{
    if (dim == 0)
        throw PreconditionError("sphere_rule: dimension must be at least 1");
    SphereRule rule;
    rule.dim = dim;
    std::size_t polar = 1;
    if (dim >= 2) {
        const double per_level = std::pow(std::max<double>(2.0, static_cast<double>(approx_points)) / 2.0,
                                          1.0 / static_cast<double>(dim - 1));
        polar = static_cast<std::size_t>(std::ceil(per_level));
        if (polar % 2 == 1)
            ++polar;  // keeps the rule antipodally symmetric
    }
    build(dim, polar, rule.nodes, rule.weights);
    return rule;
}

}  // namespace darnwalk
