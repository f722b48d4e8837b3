#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "darnwalk/parallel.hpp"
#include "darnwalk/rng.hpp"

namespace darnwalk::stats {

/// Mean of i.i.d. draws with its standard error.
struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

/// Summation runs in index order so identical inputs give identical bits.
MeanEstimate mean_estimate(std::span<const double> values);

inline double binomial_std_error(double p, std::size_t n)
{
    return n == 0 ? 0.0 : std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

/// Two-sided p-value of a standard-normal statistic.
double normal_two_sided_p(double z);

/// Kolmogorov distribution tail P(K > lambda).
double kolmogorov_tail(double lambda);

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against a continuous CDF
/// (asymptotic p-value with the Stephens small-sample correction).
TestResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf);

/// Rows of equal-length points stored contiguously.
struct PointCloud {
    std::size_t dim = 0;
    std::vector<double> data;

    std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
    const double* row(std::size_t i) const { return data.data() + i * dim; }
    void push(std::span<const double> p) { data.insert(data.end(), p.begin(), p.end()); }
};

/// Energy distance V-statistic 2E|X-Y| - E|X-X'| - E|Y-Y'| between two clouds.
double energy_distance(const PointCloud& x, const PointCloud& y);

/// Energy distance U-statistic (within-sample terms exclude the diagonal), evaluated
/// through the exact identity |v| = E|<theta, v>| / E|theta_1| over random directions.
/// Unbiased for the population distance; O(M (n+m) log(n+m)) for M directions.
double projected_energy_distance(const PointCloud& x, const PointCloud& y,
                                 std::size_t directions, const StreamKey& key);

/// Energy distance U-statistic for coupled samples: row i of x is paired with row i
/// of y and every term with a repeated index is dropped, so the estimate stays
/// unbiased while the coupling cancels most of its variance. `directions` = 0
/// evaluates the Euclidean kernel directly in O(n^2).
double paired_energy_distance(const PointCloud& x, const PointCloud& y, std::size_t directions,
                              const StreamKey& key);

struct EnergyTestOptions {
    std::size_t permutations = 200;
    /// Each sample is thinned to at most this many points by an even stride.
    std::size_t max_points = 1000;
};

/// Permutation two-sample test on the energy statistic. The p-value is
/// (1 + #{permuted >= observed}) / (1 + permutations).
TestResult energy_test(const PointCloud& x, const PointCloud& y, const StreamKey& key,
                       const EnergyTestOptions& options = {});

/// Evenly strided subsample of at most `max_points` rows.
PointCloud thin(const PointCloud& cloud, std::size_t max_points);

}  // namespace darnwalk::stats
