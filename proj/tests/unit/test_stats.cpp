#include <doctest.h>

#include <cmath>

#include "darnwalk/errors.hpp"
#include "darnwalk/stats.hpp"

using namespace darnwalk;
using namespace darnwalk::stats;

namespace {

PointCloud gaussian_cloud(std::size_t n, std::size_t dim, double shift, std::uint64_t seed)
{
    Stream rng = StreamKey(seed).stream(0);
    PointCloud c{dim, {}};
    for (std::size_t i = 0; i < n * dim; ++i)
        c.data.push_back(rng.normal() + (i % dim == 0 ? shift : 0.0));
    return c;
}

double dist(const PointCloud& c, std::size_t i, const PointCloud& d, std::size_t j)
{
    double s = 0.0;
    for (std::size_t k = 0; k < c.dim; ++k)
        s += (c.row(i)[k] - d.row(j)[k]) * (c.row(i)[k] - d.row(j)[k]);
    return std::sqrt(s);
}

// Direct O(n^2) U-statistic with every repeated-index term removed.
double paired_u(const PointCloud& x, const PointCloud& y)
{
    const std::size_t n = x.size();
    double cross = 0.0, xx = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j)
                continue;
            cross += dist(x, i, y, j);
            xx += dist(x, i, x, j);
            yy += dist(y, i, y, j);
        }
    const double pairs = double(n) * double(n - 1);
    return (2 * cross - xx - yy) / pairs;
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("mean of a constant sample is exact")
{
    std::vector<double> v(12345, 1.0 / 3.0);
    const auto m = mean_estimate(v);
    CHECK(m.mean == 1.0 / 3.0);
    CHECK(m.std_error == 0.0);
    CHECK(m.n == 12345);
}

TEST_CASE("mean and standard error match textbook formulas")
{
    std::vector<double> v{1, 2, 3, 4};
    const auto m = mean_estimate(v);
    CHECK(m.mean == doctest::Approx(2.5));
    CHECK(m.std_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
    CHECK(binomial_std_error(0.5, 100) == doctest::Approx(0.05));
    CHECK(normal_two_sided_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("Kolmogorov tail at known points")
{
    CHECK(kolmogorov_tail(1.3580986) == doctest::Approx(0.05).epsilon(1e-4));
    CHECK(kolmogorov_tail(1.6276236) == doctest::Approx(0.01).epsilon(1e-3));
    CHECK(kolmogorov_tail(0.0) == doctest::Approx(1.0));
}

TEST_CASE("KS test rejects a shifted sample")
{
    Stream rng = StreamKey(1).stream(0);
    std::vector<double> u(5000);
    for (auto& x : u)
        x = rng.uniform() * 0.9 + 0.1;
    CHECK(ks_test(u, [](double x) { return x; }).p_value < 1e-6);
}

TEST_CASE("projected energy distance agrees with the direct statistic")
{
    const auto x = gaussian_cloud(300, 3, 0.0, 1), y = gaussian_cloud(300, 3, 0.7, 2);
    const double direct = energy_distance(x, y);
    const double projected = projected_energy_distance(x, y, 4000, StreamKey(3));
    // V- and U-statistics differ by O(1/n) within-sample diagonal terms
    const double n = 300.0;
    double xx = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < 300; ++i)
        for (std::size_t j = 0; j < 300; ++j) {
            xx += dist(x, i, x, j);
            yy += dist(y, i, y, j);
        }
    const double u_direct = direct + xx / (n * n) + yy / (n * n) - xx / (n * (n - 1)) - yy / (n * (n - 1));
    CHECK(projected == doctest::Approx(u_direct).epsilon(0.02));
    CHECK(direct > 0.1);
}

TEST_CASE("paired energy distance matches the brute-force U-statistic")
{
    const auto x = gaussian_cloud(200, 2, 0.0, 4);
    auto y = x;
    Stream rng = StreamKey(5).stream(0);
    for (auto& v : y.data)
        v += 0.05 * rng.normal();
    CHECK(paired_energy_distance(x, y, 0, StreamKey(0)) == doctest::Approx(paired_u(x, y)).epsilon(1e-10));
    const double projected = paired_energy_distance(x, y, 20000, StreamKey(6));
    CHECK(std::abs(projected - paired_u(x, y)) < 2e-4);
    CHECK_THROWS_AS(paired_energy_distance(x, gaussian_cloud(10, 2, 0, 1), 8, StreamKey(0)), PreconditionError);
}

TEST_CASE("energy permutation test")
{
    const auto x = gaussian_cloud(400, 2, 0.0, 7), same = gaussian_cloud(400, 2, 0.0, 8),
               shifted = gaussian_cloud(400, 2, 0.5, 9);
    const auto null_result = energy_test(x, same, StreamKey(10));
    const auto alt = energy_test(x, shifted, StreamKey(10));
    CHECK(null_result.p_value > 0.01);
    CHECK(alt.p_value == doctest::Approx(1.0 / 201.0));
    CHECK(alt.statistic > null_result.statistic);
}

TEST_CASE("thinning keeps an even stride")
{
    PointCloud c{1, {}};
    for (int i = 0; i < 10; ++i)
        c.data.push_back(i);
    const auto t = thin(c, 5);
    REQUIRE(t.size() == 5);
    CHECK(t.row(1)[0] == 2.0);
    CHECK(thin(c, 20).size() == 10);
}

}
