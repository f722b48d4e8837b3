#include "darnwalk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "darnwalk/errors.hpp"
#include "darnwalk/vecmath.hpp"

namespace darnwalk::stats {

MeanEstimate mean_estimate(std::span<const double> values)
{
    MeanEstimate out;
    out.n = values.size();
    if (values.empty())
        return out;
    // Neumaier summation of deviations from the first value, so a constant
    // sample averages back to exactly that value.
    auto compensated = [&](auto term) {
        double sum = 0.0, carry = 0.0;
        for (double v : values) {
            const double x = term(v);
            const double t = sum + x;
            carry += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
            sum = t;
        }
        return sum + carry;
    };
    const double shift = values[0];
    out.mean = shift + compensated([&](double v) { return v - shift; }) / static_cast<double>(out.n);
    if (out.n > 1) {
        const double ss = compensated([&](double v) { return (v - out.mean) * (v - out.mean); });
        out.std_error = std::sqrt(ss / static_cast<double>(out.n - 1) / static_cast<double>(out.n));
    }
    return out;
}

double normal_two_sided_p(double z)
{
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

double kolmogorov_tail(double lambda)
{
    if (lambda <= 0.0)
        return 1.0;
    if (lambda < 0.2)
        return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-17)
            break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

TestResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf)
{
    if (sample.empty())
        throw PreconditionError("ks_test: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    const double sqrt_n = std::sqrt(n);
    return {d, kolmogorov_tail((sqrt_n + 0.12 + 0.11 / sqrt_n) * d)};
}

namespace {

double row_distance(const double* a, const double* b, std::size_t dim)
{
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return std::sqrt(s);
}

void require_compatible(const PointCloud& x, const PointCloud& y)
{
    if (x.size() == 0 || y.size() == 0)
        throw PreconditionError("energy statistic needs two non-empty samples");
    if (x.dim != y.dim)
        throw PreconditionError("energy statistic: samples differ in dimension");
}

// Sum over i<j of |v_i - v_j| for sorted v.
double sorted_pair_sum(const std::vector<double>& v)
{
    const double n = static_cast<double>(v.size());
    double s = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k)
        s += v[k] * (2.0 * static_cast<double>(k) - n + 1.0);
    return s;
}

// Sum over (i, j) of |a_i - b_j| for sorted a, b.
double sorted_cross_sum(const std::vector<double>& a, const std::vector<double>& b)
{
    const double total_b = std::accumulate(b.begin(), b.end(), 0.0);
    double below = 0.0;  // sum of b_j <= current a_i
    std::size_t j = 0;
    double s = 0.0;
    const double m = static_cast<double>(b.size());
    for (double ai : a) {
        while (j < b.size() && b[j] <= ai)
            below += b[j++];
        const double cnt = static_cast<double>(j);
        s += ai * cnt - below + (total_b - below) - ai * (m - cnt);
    }
    return s;
}

}  // namespace

double energy_distance(const PointCloud& x, const PointCloud& y)
{
    require_compatible(x, y);
    const std::size_t n = x.size(), m = y.size();
    double xy = 0.0, xx = 0.0, yy = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            xy += row_distance(x.row(i), y.row(j), x.dim);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            xx += row_distance(x.row(i), x.row(j), x.dim);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            yy += row_distance(y.row(i), y.row(j), y.dim);
    const double dn = static_cast<double>(n), dm = static_cast<double>(m);
    return 2.0 * xy / (dn * dm) - 2.0 * xx / (dn * dn) - 2.0 * yy / (dm * dm);
}

double projected_energy_distance(const PointCloud& x, const PointCloud& y,
                                 std::size_t directions, const StreamKey& key)
{
    require_compatible(x, y);
    if (x.size() < 2 || y.size() < 2)
        throw PreconditionError("projected energy distance needs at least two points per sample");
    const std::size_t dim = x.dim;
    // E|theta_1| for theta uniform on S^{dim-1}.
    const double kappa = std::exp(std::lgamma(dim / 2.0) - std::lgamma((dim + 1) / 2.0)) /
                         std::sqrt(std::numbers::pi);
    const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());

    std::vector<double> px(x.size()), py(y.size());
    Vec theta(dim);
    double acc = 0.0;
    for (std::size_t d = 0; d < directions; ++d) {
        Stream rng = key.stream(d);
        random_direction(dim, rng, theta.data());
        auto project = [&](const PointCloud& c, std::vector<double>& out) {
            for (std::size_t i = 0; i < c.size(); ++i) {
                const double* r = c.row(i);
                double s = 0.0;
                for (std::size_t k = 0; k < dim; ++k)
                    s += r[k] * theta[k];
                out[i] = s;
            }
            std::sort(out.begin(), out.end());
        };
        project(x, px);
        project(y, py);
        acc += 2.0 * sorted_cross_sum(px, py) / (n * m) - 2.0 * sorted_pair_sum(px) / (n * (n - 1)) -
               2.0 * sorted_pair_sum(py) / (m * (m - 1));
    }
    return acc / static_cast<double>(directions) / kappa;
}

double paired_energy_distance(const PointCloud& x, const PointCloud& y, std::size_t directions,
                              const StreamKey& key)
{
    require_compatible(x, y);
    const std::size_t count = x.size();
    if (count != y.size())
        throw PreconditionError("paired energy distance needs samples of equal size");
    if (count < 2)
        throw PreconditionError("paired energy distance needs at least two pairs");
    const std::size_t dim = x.dim;
    const double n = static_cast<double>(count);
    if (directions == 0) {
        double acc = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            const double *xi = x.row(i), *yi = y.row(i);
            double row = 0.0;
            for (std::size_t j = i + 1; j < count; ++j) {
                const double *xj = x.row(j), *yj = y.row(j);
                row += row_distance(xi, yj, dim) + row_distance(xj, yi, dim) - row_distance(xi, xj, dim) -
                       row_distance(yi, yj, dim);
            }
            acc += row;
        }
        return 2.0 * acc / (n * (n - 1));
    }
    const double kappa = std::exp(std::lgamma(dim / 2.0) - std::lgamma((dim + 1) / 2.0)) /
                         std::sqrt(std::numbers::pi);

    std::vector<double> px(count), py(count);
    Vec theta(dim);
    double acc = 0.0;
    for (std::size_t d = 0; d < directions; ++d) {
        Stream rng = key.stream(d);
        random_direction(dim, rng, theta.data());
        double diagonal = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            double a = 0.0, b = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                a += x.row(i)[k] * theta[k];
                b += y.row(i)[k] * theta[k];
            }
            px[i] = a;
            py[i] = b;
            diagonal += std::abs(a - b);
        }
        std::sort(px.begin(), px.end());
        std::sort(py.begin(), py.end());
        acc += (2.0 * (sorted_cross_sum(px, py) - diagonal) - 2.0 * sorted_pair_sum(px) - 2.0 * sorted_pair_sum(py)) /
               (n * (n - 1));
    }
    return acc / static_cast<double>(directions) / kappa;
}

PointCloud thin(const PointCloud& cloud, std::size_t max_points)
{
    const std::size_t n = cloud.size();
    if (n <= max_points)
        return cloud;
    PointCloud out{cloud.dim, {}};
    out.data.reserve(max_points * cloud.dim);
    for (std::size_t k = 0; k < max_points; ++k) {
        const std::size_t i = k * n / max_points;
        out.push({cloud.row(i), cloud.dim});
    }
    return out;
}

TestResult energy_test(const PointCloud& x_in, const PointCloud& y_in, const StreamKey& key,
                       const EnergyTestOptions& options)
{
    require_compatible(x_in, y_in);
    const PointCloud x = thin(x_in, options.max_points);
    const PointCloud y = thin(y_in, options.max_points);
    const std::size_t n = x.size(), m = y.size(), total = n + m;

    std::vector<double> dist(total * total, 0.0);
    auto pooled_row = [&](std::size_t i) { return i < n ? x.row(i) : y.row(i - n); };
    for (std::size_t i = 0; i < total; ++i)
        for (std::size_t j = i + 1; j < total; ++j) {
            const double d = row_distance(pooled_row(i), pooled_row(j), x.dim);
            dist[i * total + j] = d;
            dist[j * total + i] = d;
        }

    // With labels fixed, the statistic is an affine function of the within-group
    // sums; compute it directly from the label vector.
    std::vector<unsigned char> label(total, 0);
    for (std::size_t i = n; i < total; ++i)
        label[i] = 1;
    const double dn = static_cast<double>(n), dm = static_cast<double>(m);
    auto statistic = [&]() {
        double xx = 0.0, yy = 0.0, xy = 0.0;
        for (std::size_t i = 0; i < total; ++i) {
            const double* row = dist.data() + i * total;
            const unsigned char li = label[i];
            for (std::size_t j = i + 1; j < total; ++j) {
                if (li != label[j])
                    xy += row[j];
                else if (li == 0)
                    xx += row[j];
                else
                    yy += row[j];
            }
        }
        return 2.0 * xy / (dn * dm) - 2.0 * xx / (dn * dn) - 2.0 * yy / (dm * dm);
    };

    TestResult out;
    out.statistic = statistic();
    Stream rng = key.stream(0);
    std::size_t exceed = 0;
    for (std::size_t p = 0; p < options.permutations; ++p) {
        for (std::size_t i = total - 1; i > 0; --i)
            std::swap(label[i], label[rng.below(i + 1)]);
        if (statistic() >= out.statistic)
            ++exceed;
    }
    out.p_value = (1.0 + static_cast<double>(exceed)) / (1.0 + static_cast<double>(options.permutations));
    out.statistic *= dn * dm / (dn + dm);
    return out;
}

}  // namespace darnwalk::stats
