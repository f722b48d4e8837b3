#include <doctest.h>

#include <cmath>

#include "darnwalk/errors.hpp"
#include "darnwalk/kernels.hpp"
#include "darnwalk/measures.hpp"
#include "darnwalk/stats.hpp"

using namespace darnwalk;

namespace {

Configuration ref()
{
    return Configuration({{0, 2, {0, 0}, 1, 2, Orientation::outward}, {1, 3, {0, 0, 0}, 1, 2, Orientation::outward}},
                         {0.4, 0.6});
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("annulus walks reach the outer sphere with probability g")
{
    // gambler's-ruin formula in the radial potential, written out per dimension
    auto exact = [](int dim, double a, double b, double rho) {
        if (dim == 2)
            return std::log(rho / a) / std::log(b / a);
        const double p = 2.0 - dim;
        return (std::pow(a, p) - std::pow(rho, p)) / (std::pow(a, p) - std::pow(b, p));
    };
    for (int dim : {2, 3}) {
        AnnulusWalk w{Vec(dim, 0.0), dim, 1.0, 1.6, 1e-4, 1000000};
        Vec start(dim, 0.0);
        start[0] = 1.25;
        const int n = 20000;
        int outer = 0;
        for (int i = 0; i < n; ++i) {
            Stream rng = StreamKey(dim).stream(i);
            const auto e = walk_annulus(w, start, rng);
            if (e.side == ExitSample::Side::outer) {
                ++outer;
                CHECK(std::abs(norm(e.point) - 1.6) < 1e-12);
            }
        }
        const double p = exact(dim, 1.0, 1.6, 1.25);
        CHECK(std::abs(double(outer) / n - p) < 3.5 * std::sqrt(p * (1 - p) / n));
    }
}

TEST_CASE("walker reports steps and time and enforces its budget")
{
    AnnulusWalker walker({{0, 0, 0}, 3, 1.0, 2.0, 1e-4, 100});
    const double start[3] = {1.5, 0, 0};
    double exit[3];
    std::size_t steps = 0;
    double elapsed = 0.0;
    Stream rng = StreamKey(1).stream(0);
    walker.run(start, rng, steps, elapsed, exit, 1000000);
    CHECK(steps > 0);
    CHECK(elapsed > 0.0);
    std::size_t s2 = 0;
    Stream rng2 = StreamKey(1).stream(0);
    CHECK_THROWS_AS(walker.run(start, rng2, s2, elapsed, exit, 1), NonConvergence);
}

TEST_CASE("ball walks from the center exit uniformly after one jump")
{
    const Vec c{1, 2, 3};
    std::vector<double> first;
    for (int i = 0; i < 5000; ++i) {
        Stream rng = StreamKey(3).stream(i);
        const auto e = walk_ball(c, 2.0, c, 1e-6, 1000, rng);
        CHECK(e.steps == 1);
        CHECK(e.elapsed == doctest::Approx(4.0 / 3.0));
        first.push_back((e.point[0] - c[0]) / 2.0);
    }
    CHECK(stats::ks_test(first, [](double x) { return (x + 1) / 2; }).p_value > 0.01);
}

TEST_CASE("off-center ball exits follow the Poisson kernel mean")
{
    // E[exit] = start for harmonic coordinates
    const Vec c{0, 0};
    const Vec start{0.6, 0};
    double sx = 0, sx2 = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        Stream rng = StreamKey(4).stream(i);
        const auto e = walk_ball(c, 1.0, start, 1e-6, 100000, rng);
        sx += e.point[0];
        sx2 += e.point[0] * e.point[0];
    }
    const double m = sx / n, sd = std::sqrt(sx2 / n - m * m);
    CHECK(std::abs(m - 0.6) < 4 * sd / std::sqrt(double(n)));
}

TEST_CASE("outer exit probability is g / t")
{
    const auto c = ref();
    const double rho = level_radius(c.shell(1), 0.2);
    CHECK(exit_outer_prob(c, 1, {rho, 0, 0}, 0.5) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK_THROWS_AS(exit_outer_prob(c, 1, {1.9, 0, 0}, 0.5), DomainError);
}

TEST_CASE("sampled annulus exits land on the level sphere")
{
    const auto c = ref();
    const double rho = level_radius(c.shell(0), 0.3);
    const double target = level_radius(c.shell(0), 0.6);
    int outer = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        Stream rng = StreamKey(5).stream(i);
        const auto e = sample_annulus_exit(c, 0, {0, rho}, 0.6, 1e-4, 1000000, rng);
        if (e.side == ExitSample::Side::outer) {
            ++outer;
            CHECK(norm(e.point) == doctest::Approx(target).epsilon(1e-12));
        }
    }
    CHECK(std::abs(outer / double(n) - 0.5) < 3.5 * std::sqrt(0.25 / n));
}

TEST_CASE("U_t kernel: sigma_t at x0, identity split elsewhere")
{
    const auto c = ref();
    const auto sigma = SphereMeasure::parametric(c, 0.5, {0.4, 0.6});
    const std::vector<BoundarySet> sets{level_sphere_set(c, 0), level_sphere_set(c, 1)};
    const auto at_x0 = exit_kernel_Ut(c, sigma, DarnedState::darned(), 0.5, sets, 0, StreamKey(1));
    CHECK(at_x0.at("shell 0").mass == doctest::Approx(0.4));
    CHECK(at_x0.at("shell 1").mass == doctest::Approx(0.6));
    CHECK(at_x0.n_samples == 0);

    const double rho = level_radius(c.shell(0), 0.2);
    const auto from_y = exit_kernel_Ut(c, sigma, DarnedState::at(0, {rho, 0}), 0.5, sets, 0, StreamKey(1));
    // g/t of the mass exits through S_{0,t}; the rest restarts from x0
    CHECK(from_y.at("shell 0").mass == doctest::Approx(0.4 + 0.6 * 0.4).epsilon(1e-12));
    CHECK(from_y.at("shell 1").mass == doctest::Approx(0.6 * 0.6).epsilon(1e-12));
    CHECK(from_y.total() == doctest::Approx(1.0));
}

TEST_CASE("push-forward carries mass r/t")
{
    const auto c = ref();
    const auto sigma = SphereMeasure::parametric(c, 0.25, {0.4, 0.6});
    const auto pf = push_forward(c, sigma, 0.5, 20000, StreamKey(8));
    CHECK(std::abs(pf.outer_mass - 0.5) < 3 * pf.outer_std_error);
    CHECK(pf.outer_mass + pf.inner_mass == doctest::Approx(1.0));
    CHECK(pf.outer.level() == 0.5);
}

TEST_CASE("systematic resampling keeps proportions")
{
    std::vector<Atom> atoms{{0, {1.0, 0.0}, 0.25}, {0, {0.0, 1.0}, 0.75}};
    Stream rng = StreamKey(1).stream(0);
    const auto out = systematic_resample(atoms, 100, rng);
    REQUIRE(out.size() == 100);
    int first = 0;
    for (const auto& a : out)
        first += a.point[0] == 1.0;
    CHECK(std::abs(first - 25) <= 1);
}

}
