#include <doctest.h>

#include <cmath>

#include "darnwalk/errors.hpp"
#include "darnwalk/geometry.hpp"
#include "oracles.hpp"

using namespace darnwalk;

namespace {

Configuration ref()
{
    return Configuration({{0, 2, {0, 0}, 1, 2, Orientation::outward}, {1, 3, {0, 0, 0}, 1, 2, Orientation::outward}},
                         {0.4, 0.6});
}

std::string violated(const std::function<void()>& f)
{
    try {
        f();
    } catch (const InvariantViolation& e) {
        return e.constraint();
    }
    return "";
}

CompactPiece ball(int dim, double r)
{
    return {0, dim, Vec(dim, 0.0), CompactPiece::Kind::ball, 0.0, r};
}

CompactPiece shell(int dim, double a, double b)
{
    return {0, dim, Vec(dim, 0.0), CompactPiece::Kind::shell, a, b};
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("level function agrees with the finite-difference solution")
{
    for (int dim : {1, 2, 3, 5})
        for (auto [a, b, o] : {std::tuple{1.0, 2.0, Orientation::outward}, std::tuple{2.0, 0.5, Orientation::inward}}) {
            const Shell s{0, dim, Vec(dim, 0.0), a, b, o};
            const oracle::RadialFd fd(dim, a, b, 100001);
            double worst = 0.0;
            for (int i = 0; i < 100; ++i) {
                const double rho = s.lo() + s.thickness() * (i + 0.5) / 100.0;
                worst = std::max(worst, std::abs(radial_g(s, rho) - fd(rho)));
            }
            CHECK(worst < 1e-8);
        }
}

TEST_CASE("closed forms on the reference shells")
{
    const auto c = ref();
    CHECK(radial_g(c.shell(0), 1.5) == doctest::Approx(std::log(1.5) / std::log(2.0)).epsilon(1e-15));
    CHECK(radial_g(c.shell(1), 1.5) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(radial_g(c.shell(0), 1.0) == 0.0);
    CHECK(radial_g(c.shell(1), 2.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(radial_g(c.shell(0), 2.5), DomainError);
    CHECK_THROWS_AS(level_radius(c.shell(0), 1.0), DomainError);
}

TEST_CASE("level radius inverts g and is monotone")
{
    for (int dim : {1, 2, 3, 4})
        for (auto o : {Orientation::outward, Orientation::inward}) {
            const Shell s = o == Orientation::outward ? Shell{0, dim, Vec(dim, 0.0), 0.7, 3.0, o}
                                                      : Shell{0, dim, Vec(dim, 0.0), 3.0, 0.7, o};
            double prev = radial_g(s, s.k_radius);
            for (int i = 1; i < 200; ++i) {
                const double r = i / 200.0;
                const double rho = level_radius(s, r);
                CHECK(std::abs(radial_g(s, rho) - r) <= 1e-12 * r);
                const double g = radial_g(s, s.k_radius + (s.w_radius - s.k_radius) * i / 200.0);
                CHECK(g > prev);
                prev = g;
            }
        }
}

TEST_CASE("configuration invariants name the violated constraint")
{
    using O = Orientation;
    CHECK(violated([] { Configuration({{0, 2, {0, 0}, 1, 2, O::outward}}, {0.9}); }) == "weight-sum");
    CHECK(violated([] { Configuration({{0, 2, {0, 0}, 1, 1, O::outward}}, {1.0}); }) == "shell-radii");
    CHECK(violated([] { Configuration({{0, 2, {0, 0}, 2, 1, O::outward}}, {1.0}); }) == "shell-radii");
    CHECK(violated([] { Configuration({{0, 2, {0, 0, 0}, 1, 2, O::outward}}, {1.0}); }) == "shell-dimension");
    CHECK(violated([] { Configuration({}, {}); }) == "shells-nonempty");
    CHECK(violated([] { Configuration({{0, 2, {0, 0}, 1, 2, O::outward}}, {0.5, 0.5}); }) == "weight-count");
    CHECK(violated([] {
              Configuration({{0, 2, {0, 0}, 1, 2, O::outward}, {0, 2, {0.5, 0}, 1, 2, O::outward}}, {0.5, 0.5});
          }) == "shell-overlap");
    CHECK(violated([] {
              Configuration({{0, 2, {0, 0}, 1, 2, O::outward}, {0, 3, {0, 0, 0}, 5, 6, O::outward}}, {0.5, 0.5});
          }) == "component-dimension");
    CHECK(violated([] { Configuration({{0, 2, {0, 0}, 1, 2, O::outward}}, {1.0}, {0.7, 0.01, 10}); }) == "defaults");
    CHECK(violated([] { ref(); }).empty());
}

TEST_CASE("component tree has one node per face at every level")
{
    const Configuration c({{0, 1, {0}, 1, 2, Orientation::outward}, {1, 3, {0, 0, 0}, 1, 2, Orientation::outward}},
                          {0.5, 0.5});
    const auto tree = component_tree(c, {0.5, 0.25, 0.125});
    CHECK(tree.depth() == 3);
    CHECK(tree.constant_width());
    for (std::size_t l = 0; l < 3; ++l)
        CHECK(tree.width(l) == 3);
    CHECK(tree.children({0, 0}) == std::vector<std::size_t>{0});
}

TEST_CASE("hole counts match a grid flood fill")
{
    struct Case {
        std::vector<CompactPiece> pieces;
        std::vector<oracle::Piece> grid;
        std::size_t holes;
    };
    for (int dim : {2, 3}) {
        const std::size_t cells = dim == 2 ? 400 : 90;
        const std::vector<Case> cases{
            {{ball(dim, 1.0)}, {{{0, 0, 0}, 0.0, 1.0}}, 0},
            {{shell(dim, 1.0, 2.0)}, {{{0, 0, 0}, 1.0, 2.0}}, 1},
            {{shell(dim, 1.0, 1.8), shell(dim, 2.6, 3.4)}, {{{0, 0, 0}, 1.0, 1.8}, {{0, 0, 0}, 2.6, 3.4}}, 2},
        };
        for (const auto& cs : cases) {
            const auto report = classify_stability({cs.pieces});
            const auto flood = oracle::flood_fill_holes(cs.grid, dim, 4.5, cells);
            CHECK(report.hole_count == cs.holes);
            CHECK(flood == cs.holes);
            CHECK(report.strongly_stable);
        }
    }
}

TEST_CASE("hole counts in dimension one and across components")
{
    CompactDescription d;
    d.pieces.push_back({0, 1, {0}, CompactPiece::Kind::shell, 1, 2});
    d.pieces.push_back({1, 2, {0, 0}, CompactPiece::Kind::shell, 1, 2});
    d.pieces.push_back({1, 2, {10, 0}, CompactPiece::Kind::ball, 0, 1});
    const auto r = classify_stability(d);
    CHECK(r.hole_count == 2);
    CHECK(r.holes_per_component.at(0) == 1);
    CHECK(r.holes_per_component.at(1) == 1);
}

TEST_CASE("tangent spheres are unsupported")
{
    CHECK_THROWS_AS(classify_stability({{shell(2, 1, 2), shell(2, 2, 3)}}), UnsupportedGeometry);
}

TEST_CASE("implied compact of the reference configuration")
{
    const auto k = implied_compact(ref());
    REQUIRE(k.pieces.size() == 2);
    CHECK(k.pieces[0].kind == CompactPiece::Kind::ball);
    CHECK(classify_stability(k).hole_count == 0);
    const Configuration nested({{0, 2, {0, 0}, 3, 4, Orientation::outward}, {0, 2, {0, 0}, 2, 1, Orientation::inward}},
                               {0.5, 0.5});
    const auto kn = implied_compact(nested);
    REQUIRE(kn.pieces.size() == 1);
    CHECK(kn.pieces[0].kind == CompactPiece::Kind::shell);
    CHECK(classify_stability(kn).hole_count == 1);
}

TEST_CASE("locate and absorption width")
{
    const auto c = ref();
    CHECK(c.locate(0, {1.5, 0}) == std::optional<std::size_t>(0));
    CHECK_FALSE(c.locate(0, {2.5, 0}).has_value());
    CHECK(c.locate(1, {0, 1.2, 0}) == std::optional<std::size_t>(1));
    CHECK(c.absorption_width(0) == doctest::Approx(1e-4));
    CHECK(c.max_dim() == 3);
}

}
