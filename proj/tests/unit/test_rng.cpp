#include <doctest.h>

#include <cmath>
#include <set>

#include "darnwalk/rng.hpp"
#include "darnwalk/stats.hpp"
#include "darnwalk/vecmath.hpp"
#include "oracles.hpp"

using namespace darnwalk;

TEST_SUITE("rng") {

TEST_CASE("philox known-answer vectors")
{
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct")
{
    const StreamKey key(42);
    Stream a = key.stream(3), b = key.stream(3), c = key.stream(4);
    Stream d = key.derive("x").stream(3);
    std::set<std::uint64_t> firsts;
    for (int i = 0; i < 100; ++i) {
        const auto va = a.next_u64();
        CHECK(va == b.next_u64());
        firsts.insert(va);
    }
    CHECK(firsts.size() == 100);
    CHECK(key.stream(3).next_u64() != c.next_u64());
    CHECK(key.stream(3).next_u64() != d.next_u64());
    CHECK(StreamKey(1).derive("a").value() != StreamKey(1).derive("b").value());
    CHECK(StreamKey(1).derive(std::uint64_t{5}).value() == StreamKey(1).derive(std::uint64_t{5}).value());
}

TEST_CASE("uniform and normal draws follow their laws")
{
    Stream rng = StreamKey(7).stream(0);
    std::vector<double> u(20000), z(20000);
    for (auto& x : u) {
        x = rng.uniform();
        REQUIRE(x > 0.0);
        REQUIRE(x < 1.0);
    }
    for (auto& x : z)
        x = rng.normal();
    CHECK(stats::ks_test(u, [](double x) { return x; }).p_value > 0.01);
    CHECK(stats::ks_test(z, [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }).p_value > 0.01);
    const auto m = stats::mean_estimate(z);
    CHECK(std::abs(m.mean) < 4.0 / std::sqrt(20000.0));
}

TEST_CASE("bounded integers stay in range and cover it")
{
    Stream rng = StreamKey(9).stream(1);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) {
        const auto k = rng.below(7);
        REQUIRE(k < 7);
        ++counts[k];
    }
    for (int c : counts)
        CHECK(std::abs(c - 10000) < 5 * std::sqrt(10000.0 * 6 / 7));
}

TEST_CASE("random directions are uniform on the sphere")
{
    for (int dim = 1; dim <= 6; ++dim) {
        Stream rng = StreamKey(11).stream(dim);
        const int n = 40000;
        double abs_sum = 0.0, abs_sq = 0.0;
        std::vector<double> first(n);
        for (int i = 0; i < n; ++i) {
            const Vec v = random_direction(dim, rng);
            REQUIRE(std::abs(norm(v) - 1.0) < 1e-12);
            abs_sum += std::abs(v[0]);
            abs_sq += v[0] * v[0];
            first[i] = v[0];
        }
        const double mean = abs_sum / n;
        const double sd = std::sqrt(abs_sq / n - mean * mean);
        CHECK(std::abs(mean - oracle::mean_abs_coordinate(dim)) < 4 * sd / std::sqrt(double(n)) + 1e-15);
        if (dim == 3)  // Archimedes: one coordinate is uniform on [-1, 1]
            CHECK(stats::ks_test(first, [](double x) { return (x + 1) / 2; }).p_value > 0.01);
        if (dim == 2)
            CHECK(stats::ks_test(first, [](double x) { return 1.0 - std::acos(x) / M_PI; }).p_value > 0.01);
    }
}

}
