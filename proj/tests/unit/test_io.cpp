#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "darnwalk/errors.hpp"
#include "darnwalk/io.hpp"

using namespace darnwalk;

namespace {

Json ref_json()
{
    return Json::parse(R"({
      "shells": [
        {"component": 0, "dim": 2, "center": [0, 0], "inner_radius": 1, "outer_radius": 2, "weight": 0.4},
        {"component": 1, "dim": 3, "center": [0, 0, 0], "inner_radius": 1, "outer_radius": 2,
         "orientation": "outward", "weight": 0.6}],
      "defaults": {"epsilon": 1e-3, "r0": 0.02, "max_steps": 5000}})");
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("configuration parses with defaults and round-trips")
{
    const auto doc = parse_config(ref_json());
    CHECK(doc.config.shell_count() == 2);
    CHECK(doc.config.shell(0).orientation == Orientation::outward);
    CHECK(doc.config.defaults().epsilon_rel == 1e-3);
    CHECK(doc.config.defaults().r0 == 0.02);
    CHECK(doc.config.defaults().max_steps == 5000);
    CHECK_FALSE(doc.compact.has_value());
    const auto again = parse_config(config_to_json(doc.config));
    CHECK(config_to_json(again.config) == config_to_json(doc.config));
}

TEST_CASE("schema errors are parse errors, invariant errors are not")
{
    auto j = ref_json();
    j["shells"][0].erase("weight");
    CHECK_THROWS_AS(parse_config(j), ParseError);
    j = ref_json();
    j["shells"][0]["dim"] = "two";
    CHECK_THROWS_AS(parse_config(j), ParseError);
    j = ref_json();
    j["shells"][0]["orientation"] = "sideways";
    CHECK_THROWS_AS(parse_config(j), ParseError);
    CHECK_THROWS_AS(parse_config(Json::array()), ParseError);
    j = ref_json();
    j["shells"][0]["weight"] = 0.3;
    CHECK_THROWS_AS(parse_config(j), InvariantViolation);
}

TEST_CASE("files: missing is an I/O error, malformed is a parse error")
{
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
    const auto path = std::filesystem::temp_directory_path() / "darnwalk_bad.json";
    std::ofstream(path) << "{ not json";
    CHECK_THROWS_AS(load_config(path.string()), ParseError);
    std::filesystem::remove(path);
}

TEST_CASE("compact descriptions")
{
    auto j = ref_json();
    j["compact"] = Json::parse(R"([{"component": 0, "center": [0, 0], "kind": "shell",
                                    "inner_radius": 1, "outer_radius": 2},
                                   {"component": 1, "dim": 3, "center": [0, 0, 0], "kind": "ball", "radius": 1}])");
    const auto doc = parse_config(j);
    REQUIRE(doc.compact.has_value());
    CHECK(doc.compact->pieces.size() == 2);
    CHECK(doc.compact->pieces[0].dim == 2);
    CHECK(parse_compact(compact_to_json(*doc.compact)).pieces[1].outer_radius == 1.0);
    CHECK_THROWS_AS(parse_compact(Json::parse(R"([{"component": 0, "center": [0], "kind": "shell",
                                                   "inner_radius": 2, "outer_radius": 1}])")),
                    InvariantViolation);
}

TEST_CASE("empirical measures round-trip bit for bit")
{
    const auto c = parse_config(ref_json()).config;
    const double level = 0.37;
    Stream rng = StreamKey(1).stream(0);
    std::vector<Atom> atoms;
    for (int i = 0; i < 200; ++i) {
        const std::size_t shell = i % 2;
        const auto dir = random_direction(c.shell(shell).dim, rng);
        Vec p(dir.size());
        for (std::size_t k = 0; k < p.size(); ++k)
            p[k] = level_radius(c.shell(shell), level) * dir[k];
        atoms.push_back({shell, p, rng.uniform() / 100});
    }
    const auto m = SphereMeasure::empirical(c, level, atoms, 12345);
    const auto text = measure_to_json(m).dump();
    const auto back = measure_from_json(c, Json::parse(text));
    REQUIRE(back.atoms().size() == atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        CHECK(back.atoms()[i].point == atoms[i].point);
        CHECK(back.atoms()[i].weight == atoms[i].weight);
        CHECK(back.atoms()[i].shell == atoms[i].shell);
    }
    CHECK(back.mc_samples() == 12345);
    CHECK(back.level() == level);
}

TEST_CASE("parametric measures and families")
{
    const auto c = parse_config(ref_json()).config;
    const auto p = SphereMeasure::parametric(c, 0.2, {0.4, 0.6});
    const auto j = measure_to_json(p);
    CHECK(j["kind"] == "parametric");
    CHECK(measure_from_json(c, j).shell_weights() == p.shell_weights());
    const auto family = MeasureFamily::listed({p, SphereMeasure::parametric(c, 0.4, {0.4, 0.6})});
    const auto back = family_from_json(c, family_to_json(family));
    CHECK(back.levels() == std::vector<double>{0.2, 0.4});
    CHECK_THROWS_AS(measure_from_json(c, Json::parse(R"({"kind": "other", "level": 0.2})")), ParseError);
}

}
