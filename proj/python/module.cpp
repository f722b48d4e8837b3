#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "darnwalk/cli.hpp"
#include "darnwalk/diffusion.hpp"
#include "darnwalk/errors.hpp"
#include "darnwalk/geometry.hpp"
#include "darnwalk/io.hpp"
#include "darnwalk/kernels.hpp"
#include "darnwalk/measures.hpp"

namespace py = pybind11;
using namespace darnwalk;

namespace {

struct ConfigHandle {
    ConfigDocument doc;
};

Exec exec_for(unsigned threads)
{
    return threads == 0 ? Exec{} : Exec{threads};
}

SphereMeasure resurrection_law(const Configuration& c, std::optional<double> r0)
{
    return SphereMeasure::parametric(c, r0.value_or(c.defaults().r0), c.weights());
}

py::dict kernel_dict(const KernelEstimate& k)
{
    py::dict out;
    for (const KernelEntry& e : k.entries)
        out[py::str(e.label)] = py::make_tuple(e.mass, e.std_error);
    return out;
}

}  // namespace

PYBIND11_MODULE(_darnwalk, m)
{
    m.doc() = "Diffusions on darned and glued spaces: Monte Carlo core";

    py::register_exception<Error>(m, "DarnwalkError");

    py::class_<ConfigHandle>(m, "Config")
        .def_static("from_file", [](const std::string& path) { return ConfigHandle{load_config(path)}; })
        .def_static("from_json", [](const std::string& text) {
            try {
                return ConfigHandle{parse_config(Json::parse(text))};
            } catch (const Json::parse_error& e) {
                throw ParseError(e.what());
            }
        })
        .def("to_json", [](const ConfigHandle& c) { return config_to_json(c.doc.config).dump(); })
        .def_property_readonly("shell_count", [](const ConfigHandle& c) { return c.doc.config.shell_count(); })
        .def_property_readonly("weights", [](const ConfigHandle& c) { return c.doc.config.weights(); })
        .def_property_readonly("dims", [](const ConfigHandle& c) {
            std::vector<int> dims;
            for (const Shell& s : c.doc.config.shells())
                dims.push_back(s.dim);
            return dims;
        });

    m.def("radial_g", [](const ConfigHandle& c, std::size_t shell, double rho) {
        return radial_g(c.doc.config.shell(shell), rho);
    }, py::arg("config"), py::arg("shell"), py::arg("rho"));
    m.def("level_radius", [](const ConfigHandle& c, std::size_t shell, double level) {
        return level_radius(c.doc.config.shell(shell), level);
    }, py::arg("config"), py::arg("shell"), py::arg("level"));

    m.def("classify_stability", [](const ConfigHandle& c) {
        const StabilityReport r = classify_stability(c.doc.compact ? *c.doc.compact : implied_compact(c.doc.config));
        py::dict out;
        out["hole_count"] = r.hole_count;
        out["strongly_stable"] = r.strongly_stable;
        out["holes_per_component"] = r.holes_per_component;
        return out;
    }, py::arg("config"));

    m.def("exit_kernel", [](const ConfigHandle& c, double t, std::size_t samples, std::uint64_t seed,
                            std::optional<double> r0, unsigned threads) {
        const Configuration& cfg = c.doc.config;
        std::vector<BoundarySet> sets;
        for (std::size_t j = 0; j < cfg.shell_count(); ++j)
            sets.push_back(level_sphere_set(cfg, j));
        KernelEstimate k;
        {
            py::gil_scoped_release release;
            k = estimate_exit_kernel(cfg, resurrection_law(cfg, r0), Domain::darned_neighborhood(cfg, t),
                                     DarnedState::darned(), sets, samples, StreamKey(seed).derive("kernel"),
                                     exec_for(threads));
        }
        return kernel_dict(k);
    }, py::arg("config"), py::arg("t"), py::arg("samples") = 10000, py::arg("seed") = 0,
       py::arg("r0") = std::nullopt, py::arg("threads") = 0,
       "H_{U_t}(x0, .) over the level spheres S_{j,t}: {label: (mass, std_error)}");

    m.def("check_compatibility", [](const ConfigHandle& c, std::vector<double> alpha,
                                    std::vector<std::pair<double, double>> pairs, std::size_t samples,
                                    std::uint64_t seed, unsigned threads) {
        const Configuration& cfg = c.doc.config;
        CompatibilityReport rep;
        {
            py::gil_scoped_release release;
            rep = check_compatibility(cfg, make_parametric_family(cfg, alpha), pairs, samples,
                                      StreamKey(seed).derive("compat"), exec_for(threads));
        }
        py::list list;
        for (const auto& p : rep.pairs) {
            py::dict d;
            d["r"] = p.r;
            d["t"] = p.t;
            d["outer_mass"] = p.outer_mass;
            d["max_abs_z"] = p.max_abs_z;
            d["energy_p_value"] = p.energy_p_value;
            d["pass"] = p.pass;
            list.append(d);
        }
        py::dict out;
        out["pass"] = rep.pass;
        out["pairs"] = list;
        return out;
    }, py::arg("config"), py::arg("alpha"), py::arg("pairs"), py::arg("samples") = 10000, py::arg("seed") = 0,
       py::arg("threads") = 0);

    m.def("expected_exit_time", [](const ConfigHandle& c, int component, std::vector<double> center, double radius,
                                   std::vector<std::vector<double>> points, std::size_t samples, std::uint64_t seed,
                                   unsigned threads) {
        const Configuration& cfg = c.doc.config;
        std::vector<DarnedState> starts;
        for (auto& p : points)
            starts.push_back(DarnedState::at(component, std::move(p)));
        const Domain V = Domain::ball(cfg, component, std::move(center), radius);
        std::vector<ExitTimeEstimate> est;
        {
            py::gil_scoped_release release;
            est = estimate_p_V(cfg, resurrection_law(cfg, std::nullopt), V, starts, samples,
                               StreamKey(seed).derive("ptime"), exec_for(threads));
        }
        std::vector<std::pair<double, double>> out;
        for (const auto& e : est)
            out.emplace_back(e.mean, e.std_error);
        return out;
    }, py::arg("config"), py::arg("component"), py::arg("center"), py::arg("radius"), py::arg("points"),
       py::arg("samples") = 10000, py::arg("seed") = 0, py::arg("threads") = 0,
       "p_V at each point for the ball V: [(mean, std_error)]");

    m.def("run_cli", [](std::vector<std::string> args) {
        std::ostringstream out, err;
        int code;
        {
            py::gil_scoped_release release;
            code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
    }, py::arg("args"), "Runs a darnwalk command line in process: (exit_code, stdout, stderr)");

    m.def("sha256_hex", &cli::sha256_hex);
}
