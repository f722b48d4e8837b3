// Acceptance run on the reference configuration: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "darnwalk/cli.hpp"
#include "darnwalk/diffusion.hpp"
#include "darnwalk/geometry.hpp"
#include "darnwalk/harmonic.hpp"
#include "darnwalk/io.hpp"
#include "darnwalk/kernels.hpp"
#include "darnwalk/measures.hpp"
#include "oracles.hpp"

using namespace darnwalk;
namespace fs = std::filesystem;

namespace {

const std::string data_dir = DARNWALK_TEST_DATA;
const std::string ref_path = data_dir + "/data/ref.json";
const std::uint64_t seed = 7;

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

StreamKey key(int criterion)
{
    return StreamKey(seed).derive("criterion").derive(static_cast<std::uint64_t>(criterion));
}

bool within(double a, double b, double se, double k = 3.0)
{
    return std::abs(a - b) <= k * se;
}

const Configuration& ref()
{
    static const Configuration c = load_config(ref_path).config;
    return c;
}

SphereMeasure sigma(double level)
{
    return SphereMeasure::parametric(ref(), level, ref().weights());
}

std::vector<BoundarySet> shell_sets()
{
    return {level_sphere_set(ref(), 0), level_sphere_set(ref(), 1)};
}

// 1. g against the finite-difference oracle
Outcome level_function()
{
    const Configuration& c = ref();
    double worst = 0.0, elapsed = 0.0;
    for (const Shell& s : c.shells()) {
        const oracle::RadialFd fd(s.dim, s.k_radius, s.w_radius, 100'000);
        std::vector<double> radii, values(100);
        for (int i = 0; i < 100; ++i)
            radii.push_back(s.lo() + s.thickness() * (i + 0.37) / 100.0);
        const auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < 100; ++i)
            values[i] = radial_g(s, radii[i]);
        elapsed += seconds_since(t0);
        for (int i = 0; i < 100; ++i)
            worst = std::max(worst, std::abs(values[i] - fd(radii[i])));
    }
    return {worst <= 1e-8 && elapsed < 1.0, fmt("max |g - fd| = %.2e, runtime %.2e s", worst, elapsed)};
}

// 2. outer-exit fraction from S_0.25 to S_0.5
Outcome saturation()
{
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    for (std::size_t j = 0; j < 2; ++j) {
        std::vector<double> w(2, 0.0);
        w[j] = 1.0;
        const auto p = push_forward(ref(), SphereMeasure::parametric(ref(), 0.25, w), 0.5, 100'000,
                                    key(2).derive(j));
        const bool ok = within(p.outer_mass, 0.5, p.outer_std_error);
        o.pass = o.pass && ok;
        o.detail += fmt("shell %zu: %.4f +- %.4f; ", j, p.outer_mass, p.outer_std_error);
    }
    const double elapsed = seconds_since(t0);
    o.pass = o.pass && elapsed < 60.0;
    o.detail += fmt("runtime %.1f s", elapsed);
    return o;
}

// 3. compatibility of the parametric family and failure of the swapped one
Outcome compatibility()
{
    const std::vector<std::pair<double, double>> pairs{{0.1, 0.2}, {0.25, 0.5}, {0.5, 0.9}};
    const auto good = check_compatibility(ref(), make_parametric_family(ref(), ref().weights()), pairs, 100'000,
                                          key(3).derive("good"));
    Outcome o{good.pass, ""};
    for (const auto& p : good.pairs)
        o.detail += fmt("(%g,%g) max|z| %.2f p %.3f; ", p.r, p.t, p.max_abs_z, p.energy_p_value);
    double weakest = HUGE_VAL;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto [r, t] = pairs[i];
        const auto bad = MeasureFamily::listed(
            {SphereMeasure::parametric(ref(), r, {0.4, 0.6}), SphereMeasure::parametric(ref(), t, {0.6, 0.4})});
        const auto rep = check_compatibility(ref(), bad, {pairs[i]}, 100'000, key(3).derive("swapped").derive(i));
        o.pass = o.pass && !rep.pass && rep.pairs[0].max_abs_z > 10.0;
        weakest = std::min(weakest, rep.pairs[0].max_abs_z);
    }
    o.detail += fmt("swapped: min effect %.1f sigma", weakest);
    return o;
}

KernelEstimate exit_masses(double t, double r0, const StreamKey& k)
{
    return estimate_exit_kernel(ref(), sigma(r0), Domain::darned_neighborhood(ref(), t), DarnedState::darned(),
                                shell_sets(), 100'000, k);
}

// 4. H_{U_t}(x0, S_j) = alpha_j, independent of r0
Outcome fine_choice()
{
    Outcome o;
    for (double t : {0.3, 0.7}) {
        std::vector<KernelEstimate> runs;
        for (double r0 : {1e-2, 1e-3})
            runs.push_back(exit_masses(t, r0, key(4).derive(static_cast<std::uint64_t>(t * 10)).derive(
                                                  static_cast<std::uint64_t>(std::lround(1 / r0)))));
        for (std::size_t j = 0; j < 2; ++j) {
            const auto& a = runs[0].entries[j];
            const auto& b = runs[1].entries[j];
            const double alpha = ref().weights()[j];
            const bool ok = within(a.mass, alpha, a.std_error) && within(b.mass, alpha, b.std_error) &&
                            within(a.mass, b.mass, std::hypot(a.std_error, b.std_error));
            o.pass = o.pass && ok;
            o.detail += fmt("t %.1f shell %zu: %.4f / %.4f; ", t, j, a.mass, b.mass);
        }
    }
    o.detail += "(r0 = 1e-2 / 1e-3, se ~ 0.0015)";
    return o;
}

// 5. two-stage exit versus direct exit
Outcome composition()
{
    const auto sets = std::vector<BoundarySet>{level_sphere_set(ref(), 0), level_sphere_set(ref(), 1)};
    const auto r0 = sigma(ref().defaults().r0);
    const auto two = estimate_two_stage_kernel(ref(), r0, Domain::darned_neighborhood(ref(), 0.3),
                                               Domain::darned_neighborhood(ref(), 0.7), DarnedState::darned(),
                                               sets, 100'000, key(5).derive("two-stage"));
    const auto one = estimate_exit_kernel(ref(), r0, Domain::darned_neighborhood(ref(), 0.7),
                                          DarnedState::darned(), sets, 100'000, key(5).derive("direct"));
    Outcome o;
    for (std::size_t j = 0; j < 2; ++j) {
        const auto& a = two.entries[j];
        const auto& b = one.entries[j];
        o.pass = o.pass && within(a.mass, b.mass, std::hypot(a.std_error, b.std_error));
        o.detail += fmt("shell %zu: %.4f vs %.4f; ", j, a.mass, b.mass);
    }
    return o;
}

// 6. expected exit times and the telescoping identity
Outcome exit_times()
{
    const auto r0 = sigma(ref().defaults().r0);
    const Domain V = Domain::ball(ref(), 1, {5, 0, 0}, 1.0);
    const Domain U = Domain::ball(ref(), 1, {5.2, 0, 0}, 0.5);
    const auto center = estimate_p_V(ref(), r0, V, {DarnedState::at(1, {5, 0, 0})}, 100'000, key(6).derive("center"));
    Outcome o{within(center[0].mean, 1.0 / 3.0, center[0].std_error),
              fmt("p_V(center) %.5f +- %.5f; ", center[0].mean, center[0].std_error)};

    const std::vector<DarnedState> points{DarnedState::at(1, {5.2, 0, 0}), DarnedState::at(1, {5.4, 0, 0}),
                                          DarnedState::at(1, {5.2, 0.3, 0}), DarnedState::at(1, {5.0, 0.1, 0.1}),
                                          DarnedState::at(1, {5.3, -0.2, 0.2})};
    const auto pV = estimate_p_V(ref(), r0, V, points, 100'000, key(6).derive("pV"));
    const auto HUpV = estimate_HU_pV(ref(), r0, U, V, points, 100'000, key(6).derive("HUpV"));
    const auto pU = estimate_p_V(ref(), r0, U, points, 100'000, key(6).derive("pU"));
    double worst = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double diff = pV[i].mean - HUpV[i].mean - pU[i].mean;
        const double se = std::sqrt(pV[i].std_error * pV[i].std_error + HUpV[i].std_error * HUpV[i].std_error +
                                    pU[i].std_error * pU[i].std_error);
        worst = std::max(worst, std::abs(diff) / se);
    }
    o.pass = o.pass && worst <= 3.0;
    o.detail += fmt("telescoping max |z| %.2f over 5 points", worst);
    return o;
}

// 7. restriction to a ball away from K and A_0.5
Outcome restriction()
{
    // component 0: K has radius 1, the closure of A_0.5 reaches sqrt(2); the ball spans [2, 4]
    const auto rep = restriction_equivalence_test(ref(), sigma(ref().defaults().r0), 0.5, 0, {3, 0}, 1.0,
                                                  100'000, key(7));
    return {rep.pass && rep.p_value > 0.01, fmt("energy p %.3f", rep.p_value)};
}

// 8. harmonicity at x0
Outcome harmonicity()
{
    const Configuration& c = ref();
    const auto family = make_parametric_family(c, c.weights());
    const auto f = [contains = level_sphere_set(c, 1).contains](const DarnedState& x) {
        return contains(x) ? 1.0 : 0.0;
    };
    const auto h = dirichlet_field(c, sigma(c.defaults().r0), Domain::darned_neighborhood(c, 0.5), f, 4000,
                                   key(8).derive("dirichlet"));
    HarmonicityOptions opts;
    opts.quadrature_points = 16;
    const auto good = harmonicity_test_at_x0(c, family, h, {0.1, 0.2, 0.4}, {}, opts);
    Outcome o{good.all_pass, ""};
    for (const auto& r : good.radii)
        o.detail += fmt("r %.1f: %.4f vs h(x0) %.4f p %.2f; ", r.r, r.integral, r.at_x0, r.p_value);

    // c_j + k_j g with 0.4 k_0 + 0.6 k_1 = -0.2: the sigma_r integral is -0.2 r against h(x0) = 0
    const auto bad = harmonicity_test_at_x0(c, family, ScalarField::affine_in_g(c, {0, 0}, {1, -1}, 0.0),
                                            {0.1, 0.2, 0.4});
    double worst_p = 0.0, worst_closed = 0.0;
    for (const auto& r : bad.radii) {
        worst_p = std::max(worst_p, r.p_value);
        worst_closed = std::max(worst_closed, std::abs(r.integral + 0.2 * r.r));
    }
    o.pass = o.pass && worst_p < 0.01 && worst_closed < 1e-12;
    o.detail += fmt("counterexample max p %.1e, closed-form error %.1e", worst_p, worst_closed);
    return o;
}

// 9. weak limit from Dirac starts
Outcome weak_limit()
{
    const Configuration& c = ref();
    std::vector<double> etas;
    std::vector<SphereMeasure> nus;
    for (int n = 3; n <= 8; ++n) {
        const double eta = std::ldexp(1.0, -n);
        etas.push_back(eta);
        nus.push_back(SphereMeasure::empirical(c, eta, {Atom{0, {level_radius(c.shell(0), eta), 0.0}, 1.0}}));
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = weak_limit_family(c, etas, nus, {0.5, 0.9}, 1'000'000, key(9).derive("limit"));
    const auto& level = res.levels[0];
    const auto& d = level.successive_distances;
    const auto& se = level.distance_std_errors;
    Outcome o;
    o.detail = "d(n -> n+1) at r = 0.5:";
    for (std::size_t k = 0; k < d.size(); ++k)
        o.detail += fmt(" %d:%.2e+-%.1e", static_cast<int>(k) + 3, d[k], se[k]);
    // non-increasing from n = 5 on: d(5->6) >= d(6->7) >= d(7->8)
    const bool monotone = d[2] >= d[3] && d[3] >= d[4];
    const auto compat = check_compatibility(c, res.family, {{0.5, 0.9}}, 100'000, key(9).derive("compat"));
    o.pass = monotone && compat.pass;
    o.detail += fmt("; monotone %s; final family compatible %s (max|z| %.2f, p %.3f); %.0f s",
                    monotone ? "yes" : "no", compat.pass ? "yes" : "no", compat.pairs[0].max_abs_z,
                    compat.pairs[0].energy_p_value, seconds_since(t0));
    return o;
}

// 10. stability classifier against the flood-fill oracle
Outcome stability()
{
    Outcome o;
    for (int dim : {2, 3}) {
        auto piece = [dim](CompactPiece::Kind kind, double inner, double outer) {
            CompactPiece p;
            p.dim = dim;
            p.center = Vec(static_cast<std::size_t>(dim), 0.0);
            p.kind = kind;
            p.inner_radius = inner;
            p.outer_radius = outer;
            return p;
        };
        const std::vector<std::vector<CompactPiece>> examples{
            {piece(CompactPiece::Kind::ball, 0, 1)},
            {piece(CompactPiece::Kind::shell, 1, 2)},
            {piece(CompactPiece::Kind::shell, 1, 1.5), piece(CompactPiece::Kind::shell, 2.5, 3)}};
        for (std::size_t e = 0; e < examples.size(); ++e) {
            std::vector<oracle::Piece> raster;
            for (const auto& p : examples[e])
                raster.push_back({{0, 0, 0}, p.kind == CompactPiece::Kind::ball ? 0.0 : p.inner_radius,
                                  p.outer_radius});
            const std::size_t flood = oracle::flood_fill_holes(raster, dim, 3.5, dim == 2 ? 400 : 100);
            const std::size_t holes = classify_stability({examples[e]}).hole_count;
            o.pass = o.pass && holes == e && flood == e;
            o.detail += fmt("d%d #%zu: %zu/%zu; ", dim, e, holes, flood);
        }
    }
    o.detail += "(classifier/flood fill)";
    return o;
}

// 11. byte-identical result files for 1 and 8 worker threads
Outcome determinism()
{
    const std::string nested = data_dir + "/data/nested.json";
    const std::vector<std::vector<std::string>> runs{
        {"gfun", "--config", ref_path},
        {"stability", "--config", nested},
        {"kernel", "--config", ref_path, "--t", "0.7", "--samples", "20000"},
        {"compat", "--config", ref_path, "--pairs", "0.1:0.2,0.25:0.5,0.5:0.9", "--samples", "20000"},
        {"weaklimit", "--config", ref_path, "--samples", "50000", "--targets", "0.5,0.9"},
        {"simulate", "--config", ref_path, "--mode", "time", "--runs", "5", "--traj", "traj.csv"},
        {"ptime", "--config", ref_path, "--domain", "ball", "--component", "1", "--center", "5,0,0", "--point",
         "1:5,0,0", "--samples", "20000"},
        {"restrict", "--config", ref_path, "--r", "0.5", "--component", "0", "--center", "3,0", "--radius",
         "1", "--samples", "20000"},
        {"harmonic", "--config", ref_path, "--field", "dirichlet", "--samples", "500", "--quadrature", "8"},
        {"dirichlet", "--config", ref_path, "--t", "0.5", "--samples", "20000"},
    };
    const fs::path root = fs::temp_directory_path() / "darnwalk_acceptance";
    Outcome o;
    std::size_t files = 0;
    for (const auto& base : runs) {
        std::vector<std::string> listing[2];
        for (int which = 0; which < 2; ++which) {
            const fs::path dir = root / (base[0] + (which ? "_t8" : "_t1"));
            fs::remove_all(dir);
            fs::create_directories(dir);
            auto args = base;
            args.insert(args.end(), {"--seed", std::to_string(seed), "--threads", which ? "8" : "1", "--out",
                                     dir.string()});
            std::ostringstream out, err;
            if (cli::run(args, out, err) != 0) {
                o.pass = false;
                o.detail += base[0] + " failed: " + err.str() + "; ";
            }
            for (const auto& entry : fs::directory_iterator(dir))
                if (entry.path().filename() != "manifest.json")
                    listing[which].push_back(entry.path().filename().string());
            std::sort(listing[which].begin(), listing[which].end());
        }
        if (listing[0] != listing[1] || listing[0].empty()) {
            o.pass = false;
            o.detail += base[0] + ": different file sets; ";
            continue;
        }
        for (const auto& name : listing[0]) {
            auto slurp = [](const fs::path& p) {
                std::ifstream f(p, std::ios::binary);
                std::ostringstream s;
                s << f.rdbuf();
                return s.str();
            };
            ++files;
            if (slurp(root / (base[0] + "_t1") / name) != slurp(root / (base[0] + "_t8") / name)) {
                o.pass = false;
                o.detail += base[0] + "/" + name + " differs; ";
            }
        }
    }
    o.detail += fmt("%zu result files from %zu commands compared", files, runs.size());
    return o;
}

}  // namespace

int main(int argc, char** argv)
{
    const std::vector<std::function<Outcome()>> criteria{
        level_function, saturation, compatibility, fine_choice, composition, exit_times,
        restriction,    harmonicity, weak_limit,   stability,   determinism};
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i)
        selected.push_back(std::atoi(argv[i]));
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end())
            continue;
        Outcome o;
        try {
            o = criteria[i]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("criterion %2d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
