#include "darnwalk/harmonic.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "darnwalk/errors.hpp"
#include "darnwalk/quadrature.hpp"
#include "darnwalk/stats.hpp"

namespace darnwalk {

ScalarField ScalarField::constant(double c)
{
    return {"constant", [c](const DarnedState&) { return FieldValue{c, 0.0}; }, {}, true};
}

ScalarField ScalarField::level_function(const Configuration& config)
{
    const std::size_t m = config.shell_count();
    return affine_in_g(config, std::vector<double>(m, 0.0), std::vector<double>(m, 1.0), 0.0);
}

ScalarField ScalarField::affine_in_g(const Configuration& config, std::vector<double> offsets,
                                     std::vector<double> slopes, double at_x0)
{
    if (offsets.size() != config.shell_count() || slopes.size() != config.shell_count())
        throw PreconditionError("one offset and one slope per shell required");
    ScalarField f;
    f.name = "affine_in_g";
    f.eval = [config, offsets, slopes, at_x0](const DarnedState& x) {
        if (x.is_darned())
            return FieldValue{at_x0, 0.0};
        const auto j = config.locate(x.component(), x.position());
        if (!j)
            throw DomainError("point lies in no shell");
        return FieldValue{offsets[*j] + slopes[*j] * level_at(config.shell(*j), x.position()), 0.0};
    };
    f.domain = [config](const DarnedState& x) {
        return x.is_darned() || config.locate(x.component(), x.position()).has_value();
    };
    return f;
}

namespace {

// One node set for the integral of h against sigma_r.
struct Nodes {
    std::vector<DarnedState> points;
    std::vector<double> weights;
};

Nodes parametric_nodes(const Configuration& config, const SphereMeasure& sigma, std::size_t per_shell)
{
    Nodes out;
    for (std::size_t j = 0; j < config.shell_count(); ++j) {
        const double alpha = sigma.shell_mass(j);
        if (alpha == 0.0)
            continue;
        const Shell& s = config.shell(j);
        const double rho = sigma.sphere_radius(j);
        const SphereRule rule = sphere_rule(static_cast<std::size_t>(s.dim), per_shell);
        for (std::size_t i = 0; i < rule.size(); ++i) {
            Vec p(s.center.size());
            for (std::size_t k = 0; k < p.size(); ++k)
                p[k] = s.center[k] + rho * rule.node(i)[k];
            out.points.push_back(DarnedState::at(s.component, std::move(p)));
            out.weights.push_back(alpha * rule.weights[i]);
        }
    }
    return out;
}

std::vector<FieldValue> evaluate(const ScalarField& h, const std::vector<DarnedState>& points, const Exec& exec)
{
    const Exec e = h.concurrent ? exec : Exec{1};
    return parallel_map<FieldValue>(points.size(), e, [&](std::size_t i) { return h(points[i]); });
}

FieldValue integrate(const std::vector<FieldValue>& values, const std::vector<double>& weights)
{
    double sum = 0.0, carry = 0.0, var = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double term = weights[i] * values[i].value;
        const double t = sum + term;
        carry += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
        sum = t;
        var += weights[i] * weights[i] * values[i].std_error * values[i].std_error;
    }
    return {sum + carry, std::sqrt(var)};
}

bool all_exact(const std::vector<FieldValue>& values)
{
    return std::all_of(values.begin(), values.end(), [](const FieldValue& v) { return v.std_error == 0.0; });
}

double max_abs(const std::vector<FieldValue>& values)
{
    double m = 0.0;
    for (const FieldValue& v : values)
        m = std::max(m, std::abs(v.value));
    return m;
}

// Roundoff floor for sums of order `scale`.
double roundoff(double scale)
{
    return 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, scale);
}

std::uint64_t point_hash(const DarnedState& x)
{
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(x.component())));
    for (double c : x.position()) {
        std::uint64_t bits;
        std::memcpy(&bits, &c, sizeof bits);
        mix(bits);
    }
    return h;
}

}  // namespace

HarmonicityReport harmonicity_test_at_x0(const Configuration& config, const MeasureFamily& family,
                                         const ScalarField& h, const std::vector<double>& radii, const Exec& exec,
                                         const HarmonicityOptions& options)
{
    const DarnedState x0 = DarnedState::darned();
    if (!h.defined_at(x0))
        throw PreconditionError("field is not defined at x0");
    const FieldValue h0 = h(x0);

    HarmonicityReport report;
    std::size_t passed = 0;
    for (double r : radii) {
        if (!(r > 0.0 && r < 1.0))
            throw PreconditionError("radius " + std::to_string(r) + " outside (0, 1)");
        const SphereMeasure sigma = family.at(r);
        Nodes nodes;
        if (sigma.kind() == SphereMeasure::Kind::parametric) {
            nodes = parametric_nodes(config, sigma, options.quadrature_points);
        } else {
            const double total = sigma.total_mass();
            for (const Atom& a : sigma.atoms()) {
                nodes.points.push_back(SphereMeasure::state_of(config, a));
                nodes.weights.push_back(a.weight / total);
            }
        }
        for (const DarnedState& p : nodes.points)
            if (!h.defined_at(p))
                throw PreconditionError("closure of U_r is not inside the field's domain at r = " + std::to_string(r));

        const std::vector<FieldValue> values = evaluate(h, nodes.points, exec);
        const FieldValue integral = integrate(values, nodes.weights);

        double quad_error = 0.0;
        if (sigma.kind() == SphereMeasure::Kind::parametric && all_exact(values) && h0.std_error == 0.0) {
            const Nodes coarse = parametric_nodes(config, sigma, std::max<std::size_t>(options.quadrature_points / 2, 2));
            quad_error = std::abs(integrate(evaluate(h, coarse.points, exec), coarse.weights).value - integral.value);
        }

        RadiusReport rr;
        rr.r = r;
        rr.integral = integral.value;
        rr.integral_std_error = std::hypot(integral.std_error, quad_error);
        rr.at_x0 = h0.value;
        rr.at_x0_std_error = h0.std_error;
        const double diff = rr.integral - rr.at_x0;
        const double se = std::hypot(rr.integral_std_error, rr.at_x0_std_error);
        if (std::abs(diff) <= roundoff(std::max(max_abs(values), std::abs(h0.value))))
            rr.z = 0.0;
        else
            rr.z = se > 0.0 ? diff / se : std::copysign(HUGE_VAL, diff);
        rr.p_value = std::isinf(rr.z) ? 0.0 : stats::normal_two_sided_p(rr.z);
        rr.pass = rr.p_value >= options.significance;
        passed += rr.pass ? 1 : 0;
        report.radii.push_back(rr);
    }
    report.all_pass = passed == report.radii.size();
    report.mixed = passed > 0 && passed < report.radii.size();
    return report;
}

ScalarField dirichlet_field(const Configuration& config, const SphereMeasure& sigma_r0, const Domain& U,
                            BoundaryData f, std::size_t n_samples, const StreamKey& key,
                            const SimulationOptions& options)
{
    if (n_samples == 0)
        throw PreconditionError("Dirichlet solving needs n_samples > 0");
    SimulationOptions opts = options;
    opts.path = nullptr;
    opts.accumulate_time = false;
    ScalarField u;
    u.name = "dirichlet";
    u.eval = [config, sigma_r0, U, f, n_samples, key, opts](const DarnedState& x) {
        if (!U.contains_closure(config, x))
            return FieldValue{f(x), 0.0};
        const StreamKey k = key.derive(point_hash(x));
        std::vector<double> values(n_samples);
        for (std::size_t i = 0; i < n_samples; ++i) {
            Stream rng = k.stream(i);
            values[i] = f(simulate_exit(config, sigma_r0, x, U, rng, opts).exit);
        }
        const stats::MeanEstimate m = stats::mean_estimate(values);
        return FieldValue{m.mean, m.std_error};
    };
    return u;
}

std::vector<FieldValue> solve_dirichlet(const Configuration& config, const SphereMeasure& sigma_r0,
                                        const Domain& U, const BoundaryData& f,
                                        const std::vector<DarnedState>& points, std::size_t n_samples,
                                        const StreamKey& key, const Exec& exec, const SimulationOptions& options)
{
    if (n_samples == 0)
        throw PreconditionError("Dirichlet solving needs n_samples > 0");
    SimulationOptions opts = options;
    opts.path = nullptr;
    opts.accumulate_time = false;
    std::vector<FieldValue> out;
    for (const DarnedState& x : points) {
        if (!U.contains_closure(config, x)) {
            out.push_back({f(x), 0.0});
            continue;
        }
        const StreamKey k = key.derive(point_hash(x));
        const auto values = parallel_map<double>(n_samples, exec, [&](std::size_t i) {
            Stream rng = k.stream(i);
            return f(simulate_exit(config, sigma_r0, x, U, rng, opts).exit);
        });
        const stats::MeanEstimate m = stats::mean_estimate(values);
        out.push_back({m.mean, m.std_error});
    }
    return out;
}

MeanValueReport mean_value_check(const Configuration& config, const ScalarField& h,
                                 const std::vector<DarnedState>& centers, const std::vector<double>& radii,
                                 std::size_t n_quadrature, const Exec& exec)
{
    if (centers.size() != radii.size())
        throw PreconditionError("one radius per center required");
    MeanValueReport report;
    for (std::size_t c = 0; c < centers.size(); ++c) {
        const DarnedState& x = centers[c];
        const double R = radii[c];
        if (x.is_darned())
            throw DomainError("mean-value balls must avoid x0");
        if (!(R > 0.0))
            throw DomainError("radius must be positive");
        const std::size_t dim = x.position().size();
        for (const CompactPiece& p : implied_compact(config).pieces) {
            if (p.component != x.component())
                continue;
            const double d = distance(x.position(), p.center);
            const double lo = p.kind == CompactPiece::Kind::ball ? 0.0 : p.inner_radius;
            if (!(d - R > p.outer_radius || d + R < lo))
                throw DomainError("mean-value ball meets K");
        }

        auto sphere_mean = [&](std::size_t n, double& scale) {
            const SphereRule rule = sphere_rule(dim, n);
            std::vector<DarnedState> pts;
            for (std::size_t i = 0; i < rule.size(); ++i) {
                Vec p(dim);
                for (std::size_t k = 0; k < dim; ++k)
                    p[k] = x.position()[k] + R * rule.node(i)[k];
                pts.push_back(DarnedState::at(x.component(), std::move(p)));
            }
            for (const DarnedState& p : pts)
                if (!h.defined_at(p))
                    throw DomainError("mean-value ball leaves the field's domain");
            const auto values = evaluate(h, pts, exec);
            scale = std::max(scale, max_abs(values));
            return integrate(values, rule.weights);
        };

        if (!h.defined_at(x))
            throw DomainError("center outside the field's domain");
        const FieldValue center = h(x);
        double scale = std::abs(center.value);
        const FieldValue fine = sphere_mean(n_quadrature, scale);
        const FieldValue coarse = sphere_mean(std::max<std::size_t>(n_quadrature / 2, 2), scale);
        const double quad_error = std::abs(fine.value - coarse.value);

        MeanValueEntry e;
        e.center = x;
        e.radius = R;
        e.sphere_mean = fine.value;
        e.center_value = center.value;
        e.deficit = fine.value - center.value;
        e.tolerance = 3.0 * std::sqrt(quad_error * quad_error + fine.std_error * fine.std_error +
                                      center.std_error * center.std_error) +
                      roundoff(scale);
        e.pass = std::abs(e.deficit) <= e.tolerance;
        report.pass = report.pass && e.pass;
        report.entries.push_back(std::move(e));
    }
    return report;
}

}  // namespace darnwalk
