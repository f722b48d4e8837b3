#include "darnwalk/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "darnwalk/errors.hpp"
#include "darnwalk/format.hpp"
#include "darnwalk/stats.hpp"

namespace darnwalk {

namespace {

// True when the closed ball (d = distance between centers, radius R) misses the
// closed annulus lo <= rho <= hi.
bool ball_clear_of(double d, double R, double lo, double hi)
{
    return d - R > hi || d + R < lo;
}

void require_level(double t)
{
    if (!(t > 0.0 && t < 1.0))
        throw DomainError("level " + std::to_string(t) + " outside (0, 1)");
}

bool ball_clear_of_compact(const Configuration& config, int component, const Vec& center, double radius)
{
    for (const CompactPiece& p : implied_compact(config).pieces) {
        if (p.component != component)
            continue;
        const double lo = p.kind == CompactPiece::Kind::ball ? 0.0 : p.inner_radius;
        if (!ball_clear_of(distance(center, p.center), radius, lo, p.outer_radius))
            return false;
    }
    return true;
}

}  // namespace

Domain Domain::ball(const Configuration& config, int component, Vec center, double radius)
{
    const int dim = config.component_dim(component);
    if (static_cast<int>(center.size()) != dim)
        throw DomainError("ball center has the wrong dimension for component " + std::to_string(component));
    if (!(radius > 0.0))
        throw DomainError("ball radius must be positive");
    if (!ball_clear_of_compact(config, component, center, radius))
        throw PreconditionError("ball domain must not meet K");
    Domain d;
    d.kind_ = Kind::ball;
    d.component_ = component;
    d.center_ = std::move(center);
    d.radius_ = radius;
    return d;
}

Domain Domain::darned_neighborhood(const Configuration& config, double t)
{
    return darned(config, std::vector<double>(config.shell_count(), t));
}

Domain Domain::darned(const Configuration& config, std::vector<double> levels)
{
    if (levels.size() != config.shell_count())
        throw PreconditionError("darned domain needs one exit level per shell");
    for (double t : levels)
        require_level(t);
    Domain d;
    d.kind_ = Kind::darned;
    d.levels_ = std::move(levels);
    return d;
}

Domain Domain::annulus(const Configuration& config, std::size_t shell, double t)
{
    if (shell >= config.shell_count())
        throw DomainError("unknown shell " + std::to_string(shell));
    require_level(t);
    Domain d;
    d.kind_ = Kind::annulus;
    d.shell_ = shell;
    d.component_ = config.shell(shell).component;
    d.levels_ = {t};
    return d;
}

double Domain::min_level() const
{
    return levels_.empty() ? 0.0 : *std::min_element(levels_.begin(), levels_.end());
}

bool Domain::contains_closure(const Configuration& config, const DarnedState& x) const
{
    constexpr double tol = 1e-9;
    switch (kind_) {
    case Kind::ball:
        return !x.is_darned() && x.component() == component_ &&
               distance(x.position(), center_) <= radius_ * (1.0 + tol);
    case Kind::darned: {
        if (x.is_darned())
            return true;
        const auto j = config.locate(x.component(), x.position());
        return j && level_at(config.shell(*j), x.position()) <= levels_[*j] + tol;
    }
    case Kind::annulus: {
        if (x.is_darned())
            return true;
        const auto j = config.locate(x.component(), x.position());
        return j && *j == shell_ && level_at(config.shell(*j), x.position()) <= levels_[0] + tol;
    }
    }
    return false;
}

std::string Domain::describe() const
{
    switch (kind_) {
    case Kind::ball:
        return "ball";
    case Kind::darned:
        return std::all_of(levels_.begin(), levels_.end(), [&](double t) { return t == levels_[0]; }) ? "Ut"
                                                                                                        : "darned";
    case Kind::annulus:
        return "annulus";
    }
    return "unknown";
}

void write_trajectory_csv(std::ostream& out, const DarnedPath& path, std::size_t max_dim)
{
    out << "step,clock,component_id";
    for (std::size_t k = 1; k <= max_dim; ++k)
        out << ",x" << k;
    out << "\r\n";
    for (const PathPoint& p : path.points) {
        out << p.step << ',';
        if (p.clock)
            out << format_number(*p.clock);
        out << ',' << p.state.component();
        const Vec& x = p.state.position();
        for (std::size_t k = 0; k < max_dim; ++k) {
            out << ',';
            if (!p.state.is_darned() && k < x.size())
                out << format_number(x[k]);
        }
        out << "\r\n";
    }
}

double resurrection_time(const Configuration& config, const SphereMeasure& sigma_r0)
{
    const double total = sigma_r0.total_mass();
    if (!(total > 0.0))
        throw PreconditionError("resurrection law has zero mass");
    double tau = 0.0;
    for (std::size_t j = 0; j < config.shell_count(); ++j) {
        const Shell& s = config.shell(j);
        const double rho = sigma_r0.sphere_radius(j);
        tau += sigma_r0.shell_mass(j) / total * std::abs(rho * rho - s.k_radius * s.k_radius) / s.dim;
    }
    return tau;
}

ExitResult simulate_exit(const Configuration& config, const SphereMeasure& sigma_r0, const DarnedState& start,
                         const Domain& domain, Stream& rng, const SimulationOptions& options)
{
    const double eps_rel = options.epsilon_rel.value_or(config.defaults().epsilon_rel);
    if (!(eps_rel > 0.0))
        throw PreconditionError("absorption width must be positive");
    const std::size_t budget = options.max_steps.value_or(config.defaults().max_steps);
    const bool timed = options.accumulate_time;

    ExitResult res;
    double clock = 0.0;
    DarnedPath* path = options.path;
    auto record = [&](const DarnedState& s, std::size_t step, double at) {
        if (path)
            path->points.push_back({step, timed ? std::optional<double>(at) : std::nullopt, s});
    };
    auto run = [&](auto&& walk_fn, int component) {
        const std::size_t step0 = res.steps;
        const double clock0 = clock;
        std::size_t local = 0;
        StepObserver obs = [&](const Vec& x, double elapsed) {
            record(DarnedState::at(component, x), step0 + ++local, clock0 + elapsed);
        };
        ExitSample e = walk_fn(path ? &obs : nullptr);
        res.steps += e.steps;
        if (timed)
            clock += e.elapsed;
        return e;
    };
    record(start, 0, 0.0);

    switch (domain.kind()) {
    case Domain::Kind::ball: {
        if (!domain.contains_closure(config, start))
            throw DomainError("start lies outside the ball domain");
        const ExitSample e = run(
            [&](const StepObserver* obs) {
                return walk_ball(domain.center(), domain.radius(), start.position(), eps_rel * domain.radius(),
                                 budget, rng, obs);
            },
            domain.component());
        res.exit = DarnedState::at(domain.component(), e.point);
        break;
    }
    case Domain::Kind::annulus: {
        if (start.is_darned()) {
            res.exit = start;
            break;
        }
        if (!domain.contains_closure(config, start))
            throw DomainError("start lies outside the annulus domain");
        const Shell& s = config.shell(domain.shell());
        const AnnulusWalk walk{s.center, s.dim, s.k_radius, level_radius(s, domain.levels()[0]),
                               eps_rel * s.thickness(), budget};
        const ExitSample e =
            run([&](const StepObserver* obs) { return walk_annulus(walk, start.position(), rng, obs); }, s.component);
        res.exit = e.side == ExitSample::Side::outer ? DarnedState::at(s.component, e.point) : DarnedState::darned();
        break;
    }
    case Domain::Kind::darned: {
        if (!(sigma_r0.level() < domain.min_level()))
            throw PreconditionError("resurrection level r0 must lie below every exit level of the domain");
        if (!sigma_r0.is_probability())
            throw PreconditionError("resurrection law must be a probability measure");
        if (!domain.contains_closure(config, start))
            throw DomainError("start lies outside the darned domain");
        const double tau0 = timed ? resurrection_time(config, sigma_r0) : 0.0;

        std::vector<AnnulusWalker> walkers;
        std::size_t max_dim = 0;
        for (std::size_t j = 0; j < config.shell_count(); ++j) {
            const Shell& s = config.shell(j);
            walkers.emplace_back(AnnulusWalk{s.center, s.dim, s.k_radius, level_radius(s, domain.levels()[j]),
                                             eps_rel * s.thickness(), budget});
            max_dim = std::max(max_dim, s.center.size());
        }
        Vec pos(max_dim), exit(max_dim);
        std::size_t shell = 0;
        bool at_x0 = start.is_darned();
        if (!at_x0) {
            shell = *config.locate(start.component(), start.position());
            std::copy(start.position().begin(), start.position().end(), pos.begin());
        }
        double walk_time = 0.0;
        int component = 0;
        StepObserver obs = [&](const Vec& x, double elapsed) {
            record(DarnedState::at(component, x), res.steps, clock + elapsed);
        };
        for (;;) {
            if (at_x0) {
                if (res.resurrections >= budget)
                    throw NonConvergence(res.steps);
                ++res.resurrections;
                clock += tau0;
                shell = sigma_r0.sample_into(rng, pos.data());
                if (path) {
                    const Shell& s = config.shell(shell);
                    record(DarnedState::at(s.component, Vec(pos.begin(), pos.begin() + s.dim)), res.steps, clock);
                }
            }
            component = config.shell(shell).component;
            walk_time = 0.0;
            const ExitSample::Side side =
                walkers[shell].run(pos.data(), rng, res.steps, walk_time, exit.data(), budget, path ? &obs : nullptr);
            if (timed)
                clock += walk_time;
            if (side == ExitSample::Side::outer) {
                const int dim = config.shell(shell).dim;
                res.exit = DarnedState::at(component, Vec(exit.begin(), exit.begin() + dim));
                break;
            }
            at_x0 = true;
            record(DarnedState::darned(), res.steps, clock);
        }
        break;
    }
    }
    if (path && !(path->points.back().state == res.exit))
        record(res.exit, res.steps, clock);
    res.elapsed = clock;
    return res;
}

ExitResult simulate_exit_em(const Configuration& config, const DarnedState& start, const Domain& domain, double dt,
                            Stream& rng, std::size_t max_steps)
{
    if (domain.kind() != Domain::Kind::ball)
        throw PreconditionError("the Euler-Maruyama oracle supports ball domains only");
    if (!(dt > 0.0))
        throw PreconditionError("time step must be positive");
    if (!domain.contains_closure(config, start))
        throw DomainError("start lies outside the ball domain");
    const Vec& c = domain.center();
    const double R = domain.radius();
    const double h = std::sqrt(dt);
    Vec x = start.position();
    ExitResult res;
    double rho = distance(x, c);
    while (rho < R) {
        if (res.steps >= max_steps)
            throw NonConvergence(res.steps);
        for (double& xk : x)
            xk += h * rng.normal();
        ++res.steps;
        rho = distance(x, c);
    }
    for (std::size_t k = 0; k < x.size(); ++k)
        x[k] = c[k] + (x[k] - c[k]) * (R / rho);
    res.exit = DarnedState::at(domain.component(), std::move(x));
    res.elapsed = static_cast<double>(res.steps) * dt;
    return res;
}

std::vector<ExitTimeEstimate> estimate_p_V(const Configuration& config, const SphereMeasure& sigma_r0,
                                           const Domain& V, const std::vector<DarnedState>& starts,
                                           std::size_t n_samples, const StreamKey& key, const Exec& exec,
                                           const SimulationOptions& options)
{
    if (n_samples == 0)
        throw PreconditionError("exit-time estimation needs n_samples > 0");
    SimulationOptions opts = options;
    opts.accumulate_time = true;
    opts.path = nullptr;
    std::vector<ExitTimeEstimate> out;
    for (std::size_t s = 0; s < starts.size(); ++s) {
        const StreamKey k = key.derive(static_cast<std::uint64_t>(s));
        const auto times = parallel_map<double>(n_samples, exec, [&](std::size_t i) {
            Stream rng = k.stream(i);
            return simulate_exit(config, sigma_r0, starts[s], V, rng, opts).elapsed;
        });
        const stats::MeanEstimate m = stats::mean_estimate(times);
        out.push_back({m.mean, m.std_error, n_samples});
    }
    return out;
}

std::vector<ExitTimeEstimate> estimate_HU_pV(const Configuration& config, const SphereMeasure& sigma_r0,
                                             const Domain& U, const Domain& V,
                                             const std::vector<DarnedState>& starts, std::size_t n_samples,
                                             const StreamKey& key, const Exec& exec,
                                             const SimulationOptions& options)
{
    if (n_samples == 0)
        throw PreconditionError("exit-time estimation needs n_samples > 0");
    SimulationOptions first = options;
    first.accumulate_time = false;
    first.path = nullptr;
    SimulationOptions second = first;
    second.accumulate_time = true;
    std::vector<ExitTimeEstimate> out;
    for (std::size_t s = 0; s < starts.size(); ++s) {
        const StreamKey k = key.derive(static_cast<std::uint64_t>(s));
        const auto times = parallel_map<double>(n_samples, exec, [&](std::size_t i) {
            Stream rng = k.stream(i);
            const ExitResult a = simulate_exit(config, sigma_r0, starts[s], U, rng, first);
            if (!V.contains_closure(config, a.exit))
                throw PreconditionError("the inner domain is not contained in the outer one");
            return simulate_exit(config, sigma_r0, a.exit, V, rng, second).elapsed;
        });
        const stats::MeanEstimate m = stats::mean_estimate(times);
        out.push_back({m.mean, m.std_error, n_samples});
    }
    return out;
}

namespace {

KernelEstimate tally(const std::vector<DarnedState>& exits, const std::vector<BoundarySet>& sets)
{
    KernelEstimate out;
    const std::size_t n = exits.size();
    out.n_samples = n;
    std::vector<std::size_t> hits(sets.size(), 0);
    std::size_t unassigned = 0;
    for (const DarnedState& e : exits) {
        bool any = false;
        for (std::size_t i = 0; i < sets.size(); ++i)
            if (sets[i].contains(e)) {
                ++hits[i];
                any = true;
            }
        unassigned += any ? 0 : 1;
    }
    auto entry = [&](const std::string& label, std::size_t h) {
        const double p = static_cast<double>(h) / static_cast<double>(n);
        out.entries.push_back({label, p, stats::binomial_std_error(p, n)});
    };
    for (std::size_t i = 0; i < sets.size(); ++i)
        entry(sets[i].label, hits[i]);
    if (unassigned > 0)
        entry("unassigned", unassigned);
    return out;
}

}  // namespace

KernelEstimate estimate_exit_kernel(const Configuration& config, const SphereMeasure& sigma_r0, const Domain& U,
                                    const DarnedState& x, const std::vector<BoundarySet>& sets,
                                    std::size_t n_samples, const StreamKey& key, const Exec& exec,
                                    const SimulationOptions& options)
{
    if (n_samples == 0)
        throw PreconditionError("kernel estimation needs n_samples > 0");
    SimulationOptions opts = options;
    opts.path = nullptr;
    const auto exits = parallel_map<DarnedState>(n_samples, exec, [&](std::size_t i) {
        Stream rng = key.stream(i);
        return simulate_exit(config, sigma_r0, x, U, rng, opts).exit;
    });
    return tally(exits, sets);
}

KernelEstimate estimate_two_stage_kernel(const Configuration& config, const SphereMeasure& sigma_r0,
                                         const Domain& V, const Domain& U, const DarnedState& x,
                                         const std::vector<BoundarySet>& sets, std::size_t n_samples,
                                         const StreamKey& key, const Exec& exec, const SimulationOptions& options)
{
    if (n_samples == 0)
        throw PreconditionError("kernel estimation needs n_samples > 0");
    SimulationOptions opts = options;
    opts.path = nullptr;
    const auto exits = parallel_map<DarnedState>(n_samples, exec, [&](std::size_t i) {
        Stream rng = key.stream(i);
        const ExitResult a = simulate_exit(config, sigma_r0, x, V, rng, opts);
        if (!U.contains_closure(config, a.exit))
            throw PreconditionError("the inner domain is not contained in the outer one");
        return simulate_exit(config, sigma_r0, a.exit, U, rng, opts).exit;
    });
    return tally(exits, sets);
}

RestrictionReport restriction_equivalence_test(const Configuration& config, const SphereMeasure& sigma_r0, double r,
                                               int component, const Vec& center, double radius,
                                               std::size_t n_samples, const StreamKey& key, const Exec& exec,
                                               double significance, const stats::EnergyTestOptions& energy)
{
    require_level(r);
    if (n_samples < 2)
        throw PreconditionError("restriction test needs at least two samples per law");
    const Domain B = Domain::ball(config, component, center, radius);
    for (const Shell& s : config.shells()) {
        if (s.component != component)
            continue;
        const double exit = level_radius(s, r);
        if (!ball_clear_of(distance(center, s.center), radius, std::min(s.k_radius, exit),
                           std::max(s.k_radius, exit)))
            throw PreconditionError("test ball meets the closure of A_r");
    }

    const double eps = config.defaults().epsilon_rel * radius;
    const std::size_t max_steps = config.defaults().max_steps;
    const DarnedState start = DarnedState::at(component, center);
    const std::size_t dim = center.size();
    auto to_cloud = [&](const std::vector<Vec>& points) {
        stats::PointCloud cloud{dim, {}};
        cloud.data.reserve(points.size() * dim);
        for (const Vec& p : points)
            for (std::size_t k = 0; k < dim; ++k)
                cloud.data.push_back((p[k] - center[k]) / radius);
        return cloud;
    };

    const StreamKey darned_key = key.derive("darned");
    const auto darned = parallel_map<Vec>(n_samples, exec, [&](std::size_t i) {
        Stream rng = darned_key.stream(i);
        return simulate_exit(config, sigma_r0, start, B, rng).exit.position();
    });
    const StreamKey plain_key = key.derive("plain");
    const auto plain = parallel_map<Vec>(n_samples, exec, [&](std::size_t i) {
        Stream rng = plain_key.stream(i);
        return walk_ball(center, radius, center, eps, max_steps, rng).point;
    });

    const stats::TestResult t =
        stats::energy_test(to_cloud(darned), to_cloud(plain), key.derive("energy"), energy);
    return {t.statistic, t.p_value, t.p_value > significance, n_samples};
}

}  // namespace darnwalk
