#include "darnwalk/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "darnwalk/errors.hpp"
#include "darnwalk/stats.hpp"

namespace darnwalk {

AnnulusWalker::AnnulusWalker(AnnulusWalk walk)
    : walk_(std::move(walk)),
      lo_(std::min(walk_.k_radius, walk_.exit_radius)),
      hi_(std::max(walk_.k_radius, walk_.exit_radius)),
      phi_k_(radial_potential(walk_.dim, walk_.k_radius)),
      phi_span_(radial_potential(walk_.dim, walk_.exit_radius) - phi_k_),
      x_(static_cast<std::size_t>(walk_.dim)),
      dir_(static_cast<std::size_t>(walk_.dim))
{
}

ExitSample::Side AnnulusWalker::run(const double* start, Stream& rng, std::size_t& steps, double& elapsed,
                                    double* exit, std::size_t step_limit, const StepObserver* observer)
{
    switch (walk_.dim) {
    case 1:
        return run_fixed<1>(start, rng, steps, elapsed, exit, step_limit, observer);
    case 2:
        return run_fixed<2>(start, rng, steps, elapsed, exit, step_limit, observer);
    case 3:
        return run_fixed<3>(start, rng, steps, elapsed, exit, step_limit, observer);
    default:
        return run_fixed<0>(start, rng, steps, elapsed, exit, step_limit, observer);
    }
}

// D > 0 fixes the dimension at compile time; D == 0 uses the walk's dimension.
template <int D>
ExitSample::Side AnnulusWalker::run_fixed(const double* start, Stream& rng, std::size_t& steps, double& elapsed,
                                          double* exit, std::size_t step_limit, const StepObserver* observer)
{
    const std::size_t dim = D > 0 ? static_cast<std::size_t>(D) : static_cast<std::size_t>(walk_.dim);
    const double* c = walk_.center.data();
    double* x = x_.data();
    double* dir = dir_.data();
    for (std::size_t k = 0; k < dim; ++k)
        x[k] = start[k] - c[k];
    const double inv_dim = 1.0 / static_cast<double>(dim);
    for (;;) {
        double rr = 0.0;
        for (std::size_t k = 0; k < dim; ++k)
            rr += x[k] * x[k];
        const double rho = std::sqrt(rr);
        const double gap = std::min(rho - lo_, hi_ - rho);
        if (gap <= walk_.epsilon) {
            const double clamped = std::clamp(rho, lo_, hi_);
            const double q =
                std::clamp((radial_potential(walk_.dim, clamped) - phi_k_) / phi_span_, 0.0, 1.0);
            if (rng.uniform() < q) {
                const double scale = walk_.exit_radius / rho;
                for (std::size_t k = 0; k < dim; ++k)
                    exit[k] = c[k] + x[k] * scale;
                return ExitSample::Side::outer;
            }
            return ExitSample::Side::inner;
        }
        if (steps >= step_limit)
            throw NonConvergence(steps);
        random_direction(dim, rng, dir);
        for (std::size_t k = 0; k < dim; ++k)
            x[k] += gap * dir[k];
        elapsed += gap * gap * inv_dim;
        ++steps;
        if (observer) {
            Vec p(dim);
            for (std::size_t k = 0; k < dim; ++k)
                p[k] = c[k] + x[k];
            (*observer)(p, elapsed);
        }
    }
}

ExitSample walk_annulus(const AnnulusWalk& walk, const Vec& start, Stream& rng, const StepObserver* observer)
{
    AnnulusWalker walker(walk);
    ExitSample out;
    Vec exit(static_cast<std::size_t>(walk.dim));
    out.side = walker.run(start.data(), rng, out.steps, out.elapsed, exit.data(), walk.max_steps, observer);
    if (out.side == ExitSample::Side::outer)
        out.point = std::move(exit);
    return out;
}

ExitSample walk_ball(const Vec& center, double radius, const Vec& start, double epsilon, std::size_t max_steps,
                     Stream& rng, const StepObserver* observer)
{
    const std::size_t dim = center.size();
    Vec x = start;
    Vec dir(dim);
    ExitSample out;
    out.side = ExitSample::Side::outer;
    for (;;) {
        const double rho = distance(x, center);
        const double gap = radius - rho;
        if (gap <= epsilon) {
            out.point.resize(dim);
            if (rho == 0.0) {
                out.point = center;
                out.point[0] += radius;
            } else {
                for (std::size_t k = 0; k < dim; ++k)
                    out.point[k] = center[k] + (x[k] - center[k]) * (radius / rho);
            }
            return out;
        }
        if (out.steps >= max_steps)
            throw NonConvergence(out.steps);
        random_direction(dim, rng, dir.data());
        for (std::size_t k = 0; k < dim; ++k)
            x[k] += gap * dir[k];
        out.elapsed += gap * gap / static_cast<double>(dim);
        ++out.steps;
        if (observer)
            (*observer)(x, out.elapsed);
    }
}

namespace {

void require_level(double t)
{
    if (!(t > 0.0 && t < 1.0))
        throw DomainError("level " + std::to_string(t) + " outside (0, 1)");
}

// Level of y in `shell`, checked to lie in the closed annulus A_t.
double level_in_annulus(const Configuration& config, std::size_t shell, const Vec& y, double t)
{
    const Shell& s = config.shell(shell);
    if (y.size() != s.center.size())
        throw DomainError("point dimension differs from the shell's");
    const RadialProfile profile(s);
    const double rho = distance(y, s.center);
    const double exit_radius = profile.radius(t);
    const double lo = std::min(s.k_radius, exit_radius), hi = std::max(s.k_radius, exit_radius);
    const double tol = 1e-12 * s.hi();
    if (!(rho >= lo - tol && rho <= hi + tol))
        throw DomainError("point lies outside the annulus A_t of shell " + std::to_string(shell));
    return std::min(profile.value(std::clamp(rho, lo, hi)), t);
}

}  // namespace

double exit_outer_prob(const Configuration& config, std::size_t shell, const Vec& y, double t)
{
    require_level(t);
    return level_in_annulus(config, shell, y, t) / t;
}

Vec sample_ball_exit(const Vec& center, double radius, Stream& rng)
{
    Vec p = random_direction(center.size(), rng);
    for (std::size_t k = 0; k < p.size(); ++k)
        p[k] = center[k] + radius * p[k];
    return p;
}

ExitSample sample_annulus_exit(const Configuration& config, std::size_t shell, const Vec& y, double t,
                               double epsilon, std::size_t max_steps, Stream& rng)
{
    require_level(t);
    level_in_annulus(config, shell, y, t);
    if (!(epsilon > 0.0))
        throw PreconditionError("absorption width must be positive");
    const Shell& s = config.shell(shell);
    const AnnulusWalk walk{s.center, s.dim, s.k_radius, level_radius(s, t), epsilon, max_steps};
    return walk_annulus(walk, y, rng);
}

BoundarySet level_sphere_set(const Configuration& config, std::size_t shell)
{
    const Shell s = config.shell(shell);
    BoundarySet set;
    set.label = "shell " + std::to_string(shell);
    set.shell = shell;
    set.contains = [s](const DarnedState& x) {
        if (x.is_darned() || x.component() != s.component)
            return false;
        const double rho = distance(x.position(), s.center);
        const double tol = 1e-9 * s.hi();
        return rho >= s.lo() - tol && rho <= s.hi() + tol;
    };
    return set;
}

BoundarySet darned_point_set()
{
    return {"x0", std::nullopt, [](const DarnedState& x) { return x.is_darned(); }};
}

double KernelEstimate::total() const
{
    double s = 0.0;
    for (const auto& e : entries)
        s += e.mass;
    return s;
}

const KernelEntry& KernelEstimate::at(const std::string& label) const
{
    for (const auto& e : entries)
        if (e.label == label)
            return e;
    throw PreconditionError("no kernel entry labelled '" + label + "'");
}

KernelEstimate exit_kernel_Ut(const Configuration& config, const SphereMeasure& sigma_t, const DarnedState& x,
                              double t, const std::vector<BoundarySet>& sets, std::size_t n_samples,
                              const StreamKey& key, const Exec& exec)
{
    require_level(t);
    if (!sigma_t.is_probability())
        throw PreconditionError("sigma_t must be a probability measure");
    if (std::abs(sigma_t.level() - t) > 1e-12)
        throw PreconditionError("sigma_t lives on a different level set");

    std::optional<std::size_t> shell;
    double g = 0.0;
    if (!x.is_darned()) {
        shell = config.locate(x.component(), x.position());
        if (!shell)
            throw DomainError("start point lies in no shell");
        g = level_in_annulus(config, *shell, x.position(), t);
    }

    KernelEstimate out;
    std::vector<std::size_t> sampled;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        const BoundarySet& set = sets[i];
        KernelEntry entry{set.label, 0.0, 0.0};
        if (set.shell) {
            const double sigma_mass = sigma_t.shell_mass(*set.shell);
            entry.mass = x.is_darned() ? sigma_mass
                                       : (*set.shell == *shell ? g / t : 0.0) + (1.0 - g / t) * sigma_mass;
        } else if (x.is_darned() && sigma_t.kind() == SphereMeasure::Kind::empirical) {
            for (const Atom& a : sigma_t.atoms())
                if (set.contains(SphereMeasure::state_of(config, a)))
                    entry.mass += a.weight;
            entry.mass /= sigma_t.total_mass();
        } else {
            sampled.push_back(i);
        }
        out.entries.push_back(std::move(entry));
    }
    if (sampled.empty())
        return out;
    if (n_samples == 0)
        throw PreconditionError("sampled kernel entries need n_samples > 0");

    const double epsilon = shell ? config.absorption_width(*shell) : 0.0;
    const std::size_t max_steps = config.defaults().max_steps;
    const auto exits = parallel_map<DarnedState>(n_samples, exec, [&](std::size_t i) {
        Stream rng = key.stream(i);
        if (!x.is_darned()) {
            const ExitSample e = sample_annulus_exit(config, *shell, x.position(), t, epsilon, max_steps, rng);
            if (e.side == ExitSample::Side::outer)
                return DarnedState::at(x.component(), e.point);
        }
        return SphereMeasure::state_of(config, sigma_t.sample(rng));
    });
    out.n_samples = n_samples;
    for (std::size_t i : sampled) {
        std::size_t hits = 0;
        for (const DarnedState& e : exits)
            hits += sets[i].contains(e) ? 1 : 0;
        const double p = static_cast<double>(hits) / static_cast<double>(n_samples);
        out.entries[i].mass = p;
        out.entries[i].std_error = stats::binomial_std_error(p, n_samples);
    }
    return out;
}

std::vector<Atom> systematic_resample(const std::vector<Atom>& atoms, std::size_t count, Stream& rng)
{
    double total = 0.0;
    for (const Atom& a : atoms)
        total += a.weight;
    std::vector<Atom> out;
    if (count == 0 || atoms.empty() || !(total > 0.0))
        return out;
    out.reserve(count);
    const double step = total / static_cast<double>(count);
    double target = rng.uniform() * step;
    double cumulative = 0.0;
    std::size_t i = 0;
    for (std::size_t k = 0; k < count; ++k) {
        while (i + 1 < atoms.size() && cumulative + atoms[i].weight <= target) {
            cumulative += atoms[i].weight;
            ++i;
        }
        out.push_back({atoms[i].shell, atoms[i].point, step});
        target += step;
    }
    return out;
}

PushForwardResult push_forward(const Configuration& config, const SphereMeasure& sigma, double t,
                               std::size_t n_samples, const StreamKey& key, const Exec& exec, std::size_t max_atoms)
{
    require_level(t);
    if (!sigma.is_probability())
        throw PreconditionError("push_forward needs a probability measure");
    if (!(sigma.level() <= t))
        throw PreconditionError("push_forward needs r <= t");
    if (n_samples == 0)
        throw PreconditionError("push_forward needs n_samples > 0");

    struct Draw {
        bool outer = false;
        std::size_t shell = 0;
        Vec point;
    };
    const std::size_t max_steps = config.defaults().max_steps;
    const auto draws = parallel_map<Draw>(n_samples, exec, [&](std::size_t i) {
        Stream rng = key.stream(i);
        const Atom start = sigma.sample(rng);
        const Shell& s = config.shell(start.shell);
        const AnnulusWalk walk{s.center, s.dim, s.k_radius, level_radius(s, t), config.absorption_width(start.shell),
                               max_steps};
        ExitSample e = walk_annulus(walk, start.point, rng);
        Draw d;
        d.shell = start.shell;
        if (e.side == ExitSample::Side::outer) {
            d.outer = true;
            d.point = std::move(e.point);
        }
        return d;
    });

    const double w = 1.0 / static_cast<double>(n_samples);
    std::vector<Atom> atoms;
    for (const Draw& d : draws)
        if (d.outer)
            atoms.push_back({d.shell, d.point, w});

    PushForwardResult out{SphereMeasure::empirical(config, t, {}), 0.0, 0.0, 0.0, n_samples};
    out.outer_mass = static_cast<double>(atoms.size()) * w;
    out.outer_std_error = stats::binomial_std_error(out.outer_mass, n_samples);
    out.inner_mass = 1.0 - out.outer_mass;
    if (atoms.size() > max_atoms) {
        Stream rng = key.derive("resample").stream(0);
        atoms = systematic_resample(atoms, max_atoms, rng);
    }
    out.outer = SphereMeasure::empirical(config, t, std::move(atoms), n_samples);
    return out;
}

}  // namespace darnwalk
