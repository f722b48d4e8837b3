#include "darnwalk/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "darnwalk/errors.hpp"
#include "darnwalk/kernels.hpp"

namespace darnwalk {

SphereMeasure::SphereMeasure(Kind kind, const Configuration& config, double level) : kind_(kind), level_(level)
{
    if (!(level > 0.0 && level < 1.0))
        throw DomainError("measure level " + std::to_string(level) + " outside (0, 1)");
    for (const Shell& s : config.shells())
        spheres_.push_back({s.component, s.dim, s.center, level_radius(s, level)});
}

SphereMeasure SphereMeasure::parametric(const Configuration& config, double level, std::vector<double> shell_weights)
{
    SphereMeasure m(Kind::parametric, config, level);
    if (shell_weights.size() != config.shell_count())
        throw PreconditionError("parametric measure needs one weight per shell");
    double sum = 0.0;
    for (double w : shell_weights) {
        if (!(w >= 0.0))
            throw InvariantViolation("weight-range", "mixture weights must be non-negative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw InvariantViolation("weight-sum", "mixture weights must sum to 1");
    m.weights_ = std::move(shell_weights);
    m.cdf_.resize(m.weights_.size());
    std::partial_sum(m.weights_.begin(), m.weights_.end(), m.cdf_.begin());
    return m;
}

SphereMeasure SphereMeasure::empirical(const Configuration& config, double level, std::vector<Atom> atoms,
                                       std::size_t mc_samples)
{
    SphereMeasure m(Kind::empirical, config, level);
    for (const Atom& a : atoms) {
        if (a.shell >= m.spheres_.size())
            throw InvariantViolation("atom-support", "atom refers to an unknown shell");
        const LevelSphere& sp = m.spheres_[a.shell];
        if (a.point.size() != sp.center.size())
            throw InvariantViolation("atom-support", "atom dimension differs from its shell");
        if (std::abs(distance(a.point, sp.center) - sp.radius) > 1e-9 * std::max(1.0, sp.radius))
            throw InvariantViolation("atom-support", "atom does not lie on S_r");
        if (!(a.weight >= 0.0) || !std::isfinite(a.weight))
            throw InvariantViolation("atom-weight", "atom weights must be finite and non-negative");
    }
    m.atoms_ = std::move(atoms);
    m.cdf_.resize(m.atoms_.size());
    double c = 0.0;
    for (std::size_t i = 0; i < m.atoms_.size(); ++i)
        m.cdf_[i] = (c += m.atoms_[i].weight);
    m.mc_samples_ = mc_samples;
    return m;
}

double SphereMeasure::total_mass() const
{
    return cdf_.empty() ? 0.0 : cdf_.back();
}

bool SphereMeasure::is_probability(double tol) const
{
    return std::abs(total_mass() - 1.0) <= tol;
}

double SphereMeasure::shell_mass(std::size_t shell) const
{
    if (shell >= spheres_.size())
        throw DomainError("unknown shell " + std::to_string(shell));
    if (kind_ == Kind::parametric)
        return weights_[shell];
    double m = 0.0;
    for (const Atom& a : atoms_)
        if (a.shell == shell)
            m += a.weight;
    return m;
}

std::size_t SphereMeasure::sample_into(Stream& rng, double* out) const
{
    const double total = total_mass();
    if (!(total > 0.0))
        throw PreconditionError("cannot sample from a zero measure");
    const double u = rng.uniform() * total;
    std::size_t i = static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
    i = std::min(i, cdf_.size() - 1);
    if (kind_ == Kind::empirical) {
        std::copy(atoms_[i].point.begin(), atoms_[i].point.end(), out);
        return atoms_[i].shell;
    }
    // The clamp above can land on a trailing zero-weight shell.
    while (weights_[i] == 0.0 && i > 0)
        --i;
    const LevelSphere& sp = spheres_[i];
    random_direction(sp.center.size(), rng, out);
    for (std::size_t k = 0; k < sp.center.size(); ++k)
        out[k] = sp.center[k] + sp.radius * out[k];
    return i;
}

Atom SphereMeasure::sample(Stream& rng) const
{
    double buf[64];
    std::vector<double> big;
    std::size_t max_dim = 0;
    for (const LevelSphere& sp : spheres_)
        max_dim = std::max(max_dim, sp.center.size());
    double* out = buf;
    if (max_dim > 64) {
        big.resize(max_dim);
        out = big.data();
    }
    const std::size_t shell = sample_into(rng, out);
    return {shell, Vec(out, out + spheres_[shell].center.size()), 1.0};
}

SphereMeasure SphereMeasure::normalized() const
{
    SphereMeasure out = *this;
    if (kind_ == Kind::parametric)
        return out;
    const double total = total_mass();
    if (!(total > 0.0))
        throw PreconditionError("cannot normalize a zero measure");
    double c = 0.0;
    for (std::size_t i = 0; i < out.atoms_.size(); ++i) {
        out.atoms_[i].weight /= total;
        out.cdf_[i] = (c += out.atoms_[i].weight);
    }
    return out;
}

MeasureFamily MeasureFamily::parametric(const Configuration& config, std::vector<double> weights)
{
    // Validate once through a member.
    SphereMeasure::parametric(config, 0.5, weights);
    MeasureFamily f;
    f.generator_ = Generator{config, std::move(weights)};
    return f;
}

MeasureFamily MeasureFamily::listed(std::vector<SphereMeasure> members)
{
    for (const SphereMeasure& m : members)
        if (!m.is_probability())
            throw InvariantViolation("family-member", "family members must be probability measures");
    MeasureFamily f;
    f.members_ = std::move(members);
    return f;
}

SphereMeasure MeasureFamily::at(double r) const
{
    if (generator_)
        return SphereMeasure::parametric(generator_->config, r, generator_->weights);
    for (const SphereMeasure& m : members_)
        if (std::abs(m.level() - r) <= 1e-12)
            return m;
    throw PreconditionError("family has no member at level " + std::to_string(r));
}

bool MeasureFamily::has_level(double r) const
{
    if (generator_)
        return r > 0.0 && r < 1.0;
    return std::any_of(members_.begin(), members_.end(),
                       [&](const SphereMeasure& m) { return std::abs(m.level() - r) <= 1e-12; });
}

std::vector<double> MeasureFamily::levels() const
{
    std::vector<double> out;
    for (const SphereMeasure& m : members_)
        out.push_back(m.level());
    return out;
}

MeasureFamily make_parametric_family(const Configuration& config, const std::vector<double>& alpha)
{
    return MeasureFamily::parametric(config, alpha);
}

double WeightAllocation::level_sum(std::size_t level) const
{
    double s = 0.0;
    for (double w : weights.at(level))
        s += w;
    return s;
}

WeightAllocation allocate_weights(const ComponentTree& tree, const std::map<NodeId, double>& targets)
{
    for (const auto& [node, value] : targets) {
        if (node.level >= tree.depth() || node.index >= tree.width(node.level))
            throw ConstraintViolation(std::to_string(node.level) + ":" + std::to_string(node.index),
                                      "target refers to a node outside the tree");
        if (!(value >= 0.0 && value <= 1.0))
            throw ConstraintViolation(tree.level_nodes(node.level)[node.index].label, "target must lie in [0, 1]");
    }

    WeightAllocation out;
    out.weights.resize(tree.depth());
    constexpr double tol = 1e-12;
    for (std::size_t level = 0; level < tree.depth(); ++level) {
        const auto& nodes = tree.level_nodes(level);
        out.weights[level].assign(nodes.size(), 0.0);

        // Group this level's nodes by parent (level 0 hangs off a virtual root of weight 1).
        std::map<std::size_t, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            groups[level == 0 ? 0 : *nodes[i].parent].push_back(i);

        for (const auto& [parent, children] : groups) {
            const double budget = level == 0 ? 1.0 : out.weights[level - 1][parent];
            const std::string parent_label =
                level == 0 ? std::string("root") : tree.level_nodes(level - 1)[parent].label;
            double fixed = 0.0;
            std::vector<std::size_t> free;
            for (std::size_t i : children) {
                const auto it = targets.find(NodeId{level, i});
                if (it != targets.end()) {
                    out.weights[level][i] = it->second;
                    fixed += it->second;
                } else {
                    free.push_back(i);
                }
            }
            if (fixed > budget + tol)
                throw ConstraintViolation(parent_label, "children's targets exceed the node's weight");
            if (free.empty()) {
                if (std::abs(fixed - budget) > tol)
                    throw ConstraintViolation(parent_label, "children's targets do not sum to the node's weight");
                continue;
            }
            const double share = (budget - fixed) / static_cast<double>(free.size());
            for (std::size_t i : free)
                out.weights[level][i] = share;
        }
        // Nodes whose parent received no children keep nothing: weights telescope
        // only if every parent has at least one child.
        if (level > 0) {
            for (std::size_t p = 0; p < tree.width(level - 1); ++p)
                if (!groups.count(p) && out.weights[level - 1][p] > 0.0)
                    throw ConstraintViolation(tree.level_nodes(level - 1)[p].label,
                                              "node with positive weight has no children");
        }
    }

    out.strictly_positive = true;
    for (const auto& level : out.weights)
        for (double w : level)
            out.strictly_positive = out.strictly_positive && w > 0.0;
    return out;
}

std::vector<double> shell_weights(const Configuration& config, const ComponentTree& tree,
                                  const WeightAllocation& allocation)
{
    std::vector<double> out(config.shell_count(), 0.0);
    const std::size_t last = tree.depth() - 1;
    const auto& nodes = tree.level_nodes(last);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!nodes[i].face)
            throw PreconditionError("tree was not built from a configuration");
        out.at(nodes[i].face->shell) += allocation.weights[last][i];
    }
    return out;
}

std::size_t embedding_dim(const Configuration& config)
{
    std::size_t d = 0;
    for (const Shell& s : config.shells())
        d += static_cast<std::size_t>(s.dim);
    return d;
}

void angular_embedding(const Configuration& config, const Atom& atom, double* out)
{
    std::size_t offset = 0;
    for (std::size_t j = 0; j < config.shell_count(); ++j) {
        const Shell& s = config.shell(j);
        if (j == atom.shell) {
            const double rho = distance(atom.point, s.center);
            for (std::size_t k = 0; k < s.center.size(); ++k)
                out[offset + k] = (atom.point[k] - s.center[k]) / rho;
        } else {
            std::fill(out + offset, out + offset + s.dim, 0.0);
        }
        offset += static_cast<std::size_t>(s.dim);
    }
}

stats::PointCloud embed(const Configuration& config, const SphereMeasure& measure)
{
    stats::PointCloud cloud{embedding_dim(config), {}};
    cloud.data.resize(measure.atoms().size() * cloud.dim);
    for (std::size_t i = 0; i < measure.atoms().size(); ++i)
        angular_embedding(config, measure.atoms()[i], cloud.data.data() + i * cloud.dim);
    return cloud;
}

stats::PointCloud embed_samples(const Configuration& config, const SphereMeasure& measure, std::size_t n,
                                const StreamKey& key)
{
    stats::PointCloud cloud{embedding_dim(config), {}};
    cloud.data.resize(n * cloud.dim);
    for (std::size_t i = 0; i < n; ++i) {
        Stream rng = key.stream(i);
        angular_embedding(config, measure.sample(rng), cloud.data.data() + i * cloud.dim);
    }
    return cloud;
}

CompatibilityReport check_compatibility(const Configuration& config, const MeasureFamily& family,
                                        const std::vector<std::pair<double, double>>& pairs, std::size_t n_samples,
                                        const StreamKey& key, const Exec& exec, const CompatibilityOptions& options)
{
    CompatibilityReport report;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto [r, t] = pairs[p];
        if (!(r > 0.0 && r <= t && t < 1.0))
            throw PreconditionError("compatibility pairs need 0 < r <= t < 1");
        const SphereMeasure sigma_r = family.at(r);
        const SphereMeasure sigma_t = family.at(t);
        CompatibilityPairReport pr;
        pr.r = r;
        pr.t = t;

        if (r == t) {
            pr.outer_mass = 1.0;
            for (std::size_t j = 0; j < config.shell_count(); ++j) {
                const double m = sigma_t.shell_mass(j);
                pr.shells.push_back({j, m, m, 0.0, 0.0});
            }
            report.pairs.push_back(std::move(pr));
            continue;
        }

        const StreamKey pair_key = key.derive(static_cast<std::uint64_t>(p));
        const PushForwardResult pushed = push_forward(config, sigma_r, t, n_samples, pair_key.derive("push"), exec);
        pr.outer_mass = pushed.outer_mass;
        pr.outer_std_error = pushed.outer_std_error;

        const double scale = t / r;
        const double n = static_cast<double>(n_samples);
        for (std::size_t j = 0; j < config.shell_count(); ++j) {
            const double raw = pushed.outer.shell_mass(j);
            ShellMassCheck c;
            c.shell = j;
            c.expected = sigma_t.shell_mass(j);
            c.observed = scale * raw;
            double var = scale * scale * raw * (1.0 - raw) / n;
            if (sigma_t.kind() == SphereMeasure::Kind::empirical && sigma_t.mc_samples() > 0)
                var += c.expected * (1.0 - c.expected) / static_cast<double>(sigma_t.mc_samples());
            c.std_error = std::sqrt(var);
            const double diff = c.observed - c.expected;
            c.z = c.std_error > 0.0 ? diff / c.std_error : (std::abs(diff) <= 1e-12 ? 0.0 : HUGE_VAL);
            pr.max_abs_z = std::max(pr.max_abs_z, std::abs(c.z));
            pr.shells.push_back(c);
        }
        pr.mass_pass = pr.max_abs_z <= options.z_threshold;

        if (pushed.outer.atoms().size() >= 2) {
            const stats::PointCloud x = embed(config, pushed.outer);
            const stats::PointCloud y =
                embed_samples(config, sigma_t, std::min(n_samples, options.energy.max_points), pair_key.derive("target"));
            const stats::TestResult et = stats::energy_test(x, y, pair_key.derive("energy"), options.energy);
            pr.energy_statistic = et.statistic;
            pr.energy_p_value = et.p_value;
            pr.angular_pass = et.p_value > options.significance;
        }
        pr.pass = pr.mass_pass && pr.angular_pass;
        report.pass = report.pass && pr.pass;
        report.pairs.push_back(std::move(pr));
    }
    return report;
}

namespace {

// Rotation about `center` in the plane of `from` and `to` taking the direction
// of `from` onto that of `to`, applied to `y`. Built as two reflections; when
// the directions are antipodal a single reflection is used instead.
void rotate_into(const Vec& center, const Vec& from, const Vec& to, const Vec& y, double* out)
{
    const std::size_t dim = center.size();
    const double nf = distance(from, center), nt = distance(to, center);
    Vec u(dim), w(dim), v(dim), z(dim);
    double vv = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
        u[k] = (from[k] - center[k]) / nf;
        w[k] = (to[k] - center[k]) / nt;
        v[k] = u[k] + w[k];
        vv += v[k] * v[k];
        z[k] = y[k] - center[k];
    }
    auto reflect = [&](const Vec& axis, double axis_sq) {
        double dot = 0.0;
        for (std::size_t k = 0; k < dim; ++k)
            dot += axis[k] * z[k];
        const double f = 2.0 * dot / axis_sq;
        for (std::size_t k = 0; k < dim; ++k)
            z[k] -= f * axis[k];
    };
    if (vv > 1e-12) {
        reflect(v, vv);
        reflect(w, 1.0);
    } else {
        for (std::size_t k = 0; k < dim; ++k)
            v[k] = u[k] - w[k];
        reflect(v, 4.0);
    }
    for (std::size_t k = 0; k < dim; ++k)
        out[k] = center[k] + z[k];
}

struct Live {
    std::size_t shell = 0;
    Vec start;  // on S_{eta_k}
    Vec exit;   // on S_r
};

}  // namespace

WeakLimitResult weak_limit_family(const Configuration& config, const std::vector<double>& etas,
                                  const std::vector<SphereMeasure>& nus, const std::vector<double>& targets,
                                  std::size_t n_walks, const StreamKey& key, const Exec& exec,
                                  const WeakLimitOptions& options)
{
    if (etas.empty() || etas.size() != nus.size())
        throw PreconditionError("weak limit: one measure per level required");
    for (std::size_t k = 0; k < etas.size(); ++k) {
        if (!(etas[k] > 0.0 && etas[k] < 1.0))
            throw PreconditionError("weak limit: levels must lie in (0, 1)");
        if (k > 0 && !(etas[k] < etas[k - 1]))
            throw PreconditionError("weak limit: levels must be strictly decreasing");
        if (!nus[k].is_probability())
            throw PreconditionError("weak limit: nu_" + std::to_string(k) + " is not a probability measure");
        if (std::abs(nus[k].level() - etas[k]) > 1e-12)
            throw PreconditionError("weak limit: nu_" + std::to_string(k) + " does not live on S_eta");
    }
    for (double r : targets)
        if (!(r > etas.front() && r < 1.0))
            throw PreconditionError("weak limit: target levels must exceed every eta");
    if (n_walks < 2)
        throw PreconditionError("weak limit: need at least two walks per iterate");

    const std::size_t max_steps = config.defaults().max_steps;
    const std::size_t batch = std::max<std::size_t>(options.batch, 1);
    std::size_t max_dim = 0;
    for (const Shell& sh : config.shells())
        max_dim = std::max(max_dim, sh.center.size());

    WeakLimitResult result{MeasureFamily::listed({}), {}};
    std::vector<SphereMeasure> finals;
    for (std::size_t ri = 0; ri < targets.size(); ++ri) {
        const double r = targets[ri];
        const StreamKey level_key = key.derive(static_cast<std::uint64_t>(ri));
        const StreamKey start_key = level_key.derive("start");

        // Walkers to S_r, and to S_{eta_{k-1}} for the coupling step.
        std::vector<AnnulusWalker> to_target;
        for (std::size_t j = 0; j < config.shell_count(); ++j) {
            const Shell& sh = config.shell(j);
            to_target.emplace_back(AnnulusWalk{sh.center, sh.dim, sh.k_radius, level_radius(sh, r),
                                               config.absorption_width(j), max_steps});
        }

        WeakLimitLevel level;
        level.r = r;
        std::vector<std::optional<Live>> live(n_walks);
        std::vector<std::size_t> start_shell(n_walks, 0);

        for (std::size_t k = 0; k < etas.size(); ++k) {
            std::vector<AnnulusWalker> to_previous;
            if (k > 0)
                for (std::size_t j = 0; j < config.shell_count(); ++j) {
                    const Shell& sh = config.shell(j);
                    to_previous.emplace_back(AnnulusWalk{sh.center, sh.dim, sh.k_radius,
                                                         level_radius(sh, etas[k - 1]), config.absorption_width(j),
                                                         max_steps});
                }
            const StreamKey walk_key = level_key.derive("walk").derive(static_cast<std::uint64_t>(k));
            const StreamKey fresh_key = level_key.derive("fresh").derive(static_cast<std::uint64_t>(k));

            struct Step {
                std::size_t shell = 0;
                std::optional<Live> next;
            };
            std::vector<std::optional<Live>> next(n_walks);
            std::vector<std::size_t> next_shell(n_walks, 0);
            for (std::size_t b0 = 0; b0 < n_walks; b0 += batch) {
                const std::size_t count = std::min(batch, n_walks - b0);
                auto steps = parallel_map<Step>(count, exec, [&](std::size_t bi) {
                    const std::size_t i = b0 + bi;
                    Step out;
                    Vec start(max_dim), exit(max_dim);
                    Stream start_rng = start_key.stream(i);
                    out.shell = nus[k].sample_into(start_rng, start.data());
                    const std::size_t j = out.shell;
                    const std::size_t dim = config.shell(j).center.size();
                    start.resize(dim);
                    exit.resize(dim);
                    Stream rng = walk_key.stream(i);
                    std::size_t steps = 0;
                    double elapsed = 0.0;
                    const bool coupled = k > 0 && start_shell[i] == j;
                    if (coupled && !live[i])
                        return out;  // continues an absorbed walk
                    bool reached = false;
                    if (k == 0) {
                        AnnulusWalker walker = to_target[j];  // walkers keep scratch state
                        reached = walker.run(start.data(), rng, steps, elapsed, exit.data(), max_steps) ==
                                  ExitSample::Side::outer;
                    } else {
                        Vec z(dim);
                        AnnulusWalker back = to_previous[j];
                        if (back.run(start.data(), rng, steps, elapsed, z.data(), max_steps) !=
                            ExitSample::Side::outer)
                            return out;
                        if (coupled) {
                            rotate_into(config.shell(j).center, live[i]->start, z, live[i]->exit, exit.data());
                            reached = true;
                        } else {
                            Stream fresh = fresh_key.stream(i);
                            steps = 0;
                            AnnulusWalker walker = to_target[j];
                            reached = walker.run(z.data(), fresh, steps, elapsed, exit.data(), max_steps) ==
                                      ExitSample::Side::outer;
                        }
                    }
                    if (reached)
                        out.next = Live{j, std::move(start), std::move(exit)};
                    return out;
                });
                for (std::size_t bi = 0; bi < count; ++bi) {
                    next_shell[b0 + bi] = steps[bi].shell;
                    next[b0 + bi] = std::move(steps[bi].next);
                }
            }

            // Diagnostics against the previous iterate on the coupled pairs.
            if (k > 0) {
                const std::size_t edim = embedding_dim(config);
                stats::PointCloud x{edim, {}}, y{edim, {}};
                Vec row(edim);
                std::size_t pairs = 0;
                for (std::size_t i = 0; i < n_walks; ++i) {
                    if (!live[i] || !next[i])
                        continue;
                    angular_embedding(config, {live[i]->shell, live[i]->exit, 1.0}, row.data());
                    x.push(row);
                    angular_embedding(config, {next[i]->shell, next[i]->exit, 1.0}, row.data());
                    y.push(row);
                    ++pairs;
                }
                level.paired_counts.push_back(pairs);
                const StreamKey dist_key = level_key.derive("distance").derive(static_cast<std::uint64_t>(k));
                level.successive_distances.push_back(
                    pairs >= 2 ? stats::paired_energy_distance(x, y, options.projection_directions, dist_key)
                               : std::nan(""));
                const std::size_t nb = options.error_batches;
                if (nb >= 2 && pairs >= 4 * nb) {
                    std::vector<double> parts;
                    for (std::size_t b = 0; b < nb; ++b) {
                        const std::size_t lo = b * pairs / nb, hi = (b + 1) * pairs / nb;
                        stats::PointCloud xb{edim, {}}, yb{edim, {}};
                        xb.data.assign(x.data.begin() + lo * edim, x.data.begin() + hi * edim);
                        yb.data.assign(y.data.begin() + lo * edim, y.data.begin() + hi * edim);
                        parts.push_back(stats::paired_energy_distance(xb, yb, options.projection_directions, dist_key));
                    }
                    level.distance_std_errors.push_back(stats::mean_estimate(parts).std_error);
                } else {
                    level.distance_std_errors.push_back(std::nan(""));
                }
            }
            live = std::move(next);
            start_shell = std::move(next_shell);

            WeakLimitIterate it;
            it.eta = etas[k];
            it.walks = n_walks;
            it.outer = static_cast<std::size_t>(std::count_if(live.begin(), live.end(),
                                                              [](const auto& l) { return l.has_value(); }));
            const double p = static_cast<double>(it.outer) / static_cast<double>(n_walks);
            it.mass = (r / etas[k]) * p;
            it.mass_std_error = (r / etas[k]) * stats::binomial_std_error(p, n_walks);
            level.iterates.push_back(it);
        }

        std::vector<Atom> atoms;
        const std::size_t outer = level.iterates.back().outer;
        if (outer == 0)
            throw PreconditionError("weak limit: no walk of the last iterate reached S_r; raise n_walks");
        for (auto& l : live)
            if (l)
                atoms.push_back({l->shell, std::move(l->exit), 1.0 / static_cast<double>(outer)});
        finals.push_back(SphereMeasure::empirical(config, r, std::move(atoms), outer));
        result.levels.push_back(std::move(level));
    }
    result.family = MeasureFamily::listed(std::move(finals));
    return result;
}

}  // namespace darnwalk
