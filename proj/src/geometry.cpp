#include "darnwalk/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "darnwalk/errors.hpp"

namespace darnwalk {

namespace {

std::string shell_name(std::size_t i) { return "shell " + std::to_string(i); }

bool annuli_disjoint(const Shell& s, const Shell& t)
{
    if (s.dim == 1) {
        // Each shell is the pair of open intervals (c-hi, c-lo) and (c+lo, c+hi).
        const double cs = s.center[0], ct = t.center[0];
        const double a[2][2] = {{cs - s.hi(), cs - s.lo()}, {cs + s.lo(), cs + s.hi()}};
        const double b[2][2] = {{ct - t.hi(), ct - t.lo()}, {ct + t.lo(), ct + t.hi()}};
        for (const auto& x : a)
            for (const auto& y : b)
                if (std::max(x[0], y[0]) < std::min(x[1], y[1]))
                    return false;
        return true;
    }
    const double d = distance(s.center, t.center);
    return d >= s.hi() + t.hi() || d + s.hi() <= t.lo() || d + t.hi() <= s.lo();
}

}  // namespace

Configuration::Configuration(std::vector<Shell> shells, std::vector<double> weights,
                             SimulationDefaults defaults, std::map<int, int> extra_components)
    : shells_(std::move(shells)), weights_(std::move(weights)), defaults_(defaults)
{
    if (shells_.empty())
        throw InvariantViolation("shells-nonempty", "a configuration needs at least one shell");

    for (std::size_t i = 0; i < shells_.size(); ++i) {
        const Shell& s = shells_[i];
        if (s.dim < 1)
            throw InvariantViolation("shell-dimension", shell_name(i) + " has dimension < 1");
        if (s.center.size() != static_cast<std::size_t>(s.dim))
            throw InvariantViolation("shell-dimension", shell_name(i) + " center length differs from dim");
        if (!(s.k_radius > 0.0) || !(s.w_radius > 0.0) || !std::isfinite(s.k_radius) ||
            !std::isfinite(s.w_radius))
            throw InvariantViolation("shell-radii", shell_name(i) + " radii must be positive and finite");
        if (s.k_radius == s.w_radius)
            throw InvariantViolation("shell-radii", shell_name(i) + " has inner_radius == outer_radius");
        if (s.orientation == Orientation::outward && !(s.k_radius < s.w_radius))
            throw InvariantViolation("shell-radii", shell_name(i) + " is outward but inner_radius > outer_radius");
        if (s.orientation == Orientation::inward && !(s.w_radius < s.k_radius))
            throw InvariantViolation("shell-radii", shell_name(i) + " is inward but outer_radius > inner_radius");

        auto [it, inserted] = component_dims_.emplace(s.component, s.dim);
        if (!inserted && it->second != s.dim)
            throw InvariantViolation("component-dimension",
                                     "component " + std::to_string(s.component) + " has shells of different dimension");
    }
    for (const auto& [id, dim] : extra_components) {
        if (dim < 1)
            throw InvariantViolation("component-dimension", "component " + std::to_string(id) + " has dimension < 1");
        auto [it, inserted] = component_dims_.emplace(id, dim);
        if (!inserted && it->second != dim)
            throw InvariantViolation("component-dimension",
                                     "component " + std::to_string(id) + " declared with conflicting dimension");
    }

    for (std::size_t i = 0; i < shells_.size(); ++i)
        for (std::size_t j = i + 1; j < shells_.size(); ++j)
            if (shells_[i].component == shells_[j].component && !annuli_disjoint(shells_[i], shells_[j]))
                throw InvariantViolation("shell-overlap", shell_name(i) + " and " + shell_name(j) + " overlap");

    if (weights_.size() != shells_.size())
        throw InvariantViolation("weight-count", "expected one weight per shell");
    double sum = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        if (!(weights_[i] >= 0.0 && weights_[i] <= 1.0))
            throw InvariantViolation("weight-range", shell_name(i) + " weight must lie in [0, 1]");
        sum += weights_[i];
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw InvariantViolation("weight-sum", "shell weights must sum to 1 (got " + std::to_string(sum) + ")");

    if (!(defaults_.epsilon_rel > 0.0 && defaults_.epsilon_rel < 0.5))
        throw InvariantViolation("defaults", "epsilon must lie in (0, 0.5)");
    if (!(defaults_.r0 > 0.0 && defaults_.r0 < 1.0))
        throw InvariantViolation("defaults", "r0 must lie in (0, 1)");
    if (defaults_.max_steps == 0)
        throw InvariantViolation("defaults", "max_steps must be positive");
}

int Configuration::component_dim(int component) const
{
    const auto it = component_dims_.find(component);
    if (it == component_dims_.end())
        throw DomainError("unknown component " + std::to_string(component));
    return it->second;
}

std::size_t Configuration::max_dim() const
{
    int m = 1;
    for (const auto& [id, dim] : component_dims_)
        m = std::max(m, dim);
    return static_cast<std::size_t>(m);
}

std::vector<Face> Configuration::faces() const
{
    std::vector<Face> out;
    for (std::size_t i = 0; i < shells_.size(); ++i) {
        if (shells_[i].dim == 1) {
            out.push_back({i, -1});
            out.push_back({i, +1});
        } else {
            out.push_back({i, 0});
        }
    }
    return out;
}

std::optional<std::size_t> Configuration::locate(int component, const Vec& x) const
{
    for (std::size_t i = 0; i < shells_.size(); ++i) {
        const Shell& s = shells_[i];
        if (s.component != component || x.size() != s.center.size())
            continue;
        const double rho = distance(x, s.center);
        const double tol = 1e-12 * s.hi();
        if (rho >= s.lo() - tol && rho <= s.hi() + tol)
            return i;
    }
    return std::nullopt;
}

double Configuration::absorption_width(std::size_t shell) const
{
    return defaults_.epsilon_rel * shells_.at(shell).thickness();
}

double radial_potential(int dim, double rho)
{
    switch (dim) {
    case 1:
        return rho;
    case 2:
        return std::log(rho);
    default:
        return -std::pow(rho, 2.0 - dim);
    }
}

double radial_potential_inverse(int dim, double value)
{
    switch (dim) {
    case 1:
        return value;
    case 2:
        return std::exp(value);
    default:
        return std::pow(-value, 1.0 / (2.0 - dim));
    }
}

RadialProfile::RadialProfile(const Shell& shell)
    : shell_(shell),
      phi_k_(radial_potential(shell.dim, shell.k_radius)),
      phi_w_(radial_potential(shell.dim, shell.w_radius))
{
}

double RadialProfile::value(double rho) const
{
    const double tol = 1e-12 * shell_.hi();
    if (!(rho >= shell_.lo() - tol && rho <= shell_.hi() + tol))
        throw DomainError("radius " + std::to_string(rho) + " lies outside the shell [" +
                          std::to_string(shell_.lo()) + ", " + std::to_string(shell_.hi()) + "]");
    if (rho == shell_.k_radius)
        return 0.0;
    if (rho == shell_.w_radius)
        return 1.0;
    const double g = (radial_potential(shell_.dim, rho) - phi_k_) / (phi_w_ - phi_k_);
    return std::clamp(g, 0.0, 1.0);
}

double RadialProfile::radius_closed(double level) const
{
    if (!(level >= 0.0 && level <= 1.0))
        throw DomainError("level " + std::to_string(level) + " outside [0, 1]");
    if (level == 0.0)
        return shell_.k_radius;
    if (level == 1.0)
        return shell_.w_radius;
    if (shell_.dim == 1)
        return shell_.k_radius + level * (shell_.w_radius - shell_.k_radius);
    if (shell_.dim == 2)
        return shell_.k_radius * std::pow(shell_.w_radius / shell_.k_radius, level);
    const double s = radial_potential_inverse(shell_.dim, phi_k_ + level * (phi_w_ - phi_k_));
    return std::clamp(s, shell_.lo(), shell_.hi());
}

double RadialProfile::radius(double level) const
{
    if (!(level > 0.0 && level < 1.0))
        throw DomainError("level " + std::to_string(level) + " outside (0, 1)");
    return radius_closed(level);
}

double radial_g(const Shell& shell, double rho) { return RadialProfile(shell).value(rho); }

double level_radius(const Shell& shell, double level) { return RadialProfile(shell).radius(level); }

double level_at(const Shell& shell, const Vec& x) { return radial_g(shell, distance(x, shell.center)); }

ComponentTree::ComponentTree(std::vector<double> levels, std::vector<std::vector<TreeNode>> nodes)
    : levels_(std::move(levels)), nodes_(std::move(nodes))
{
    if (levels_.empty() || levels_.size() != nodes_.size())
        throw PreconditionError("component tree: one node list per level required");
    for (std::size_t l = 0; l < levels_.size(); ++l) {
        if (!(levels_[l] > 0.0 && levels_[l] <= 1.0))
            throw PreconditionError("component tree: levels must lie in (0, 1]");
        if (l > 0 && !(levels_[l] < levels_[l - 1]))
            throw PreconditionError("component tree: levels must be strictly decreasing");
        for (const TreeNode& node : nodes_[l]) {
            if (l == 0 && node.parent)
                throw PreconditionError("component tree: root-level nodes have no parent");
            if (l > 0 && (!node.parent || *node.parent >= nodes_[l - 1].size()))
                throw PreconditionError("component tree: dangling parent at level " + std::to_string(l));
        }
    }
}

std::vector<std::size_t> ComponentTree::children(NodeId node) const
{
    std::vector<std::size_t> out;
    if (node.level + 1 >= nodes_.size())
        return out;
    const auto& next = nodes_[node.level + 1];
    for (std::size_t i = 0; i < next.size(); ++i)
        if (next[i].parent == node.index)
            out.push_back(i);
    return out;
}

bool ComponentTree::constant_width() const
{
    return std::all_of(nodes_.begin(), nodes_.end(),
                       [&](const auto& level) { return level.size() == nodes_.front().size(); });
}

ComponentTree component_tree(const Configuration& config, const std::vector<double>& levels)
{
    const std::vector<Face> faces = config.faces();
    std::vector<std::vector<TreeNode>> nodes(levels.size());
    for (std::size_t l = 0; l < levels.size(); ++l) {
        for (std::size_t f = 0; f < faces.size(); ++f) {
            TreeNode node;
            node.level = l;
            if (l > 0)
                node.parent = f;
            node.face = faces[f];
            node.label = shell_name(faces[f].shell);
            if (faces[f].side != 0)
                node.label += faces[f].side < 0 ? "-" : "+";
            nodes[l].push_back(std::move(node));
        }
    }
    return ComponentTree(levels, std::move(nodes));
}

namespace {

struct Sphere {
    Vec center;
    double radius;
};

std::size_t holes_1d(const std::vector<const CompactPiece*>& pieces)
{
    std::vector<std::pair<double, double>> intervals;
    for (const CompactPiece* p : pieces) {
        const double c = p->center[0];
        if (p->kind == CompactPiece::Kind::ball) {
            intervals.emplace_back(c - p->outer_radius, c + p->outer_radius);
        } else {
            intervals.emplace_back(c - p->outer_radius, c - p->inner_radius);
            intervals.emplace_back(c + p->inner_radius, c + p->outer_radius);
        }
    }
    std::vector<double> ends;
    for (const auto& [lo, hi] : intervals) {
        ends.push_back(lo);
        ends.push_back(hi);
    }
    std::sort(ends.begin(), ends.end());
    for (std::size_t i = 1; i < ends.size(); ++i)
        if (std::abs(ends[i] - ends[i - 1]) <= 1e-12 * std::max(1.0, std::abs(ends[i])))
            throw UnsupportedGeometry("touching interval endpoints at " + std::to_string(ends[i]));

    std::sort(intervals.begin(), intervals.end());
    std::size_t gaps = 0;
    double reach = intervals.front().second;
    for (std::size_t i = 1; i < intervals.size(); ++i) {
        if (intervals[i].first > reach)
            ++gaps;
        reach = std::max(reach, intervals[i].second);
    }
    return gaps;
}

std::size_t holes_nd(const std::vector<const CompactPiece*>& pieces)
{
    // Each boundary sphere remembers which piece (and which role) it bounds.
    std::vector<Sphere> spheres;
    struct Role {
        std::size_t outer;
        std::optional<std::size_t> inner;
    };
    std::vector<Role> roles;
    for (const CompactPiece* p : pieces) {
        spheres.push_back({p->center, p->outer_radius});
        Role role{spheres.size() - 1, std::nullopt};
        if (p->kind == CompactPiece::Kind::shell) {
            spheres.push_back({p->center, p->inner_radius});
            role.inner = spheres.size() - 1;
        }
        roles.push_back(role);
    }

    const std::size_t n = spheres.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = distance(spheres[i].center, spheres[j].center);
            const double r1 = spheres[i].radius, r2 = spheres[j].radius;
            const double tol = 1e-12 * std::max({1.0, r1, r2});
            if (std::abs(d - (r1 + r2)) <= tol || std::abs(d - std::abs(r1 - r2)) <= tol)
                throw UnsupportedGeometry("tangent boundary spheres");
            if (d > std::abs(r1 - r2) && d < r1 + r2)
                throw UnsupportedGeometry("intersecting boundary spheres");
        }

    // inside[i][j]: sphere i lies strictly inside sphere j.
    auto inside = [&](std::size_t i, std::size_t j) {
        return i != j && distance(spheres[i].center, spheres[j].center) + spheres[i].radius < spheres[j].radius;
    };
    std::vector<std::optional<std::size_t>> parent(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (inside(i, j) && (!parent[i] || spheres[j].radius < spheres[*parent[i]].radius))
                parent[i] = j;

    // Region i: interior of sphere i minus the closed balls of its children.
    auto region_in_ball = [&](std::size_t region, std::size_t ball) {
        return region == ball || inside(region, ball);
    };
    std::size_t holes = 0;
    for (std::size_t region = 0; region < n; ++region) {
        bool covered = false;
        for (const Role& role : roles) {
            if (region_in_ball(region, role.outer) && !(role.inner && region_in_ball(region, *role.inner))) {
                covered = true;
                break;
            }
        }
        if (!covered)
            ++holes;
    }
    return holes;
}

}  // namespace

StabilityReport classify_stability(const CompactDescription& compact)
{
    std::map<int, std::vector<const CompactPiece*>> by_component;
    std::map<int, int> dims;
    for (const CompactPiece& p : compact.pieces) {
        if (p.dim < 1 || p.center.size() != static_cast<std::size_t>(p.dim))
            throw PreconditionError("compact piece: center length must equal dim >= 1");
        if (!(p.outer_radius > 0.0))
            throw PreconditionError("compact piece: radii must be positive");
        if (p.kind == CompactPiece::Kind::shell && !(p.inner_radius > 0.0 && p.inner_radius < p.outer_radius))
            throw PreconditionError("compact piece: shell needs 0 < inner_radius < outer_radius");
        auto [it, inserted] = dims.emplace(p.component, p.dim);
        if (!inserted && it->second != p.dim)
            throw PreconditionError("compact piece: component " + std::to_string(p.component) +
                                    " has pieces of different dimension");
        by_component[p.component].push_back(&p);
    }

    StabilityReport report;
    for (const auto& [component, pieces] : by_component) {
        const std::size_t holes = dims[component] == 1 ? holes_1d(pieces) : holes_nd(pieces);
        report.holes_per_component[component] = holes;
        report.hole_count += holes;
    }
    report.strongly_stable = true;
    return report;
}

CompactDescription implied_compact(const Configuration& config)
{
    const auto& shells = config.shells();
    auto concentric = [](const Shell& a, const Shell& b) {
        return a.component == b.component && distance(a.center, b.center) <= 1e-12 * std::max(1.0, a.hi());
    };
    // An inward shell nested in a concentric outward shell marks the hole of a
    // closed shell of K running between their K-side radii.
    std::vector<bool> consumed(shells.size(), false);
    CompactDescription out;
    for (std::size_t i = 0; i < shells.size(); ++i) {
        const Shell& s = shells[i];
        if (s.orientation != Orientation::outward)
            continue;
        std::optional<std::size_t> hole;
        for (std::size_t j = 0; j < shells.size(); ++j) {
            const Shell& h = shells[j];
            if (h.orientation == Orientation::inward && !consumed[j] && concentric(s, h) &&
                h.k_radius < s.k_radius && (!hole || h.k_radius > shells[*hole].k_radius))
                hole = j;
        }
        CompactPiece p{s.component, s.dim, s.center, CompactPiece::Kind::ball, 0.0, s.k_radius};
        if (hole) {
            consumed[*hole] = true;
            p.kind = CompactPiece::Kind::shell;
            p.inner_radius = shells[*hole].k_radius;
        }
        out.pieces.push_back(std::move(p));
    }
    for (std::size_t j = 0; j < shells.size(); ++j) {
        const Shell& h = shells[j];
        if (h.orientation == Orientation::inward && !consumed[j])
            out.pieces.push_back({h.component, h.dim, h.center, CompactPiece::Kind::shell, h.k_radius, 2.0 * h.k_radius});
    }
    return out;
}

}  // namespace darnwalk
