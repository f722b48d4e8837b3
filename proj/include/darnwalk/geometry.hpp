#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "darnwalk/vecmath.hpp"

namespace darnwalk {

enum class Orientation {
    outward,  ///< shell surrounds a ball of K: k_radius < w_radius
    inward,   ///< shell fills a hole of K: w_radius < k_radius
};

/// An annular face of the compact K inside one Euclidean component.
///
/// The level function g vanishes on the sphere of radius `k_radius` (part of the
/// boundary of K) and equals 1 on the sphere of radius `w_radius` (part of the
/// boundary of the reference neighbourhood W0). In JSON these are
/// `inner_radius` and `outer_radius` respectively.
///
/// In dimension 1 the "sphere" of radius rho is the point pair c +- rho, so a
/// single shell has two faces (side -1 and side +1).
struct Shell {
    int component = 0;
    int dim = 1;
    Vec center;
    double k_radius = 0.0;
    double w_radius = 0.0;
    Orientation orientation = Orientation::outward;

    double lo() const { return std::min(k_radius, w_radius); }
    double hi() const { return std::max(k_radius, w_radius); }
    double thickness() const { return hi() - lo(); }
    std::size_t face_count() const { return dim == 1 ? 2 : 1; }
};

/// One connected piece of S_r or A_r: a shell, plus the side for dim-1 shells.
struct Face {
    std::size_t shell = 0;
    int side = 0;  ///< 0 for dim >= 2, -1 or +1 for dim 1

    friend bool operator==(const Face&, const Face&) = default;
};

struct SimulationDefaults {
    /// Absorption half-width as a fraction of the shell thickness (or ball radius).
    double epsilon_rel = 1e-4;
    /// Resurrection level.
    double r0 = 1e-2;
    std::size_t max_steps = 1'000'000;
};

/// The darned space: shells of K across components, their weights, and the
/// components' ambient dimensions. Immutable after construction.
class Configuration {
public:
    /// Throws InvariantViolation naming the violated constraint.
    Configuration(std::vector<Shell> shells, std::vector<double> weights,
                  SimulationDefaults defaults = {},
                  std::map<int, int> extra_components = {});

    const std::vector<Shell>& shells() const { return shells_; }
    const Shell& shell(std::size_t i) const { return shells_.at(i); }
    std::size_t shell_count() const { return shells_.size(); }
    const std::vector<double>& weights() const { return weights_; }
    const SimulationDefaults& defaults() const { return defaults_; }

    /// Component id -> ambient dimension.
    const std::map<int, int>& components() const { return component_dims_; }
    int component_dim(int component) const;
    std::size_t max_dim() const;

    std::vector<Face> faces() const;

    /// Shell whose closed annulus contains x, if any.
    std::optional<std::size_t> locate(int component, const Vec& x) const;

    /// Absolute absorption half-width for walks in the given shell.
    double absorption_width(std::size_t shell) const;

private:
    std::vector<Shell> shells_;
    std::vector<double> weights_;
    SimulationDefaults defaults_;
    std::map<int, int> component_dims_;
};

/// Radial potential: rho (d = 1), log rho (d = 2), -rho^(2-d) (d >= 3).
/// Increasing in rho; every radial harmonic function is affine in it.
double radial_potential(int dim, double rho);

/// Inverse of radial_potential.
double radial_potential_inverse(int dim, double value);

/// The level function g restricted to one shell, with its inverse.
class RadialProfile {
public:
    explicit RadialProfile(const Shell& shell);

    /// g at radius rho; DomainError outside the closed shell.
    double value(double rho) const;
    /// Radius s with g(s) = level; DomainError unless 0 < level < 1.
    double radius(double level) const;
    /// Same as radius() but accepts the closed interval [0, 1].
    double radius_closed(double level) const;

    const Shell& shell() const { return shell_; }

private:
    Shell shell_;
    double phi_k_;
    double phi_w_;
};

double radial_g(const Shell& shell, double rho);
double level_radius(const Shell& shell, double level);

/// g at a point of the shell's component.
double level_at(const Shell& shell, const Vec& x);

/// Connected components of A_eta across a decreasing list of levels.
struct TreeNode {
    std::size_t level = 0;
    std::optional<std::size_t> parent;  ///< index in the previous level
    std::optional<Face> face;           ///< set for trees built from a configuration
    std::string label;
};

struct NodeId {
    std::size_t level = 0;
    std::size_t index = 0;

    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

class ComponentTree {
public:
    /// General tree: nodes[l] lists level-l nodes; parents index into nodes[l-1].
    ComponentTree(std::vector<double> levels, std::vector<std::vector<TreeNode>> nodes);

    const std::vector<double>& levels() const { return levels_; }
    std::size_t depth() const { return nodes_.size(); }
    const std::vector<TreeNode>& level_nodes(std::size_t level) const { return nodes_.at(level); }
    std::size_t width(std::size_t level) const { return nodes_.at(level).size(); }
    std::vector<std::size_t> children(NodeId node) const;
    /// True when every level has the same number of nodes.
    bool constant_width() const;

private:
    std::vector<double> levels_;
    std::vector<std::vector<TreeNode>> nodes_;
};

/// Tree of connected components of A_{eta_n}; in concentric geometry every face
/// contributes one component per level, so the width is the face count.
ComponentTree component_tree(const Configuration& config, const std::vector<double>& levels);

/// A finite union of closed balls and closed shells describing K.
struct CompactPiece {
    enum class Kind { ball, shell };

    int component = 0;
    int dim = 3;
    Vec center;
    Kind kind = Kind::ball;
    double inner_radius = 0.0;  ///< shells only
    double outer_radius = 0.0;  ///< ball radius, or shell outer radius
};

struct CompactDescription {
    std::vector<CompactPiece> pieces;
};

struct StabilityReport {
    std::size_t hole_count = 0;
    bool strongly_stable = true;
    std::map<int, std::size_t> holes_per_component;
};

/// Counts holes (bounded components of the complement). Boundary spheres must
/// be pairwise disjoint; tangent or crossing spheres raise UnsupportedGeometry.
StabilityReport classify_stability(const CompactDescription& compact);

/// The compact implied by a configuration. An outward shell bounds a ball of K
/// unless a concentric inward shell sits inside it, in which case the piece is the
/// closed shell between the two K-side radii. Unpaired inward shells contribute
/// the closed shell between k_radius and 2 k_radius.
CompactDescription implied_compact(const Configuration& config);

}  // namespace darnwalk
