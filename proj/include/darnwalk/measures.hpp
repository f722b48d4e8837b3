#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "darnwalk/geometry.hpp"
#include "darnwalk/parallel.hpp"
#include "darnwalk/rng.hpp"
#include "darnwalk/state.hpp"
#include "darnwalk/stats.hpp"

namespace darnwalk {

/// A weighted point on a level set S_r.
struct Atom {
    std::size_t shell = 0;
    Vec point;
    double weight = 0.0;
};

/// A finite measure on the level set S_r. Parametric measures mix the uniform
/// sphere laws of the shells; empirical measures are weighted point clouds.
class SphereMeasure {
public:
    enum class Kind { parametric, empirical };

    /// Throws InvariantViolation unless the weights are >= 0 and sum to 1.
    static SphereMeasure parametric(const Configuration& config, double level,
                                    std::vector<double> shell_weights);
    /// Atoms must lie on S_level. `mc_samples` records how many Monte Carlo
    /// draws produced the cloud (0 for measures specified exactly).
    static SphereMeasure empirical(const Configuration& config, double level, std::vector<Atom> atoms,
                                   std::size_t mc_samples = 0);

    Kind kind() const { return kind_; }
    double level() const { return level_; }
    double total_mass() const;
    bool is_probability(double tol = 1e-9) const;
    double shell_mass(std::size_t shell) const;
    std::size_t shell_count() const { return spheres_.size(); }
    const std::vector<double>& shell_weights() const { return weights_; }
    const std::vector<Atom>& atoms() const { return atoms_; }
    std::size_t mc_samples() const { return mc_samples_; }
    /// Radius of S_{shell, level}.
    double sphere_radius(std::size_t shell) const { return spheres_.at(shell).radius; }
    int shell_component(std::size_t shell) const { return spheres_.at(shell).component; }

    /// Draw from the normalized measure; the returned atom has weight 1.
    Atom sample(Stream& rng) const;
    /// Same draw as sample(), writing the point to `out` and returning its shell.
    std::size_t sample_into(Stream& rng, double* out) const;
    SphereMeasure normalized() const;

    static DarnedState state_of(const Configuration& config, const Atom& atom)
    {
        return DarnedState::at(config.shell(atom.shell).component, atom.point);
    }

private:
    struct LevelSphere {
        int component;
        int dim;
        Vec center;
        double radius;
    };

    SphereMeasure(Kind kind, const Configuration& config, double level);

    Kind kind_;
    double level_;
    std::vector<LevelSphere> spheres_;
    std::vector<double> weights_;  // parametric: per shell
    std::vector<Atom> atoms_;      // empirical
    std::vector<double> cdf_;      // cumulative weights for sampling
    std::size_t mc_samples_ = 0;
};

/// A family (sigma_r) of probability measures on level sets: either a generator
/// for the parametric mixture family or a finite list of members.
class MeasureFamily {
public:
    static MeasureFamily parametric(const Configuration& config, std::vector<double> weights);
    static MeasureFamily listed(std::vector<SphereMeasure> members);

    bool is_parametric() const { return generator_.has_value(); }
    /// Member at level r. Listed families require r to match a member level.
    SphereMeasure at(double r) const;
    bool has_level(double r) const;
    std::vector<double> levels() const;
    const std::vector<SphereMeasure>& members() const { return members_; }

private:
    struct Generator {
        Configuration config;
        std::vector<double> weights;
    };

    std::optional<Generator> generator_;
    std::vector<SphereMeasure> members_;
};

/// Mixture family sigma_r = sum_j alpha_j * uniform(S_{j,r}).
MeasureFamily make_parametric_family(const Configuration& config, const std::vector<double>& alpha);

/// Weights alpha_V for the nodes of a component tree.
struct WeightAllocation {
    std::vector<std::vector<double>> weights;  ///< weights[level][index]
    bool strictly_positive = false;

    double weight(NodeId node) const { return weights.at(node.level).at(node.index); }
    double level_sum(std::size_t level) const;
};

/// Top-down allocation. Constrained nodes keep their targets; the remainder of
/// each parent's weight is split equally among its unconstrained children.
/// An empty target map gives the uniform allocation.
WeightAllocation allocate_weights(const ComponentTree& tree, const std::map<NodeId, double>& targets = {});

/// Per-shell weights read off the deepest level of an allocation on
/// component_tree(config, ...).
std::vector<double> shell_weights(const Configuration& config, const ComponentTree& tree,
                                  const WeightAllocation& allocation);

/// Point on S_r mapped to R^{sum of dims}: the unit direction from the shell
/// center placed in the shell's own block. Distances between shells are sqrt(2).
void angular_embedding(const Configuration& config, const Atom& atom, double* out);
std::size_t embedding_dim(const Configuration& config);
/// Embedded atoms of an empirical measure (weights ignored).
stats::PointCloud embed(const Configuration& config, const SphereMeasure& measure);
/// Embedded i.i.d. draws from any measure.
stats::PointCloud embed_samples(const Configuration& config, const SphereMeasure& measure, std::size_t n,
                                const StreamKey& key);

struct CompatibilityOptions {
    double z_threshold = 3.0;
    double significance = 0.01;
    stats::EnergyTestOptions energy;
};

struct ShellMassCheck {
    std::size_t shell = 0;
    double expected = 0.0;
    double observed = 0.0;
    double std_error = 0.0;
    double z = 0.0;
};

struct CompatibilityPairReport {
    double r = 0.0;
    double t = 0.0;
    double outer_mass = 0.0;      ///< pushed mass reaching S_t, expected r/t
    double outer_std_error = 0.0;
    std::vector<ShellMassCheck> shells;
    double max_abs_z = 0.0;       ///< effect size in standard errors
    double energy_statistic = 0.0;
    double energy_p_value = 1.0;
    bool mass_pass = true;
    bool angular_pass = true;
    bool pass = true;
};

struct CompatibilityReport {
    std::vector<CompatibilityPairReport> pairs;
    bool pass = true;
};

/// Statistical check of sigma_r H_{A_t} = (r/t) sigma_t for each pair r <= t.
CompatibilityReport check_compatibility(const Configuration& config, const MeasureFamily& family,
                                        const std::vector<std::pair<double, double>>& pairs,
                                        std::size_t n_samples, const StreamKey& key, const Exec& exec = {},
                                        const CompatibilityOptions& options = {});

struct WeakLimitIterate {
    double eta = 0.0;
    std::size_t walks = 0;       ///< starts drawn from nu_k
    std::size_t outer = 0;       ///< walks that reached S_r
    double mass = 0.0;           ///< (r / eta) * outer / walks, expected 1
    double mass_std_error = 0.0;
};

struct WeakLimitLevel {
    double r = 0.0;
    std::vector<WeakLimitIterate> iterates;
    /// Energy distance between the normalized iterates k and k+1.
    std::vector<double> successive_distances;
    /// Batch-means standard error of each distance (conservative).
    std::vector<double> distance_std_errors;
    /// Coupled pairs behind each distance.
    std::vector<std::size_t> paired_counts;
};

struct WeakLimitResult {
    MeasureFamily family;
    std::vector<WeakLimitLevel> levels;
};

struct WeakLimitOptions {
    /// 0 evaluates the Euclidean kernel exactly in O(n^2).
    std::size_t projection_directions = 64;
    std::size_t error_batches = 16;
    /// Walk indices processed per parallel batch.
    std::size_t batch = 1 << 16;
};

/// sigma_{r,k} = (r / eta_k) (nu_k H_{A_r})|_{S_r} for every target level r and
/// every k, each from `n_walks` walks. Iterates are coupled: walk i of iterate
/// k+1 first runs from its nu_{k+1} start to S_{eta_k}; on arrival it continues
/// along walk i of iterate k, carried over by the rotation of the shell that
/// maps that walk's start onto the arrival point (the annulus and Brownian motion
/// are invariant under it). Each iterate keeps its exact law; successive
/// iterates share paths, and the distances use the paired estimator. The
/// returned family holds the normalized last iterate for each r.
WeakLimitResult weak_limit_family(const Configuration& config, const std::vector<double>& etas,
                                  const std::vector<SphereMeasure>& nus, const std::vector<double>& targets,
                                  std::size_t n_walks, const StreamKey& key, const Exec& exec = {},
                                  const WeakLimitOptions& options = {});

}  // namespace darnwalk
