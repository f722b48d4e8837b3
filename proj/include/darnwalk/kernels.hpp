#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "darnwalk/geometry.hpp"
#include "darnwalk/measures.hpp"
#include "darnwalk/parallel.hpp"
#include "darnwalk/rng.hpp"
#include "darnwalk/state.hpp"

namespace darnwalk {

/// Called after every walk-on-spheres jump with the new position and the
/// accumulated expected time.
using StepObserver = std::function<void(const Vec& position, double elapsed)>;

struct ExitSample {
    enum class Side { outer, inner };

    Side side = Side::inner;
    Vec point;              ///< exit point; empty for inner exits
    std::size_t steps = 0;  ///< walk-on-spheres jumps
    double elapsed = 0.0;   ///< sum of radius^2 / dim over the jumps
};

/// Concentric annulus between the K-side sphere and an exit sphere.
struct AnnulusWalk {
    Vec center;
    int dim = 1;
    double k_radius = 0.0;
    double exit_radius = 0.0;
    double epsilon = 0.0;
    std::size_t max_steps = 1'000'000;
};

/// Walk-on-spheres in one annulus with its constants and scratch space set up
/// once, for loops that run many walks in the same annulus.
class AnnulusWalker {
public:
    explicit AnnulusWalker(AnnulusWalk walk);

    /// Walks from `start` (dim coordinates). Steps and expected time are added to
    /// `steps` and `elapsed`; an outer exit point is written to `exit`. Throws
    /// NonConvergence once `steps` reaches `step_limit`.
    ExitSample::Side run(const double* start, Stream& rng, std::size_t& steps, double& elapsed, double* exit,
                         std::size_t step_limit, const StepObserver* observer = nullptr);

    const AnnulusWalk& walk() const { return walk_; }

private:
    template <int D>
    ExitSample::Side run_fixed(const double* start, Stream& rng, std::size_t& steps, double& elapsed, double* exit,
                               std::size_t step_limit, const StepObserver* observer);

    AnnulusWalk walk_;
    double lo_, hi_, phi_k_, phi_span_;
    Vec x_, dir_;
};

/// Walk-on-spheres until within epsilon of either sphere. The side is then drawn
/// with the exact hitting probability of the exit sphere from the current radius,
/// and outer exits are projected radially onto the exit sphere.
ExitSample walk_annulus(const AnnulusWalk& walk, const Vec& start, Stream& rng,
                        const StepObserver* observer = nullptr);

/// Walk-on-spheres to the boundary of a ball; the exit point is the radial
/// projection once within epsilon.
ExitSample walk_ball(const Vec& center, double radius, const Vec& start, double epsilon, std::size_t max_steps,
                     Stream& rng, const StepObserver* observer = nullptr);

/// H_{A_t}(y, S_t) = g(y) / t for y in the closed annulus A_t of `shell`.
double exit_outer_prob(const Configuration& config, std::size_t shell, const Vec& y, double t);

/// Uniform point on the sphere of the given radius (Brownian exit from the ball's center).
Vec sample_ball_exit(const Vec& center, double radius, Stream& rng);

/// One draw from H_{A_t}(y, .) in `shell`.
ExitSample sample_annulus_exit(const Configuration& config, std::size_t shell, const Vec& y, double t,
                               double epsilon, std::size_t max_steps, Stream& rng);

/// A measurable subset of a boundary. Sets tagged with `shell` denote the whole
/// level sphere S_{shell,t} and are evaluated in closed form where possible.
struct BoundarySet {
    std::string label;
    std::optional<std::size_t> shell;
    std::function<bool(const DarnedState&)> contains;
};

/// S_{shell,t}: points of the shell's component lying in that shell.
BoundarySet level_sphere_set(const Configuration& config, std::size_t shell);
/// The darned point (absorption at the boundary of K).
BoundarySet darned_point_set();

struct KernelEntry {
    std::string label;
    double mass = 0.0;
    double std_error = 0.0;
};

struct KernelEstimate {
    std::vector<KernelEntry> entries;
    std::size_t n_samples = 0;  ///< 0 when every entry is exact

    double total() const;
    const KernelEntry& at(const std::string& label) const;
};

/// H_{U_t}(x, B) for x = x0 or x in A_t: sigma_t(B) at x0, otherwise
/// H_{A_t}(y, B cap S_t) + (1 - g(y)/t) sigma_t(B). Shell-tagged sets are exact;
/// other sets are estimated from `n_samples` draws.
KernelEstimate exit_kernel_Ut(const Configuration& config, const SphereMeasure& sigma_t, const DarnedState& x,
                              double t, const std::vector<BoundarySet>& sets, std::size_t n_samples,
                              const StreamKey& key, const Exec& exec = {});

struct PushForwardResult {
    SphereMeasure outer;          ///< sub-probability measure on S_t
    double outer_mass = 0.0;
    double outer_std_error = 0.0;
    double inner_mass = 0.0;      ///< absorbed at the boundary of K
    std::size_t n_samples = 0;
};

/// Empirical sigma H_{A_t} restricted to S_t: n walks from sigma-distributed starts.
/// Clouds larger than `max_atoms` are reduced by systematic resampling.
PushForwardResult push_forward(const Configuration& config, const SphereMeasure& sigma, double t,
                               std::size_t n_samples, const StreamKey& key, const Exec& exec = {},
                               std::size_t max_atoms = 1'000'000);

/// Systematic resampling of a weighted cloud down to `count` equal-weight atoms.
std::vector<Atom> systematic_resample(const std::vector<Atom>& atoms, std::size_t count, Stream& rng);

}  // namespace darnwalk
