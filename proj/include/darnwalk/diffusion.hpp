#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "darnwalk/geometry.hpp"
#include "darnwalk/kernels.hpp"
#include "darnwalk/measures.hpp"
#include "darnwalk/parallel.hpp"
#include "darnwalk/rng.hpp"
#include "darnwalk/state.hpp"

namespace darnwalk {

/// Stopping domain for the darned diffusion.
///
/// - ball: an open ball in one component, disjoint from K. Inside it the darned
///   diffusion is Brownian motion.
/// - darned: {x0} plus, for each shell j, the annulus between the K-side sphere
///   and S_{j, level_j}. With all levels equal to t this is U_t.
/// - annulus: A_t of one shell, without x0; reaching the boundary of K is an exit
///   (reported as the darned point).
class Domain {
public:
    enum class Kind { ball, darned, annulus };

    static Domain ball(const Configuration& config, int component, Vec center, double radius);
    static Domain darned_neighborhood(const Configuration& config, double t);
    static Domain darned(const Configuration& config, std::vector<double> levels);
    static Domain annulus(const Configuration& config, std::size_t shell, double t);

    Kind kind() const { return kind_; }
    int component() const { return component_; }
    const Vec& center() const { return center_; }
    double radius() const { return radius_; }
    const std::vector<double>& levels() const { return levels_; }
    std::size_t shell() const { return shell_; }
    double min_level() const;

    /// Membership in the closure of the domain.
    bool contains_closure(const Configuration& config, const DarnedState& x) const;
    /// Short text form: "ball", "Ut", "darned", "annulus".
    std::string describe() const;

private:
    Domain() = default;

    Kind kind_ = Kind::ball;
    int component_ = 0;
    Vec center_;
    double radius_ = 0.0;
    std::vector<double> levels_;
    std::size_t shell_ = 0;
};

struct PathPoint {
    std::size_t step = 0;
    std::optional<double> clock;  ///< expected elapsed time, when accumulated
    DarnedState state;
};

/// A simulated trajectory: walk-on-spheres positions, x0 visits and resurrections.
struct DarnedPath {
    double r0 = 0.0;
    std::string mode = "exit-law";  ///< "exit-law" or "time-resolved"
    std::uint64_t seed = 0;
    std::vector<PathPoint> points;
};

/// CSV with header step,clock,component_id,x1..x<max_dim>. The clock is empty
/// in exit-law mode; coordinates beyond the state's dimension are empty.
void write_trajectory_csv(std::ostream& out, const DarnedPath& path, std::size_t max_dim);

struct SimulationOptions {
    bool accumulate_time = false;
    std::optional<double> epsilon_rel;     ///< overrides the configuration default
    std::optional<std::size_t> max_steps;  ///< total jump budget per sample
    DarnedPath* path = nullptr;            ///< records states when set
};

struct ExitResult {
    DarnedState exit;
    double elapsed = 0.0;  ///< expected exit time contribution (0 unless accumulated)
    std::size_t steps = 0;
    std::size_t resurrections = 0;
};

/// Mean holding time charged per resurrection from x0 onto S_{r0}: the value
/// sum_j sigma(S_j) |s_j(r0)^2 - a_j^2| / d_j, which makes the expected exit time
/// from x0 of every ball-type neighborhood W(gamma) equal to gamma.
double resurrection_time(const Configuration& config, const SphereMeasure& sigma_r0);

/// One path of the darned diffusion from `start` until it leaves `domain`.
/// On reaching the boundary of K the path moves to x0 and restarts from a draw of
/// sigma_r0. Throws PreconditionError unless r0 lies below every exit level.
ExitResult simulate_exit(const Configuration& config, const SphereMeasure& sigma_r0, const DarnedState& start,
                         const Domain& domain, Stream& rng, const SimulationOptions& options = {});

/// Euler-Maruyama oracle for ball domains: Gaussian increments of variance dt per
/// coordinate until the path leaves the ball. `elapsed` is steps * dt.
ExitResult simulate_exit_em(const Configuration& config, const DarnedState& start, const Domain& domain, double dt,
                            Stream& rng, std::size_t max_steps = 100'000'000);

struct ExitTimeEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
};

/// p_V(x) = E^x tau_V for each start.
std::vector<ExitTimeEstimate> estimate_p_V(const Configuration& config, const SphereMeasure& sigma_r0,
                                           const Domain& V, const std::vector<DarnedState>& starts,
                                           std::size_t n_samples, const StreamKey& key, const Exec& exec = {},
                                           const SimulationOptions& options = {});

/// (H_U p_V)(x): exit U, then measure the remaining time to leave V. U must lie in V.
std::vector<ExitTimeEstimate> estimate_HU_pV(const Configuration& config, const SphereMeasure& sigma_r0,
                                             const Domain& U, const Domain& V,
                                             const std::vector<DarnedState>& starts, std::size_t n_samples,
                                             const StreamKey& key, const Exec& exec = {},
                                             const SimulationOptions& options = {});

/// Empirical H_U(x, .) over the given sets. Exits in none of the sets are
/// reported under the label "unassigned" when there are any.
KernelEstimate estimate_exit_kernel(const Configuration& config, const SphereMeasure& sigma_r0, const Domain& U,
                                    const DarnedState& x, const std::vector<BoundarySet>& sets,
                                    std::size_t n_samples, const StreamKey& key, const Exec& exec = {},
                                    const SimulationOptions& options = {});

/// H_V H_U(x, .): exit V first, then U from the exit point.
KernelEstimate estimate_two_stage_kernel(const Configuration& config, const SphereMeasure& sigma_r0,
                                         const Domain& V, const Domain& U, const DarnedState& x,
                                         const std::vector<BoundarySet>& sets, std::size_t n_samples,
                                         const StreamKey& key, const Exec& exec = {},
                                         const SimulationOptions& options = {});

struct RestrictionReport {
    double statistic = 0.0;
    double p_value = 1.0;
    bool pass = true;
    std::size_t n_samples = 0;
};

/// Exit laws from the center of the ball B under the darned diffusion and under
/// plain Brownian motion, compared with the energy two-sample test. B must keep
/// a positive distance from K and from the closure of A_r.
RestrictionReport restriction_equivalence_test(const Configuration& config, const SphereMeasure& sigma_r0,
                                               double r, int component, const Vec& center, double radius,
                                               std::size_t n_samples, const StreamKey& key, const Exec& exec = {},
                                               double significance = 0.01,
                                               const stats::EnergyTestOptions& energy = {});

}  // namespace darnwalk
