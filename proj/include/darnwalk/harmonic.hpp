#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "darnwalk/diffusion.hpp"
#include "darnwalk/geometry.hpp"
#include "darnwalk/measures.hpp"
#include "darnwalk/parallel.hpp"
#include "darnwalk/rng.hpp"
#include "darnwalk/state.hpp"

namespace darnwalk {

/// A field value with the standard error of its estimate (0 for exact fields).
struct FieldValue {
    double value = 0.0;
    double std_error = 0.0;
};

/// A real function on (part of) the darned space.
struct ScalarField {
    std::string name;
    std::function<FieldValue(const DarnedState&)> eval;
    /// Empty means the whole darned space.
    std::function<bool(const DarnedState&)> domain;
    /// False when `eval` must not be called from several threads at once.
    bool concurrent = true;

    FieldValue operator()(const DarnedState& x) const { return eval(x); }
    bool defined_at(const DarnedState& x) const { return !domain || domain(x); }

    static ScalarField constant(double c);
    /// g on every shell and 0 at x0: harmonic off x0 but not across it.
    static ScalarField level_function(const Configuration& config);
    /// c_j + k_j g on shell j and `at_x0` at the darned point.
    static ScalarField affine_in_g(const Configuration& config, std::vector<double> offsets,
                                   std::vector<double> slopes, double at_x0);
};

struct RadiusReport {
    double r = 0.0;
    double integral = 0.0;  ///< estimate of the integral of h against sigma_r
    double integral_std_error = 0.0;
    double at_x0 = 0.0;
    double at_x0_std_error = 0.0;
    double z = 0.0;
    double p_value = 1.0;
    bool pass = true;
};

struct HarmonicityReport {
    std::vector<RadiusReport> radii;
    bool all_pass = true;
    /// Some radii pass and others fail: evidence that h is not harmonic off x0.
    bool mixed = false;
};

struct HarmonicityOptions {
    /// Quadrature nodes per shell sphere for parametric sigma_r.
    std::size_t quadrature_points = 1 << 14;
    double significance = 0.01;
};

/// Tests the integral of h against sigma_r equals h(x0) at every radius r. Parametric
/// sigma_r is integrated with a sphere cubature, empirical sigma_r by atom sums.
HarmonicityReport harmonicity_test_at_x0(const Configuration& config, const MeasureFamily& family,
                                         const ScalarField& h, const std::vector<double>& radii,
                                         const Exec& exec = {}, const HarmonicityOptions& options = {});

using BoundaryData = std::function<double(const DarnedState&)>;

/// u = H_U f as a field: inside U, the mean of f over `n_samples` simulated exits
/// (streams keyed by the evaluation point); outside U, f itself.
ScalarField dirichlet_field(const Configuration& config, const SphereMeasure& sigma_r0, const Domain& U,
                            BoundaryData f, std::size_t n_samples, const StreamKey& key,
                            const SimulationOptions& options = {});

/// Values of dirichlet_field at the given points, each parallelized over samples.
std::vector<FieldValue> solve_dirichlet(const Configuration& config, const SphereMeasure& sigma_r0,
                                        const Domain& U, const BoundaryData& f,
                                        const std::vector<DarnedState>& points, std::size_t n_samples,
                                        const StreamKey& key, const Exec& exec = {},
                                        const SimulationOptions& options = {});

struct MeanValueEntry {
    DarnedState center;
    double radius = 0.0;
    double sphere_mean = 0.0;
    double center_value = 0.0;
    double deficit = 0.0;      ///< sphere_mean - center_value
    double tolerance = 0.0;    ///< 3 x combined quadrature and sampling error
    bool pass = true;
};

struct MeanValueReport {
    std::vector<MeanValueEntry> entries;
    bool pass = true;
};

/// Spherical mean of h over each sphere versus h at the center. The quadrature
/// error is estimated by comparison with a rule of half the size.
MeanValueReport mean_value_check(const Configuration& config, const ScalarField& h,
                                 const std::vector<DarnedState>& centers, const std::vector<double>& radii,
                                 std::size_t n_quadrature, const Exec& exec = {});

}  // namespace darnwalk
