#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rebal/core.hpp"

namespace rebal::density {

// Volume of the unit ball in `dim` dimensions.
double unit_ball_volume(std::size_t dim);

// A distribution on R^d carrying everything the interpolation-density
// machinery needs: a pointwise density, the measure of balls around a
// center, a radius R with support contained in B(0, R), envelope constants
// lower_bound <= f <= upper_bound on the support, and a sampler.
struct DensitySpec {
    std::size_t dim = 0;
    std::function<double(std::span<const double>)> pdf;
    // mu(B(c, r)): probability mass of the ball of radius r around c.
    std::function<double(std::span<const double>, double)> ball_measure;
    double support_radius = 0.0;
    double lower_bound = 0.0;
    double upper_bound = 0.0;
    // Writes one draw into `out` (size dim), consuming a fixed number of
    // uniforms per call so parallel streams stay aligned.
    std::function<void(Rng&, std::span<double>)> sample;
    std::string name;
};

// Uniform on the axis-aligned cube [lo, hi]^dim, dim in {1, 2}. Ball mass
// is the exact overlap length in one dimension and a deterministic polar
// quadrature of the cube/disc overlap in two.
DensitySpec uniform_box_spec(std::size_t dim, double lo, double hi);

// Uniform on the ball B(0, radius), dim in {1, 2, 3}. Ball mass uses the
// closed interval/lens/spherical-lens overlap formulas.
DensitySpec uniform_ball_spec(std::size_t dim, double radius);

// Regular histogram grid: per-dimension edges [lower[j], upper[j]) split
// into bins[j] equal cells, indexed row-major.
struct GridSpec {
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<std::size_t> bins;

    static GridSpec regular(std::size_t dim, double lo, double hi, std::size_t bins_per_dim);

    std::size_t dims() const { return bins.size(); }
    std::size_t total_cells() const;
    double cell_volume() const;
    // Cell index of a point, or nullopt when it falls outside the grid.
    std::optional<std::size_t> locate(std::span<const double> point) const;
    // Center coordinates of one cell.
    std::vector<double> cell_center(std::size_t cell) const;
    // Lower/upper corner of one cell along dimension j.
    double cell_lower(std::size_t cell, std::size_t j) const;
    double cell_upper(std::size_t cell, std::size_t j) const;
};

// Histogram density estimate: cell values integrate to one over the grid,
// with a per-cell Monte-Carlo standard error.
struct HistogramDensity {
    GridSpec grid;
    std::vector<double> value;
    std::vector<double> std_error;
    std::vector<std::size_t> counts;
    std::size_t total = 0;   // rows offered
    std::size_t inside = 0;  // rows that landed in a cell
};

// Normalized histogram of the sample rows over `grid`. Requires at least
// 1000 rows; a degenerate grid (no cells, inverted edges, dimension
// mismatch, or no sample inside) raises GridError.
HistogramDensity mc_density(const Matrix& samples, const GridSpec& grid);

// Density of one interpolation draw Z = x_c + W (X_k - x_c) at z, given the
// central point, where X_k is a uniformly chosen element of the K nearest
// neighbors of x_c among n-1 fresh draws from `spec` and W ~ U[0,1].
// Evaluated as a radial integral over the neighbor distance r in
// [|z - x_c|, 2R] by adaptive quadrature, with the order-statistic factor
// in its stable binomial-sum form. z == x_c raises Singularity (the density
// carries a |z-x_c|^{-(d-1)} factor); K outside [1, n-1] raises InvalidK.
double smote_conditional_density(std::span<const double> z, std::span<const double> x_c,
                                 std::size_t k, std::size_t n, const DensitySpec& spec);

// Same value through the interpolation-coefficient parameterization
// (integral over w = |z-x_c|/r on (0, 1]). Kept as an independent
// cross-check of the radial quadrature.
double smote_conditional_density_w(std::span<const double> z, std::span<const double> x_c,
                                   std::size_t k, std::size_t n, const DensitySpec& spec);

// One verified inequality: an analytic bound, the Monte-Carlo estimate of
// the bounded quantity, and the accepted slack (three standard errors).
// pass == (empirical <= bound + margin). A report with applicable == false
// records that the bound's precondition failed; it is informational, not a
// failure, and its Monte-Carlo side is skipped.
struct BoundReport {
    double bound = 0.0;
    double empirical = 0.0;
    double std_error = 0.0;
    double margin = 0.0;
    bool applicable = true;
    bool pass = false;
    std::string note;
};

// Synthetic draws conditioned on a fixed central point: each row redraws
// the n-1 companion points from `spec`. Row i depends only on (inputs,
// derive_seed(seed, i)), so thread count never changes the result.
Matrix conditional_sample(std::span<const double> x_c, std::size_t k, std::size_t n,
                          const DensitySpec& spec, std::size_t draws, std::uint64_t seed,
                          unsigned threads = 1);

// Unconditional draws: every row redraws a full n-point base sample, picks
// a random central, and interpolates. Central points are reported so
// distance-to-central statistics can be formed.
struct SmoteDrawSet {
    Matrix points;
    Matrix centrals;
};
SmoteDrawSet unconditional_sample(std::size_t k, std::size_t n, const DensitySpec& spec,
                                  std::size_t draws, std::uint64_t seed,
                                  unsigned threads = 1);

// Envelope factor of the concentration bound: C2 c_d R^d ln(2R/alpha) in
// one dimension, C2 c_d R^d ((2R/alpha)^{d-1} - 1)/(d-1) above.
double concentration_envelope(double alpha, const DensitySpec& spec);

// Value of the tail bound on P(|Z - X_c| >= alpha | X_c = x_c):
// envelope * exp(-2 (n-1) (mu(B(x_c, alpha)) - K/(n-1))^2). Returns nullopt
// when the precondition K <= (n-1) mu(B(x_c, alpha)) fails.
std::optional<double> concentration_bound_value(double alpha, std::span<const double> x_c,
                                                std::size_t k, std::size_t n,
                                                const DensitySpec& spec);

// Checks the concentration bound against the conditional tail frequency
// over `draws` Monte-Carlo draws. An inapplicable bound (K too large for
// alpha) is reported, not thrown.
BoundReport concentration_bound(double alpha, std::span<const double> x_c, std::size_t k,
                                std::size_t n, const DensitySpec& spec,
                                std::size_t draws = 100000, std::uint64_t seed = 0,
                                unsigned threads = 1);

// Bound on the synthetic density inside the annulus B(0,R) \ B(0,R-eps)
// for a spec supported on the ball B(0,R):
// C2^{3/2} (2^{d+2} sqrt(c_d) / sqrt(d)) ((n-1)/K) (eps/R)^{1/4}.
// Requires dim > 1 and (eps/R)^{1/2} <= c_d / (sqrt(2) d C2); violations
// raise InapplicableBound.
double boundary_density_bound_value(double eps, std::size_t k, std::size_t n,
                                    const DensitySpec& spec);

// Checks the boundary bound against the mean empirical density over the
// annulus (annulus hit frequency / annulus volume) from unconditional
// draws. eps == 0 yields bound 0 with an empty annulus.
BoundReport boundary_density_bound(double eps, std::size_t k, std::size_t n,
                                   const DensitySpec& spec, std::size_t draws = 1000000,
                                   std::uint64_t seed = 0, unsigned threads = 1);

// Characteristic-distance exceedance: threshold 12 R (K/n)^gamma on the
// squared distance |Z - X_c|^2 and bound (K/n)^{2/d - 2 gamma}. Stated for
// dim >= 2 and gamma in (0, 1/d).
double characteristic_distance_threshold(double gamma, std::size_t k, std::size_t n,
                                         const DensitySpec& spec);
double characteristic_distance_bound_value(double gamma, std::size_t k, std::size_t n,
                                           const DensitySpec& spec);

// Checks the exceedance bound against the unconditional frequency of
// |Z - X_c|^2 above the threshold.
BoundReport characteristic_distance_bound(double gamma, std::size_t k, std::size_t n,
                                          const DensitySpec& spec, std::size_t draws = 100000,
                                          std::uint64_t seed = 0, unsigned threads = 1);

// Two-sample energy distance, V-statistic form:
// 2 mean|a_i - b_j| - mean|a_i - a_j| - mean|b_i - b_j|.
double energy_distance(const Matrix& a, const Matrix& b);

// Permutation calibration of the energy distance under the null that both
// samples share one distribution. threshold_95 is the 95th percentile of
// the permuted statistics; p_value uses the add-one rule.
struct PermutationSummary {
    double statistic = 0.0;
    double threshold_95 = 0.0;
    double p_value = 1.0;
};
PermutationSummary energy_permutation_test(const Matrix& a, const Matrix& b,
                                           std::size_t permutations, std::uint64_t seed);

// Distribution distance between n base draws and n synthetic draws built
// from them, averaged over `trials`, for each n in `n_values`. k_rule maps
// n to the neighbor count; every n must satisfy n >= 2 k_rule(n) + 2.
struct RegenerationPoint {
    std::size_t n = 0;
    std::size_t k = 0;
    double distance = 0.0;
};
std::vector<RegenerationPoint> regeneration_distance(
    std::span<const std::size_t> n_values,
    const std::function<std::size_t(std::size_t)>& k_rule, const DensitySpec& spec,
    std::size_t trials, std::uint64_t seed);

}  // namespace rebal::density
