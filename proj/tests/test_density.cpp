#include "rebal/density.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"
#include "rebal/core.hpp"
#include "rebal/specfun.hpp"

using namespace rebal;
using namespace rebal::density;

namespace {

constexpr double kPi = std::numbers::pi;

// Expected values below were frozen from slice-quadrature and closed-form
// references computed at 40-digit precision with an implementation that
// shares no code with the library (raw prefactor times incomplete beta
// instead of the stable binomial form, cartesian slices instead of polar
// integration).

#define CHECK_ERROR_KIND(expr, kind_)            \
    do {                                         \
        bool caught_ = false;                    \
        try {                                    \
            (void)(expr);                        \
        } catch (const Error& e_) {              \
            caught_ = true;                      \
            CHECK(e_.kind() == (kind_));         \
        }                                        \
        CHECK(caught_);                          \
    } while (0)

template <typename F>
double integrate(F&& f, double a, double b, double tol = 1e-9) {
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        std::forward<F>(f), a, b, 15, tol, &err);
}

// 4-point Gauss-Legendre rule on [-1, 1].
constexpr double kGlNode[4] = {-0.8611363115940526, -0.3399810435848563,
                               0.3399810435848563, 0.8611363115940526};
constexpr double kGlWeight[4] = {0.3478548451374538, 0.6521451548625461,
                                 0.6521451548625461, 0.3478548451374538};

// Mean of f over [x0,x1]x[y0,y1] by a subdiv x subdiv composite tensor rule.
template <typename F2>
double cell_average_2d(F2&& f, double x0, double x1, double y0, double y1, int subdiv) {
    double hx = (x1 - x0) / subdiv;
    double hy = (y1 - y0) / subdiv;
    double acc = 0.0;
    for (int sx = 0; sx < subdiv; ++sx) {
        double cx = x0 + (sx + 0.5) * hx;
        for (int sy = 0; sy < subdiv; ++sy) {
            double cy = y0 + (sy + 0.5) * hy;
            for (int i = 0; i < 4; ++i) {
                double x = cx + 0.5 * hx * kGlNode[i];
                for (int j = 0; j < 4; ++j) {
                    double y = cy + 0.5 * hy * kGlNode[j];
                    acc += kGlWeight[i] * kGlWeight[j] * f(x, y);
                }
            }
        }
    }
    return acc / (4.0 * subdiv * subdiv);
}

Matrix sample_matrix(const DensitySpec& spec, std::size_t rows, std::uint64_t seed) {
    Matrix out(rows, spec.dim);
    Rng rng(seed);
    std::vector<double> point(spec.dim);
    for (std::size_t i = 0; i < rows; ++i) {
        spec.sample(rng, point);
        std::copy(point.begin(), point.end(), out.row(i));
    }
    return out;
}

double sign_test_p_value(std::size_t wins, std::size_t trials) {
    REQUIRE(wins >= 1);
    return 1.0 - specfun::binom_cdf(wins - 1, trials, 0.5);
}

}  // namespace

TEST_CASE("unit ball volumes match the closed forms") {
    CHECK(unit_ball_volume(1) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(unit_ball_volume(2) == doctest::Approx(kPi).epsilon(1e-14));
    CHECK(unit_ball_volume(3) == doctest::Approx(4.0 * kPi / 3.0).epsilon(1e-14));
    CHECK_ERROR_KIND(unit_ball_volume(0), ErrorKind::Domain);
}

TEST_CASE("uniform box spec evaluates pdf, radius and bounds") {
    auto unit = uniform_box_spec(1, 0.0, 1.0);
    CHECK(unit.support_radius == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(unit.lower_bound == doctest::Approx(1.0));
    CHECK(unit.upper_bound == doctest::Approx(1.0));
    const double inside[] = {0.25};
    const double outside[] = {1.25};
    CHECK(unit.pdf(inside) == doctest::Approx(1.0));
    CHECK(unit.pdf(outside) == 0.0);

    auto wide = uniform_box_spec(2, -3.0, 3.0);
    CHECK(wide.support_radius == doctest::Approx(3.0 * std::sqrt(2.0)).epsilon(1e-14));
    CHECK(wide.upper_bound == doctest::Approx(1.0 / 36.0).epsilon(1e-14));
    Matrix draws = sample_matrix(wide, 2000, 41);
    for (std::size_t i = 0; i < draws.rows(); ++i) {
        CHECK(wide.pdf(draws.row_span(i)) > 0.0);
    }

    CHECK_ERROR_KIND(uniform_box_spec(3, 0.0, 1.0), ErrorKind::Domain);
    CHECK_ERROR_KIND(uniform_box_spec(1, 1.0, 1.0), ErrorKind::Domain);
}

TEST_CASE("uniform ball spec evaluates pdf and samples inside the support") {
    for (std::size_t dim : {std::size_t{1}, std::size_t{2}, std::size_t{3}}) {
        auto spec = uniform_ball_spec(dim, 1.0);
        CHECK(spec.support_radius == doctest::Approx(1.0));
        CHECK(spec.upper_bound == doctest::Approx(1.0 / unit_ball_volume(dim)).epsilon(1e-14));
        Matrix draws = sample_matrix(spec, 4000, 17 + dim);
        double mean_sq = 0.0;
        for (std::size_t i = 0; i < draws.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                s += draws.at(i, j) * draws.at(i, j);
            }
            CHECK(s <= 1.0 + 1e-12);
            mean_sq += s;
        }
        mean_sq /= static_cast<double>(draws.rows());
        // E[|X|^2] = d / (d + 2) for the uniform unit ball.
        double expected = static_cast<double>(dim) / (static_cast<double>(dim) + 2.0);
        CHECK(mean_sq == doctest::Approx(expected).epsilon(0.05));
    }
    CHECK_ERROR_KIND(uniform_ball_spec(4, 1.0), ErrorKind::Domain);
    CHECK_ERROR_KIND(uniform_ball_spec(2, 0.0), ErrorKind::Domain);
}

TEST_CASE("ball overlap measure matches slice-quadrature references") {
    auto ball2 = uniform_ball_spec(2, 1.0);
    const double c_a[] = {0.5, 0.0};
    CHECK(ball2.ball_measure(c_a, 0.6) == doctest::Approx(0.339219016385868).epsilon(1e-10));
    const double c_b[] = {0.3, 0.2};
    CHECK(ball2.ball_measure(c_b, 0.45) == doctest::Approx(0.2025).epsilon(1e-12));
    const double c_c[] = {0.0, 0.9};
    CHECK(ball2.ball_measure(c_c, 0.35) == doctest::Approx(0.078879497076977).epsilon(1e-10));
    const double c_d[] = {0.2, 0.0};
    CHECK(ball2.ball_measure(c_d, 1.5) == doctest::Approx(1.0).epsilon(1e-14));

    auto ball3 = uniform_ball_spec(3, 1.0);
    const double c3_a[] = {0.5, 0.0, 0.0};
    CHECK(ball3.ball_measure(c3_a, 0.7) == doctest::Approx(0.3024).epsilon(1e-12));
    const double c3_b[] = {0.0, 0.85, 0.0};
    CHECK(ball3.ball_measure(c3_b, 0.4) == doctest::Approx(0.0449857536764706).epsilon(1e-10));
    const double c3_c[] = {0.3, 0.0, 0.0};
    CHECK(ball3.ball_measure(c3_c, 1.9) == doctest::Approx(1.0).epsilon(1e-14));

    auto ball1 = uniform_ball_spec(1, 1.0);
    const double c1[] = {0.5};
    CHECK(ball1.ball_measure(c1, 0.3) == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("box overlap measure matches slice-quadrature references") {
    auto box = uniform_box_spec(2, -3.0, 3.0);
    const double c[] = {0.5, -0.4};
    CHECK(box.ball_measure(c, 0.8) == doctest::Approx(0.0558505360638185).epsilon(1e-10));
    CHECK(box.ball_measure(c, 2.5) == doctest::Approx(0.545415391248228).epsilon(1e-9));
    CHECK(box.ball_measure(c, 5.0) == doctest::Approx(1.0).epsilon(1e-12));
    const double corner[] = {2.9, 2.9};
    CHECK(box.ball_measure(corner, 0.5) == doctest::Approx(0.0084910782195169).epsilon(1e-9));
    const double origin[] = {0.0, 0.0};
    CHECK(box.ball_measure(origin, 6.0 * std::sqrt(2.0) - 0.01) == doctest::Approx(1.0).epsilon(1e-12));

    auto unit = uniform_box_spec(1, 0.0, 1.0);
    const double mid[] = {0.5};
    CHECK(unit.ball_measure(mid, 0.25) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(unit.ball_measure(mid, 0.7) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("ball measures are monotone and saturate at the support diameter") {
    std::vector<DensitySpec> specs;
    specs.push_back(uniform_box_spec(1, 0.0, 1.0));
    specs.push_back(uniform_box_spec(2, -3.0, 3.0));
    specs.push_back(uniform_ball_spec(1, 1.0));
    specs.push_back(uniform_ball_spec(2, 1.0));
    specs.push_back(uniform_ball_spec(3, 2.0));

    for (const auto& spec : specs) {
        Matrix centers = sample_matrix(spec, 3, 23 + spec.dim);
        for (std::size_t i = 0; i < centers.rows(); ++i) {
            auto center = centers.row_span(i);
            double prev = -1.0;
            double two_r = 2.0 * spec.support_radius;
            for (int step = 1; step <= 50; ++step) {
                double r = two_r * static_cast<double>(step) / 50.0;
                double mu = spec.ball_measure(center, r);
                CHECK(mu >= prev - 1e-12);
                CHECK(mu >= 0.0);
                CHECK(mu <= 1.0);
                prev = mu;
            }
            CHECK(spec.ball_measure(center, two_r) == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("conditional density matches closed forms in one dimension") {
    auto spec = uniform_box_spec(1, 0.0, 1.0);
    const double xc[] = {0.5};
    const double z_a[] = {0.6};
    const double z_b[] = {0.75};
    const double z_c[] = {0.3};
    // 2 ln(0.5/a) - 4 (0.5 - a) with a = |z - 0.5|, n = 3, K = 1.
    CHECK(smote_conditional_density(z_a, xc, 1, 3, spec) ==
          doctest::Approx(1.61887582487).epsilon(1e-8));
    CHECK(smote_conditional_density(z_b, xc, 1, 3, spec) ==
          doctest::Approx(0.38629436112).epsilon(1e-8));
    CHECK(smote_conditional_density(z_c, xc, 1, 3, spec) ==
          doctest::Approx(0.632581463748).epsilon(1e-8));

    const double z_mirror[] = {0.4};
    CHECK(smote_conditional_density(z_mirror, xc, 1, 3, spec) ==
          doctest::Approx(smote_conditional_density(z_a, xc, 1, 3, spec)).epsilon(1e-12));

    const double z_outside[] = {1.4};
    CHECK(smote_conditional_density(z_outside, xc, 1, 3, spec) == 0.0);
}

TEST_CASE("conditional density matches independent references in two dimensions") {
    auto ball = uniform_ball_spec(2, 1.0);
    const double xc[] = {0.3, 0.2};
    const double z_a[] = {0.5, 0.1};
    const double z_b[] = {0.32, 0.24};
    const double z_c[] = {-0.1, 0.6};
    CHECK(smote_conditional_density(z_a, xc, 5, 40, ball) ==
          doctest::Approx(1.418586854493512).epsilon(1e-8));
    CHECK(smote_conditional_density(z_b, xc, 5, 40, ball) ==
          doctest::Approx(16.96786526646126).epsilon(1e-8));
    CHECK(smote_conditional_density(z_c, xc, 3, 12, ball) ==
          doctest::Approx(0.05949069822873643).epsilon(1e-8));

    auto box = uniform_box_spec(2, -3.0, 3.0);
    const double xc_box[] = {0.5, -0.4};
    const double z_box[] = {1.1, 0.2};
    CHECK(smote_conditional_density(z_box, xc_box, 5, 30, box) ==
          doctest::Approx(0.100830365617237).epsilon(1e-7));
}

TEST_CASE("radial and interpolation-coefficient forms agree") {
    std::vector<std::pair<DensitySpec, std::pair<std::size_t, std::size_t>>> setups;
    setups.emplace_back(uniform_box_spec(1, 0.0, 1.0), std::make_pair(std::size_t{2}, std::size_t{9}));
    setups.emplace_back(uniform_ball_spec(2, 1.0), std::make_pair(std::size_t{4}, std::size_t{25}));
    setups.emplace_back(uniform_box_spec(2, -3.0, 3.0), std::make_pair(std::size_t{5}, std::size_t{18}));

    for (const auto& [spec, kn] : setups) {
        auto [k, n] = kn;
        Rng rng(derive_seed(31, spec.dim + n));
        std::vector<double> z(spec.dim);
        std::vector<double> xc(spec.dim);
        int used = 0;
        while (used < 3) {
            spec.sample(rng, xc);
            spec.sample(rng, z);
            if (euclidean_distance(z, xc) < 0.05) {
                continue;
            }
            double radial = smote_conditional_density(z, xc, k, n, spec);
            double coeff = smote_conditional_density_w(z, xc, k, n, spec);
            CHECK(std::abs(radial - coeff) <= 1e-8 * (std::abs(radial) + 1.0));
            ++used;
        }
    }
}

TEST_CASE("degenerate neighbor count keeps the density finite at large n") {
    auto spec = uniform_box_spec(1, 0.0, 1.0);
    const double xc[] = {0.5};
    const double z[] = {0.6};
    // With K = n-1 the order-statistic weight is identically one and the
    // density collapses to the closed form ln 5 at this point.
    double value = smote_conditional_density(z, xc, 99999, 100000, spec);
    CHECK(value == doctest::Approx(std::log(5.0)).epsilon(1e-8));
    CHECK(std::isfinite(value));
}

TEST_CASE("conditional density rejects invalid inputs") {
    auto spec = uniform_box_spec(1, 0.0, 1.0);
    const double xc[] = {0.5};
    const double z[] = {0.6};
    CHECK_ERROR_KIND(smote_conditional_density(xc, xc, 1, 3, spec), ErrorKind::Singularity);
    CHECK_ERROR_KIND(smote_conditional_density(z, xc, 0, 3, spec), ErrorKind::InvalidK);
    CHECK_ERROR_KIND(smote_conditional_density(z, xc, 3, 3, spec), ErrorKind::InvalidK);
    const double z2[] = {0.6, 0.1};
    CHECK_ERROR_KIND(smote_conditional_density(z2, xc, 1, 3, spec), ErrorKind::Shape);
}

TEST_CASE("histogram density reproduces a flat sample") {
    auto spec = uniform_box_spec(1, 0.0, 1.0);
    Matrix draws = sample_matrix(spec, 1000000, 53);
    auto grid = GridSpec::regular(1, 0.0, 1.0, 20);
    auto hist = mc_density(draws, grid);
    CHECK(hist.inside == hist.total);
    double mass = 0.0;
    for (std::size_t c = 0; c < hist.value.size(); ++c) {
        CHECK(std::abs(hist.value[c] - 1.0) <= 3.0 * hist.std_error[c]);
        mass += hist.value[c] * grid.cell_volume();
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("histogram density concentrates a constant sample in one cell") {
    Matrix rows(2000, 2);
    for (std::size_t i = 0; i < rows.rows(); ++i) {
        rows.at(i, 0) = 0.5;
        rows.at(i, 1) = 0.5;
    }
    auto grid = GridSpec::regular(2, 0.0, 1.0, 4);
    auto hist = mc_density(rows, grid);
    std::size_t spike = *grid.locate(rows.row_span(0));
    CHECK(spike == 10);  // cell (2, 2) in row-major order
    for (std::size_t c = 0; c < hist.value.size(); ++c) {
        if (c == spike) {
            CHECK(hist.value[c] == doctest::Approx(1.0 / grid.cell_volume()).epsilon(1e-12));
            CHECK(hist.std_error[c] == 0.0);
        } else {
            CHECK(hist.value[c] == 0.0);
        }
    }
}

TEST_CASE("histogram density tracks the normal curve") {
    Matrix draws(1000000, 1);
    Rng rng(59);
    for (std::size_t i = 0; i < draws.rows(); ++i) {
        draws.at(i, 0) = rng.next_normal();
    }
    auto grid = GridSpec::regular(1, -4.0, 4.0, 32);
    auto hist = mc_density(draws, grid);

    auto normal_cdf = [](double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); };
    double inside_mass = normal_cdf(4.0) - normal_cdf(-4.0);
    std::size_t within = 0;
    for (std::size_t c = 0; c < hist.value.size(); ++c) {
        double lo = grid.cell_lower(c, 0);
        double hi = grid.cell_upper(c, 0);
        double expected = (normal_cdf(hi) - normal_cdf(lo)) / inside_mass / (hi - lo);
        double diff = std::abs(hist.value[c] - expected);
        if (diff <= 3.0 * hist.std_error[c]) {
            ++within;
        }
        CHECK(diff <= 6.0 * hist.std_error[c] + 1e-12);
    }
    CHECK(within >= 30);  // at least 95% of 32 cells
}

TEST_CASE("histogram density validates inputs") {
    auto spec = uniform_box_spec(1, 0.0, 1.0);
    Matrix small = sample_matrix(spec, 500, 3);
    auto grid = GridSpec::regular(1, 0.0, 1.0, 10);
    CHECK_ERROR_KIND(mc_density(small, grid), ErrorKind::TooSmall);

    Matrix draws = sample_matrix(spec, 2000, 5);
    auto empty = GridSpec::regular(1, 0.0, 1.0, 0);
    CHECK_ERROR_KIND(mc_density(draws, empty), ErrorKind::GridError);
    auto inverted = GridSpec::regular(1, 1.0, 0.0, 10);
    CHECK_ERROR_KIND(mc_density(draws, inverted), ErrorKind::GridError);
    auto mismatched = GridSpec::regular(2, 0.0, 1.0, 10);
    CHECK_ERROR_KIND(mc_density(draws, mismatched), ErrorKind::GridError);
    auto offside = GridSpec::regular(1, 5.0, 6.0, 10);
    CHECK_ERROR_KIND(mc_density(draws, offside), ErrorKind::GridError);
}

TEST_CASE("grid cells index row-major and round-trip their geometry") {
    GridSpec grid;
    grid.lower = {0.0, 0.0};
    grid.upper = {3.0, 4.0};
    grid.bins = {3, 4};
    CHECK(grid.total_cells() == 12);
    CHECK(grid.cell_volume() == doctest::Approx(1.0));

    const double p[] = {1.5, 2.5};
    auto cell = grid.locate(p);
    REQUIRE(cell.has_value());
    CHECK(*cell == 1 * 4 + 2);
    auto center = grid.cell_center(*cell);
    CHECK(center[0] == doctest::Approx(1.5));
    CHECK(center[1] == doctest::Approx(2.5));
    CHECK(grid.cell_lower(*cell, 0) == doctest::Approx(1.0));
    CHECK(grid.cell_upper(*cell, 1) == doctest::Approx(3.0));

    const double on_edge[] = {0.0, 0.0};
    CHECK(grid.locate(on_edge).has_value());
    const double at_top[] = {3.0, 2.0};
    CHECK(!grid.locate(at_top).has_value());
}

TEST_CASE("conditional draws stay inside the reachable segment and are thread-stable") {
    auto spec = uniform_box_spec(1, 0.0, 1.0);
    const double xc[] = {0.5};
    Matrix a = conditional_sample(xc, 1, 3, spec, 5000, 11, 1);
    Matrix b = conditional_sample(xc, 1, 3, spec, 5000, 11, 4);
    CHECK(a.values() == b.values());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        CHECK(std::abs(a.at(i, 0) - 0.5) <= 0.5 + 1e-12);
    }

    auto ball = uniform_ball_spec(2, 1.0);
    auto one = unconditional_sample(3, 40, ball, 2000, 13, 1);
    auto three = unconditional_sample(3, 40, ball, 2000, 13, 3);
    CHECK(one.points.values() == three.points.values());
    CHECK(one.centrals.values() == three.centrals.values());
    for (std::size_t i = 0; i < one.points.rows(); ++i) {
        CHECK(ball.pdf(one.points.row_span(i)) > 0.0);
    }
}

TEST_CASE("quadrature density agrees with conditional draws in one dimension") {
    auto spec = uniform_box_spec(1, 0.0, 1.0);
    const double xc[] = {0.5};
    Matrix draws = conditional_sample(xc, 1, 3, spec, 1000000, 61, 2);
    auto grid = GridSpec::regular(1, 0.0, 1.0, 20);
    auto hist = mc_density(draws, grid);

    std::vector<double> averages(grid.total_cells());
    double mass = 0.0;
    for (std::size_t c = 0; c < averages.size(); ++c) {
        double lo = grid.cell_lower(c, 0);
        double hi = grid.cell_upper(c, 0);
        auto f = [&](double zz) {
            const double z[] = {zz};
            return smote_conditional_density(z, xc, 1, 3, spec);
        };
        averages[c] = integrate(f, lo, hi, 1e-9) / (hi - lo);
        mass += averages[c] * (hi - lo);
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));

    std::size_t within = 0;
    for (std::size_t c = 0; c < averages.size(); ++c) {
        double expected = averages[c] / mass;
        if (std::abs(hist.value[c] - expected) <= 3.0 * hist.std_error[c]) {
            ++within;
        }
    }
    CHECK(within >= 19);  // at least 95% of 20 cells
}

TEST_CASE("quadrature density agrees with conditional draws in two dimensions") {
    auto spec = uniform_ball_spec(2, 1.0);
    const double xc[] = {0.3, 0.2};
    const std::size_t k = 5;
    const std::size_t n = 30;
    Matrix draws = conditional_sample(xc, k, n, spec, 200000, 67, 2);

    GridSpec grid;
    grid.lower = {-0.7, -0.7};
    grid.upper = {0.7, 0.7};
    grid.bins = {10, 10};
    auto hist = mc_density(draws, grid);

    auto f = [&](double x, double y) {
        const double z[] = {x, y};
        if (x == xc[0] && y == xc[1]) {
            return 0.0;
        }
        return smote_conditional_density(z, xc, k, n, spec);
    };

    std::vector<double> averages(grid.total_cells());
    double coverage = 0.0;
    auto singular = grid.locate(xc);
    for (std::size_t c = 0; c < averages.size(); ++c) {
        int subdiv = (singular && c == *singular) ? 32 : 3;
        averages[c] = cell_average_2d(f, grid.cell_lower(c, 0), grid.cell_upper(c, 0),
                                      grid.cell_lower(c, 1), grid.cell_upper(c, 1), subdiv);
        coverage += averages[c] * grid.cell_volume();
    }
    CHECK(coverage > 0.5);
    CHECK(coverage < 1.0 + 1e-6);

    std::size_t within = 0;
    for (std::size_t c = 0; c < averages.size(); ++c) {
        double expected = averages[c] / coverage;
        if (std::abs(hist.value[c] - expected) <= 3.0 * hist.std_error[c]) {
            ++within;
        }
    }
    CHECK(within >= 95);  // at least 95% of 100 cells
}

TEST_CASE("concentration envelope matches frozen references") {
    auto box2 = uniform_box_spec(2, -3.0, 3.0);
    CHECK(concentration_envelope(1.0, box2) == doctest::Approx(11.7578524877).epsilon(1e-9));
    CHECK(concentration_envelope(0.5, box2) == doctest::Approx(25.0865013022).epsilon(1e-9));
    CHECK(concentration_envelope(2.0 * box2.support_radius, box2) == 0.0);

    auto box1 = uniform_box_spec(1, 0.0, 1.0);
    CHECK(concentration_envelope(0.25, box1) == doctest::Approx(4.15888308336).epsilon(1e-9));
    CHECK(concentration_envelope(0.25, box1) == doctest::Approx(2.0 * std::log(8.0)).epsilon(1e-12));

    CHECK_ERROR_KIND(concentration_envelope(0.0, box2), ErrorKind::Domain);
    CHECK_ERROR_KIND(concentration_envelope(9.0, box2), ErrorKind::Domain);
}

TEST_CASE("concentration bound value matches frozen references") {
    auto box2 = uniform_box_spec(2, -3.0, 3.0);
    const double origin[] = {0.0, 0.0};
    auto half = concentration_bound_value(0.5, origin, 5, 10000, box2);
    REQUIRE(half.has_value());
    CHECK(*half == doctest::Approx(0.00283792899141).epsilon(1e-6));
    auto one = concentration_bound_value(1.0, origin, 5, 10000, box2);
    REQUIRE(one.has_value());
    CHECK(*one == doctest::Approx(4.85205384446e-65).epsilon(1e-5));

    // (n-1) mu(B(0, 0.5)) is about 218, so K = 500 breaks the precondition.
    CHECK(!concentration_bound_value(0.5, origin, 500, 10000, box2).has_value());
}

TEST_CASE("concentration report checks the conditional tail") {
    auto box2 = uniform_box_spec(2, -3.0, 3.0);
    const double origin[] = {0.0, 0.0};
    auto report = concentration_bound(0.5, origin, 5, 2000, box2, 20000, 71, 2);
    CHECK(report.applicable);
    CHECK(report.pass);
    CHECK(report.empirical <= report.bound + report.margin);
    double mu = kPi * 0.25 / 36.0;
    double expected = 25.0865013022 * std::exp(-2.0 * 1999.0 * std::pow(mu - 5.0 / 1999.0, 2));
    CHECK(report.bound == doctest::Approx(expected).epsilon(1e-8));

    auto again = concentration_bound(0.5, origin, 5, 2000, box2, 20000, 71, 1);
    CHECK(again.empirical == report.empirical);
    CHECK(again.note == report.note);

    auto inapplicable = concentration_bound(0.5, origin, 1000, 2000, box2, 1000, 71, 1);
    CHECK(!inapplicable.applicable);
    CHECK(inapplicable.pass);
    CHECK(!inapplicable.note.empty());

    CHECK_ERROR_KIND(concentration_bound(0.0, origin, 5, 2000, box2, 100, 1, 1),
                     ErrorKind::Domain);
    CHECK_ERROR_KIND(
        concentration_bound(2.0 * box2.support_radius, origin, 5, 2000, box2, 100, 1, 1),
        ErrorKind::Domain);
}

TEST_CASE("boundary bound value matches frozen references") {
    auto ball3 = uniform_ball_spec(3, 1.0);
    double scaled = boundary_density_bound_value(1e-4, 5, 101, ball3) /
                    (100.0 * std::pow(1e-4, 0.25));
    CHECK(scaled == doctest::Approx(0.882126232675).epsilon(1e-9));

    auto ball2 = uniform_ball_spec(2, 1.0);
    CHECK(boundary_density_bound_value(1e-2, 200, 2000, ball2) ==
          doctest::Approx(11.3825065943).epsilon(1e-9));
    CHECK(boundary_density_bound_value(1e-3, 200, 2000, ball2) ==
          doctest::Approx(6.40085384224).epsilon(1e-9));
    CHECK(boundary_density_bound_value(1e-4, 200, 2000, ball2) ==
          doctest::Approx(3.599464632).epsilon(1e-9));

    auto ball1 = uniform_ball_spec(1, 1.0);
    CHECK_ERROR_KIND(boundary_density_bound_value(0.01, 5, 101, ball1),
                     ErrorKind::InapplicableBound);
    auto tiny = uniform_ball_spec(2, 0.1);
    CHECK_ERROR_KIND(boundary_density_bound_value(0.05, 5, 101, tiny),
                     ErrorKind::InapplicableBound);
    CHECK_ERROR_KIND(boundary_density_bound_value(0.2, 5, 101, tiny), ErrorKind::Domain);
}

TEST_CASE("boundary report checks the annulus density") {
    auto ball2 = uniform_ball_spec(2, 1.0);
    auto report = boundary_density_bound(0.05, 30, 300, ball2, 200000, 73, 2);
    CHECK(report.applicable);
    CHECK(report.pass);
    CHECK(report.empirical <= report.bound + report.margin);
    CHECK(report.empirical > 0.0);
    CHECK(report.note.find("200000") != std::string::npos);

    auto empty = boundary_density_bound(0.0, 30, 300, ball2, 1000, 73, 1);
    CHECK(empty.bound == 0.0);
    CHECK(empty.empirical == 0.0);
    CHECK(empty.pass);
    CHECK(empty.note == "empty annulus");
}

TEST_CASE("characteristic distance bound matches frozen references and checks draws") {
    auto box2 = uniform_box_spec(2, -3.0, 3.0);
    CHECK(characteristic_distance_bound_value(0.25, 5, 10000, box2) ==
          doctest::Approx(0.022360679775).epsilon(1e-9));
    CHECK(characteristic_distance_bound_value(0.25, 50, 10000, box2) ==
          doctest::Approx(0.0707106781187).epsilon(1e-9));
    CHECK(characteristic_distance_threshold(0.25, 5, 10000, box2) ==
          doctest::Approx(7.61307309677).epsilon(1e-9));
    CHECK(characteristic_distance_threshold(0.25, 50, 10000, box2) ==
          doctest::Approx(13.5381711351).epsilon(1e-9));

    auto report = characteristic_distance_bound(0.25, 5, 500, box2, 20000, 79, 2);
    CHECK(report.pass);
    CHECK(report.empirical <= report.bound + report.margin);

    CHECK_ERROR_KIND(characteristic_distance_bound_value(0.5, 5, 500, box2), ErrorKind::Domain);
    CHECK_ERROR_KIND(characteristic_distance_bound_value(0.0, 5, 500, box2), ErrorKind::Domain);
    auto ball1 = uniform_ball_spec(1, 1.0);
    CHECK_ERROR_KIND(characteristic_distance_bound_value(0.25, 5, 500, ball1),
                     ErrorKind::InapplicableBound);
}

TEST_CASE("energy distance matches the hand fixture") {
    auto a = Matrix::from_rows({{0.0, 0.0}, {1.0, 0.0}});
    auto b = Matrix::from_rows({{0.0, 1.0}});
    // 2 * (1 + sqrt 2)/2 - 1/2 - 0 = 1/2 + sqrt 2.
    CHECK(energy_distance(a, b) == doctest::Approx(1.914213562373095).epsilon(1e-12));
    CHECK(energy_distance(b, a) == doctest::Approx(energy_distance(a, b)).epsilon(1e-15));
    CHECK(energy_distance(a, a) == 0.0);

    auto c = Matrix::from_rows({{5.0, 0.0}, {6.0, 0.0}});
    CHECK(energy_distance(a, c) > energy_distance(a, b));

    auto d = Matrix::from_rows({{0.0}, {1.0}});
    CHECK_ERROR_KIND(energy_distance(a, d), ErrorKind::Shape);
    Matrix none;
    CHECK_ERROR_KIND(energy_distance(a, none), ErrorKind::TooSmall);
}

TEST_CASE("permutation test separates null from shift") {
    auto spec = uniform_ball_spec(2, 1.0);
    Matrix x = sample_matrix(spec, 300, 83);
    Matrix z = sample_matrix(spec, 300, 89);
    auto null_case = energy_permutation_test(x, z, 200, 97);
    CHECK(null_case.statistic <= null_case.threshold_95);
    CHECK(null_case.p_value > 0.05);

    Matrix shifted = z;
    for (std::size_t i = 0; i < shifted.rows(); ++i) {
        shifted.at(i, 0) += 2.0;
    }
    auto rejected = energy_permutation_test(x, shifted, 200, 97);
    CHECK(rejected.statistic > rejected.threshold_95);
    CHECK(rejected.p_value < 0.01);
}

TEST_CASE("synthetic distance to the base sample shrinks with n") {
    auto spec = uniform_box_spec(2, -3.0, 3.0);
    std::vector<std::size_t> n_grid = {100, 1000, 5000};
    auto k5 = [](std::size_t) { return std::size_t{5}; };
    auto half = [](std::size_t n) { return n / 2 - 1; };

    const std::size_t seeds = 30;
    std::size_t wins_ab = 0;
    std::size_t wins_bc = 0;
    std::size_t wins_half = 0;
    double mean_small = 0.0;
    double mean_mid = 0.0;
    double mean_large = 0.0;
    double mean_half_large = 0.0;
    for (std::size_t s = 0; s < seeds; ++s) {
        auto curve = regeneration_distance(n_grid, k5, spec, 1, derive_seed(999, s));
        REQUIRE(curve.size() == 3);
        CHECK(curve[0].k == 5);
        if (curve[0].distance > curve[1].distance) {
            ++wins_ab;
        }
        if (curve[1].distance > curve[2].distance) {
            ++wins_bc;
        }
        std::size_t big[] = {5000};
        auto tail = regeneration_distance(big, half, spec, 1, derive_seed(999, s));
        REQUIRE(tail.size() == 1);
        CHECK(tail[0].k == 2499);
        if (tail[0].distance > curve[2].distance) {
            ++wins_half;
        }
        mean_small += curve[0].distance;
        mean_mid += curve[1].distance;
        mean_large += curve[2].distance;
        mean_half_large += tail[0].distance;
    }
    CHECK(sign_test_p_value(wins_ab, seeds) < 0.05);
    CHECK(sign_test_p_value(wins_bc, seeds) < 0.05);
    CHECK(sign_test_p_value(wins_half, seeds) < 0.05);
    CHECK(mean_small > mean_mid);
    CHECK(mean_mid > mean_large);
    CHECK(mean_half_large > mean_large);

    // A neighbor rule proportional to n keeps the distance from decaying:
    // across a 50-fold growth in n the half-rule curve stays the same order.
    auto flat = regeneration_distance(n_grid, half, spec, 1, derive_seed(999, 555));
    CHECK(flat[2].distance > 0.2 * flat[0].distance);
}

TEST_CASE("regeneration distance validates the neighbor rule") {
    auto spec = uniform_box_spec(2, -3.0, 3.0);
    std::vector<std::size_t> ns = {10};
    CHECK_ERROR_KIND(
        regeneration_distance(ns, [](std::size_t) { return std::size_t{0}; }, spec, 1, 1),
        ErrorKind::InvalidK);
    CHECK_ERROR_KIND(
        regeneration_distance(ns, [](std::size_t) { return std::size_t{5}; }, spec, 1, 1),
        ErrorKind::Domain);
}
