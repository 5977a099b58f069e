#include "rebal/density.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rebal/samplers.hpp"
#include "rebal/specfun.hpp"

namespace rebal::density {

namespace {

constexpr double kPi = std::numbers::pi;

template <typename F>
double integrate_gk(F&& f, double a, double b, unsigned depth = 15, double tol = 1e-10) {
    if (!(b > a)) {
        return 0.0;
    }
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        std::forward<F>(f), a, b, depth, tol, &err);
}

void validate_spec(const DensitySpec& spec) {
    if (spec.dim == 0) {
        fail(ErrorKind::Domain, "density spec needs a positive dimension");
    }
    if (!spec.pdf || !spec.ball_measure || !spec.sample) {
        fail(ErrorKind::Domain, "density spec needs pdf, ball_measure and sample");
    }
    if (!(spec.support_radius > 0.0)) {
        fail(ErrorKind::Domain, "density spec needs a positive support radius");
    }
    if (!(spec.lower_bound > 0.0) || spec.lower_bound > spec.upper_bound) {
        fail(ErrorKind::Domain, "density spec needs 0 < lower_bound <= upper_bound");
    }
}

void check_point_dims(const DensitySpec& spec, std::span<const double> z,
                      std::span<const double> x_c) {
    if (z.size() != spec.dim || x_c.size() != spec.dim) {
        fail(ErrorKind::Shape, "point dimension does not match the density spec");
    }
}

void check_k_n(std::size_t k, std::size_t n) {
    if (n < 2) {
        fail(ErrorKind::Domain, "need at least two base samples");
    }
    if (k < 1 || k > n - 1) {
        fail(ErrorKind::InvalidK, "neighbor count must lie in [1, n-1]");
    }
}

// Splits [0, total) into contiguous chunks and runs fn(begin, end) on each,
// one chunk per worker. Work items must be independent.
template <typename Fn>
void run_chunks(std::size_t total, unsigned threads, Fn&& fn) {
    if (total == 0) {
        return;
    }
    std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, total));
    if (workers == 1) {
        fn(std::size_t{0}, total);
        return;
    }
    std::size_t per = (total + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t begin = w * per;
        std::size_t end = std::min(total, begin + per);
        if (begin >= end) {
            break;
        }
        pool.emplace_back([begin, end, &fn] { fn(begin, end); });
    }
    for (auto& t : pool) {
        t.join();
    }
}

// Overlap length of [c-r, c+r] with [lo, hi].
double interval_overlap(double lo, double hi, double c, double r) {
    double a = std::max(lo, c - r);
    double b = std::min(hi, c + r);
    return std::max(0.0, b - a);
}

// Area of the disc B(c, r) intersected with the square [lo, hi]^2, by polar
// integration around c. The angular domain is pre-split at every corner
// direction and at every angle where the disc rim crosses a square edge, so
// each piece is smooth and the quadrature is deterministic and tight.
double box_disc_overlap(double lo, double hi, std::span<const double> c, double r) {
    if (r <= 0.0) {
        return 0.0;
    }
    std::vector<double> cuts;
    cuts.reserve(14);
    auto push_angle = [&cuts](double theta) {
        theta = std::fmod(theta, 2.0 * kPi);
        if (theta < 0.0) {
            theta += 2.0 * kPi;
        }
        cuts.push_back(theta);
    };
    const std::array<std::array<double, 2>, 4> corners = {
        {{lo, lo}, {lo, hi}, {hi, lo}, {hi, hi}}};
    for (const auto& corner : corners) {
        push_angle(std::atan2(corner[1] - c[1], corner[0] - c[0]));
    }
    for (double dx : {lo - c[0], hi - c[0]}) {
        if (std::abs(dx) < r) {
            double base = std::acos(dx / r);
            push_angle(base);
            push_angle(2.0 * kPi - base);
        }
    }
    for (double dy : {lo - c[1], hi - c[1]}) {
        if (std::abs(dy) < r) {
            double base = std::asin(dy / r);
            push_angle(base);
            push_angle(kPi - base);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-13; }),
               cuts.end());

    auto wedge = [&](double theta) {
        double dir0 = std::cos(theta);
        double dir1 = std::sin(theta);
        double tmin = -std::numeric_limits<double>::infinity();
        double tmax = std::numeric_limits<double>::infinity();
        const double cc[2] = {c[0], c[1]};
        const double dd[2] = {dir0, dir1};
        for (int j = 0; j < 2; ++j) {
            if (std::abs(dd[j]) < 1e-300) {
                if (cc[j] < lo || cc[j] > hi) {
                    return 0.0;
                }
                continue;
            }
            double t1 = (lo - cc[j]) / dd[j];
            double t2 = (hi - cc[j]) / dd[j];
            if (t1 > t2) {
                std::swap(t1, t2);
            }
            tmin = std::max(tmin, t1);
            tmax = std::min(tmax, t2);
        }
        if (!(tmax > tmin)) {
            return 0.0;
        }
        double a = std::clamp(tmin, 0.0, r);
        double b = std::clamp(tmax, 0.0, r);
        if (!(b > a)) {
            return 0.0;
        }
        return 0.5 * (b * b - a * a);
    };

    double area = 0.0;
    double prev = 0.0;
    for (std::size_t i = 0; i <= cuts.size(); ++i) {
        double next = (i < cuts.size()) ? cuts[i] : 2.0 * kPi;
        if (next > prev + 1e-13) {
            area += integrate_gk(wedge, prev, next, 10, 1e-13);
        }
        prev = next;
    }
    return area;
}

// Area of the disc B(c, r), |c| = t, intersected with the disc B(0, rb).
double disc_lens_area(double t, double r, double rb) {
    if (r <= 0.0 || t >= r + rb) {
        return 0.0;
    }
    double small = std::min(r, rb);
    if (t <= std::abs(rb - r)) {
        return kPi * small * small;
    }
    auto clamped_acos = [](double v) { return std::acos(std::clamp(v, -1.0, 1.0)); };
    double a1 = r * r * clamped_acos((t * t + r * r - rb * rb) / (2.0 * t * r));
    double a2 = rb * rb * clamped_acos((t * t + rb * rb - r * r) / (2.0 * t * rb));
    double s = (-t + r + rb) * (t + r - rb) * (t - r + rb) * (t + r + rb);
    return a1 + a2 - 0.5 * std::sqrt(std::max(0.0, s));
}

// Volume of the ball B(c, r), |c| = t, intersected with the ball B(0, rb)
// in three dimensions (two-sphere lens).
double ball3_lens_volume(double t, double r, double rb) {
    if (r <= 0.0 || t >= r + rb) {
        return 0.0;
    }
    double small = std::min(r, rb);
    if (t <= std::abs(rb - r)) {
        return (4.0 / 3.0) * kPi * small * small * small;
    }
    double h = rb + r - t;
    return kPi * h * h *
           (t * t + 2.0 * t * r - 3.0 * r * r + 2.0 * t * rb + 6.0 * r * rb - 3.0 * rb * rb) /
           (12.0 * t);
}

double norm_of(std::span<const double> p) {
    double s = 0.0;
    for (double v : p) {
        s += v * v;
    }
    return std::sqrt(s);
}

// Last radius along x_c + r*dir with positive pdf, assuming {r : pdf > 0}
// is an interval starting at `a` (true for uniform bodies). Returns nullopt
// when the whole ray from `a` on is outside the support; returns `limit`
// when positive mass persists beyond the bisection bracket or appears after
// a gap (non-convex custom specs fall back to the full range).
std::optional<double> ray_support_cut(const DensitySpec& spec, std::span<const double> x_c,
                                      std::span<const double> dir, double a, double limit) {
    std::vector<double> p(spec.dim);
    auto pdf_at = [&](double r) {
        for (std::size_t j = 0; j < spec.dim; ++j) {
            p[j] = x_c[j] + dir[j] * r;
        }
        return spec.pdf(p);
    };
    if (pdf_at(a) <= 0.0) {
        for (int i = 1; i <= 128; ++i) {
            double r = a + (limit - a) * static_cast<double>(i) / 128.0;
            if (pdf_at(r) > 0.0) {
                return limit;
            }
        }
        return std::nullopt;
    }
    if (pdf_at(limit) > 0.0) {
        return limit;
    }
    double lo = a;
    double hi = limit;
    for (int i = 0; i < 100 && hi - lo > 0.0; ++i) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        (pdf_at(mid) > 0.0 ? lo : hi) = mid;
    }
    return hi;
}

// Fixed-capacity nearest-point buffer: a max-heap over squared distance
// keeping the k closest points seen so far, with their coordinates.
class KNearestBuffer {
public:
    KNearestBuffer(std::size_t k, std::size_t dim) : k_(k), dim_(dim), coords_(k * dim) {
        entries_.reserve(k);
    }

    void reset() { entries_.clear(); }

    void offer(std::span<const double> point, double d2) {
        if (entries_.size() < k_) {
            std::size_t slot = entries_.size();
            std::copy(point.begin(), point.end(), coords_.begin() + slot * dim_);
            entries_.emplace_back(d2, slot);
            std::push_heap(entries_.begin(), entries_.end());
            return;
        }
        if (d2 >= entries_.front().first) {
            return;
        }
        std::size_t slot = entries_.front().second;
        std::pop_heap(entries_.begin(), entries_.end());
        entries_.back() = {d2, slot};
        std::copy(point.begin(), point.end(), coords_.begin() + slot * dim_);
        std::push_heap(entries_.begin(), entries_.end());
    }

    std::size_t size() const { return entries_.size(); }

    std::span<const double> point(std::size_t i) const {
        return {coords_.data() + entries_[i].second * dim_, dim_};
    }

private:
    std::size_t k_;
    std::size_t dim_;
    std::vector<std::pair<double, std::size_t>> entries_;
    std::vector<double> coords_;
};

double frequency_std_error(double p, std::size_t draws) {
    return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(draws));
}

std::string count_note(std::size_t hits, std::size_t draws) {
    std::ostringstream out;
    out << hits << " of " << draws << " draws";
    return out.str();
}

// Energy statistic from a pooled distance matrix and a label arrangement:
// order[0..na) are the first sample's pool indices, the rest the second's.
double energy_from_pool(const std::vector<double>& dist, std::size_t pool,
                        std::span<const std::size_t> order, std::size_t na) {
    std::size_t nb = pool - na;
    double cross = 0.0;
    for (std::size_t i = 0; i < na; ++i) {
        const double* row = dist.data() + order[i] * pool;
        for (std::size_t j = na; j < pool; ++j) {
            cross += row[order[j]];
        }
    }
    double within_a = 0.0;
    for (std::size_t i = 0; i < na; ++i) {
        const double* row = dist.data() + order[i] * pool;
        for (std::size_t j = i + 1; j < na; ++j) {
            within_a += row[order[j]];
        }
    }
    double within_b = 0.0;
    for (std::size_t i = na; i < pool; ++i) {
        const double* row = dist.data() + order[i] * pool;
        for (std::size_t j = i + 1; j < pool; ++j) {
            within_b += row[order[j]];
        }
    }
    double a = static_cast<double>(na);
    double b = static_cast<double>(nb);
    return 2.0 * cross / (a * b) - 2.0 * within_a / (a * a) - 2.0 * within_b / (b * b);
}

}  // namespace

double unit_ball_volume(std::size_t dim) {
    if (dim == 0) {
        fail(ErrorKind::Domain, "unit ball volume needs dimension >= 1");
    }
    double d = static_cast<double>(dim);
    return std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
}

DensitySpec uniform_box_spec(std::size_t dim, double lo, double hi) {
    if (dim != 1 && dim != 2) {
        fail(ErrorKind::Domain, "uniform box spec supports dimensions 1 and 2");
    }
    if (!(hi > lo)) {
        fail(ErrorKind::Domain, "uniform box spec needs hi > lo");
    }
    double side = hi - lo;
    double volume = std::pow(side, static_cast<double>(dim));
    double level = 1.0 / volume;

    DensitySpec spec;
    spec.dim = dim;
    spec.support_radius = std::sqrt(static_cast<double>(dim)) * std::max(std::abs(lo), std::abs(hi));
    spec.lower_bound = level;
    spec.upper_bound = level;
    spec.pdf = [dim, lo, hi, level](std::span<const double> x) {
        for (std::size_t j = 0; j < dim; ++j) {
            if (x[j] < lo || x[j] > hi) {
                return 0.0;
            }
        }
        return level;
    };
    if (dim == 1) {
        spec.ball_measure = [lo, hi, side](std::span<const double> c, double r) {
            return std::clamp(interval_overlap(lo, hi, c[0], r) / side, 0.0, 1.0);
        };
    } else {
        spec.ball_measure = [lo, hi, volume](std::span<const double> c, double r) {
            return std::clamp(box_disc_overlap(lo, hi, c, r) / volume, 0.0, 1.0);
        };
    }
    spec.sample = [dim, lo, side](Rng& rng, std::span<double> out) {
        for (std::size_t j = 0; j < dim; ++j) {
            out[j] = lo + side * rng.next_unit();
        }
    };
    std::ostringstream name;
    name << "uniform-box-" << dim << "d[" << lo << "," << hi << "]";
    spec.name = name.str();
    return spec;
}

DensitySpec uniform_ball_spec(std::size_t dim, double radius) {
    if (dim < 1 || dim > 3) {
        fail(ErrorKind::Domain, "uniform ball spec supports dimensions 1 to 3");
    }
    if (!(radius > 0.0)) {
        fail(ErrorKind::Domain, "uniform ball spec needs a positive radius");
    }
    double volume = unit_ball_volume(dim) * std::pow(radius, static_cast<double>(dim));
    double level = 1.0 / volume;

    DensitySpec spec;
    spec.dim = dim;
    spec.support_radius = radius;
    spec.lower_bound = level;
    spec.upper_bound = level;
    spec.pdf = [dim, radius, level](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            s += x[j] * x[j];
        }
        return s <= radius * radius ? level : 0.0;
    };
    spec.ball_measure = [dim, radius, volume](std::span<const double> c, double r) {
        double t = norm_of(c);
        double mass = 0.0;
        switch (dim) {
            case 1:
                mass = interval_overlap(-radius, radius, c[0], r);
                break;
            case 2:
                mass = disc_lens_area(t, r, radius);
                break;
            default:
                mass = ball3_lens_volume(t, r, radius);
                break;
        }
        return std::clamp(mass / volume, 0.0, 1.0);
    };
    spec.sample = [dim, radius](Rng& rng, std::span<double> out) {
        switch (dim) {
            case 1:
                out[0] = radius * (2.0 * rng.next_unit() - 1.0);
                break;
            case 2: {
                double rho = radius * std::sqrt(rng.next_unit());
                double theta = 2.0 * kPi * rng.next_unit();
                out[0] = rho * std::cos(theta);
                out[1] = rho * std::sin(theta);
                break;
            }
            default: {
                double g0 = rng.next_normal();
                double g1 = rng.next_normal();
                double g2 = rng.next_normal();
                double rho = radius * std::cbrt(rng.next_unit());
                double nrm = std::sqrt(g0 * g0 + g1 * g1 + g2 * g2);
                if (nrm == 0.0) {
                    g0 = 1.0;
                    nrm = 1.0;
                }
                out[0] = rho * g0 / nrm;
                out[1] = rho * g1 / nrm;
                out[2] = rho * g2 / nrm;
                break;
            }
        }
    };
    std::ostringstream name;
    name << "uniform-ball-" << dim << "d(r=" << radius << ")";
    spec.name = name.str();
    return spec;
}

GridSpec GridSpec::regular(std::size_t dim, double lo, double hi, std::size_t bins_per_dim) {
    GridSpec grid;
    grid.lower.assign(dim, lo);
    grid.upper.assign(dim, hi);
    grid.bins.assign(dim, bins_per_dim);
    return grid;
}

std::size_t GridSpec::total_cells() const {
    std::size_t total = 1;
    for (std::size_t b : bins) {
        total *= b;
    }
    return bins.empty() ? 0 : total;
}

double GridSpec::cell_volume() const {
    double v = 1.0;
    for (std::size_t j = 0; j < bins.size(); ++j) {
        v *= (upper[j] - lower[j]) / static_cast<double>(bins[j]);
    }
    return v;
}

std::optional<std::size_t> GridSpec::locate(std::span<const double> point) const {
    std::size_t cell = 0;
    for (std::size_t j = 0; j < bins.size(); ++j) {
        double x = point[j];
        if (x < lower[j] || x >= upper[j]) {
            return std::nullopt;
        }
        double width = (upper[j] - lower[j]) / static_cast<double>(bins[j]);
        auto idx = static_cast<std::size_t>((x - lower[j]) / width);
        idx = std::min(idx, bins[j] - 1);
        cell = cell * bins[j] + idx;
    }
    return cell;
}

std::vector<double> GridSpec::cell_center(std::size_t cell) const {
    std::vector<double> center(bins.size());
    for (std::size_t jj = bins.size(); jj-- > 0;) {
        std::size_t idx = cell % bins[jj];
        cell /= bins[jj];
        double width = (upper[jj] - lower[jj]) / static_cast<double>(bins[jj]);
        center[jj] = lower[jj] + (static_cast<double>(idx) + 0.5) * width;
    }
    return center;
}

double GridSpec::cell_lower(std::size_t cell, std::size_t j) const {
    std::vector<std::size_t> idx(bins.size());
    for (std::size_t jj = bins.size(); jj-- > 0;) {
        idx[jj] = cell % bins[jj];
        cell /= bins[jj];
    }
    double width = (upper[j] - lower[j]) / static_cast<double>(bins[j]);
    return lower[j] + static_cast<double>(idx[j]) * width;
}

double GridSpec::cell_upper(std::size_t cell, std::size_t j) const {
    double width = (upper[j] - lower[j]) / static_cast<double>(bins[j]);
    return cell_lower(cell, j) + width;
}

HistogramDensity mc_density(const Matrix& samples, const GridSpec& grid) {
    if (samples.rows() < 1000) {
        fail(ErrorKind::TooSmall, "histogram density needs at least 1000 samples");
    }
    if (grid.bins.empty() || grid.lower.size() != grid.bins.size() ||
        grid.upper.size() != grid.bins.size()) {
        fail(ErrorKind::GridError, "histogram grid is degenerate");
    }
    for (std::size_t j = 0; j < grid.bins.size(); ++j) {
        if (grid.bins[j] == 0 || !(grid.upper[j] > grid.lower[j])) {
            fail(ErrorKind::GridError, "histogram grid is degenerate");
        }
    }
    if (samples.cols() != grid.bins.size()) {
        fail(ErrorKind::GridError, "grid dimension does not match the samples");
    }

    HistogramDensity out;
    out.grid = grid;
    out.counts.assign(grid.total_cells(), 0);
    out.total = samples.rows();
    for (std::size_t i = 0; i < samples.rows(); ++i) {
        if (auto cell = grid.locate(samples.row_span(i))) {
            ++out.counts[*cell];
            ++out.inside;
        }
    }
    if (out.inside == 0) {
        fail(ErrorKind::GridError, "no sample falls inside the histogram grid");
    }

    double vol = grid.cell_volume();
    out.value.resize(out.counts.size());
    out.std_error.resize(out.counts.size());
    auto inside = static_cast<double>(out.inside);
    for (std::size_t c = 0; c < out.counts.size(); ++c) {
        double p = static_cast<double>(out.counts[c]) / inside;
        out.value[c] = p / vol;
        out.std_error[c] = frequency_std_error(p, out.inside) / vol;
    }
    return out;
}

double smote_conditional_density(std::span<const double> z, std::span<const double> x_c,
                                 std::size_t k, std::size_t n, const DensitySpec& spec) {
    validate_spec(spec);
    check_point_dims(spec, z, x_c);
    check_k_n(k, n);

    double a = euclidean_distance(z, x_c);
    if (a == 0.0) {
        fail(ErrorKind::Singularity, "conditional density is singular at z == x_c");
    }
    double two_r = 2.0 * spec.support_radius;
    if (a >= two_r) {
        return 0.0;
    }
    std::vector<double> dir(spec.dim);
    for (std::size_t j = 0; j < spec.dim; ++j) {
        dir[j] = (z[j] - x_c[j]) / a;
    }
    auto cut = ray_support_cut(spec, x_c, dir, a, two_r);
    if (!cut) {
        return 0.0;
    }

    double d = static_cast<double>(spec.dim);
    double inv_pow_a = std::pow(a, d - 1.0);
    std::vector<double> p(spec.dim);
    auto integrand = [&](double r) {
        for (std::size_t j = 0; j < spec.dim; ++j) {
            p[j] = x_c[j] + dir[j] * r;
        }
        double f = spec.pdf(p);
        if (f <= 0.0) {
            return 0.0;
        }
        double mu = std::clamp(spec.ball_measure(x_c, r), 0.0, 1.0);
        double weight = specfun::smote_order_weight(n, k, mu);
        return f * std::pow(r, d - 2.0) * weight / inv_pow_a;
    };
    return integrate_gk(integrand, a, *cut);
}

double smote_conditional_density_w(std::span<const double> z, std::span<const double> x_c,
                                   std::size_t k, std::size_t n, const DensitySpec& spec) {
    validate_spec(spec);
    check_point_dims(spec, z, x_c);
    check_k_n(k, n);

    double a = euclidean_distance(z, x_c);
    if (a == 0.0) {
        fail(ErrorKind::Singularity, "conditional density is singular at z == x_c");
    }
    double two_r = 2.0 * spec.support_radius;
    if (a >= two_r) {
        return 0.0;
    }
    std::vector<double> dir(spec.dim);
    for (std::size_t j = 0; j < spec.dim; ++j) {
        dir[j] = (z[j] - x_c[j]) / a;
    }
    auto cut = ray_support_cut(spec, x_c, dir, a, two_r);
    if (!cut) {
        return 0.0;
    }

    double d = static_cast<double>(spec.dim);
    double w_min = a / *cut;
    std::vector<double> p(spec.dim);
    auto integrand = [&](double w) {
        double r = a / w;
        for (std::size_t j = 0; j < spec.dim; ++j) {
            p[j] = x_c[j] + dir[j] * r;
        }
        double f = spec.pdf(p);
        if (f <= 0.0) {
            return 0.0;
        }
        double mu = std::clamp(spec.ball_measure(x_c, r), 0.0, 1.0);
        double weight = specfun::smote_order_weight(n, k, mu);
        return f * weight / std::pow(w, d);
    };
    return integrate_gk(integrand, w_min, 1.0);
}

Matrix conditional_sample(std::span<const double> x_c, std::size_t k, std::size_t n,
                          const DensitySpec& spec, std::size_t draws, std::uint64_t seed,
                          unsigned threads) {
    validate_spec(spec);
    if (x_c.size() != spec.dim) {
        fail(ErrorKind::Shape, "central point dimension does not match the density spec");
    }
    check_k_n(k, n);
    if (draws == 0) {
        fail(ErrorKind::Domain, "need at least one draw");
    }

    Matrix out(draws, spec.dim);
    std::vector<double> center(x_c.begin(), x_c.end());
    run_chunks(draws, threads, [&](std::size_t begin, std::size_t end) {
        KNearestBuffer nearest(k, spec.dim);
        std::vector<double> candidate(spec.dim);
        for (std::size_t i = begin; i < end; ++i) {
            Rng rng(derive_seed(seed, i));
            nearest.reset();
            for (std::size_t j = 0; j + 1 < n; ++j) {
                spec.sample(rng, candidate);
                nearest.offer(candidate, squared_distance(candidate, center));
            }
            auto picked = nearest.point(rng.next_below(k));
            double w = rng.next_unit();
            double* row = out.row(i);
            for (std::size_t j = 0; j < spec.dim; ++j) {
                row[j] = center[j] + w * (picked[j] - center[j]);
            }
        }
    });
    return out;
}

SmoteDrawSet unconditional_sample(std::size_t k, std::size_t n, const DensitySpec& spec,
                                  std::size_t draws, std::uint64_t seed, unsigned threads) {
    validate_spec(spec);
    check_k_n(k, n);
    if (draws == 0) {
        fail(ErrorKind::Domain, "need at least one draw");
    }

    SmoteDrawSet out;
    out.points = Matrix(draws, spec.dim);
    out.centrals = Matrix(draws, spec.dim);
    run_chunks(draws, threads, [&](std::size_t begin, std::size_t end) {
        KNearestBuffer nearest(k, spec.dim);
        std::vector<double> base(n * spec.dim);
        for (std::size_t i = begin; i < end; ++i) {
            Rng rng(derive_seed(seed, i));
            for (std::size_t j = 0; j < n; ++j) {
                spec.sample(rng, std::span<double>(base.data() + j * spec.dim, spec.dim));
            }
            std::size_t central = rng.next_below(n);
            std::span<const double> center(base.data() + central * spec.dim, spec.dim);
            nearest.reset();
            for (std::size_t j = 0; j < n; ++j) {
                if (j == central) {
                    continue;
                }
                std::span<const double> candidate(base.data() + j * spec.dim, spec.dim);
                nearest.offer(candidate, squared_distance(candidate, center));
            }
            auto picked = nearest.point(rng.next_below(k));
            double w = rng.next_unit();
            double* zrow = out.points.row(i);
            double* crow = out.centrals.row(i);
            for (std::size_t j = 0; j < spec.dim; ++j) {
                zrow[j] = center[j] + w * (picked[j] - center[j]);
                crow[j] = center[j];
            }
        }
    });
    return out;
}

double concentration_envelope(double alpha, const DensitySpec& spec) {
    validate_spec(spec);
    double two_r = 2.0 * spec.support_radius;
    if (!(alpha > 0.0) || alpha > two_r) {
        fail(ErrorKind::Domain, "alpha must lie in (0, 2R]");
    }
    double r = spec.support_radius;
    double d = static_cast<double>(spec.dim);
    double cd = unit_ball_volume(spec.dim);
    double base = spec.upper_bound * cd * std::pow(r, d);
    if (spec.dim == 1) {
        return base * std::log(two_r / alpha);
    }
    return base * (std::pow(two_r / alpha, d - 1.0) - 1.0) / (d - 1.0);
}

std::optional<double> concentration_bound_value(double alpha, std::span<const double> x_c,
                                                std::size_t k, std::size_t n,
                                                const DensitySpec& spec) {
    validate_spec(spec);
    if (x_c.size() != spec.dim) {
        fail(ErrorKind::Shape, "central point dimension does not match the density spec");
    }
    check_k_n(k, n);
    double mu = std::clamp(spec.ball_measure(x_c, alpha), 0.0, 1.0);
    double slots = static_cast<double>(n - 1);
    if (static_cast<double>(k) > slots * mu) {
        return std::nullopt;
    }
    double gap = mu - static_cast<double>(k) / slots;
    return concentration_envelope(alpha, spec) * std::exp(-2.0 * slots * gap * gap);
}

BoundReport concentration_bound(double alpha, std::span<const double> x_c, std::size_t k,
                                std::size_t n, const DensitySpec& spec, std::size_t draws,
                                std::uint64_t seed, unsigned threads) {
    validate_spec(spec);
    double two_r = 2.0 * spec.support_radius;
    if (!(alpha > 0.0) || !(alpha < two_r)) {
        fail(ErrorKind::Domain, "alpha must lie in (0, 2R)");
    }
    if (draws == 0) {
        fail(ErrorKind::Domain, "need at least one draw");
    }

    BoundReport report;
    auto bound = concentration_bound_value(alpha, x_c, k, n, spec);
    if (!bound) {
        report.applicable = false;
        report.pass = true;
        report.note = "K exceeds (n-1) mu(B(x_c, alpha)); bound not applicable";
        return report;
    }
    report.bound = *bound;

    Matrix z = conditional_sample(x_c, k, n, spec, draws, seed, threads);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < draws; ++i) {
        if (euclidean_distance(z.row_span(i), x_c) >= alpha) {
            ++hits;
        }
    }
    double p = static_cast<double>(hits) / static_cast<double>(draws);
    report.empirical = p;
    report.std_error = frequency_std_error(p, draws);
    report.margin = 3.0 * report.std_error;
    report.pass = report.empirical <= report.bound + report.margin;
    report.note = count_note(hits, draws);
    return report;
}

double boundary_density_bound_value(double eps, std::size_t k, std::size_t n,
                                    const DensitySpec& spec) {
    validate_spec(spec);
    check_k_n(k, n);
    if (spec.dim < 2) {
        fail(ErrorKind::InapplicableBound, "boundary bound is stated for dimension > 1");
    }
    double r = spec.support_radius;
    if (eps < 0.0 || eps >= r) {
        fail(ErrorKind::Domain, "eps must lie in [0, R)");
    }
    double d = static_cast<double>(spec.dim);
    double cd = unit_ball_volume(spec.dim);
    if (std::sqrt(eps / r) > cd / (std::sqrt(2.0) * d * spec.upper_bound)) {
        fail(ErrorKind::InapplicableBound,
             "eps violates (eps/R)^(1/2) <= c_d / (sqrt(2) d C2)");
    }
    double c2 = spec.upper_bound;
    double coefficient = std::pow(c2, 1.5) * std::pow(2.0, d + 2.0) * std::sqrt(cd / d) *
                         (static_cast<double>(n - 1) / static_cast<double>(k));
    return coefficient * std::pow(eps / r, 0.25);
}

BoundReport boundary_density_bound(double eps, std::size_t k, std::size_t n,
                                   const DensitySpec& spec, std::size_t draws,
                                   std::uint64_t seed, unsigned threads) {
    BoundReport report;
    report.bound = boundary_density_bound_value(eps, k, n, spec);
    if (draws == 0) {
        fail(ErrorKind::Domain, "need at least one draw");
    }
    if (eps == 0.0) {
        report.pass = true;
        report.note = "empty annulus";
        return report;
    }

    double r = spec.support_radius;
    double d = static_cast<double>(spec.dim);
    double cd = unit_ball_volume(spec.dim);
    double annulus_volume = cd * (std::pow(r, d) - std::pow(r - eps, d));
    double inner = r - eps;

    SmoteDrawSet sample = unconditional_sample(k, n, spec, draws, seed, threads);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < draws; ++i) {
        if (norm_of(sample.points.row_span(i)) > inner) {
            ++hits;
        }
    }
    double p = static_cast<double>(hits) / static_cast<double>(draws);
    report.empirical = p / annulus_volume;
    report.std_error = frequency_std_error(p, draws) / annulus_volume;
    report.margin = 3.0 * report.std_error;
    report.pass = report.empirical <= report.bound + report.margin;
    report.note = count_note(hits, draws);
    return report;
}

double characteristic_distance_threshold(double gamma, std::size_t k, std::size_t n,
                                         const DensitySpec& spec) {
    validate_spec(spec);
    check_k_n(k, n);
    double d = static_cast<double>(spec.dim);
    if (spec.dim < 2) {
        fail(ErrorKind::InapplicableBound, "characteristic distance is stated for dimension >= 2");
    }
    if (!(gamma > 0.0) || !(gamma < 1.0 / d)) {
        fail(ErrorKind::Domain, "gamma must lie in (0, 1/d)");
    }
    double ratio = static_cast<double>(k) / static_cast<double>(n);
    return 12.0 * spec.support_radius * std::pow(ratio, gamma);
}

double characteristic_distance_bound_value(double gamma, std::size_t k, std::size_t n,
                                           const DensitySpec& spec) {
    validate_spec(spec);
    check_k_n(k, n);
    double d = static_cast<double>(spec.dim);
    if (spec.dim < 2) {
        fail(ErrorKind::InapplicableBound, "characteristic distance is stated for dimension >= 2");
    }
    if (!(gamma > 0.0) || !(gamma < 1.0 / d)) {
        fail(ErrorKind::Domain, "gamma must lie in (0, 1/d)");
    }
    double ratio = static_cast<double>(k) / static_cast<double>(n);
    return std::pow(ratio, 2.0 / d - 2.0 * gamma);
}

BoundReport characteristic_distance_bound(double gamma, std::size_t k, std::size_t n,
                                          const DensitySpec& spec, std::size_t draws,
                                          std::uint64_t seed, unsigned threads) {
    BoundReport report;
    report.bound = characteristic_distance_bound_value(gamma, k, n, spec);
    double threshold = characteristic_distance_threshold(gamma, k, n, spec);
    if (draws == 0) {
        fail(ErrorKind::Domain, "need at least one draw");
    }

    SmoteDrawSet sample = unconditional_sample(k, n, spec, draws, seed, threads);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < draws; ++i) {
        if (squared_distance(sample.points.row_span(i), sample.centrals.row_span(i)) > threshold) {
            ++hits;
        }
    }
    double p = static_cast<double>(hits) / static_cast<double>(draws);
    report.empirical = p;
    report.std_error = frequency_std_error(p, draws);
    report.margin = 3.0 * report.std_error;
    report.pass = report.empirical <= report.bound + report.margin;
    report.note = count_note(hits, draws);
    return report;
}

double energy_distance(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        fail(ErrorKind::Shape, "energy distance needs matching dimensions");
    }
    if (a.rows() == 0 || b.rows() == 0) {
        fail(ErrorKind::TooSmall, "energy distance needs nonempty samples");
    }
    double cross = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ra = a.row_span(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            cross += euclidean_distance(ra, b.row_span(j));
        }
    }
    double within_a = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ra = a.row_span(i);
        for (std::size_t j = i + 1; j < a.rows(); ++j) {
            within_a += euclidean_distance(ra, a.row_span(j));
        }
    }
    double within_b = 0.0;
    for (std::size_t i = 0; i < b.rows(); ++i) {
        auto rb = b.row_span(i);
        for (std::size_t j = i + 1; j < b.rows(); ++j) {
            within_b += euclidean_distance(rb, b.row_span(j));
        }
    }
    double na = static_cast<double>(a.rows());
    double nb = static_cast<double>(b.rows());
    return 2.0 * cross / (na * nb) - 2.0 * within_a / (na * na) - 2.0 * within_b / (nb * nb);
}

PermutationSummary energy_permutation_test(const Matrix& a, const Matrix& b,
                                           std::size_t permutations, std::uint64_t seed) {
    if (a.cols() != b.cols()) {
        fail(ErrorKind::Shape, "energy distance needs matching dimensions");
    }
    if (a.rows() == 0 || b.rows() == 0) {
        fail(ErrorKind::TooSmall, "energy distance needs nonempty samples");
    }
    if (permutations == 0) {
        fail(ErrorKind::Domain, "need at least one permutation");
    }
    std::size_t na = a.rows();
    std::size_t pool = na + b.rows();

    std::vector<double> dist(pool * pool, 0.0);
    auto row_of = [&](std::size_t i) {
        return i < na ? a.row_span(i) : b.row_span(i - na);
    };
    for (std::size_t i = 0; i < pool; ++i) {
        for (std::size_t j = i + 1; j < pool; ++j) {
            double dij = euclidean_distance(row_of(i), row_of(j));
            dist[i * pool + j] = dij;
            dist[j * pool + i] = dij;
        }
    }

    std::vector<std::size_t> order(pool);
    for (std::size_t i = 0; i < pool; ++i) {
        order[i] = i;
    }
    PermutationSummary summary;
    summary.statistic = energy_from_pool(dist, pool, order, na);

    std::vector<double> stats(permutations);
    std::size_t at_least = 0;
    for (std::size_t p = 0; p < permutations; ++p) {
        Rng rng(derive_seed(seed, p + 1));
        for (std::size_t i = pool - 1; i > 0; --i) {
            std::size_t j = rng.next_below(i + 1);
            std::swap(order[i], order[j]);
        }
        stats[p] = energy_from_pool(dist, pool, order, na);
        if (stats[p] >= summary.statistic) {
            ++at_least;
        }
    }
    std::sort(stats.begin(), stats.end());
    auto idx = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(permutations)));
    summary.threshold_95 = stats[std::min(idx, permutations) - 1];
    summary.p_value = static_cast<double>(1 + at_least) / static_cast<double>(permutations + 1);
    return summary;
}

std::vector<RegenerationPoint> regeneration_distance(
    std::span<const std::size_t> n_values,
    const std::function<std::size_t(std::size_t)>& k_rule, const DensitySpec& spec,
    std::size_t trials, std::uint64_t seed) {
    validate_spec(spec);
    if (!k_rule) {
        fail(ErrorKind::Domain, "regeneration distance needs a neighbor rule");
    }
    if (trials == 0) {
        fail(ErrorKind::Domain, "need at least one trial");
    }

    std::vector<RegenerationPoint> out;
    out.reserve(n_values.size());
    for (std::size_t n : n_values) {
        std::size_t k = k_rule(n);
        if (k < 1) {
            fail(ErrorKind::InvalidK, "neighbor rule must return at least 1");
        }
        if (n < 2 * k + 2) {
            fail(ErrorKind::Domain, "regeneration distance needs n >= 2K + 2");
        }
        double acc = 0.0;
        std::uint64_t n_seed = derive_seed(seed, n);
        for (std::size_t t = 0; t < trials; ++t) {
            std::uint64_t trial_seed = derive_seed(n_seed, t);
            Rng rng(trial_seed);
            Matrix base(n, spec.dim);
            std::vector<double> point(spec.dim);
            for (std::size_t i = 0; i < n; ++i) {
                spec.sample(rng, point);
                std::copy(point.begin(), point.end(), base.row(i));
            }
            auto batch = samplers::smote_batch(base, k, n, derive_seed(trial_seed, 0x736d));
            acc += energy_distance(base, batch.points);
        }
        out.push_back({n, k, acc / static_cast<double>(trials)});
    }
    return out;
}

}  // namespace rebal::density
