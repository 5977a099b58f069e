#include "rebal/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <utility>

#include <Eigen/Dense>

#include "rebal/classify.hpp"
#include "rebal/neighbors.hpp"

namespace rebal::samplers {
namespace {

Matrix gather_rows(const Matrix& source, const std::vector<std::size_t>& rows) {
    Matrix out(0, source.cols());
    out.reserve_rows(rows.size());
    for (std::size_t r : rows) {
        out.push_row(source.row_span(r));
    }
    return out;
}

// Synthetic rows wanted so minority/majority reaches target_ratio.
std::size_t parity_quota(std::size_t n_minority, std::size_t n_majority,
                         double target_ratio) {
    const auto wanted = static_cast<long long>(
        std::llround(target_ratio * static_cast<double>(n_majority)));
    const auto have = static_cast<long long>(n_minority);
    return wanted > have ? static_cast<std::size_t>(wanted - have) : 0;
}

void check_target_ratio(double target_ratio) {
    if (!(target_ratio > 0.0) || target_ratio > 1.0) {
        fail(ErrorKind::Domain, "target_ratio must lie in (0, 1]");
    }
}

void check_both_classes(const dataset::Dataset& ds) {
    if (ds.count(0) == 0 || ds.count(1) == 0) {
        fail(ErrorKind::InvalidDataset, "both classes must be nonempty");
    }
}

std::vector<double> interpolate(std::span<const double> central,
                                std::span<const double> neighbor, double w) {
    std::vector<double> z(central.size());
    for (std::size_t j = 0; j < central.size(); ++j) {
        z[j] = central[j] + w * (neighbor[j] - central[j]);
    }
    return z;
}

std::uint64_t matrix_digest(const Eigen::MatrixXd& m) {
    std::vector<double> row_major;
    row_major.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row_major.push_back(m(i, j));
        }
    }
    return fnv1a64(row_major.data(), row_major.size() * sizeof(double));
}

std::size_t isqrt_floor(std::size_t n) {
    auto r = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
    while (r * r > n) {
        --r;
    }
    while ((r + 1) * (r + 1) <= n) {
        ++r;
    }
    return r;
}

}  // namespace

StrategyKind parse_strategy(const std::string& name) {
    if (name == "none") return StrategyKind::None;
    if (name == "class-weight") return StrategyKind::ClassWeight;
    if (name == "rus") return StrategyKind::Rus;
    if (name == "ros") return StrategyKind::Ros;
    if (name == "nearmiss1") return StrategyKind::NearMiss1;
    if (name == "smote") return StrategyKind::Smote;
    if (name == "borderline-smote1") return StrategyKind::BorderlineSmote1;
    if (name == "borderline-smote2") return StrategyKind::BorderlineSmote2;
    if (name == "cv-smote") return StrategyKind::CvSmote;
    if (name == "mgs") return StrategyKind::Mgs;
    fail(ErrorKind::Domain, "unknown strategy name: " + name);
}

std::string to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::None: return "none";
        case StrategyKind::ClassWeight: return "class-weight";
        case StrategyKind::Rus: return "rus";
        case StrategyKind::Ros: return "ros";
        case StrategyKind::NearMiss1: return "nearmiss1";
        case StrategyKind::Smote: return "smote";
        case StrategyKind::BorderlineSmote1: return "borderline-smote1";
        case StrategyKind::BorderlineSmote2: return "borderline-smote2";
        case StrategyKind::CvSmote: return "cv-smote";
        case StrategyKind::Mgs: return "mgs";
    }
    fail(ErrorKind::Domain, "unknown strategy kind");
}

std::vector<double> smote_draw(const Matrix& minority, std::size_t k, Rng& rng,
                               InterpolationStep* step) {
    const std::size_t n = minority.rows();
    if (n < 2) {
        fail(ErrorKind::CannotInterpolate,
             "interpolation needs at least two minority samples");
    }
    if (k < 1 || k > n - 1) {
        fail(ErrorKind::InvalidK, "K must lie in [1, n-1]");
    }
    const std::size_t central = rng.next_below(n);
    std::vector<std::size_t> nearest(k);
    std::vector<double> distances(k);
    neighbors::knn_query(minority, minority.row_span(central), k, central,
                         nearest, distances);
    const std::size_t neighbor = nearest[rng.next_below(k)];
    const double w = rng.next_unit();
    if (step != nullptr) {
        step->central = central;
        step->neighbor = neighbor;
        step->w = w;
    }
    return interpolate(minority.row_span(central), minority.row_span(neighbor), w);
}

std::vector<double> mgs_draw(const Matrix& minority, std::size_t k, Rng& rng,
                             GaussianStep* step) {
    const std::size_t n = minority.rows();
    const std::size_t d = minority.cols();
    if (n < 1) {
        fail(ErrorKind::TooSmall, "at least one minority sample is required");
    }
    if (k > n - 1) {
        fail(ErrorKind::InvalidK, "K must lie in [0, n-1]");
    }
    const std::size_t central = rng.next_below(n);
    std::vector<std::size_t> nearest(k);
    std::vector<double> distances(k);
    if (k > 0) {
        neighbors::knn_query(minority, minority.row_span(central), k, central,
                             nearest, distances);
    }

    // Anchor the K+1 set at the central point; differences of identical
    // points are exact zeros, so a degenerate neighborhood reproduces the
    // central point bit for bit.
    const auto ed = static_cast<Eigen::Index>(d);
    Eigen::VectorXd anchor(ed);
    for (std::size_t j = 0; j < d; ++j) {
        anchor(static_cast<Eigen::Index>(j)) = minority.at(central, j);
    }
    Eigen::MatrixXd diffs(ed, static_cast<Eigen::Index>(k + 1));
    diffs.col(0).setZero();
    for (std::size_t t = 0; t < k; ++t) {
        for (std::size_t j = 0; j < d; ++j) {
            diffs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t + 1)) =
                minority.at(nearest[t], j) - anchor(static_cast<Eigen::Index>(j));
        }
    }
    const Eigen::VectorXd mean_diff = diffs.rowwise().mean();
    const Eigen::VectorXd mu = anchor + mean_diff;
    const Eigen::MatrixXd centered = diffs.colwise() - mean_diff;
    const Eigen::MatrixXd sigma =
        centered * centered.transpose() / static_cast<double>(k + 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sigma);
    const Eigen::VectorXd clamped = solver.eigenvalues().cwiseMax(0.0);
    const Eigen::MatrixXd transform =
        solver.eigenvectors() * clamped.cwiseSqrt().asDiagonal();

    Eigen::VectorXd normals(ed);
    for (std::size_t j = 0; j < d; ++j) {
        normals(static_cast<Eigen::Index>(j)) = rng.next_normal();
    }
    const Eigen::VectorXd z = mu + transform * normals;

    if (step != nullptr) {
        step->central = central;
        step->mean.assign(mu.data(), mu.data() + d);
        step->cov_digest = matrix_digest(sigma);
    }
    return {z.data(), z.data() + d};
}

SyntheticBatch smote_batch(const Matrix& minority, std::size_t k, std::size_t q,
                           std::uint64_t seed) {
    SyntheticBatch batch;
    batch.points = Matrix(0, minority.cols());
    batch.points.reserve_rows(q);
    batch.provenance.reserve(q);
    for (std::size_t j = 0; j < q; ++j) {
        Rng rng(derive_seed(seed, j));
        InterpolationStep step;
        batch.points.push_row(smote_draw(minority, k, rng, &step));
        batch.provenance.emplace_back(step);
    }
    return batch;
}

SyntheticBatch mgs_batch(const Matrix& minority, std::size_t k, std::size_t q,
                         std::uint64_t seed) {
    SyntheticBatch batch;
    batch.points = Matrix(0, minority.cols());
    batch.points.reserve_rows(q);
    batch.provenance.reserve(q);
    for (std::size_t j = 0; j < q; ++j) {
        Rng rng(derive_seed(seed, j));
        GaussianStep step;
        batch.points.push_row(mgs_draw(minority, k, rng, &step));
        batch.provenance.emplace_back(std::move(step));
    }
    return batch;
}

std::vector<std::size_t> borderline_danger_set(const dataset::Dataset& ds,
                                               std::size_t m) {
    if (m < 2) {
        fail(ErrorKind::Domain, "the danger-zone neighbor count must be >= 2");
    }
    std::vector<std::size_t> danger;
    std::vector<std::size_t> nearest(m);
    std::vector<double> distances(m);
    for (std::size_t i : ds.indices_of(1)) {
        neighbors::knn_query(ds.features, ds.features.row_span(i), m, i, nearest,
                             distances);
        std::size_t majority_count = 0;
        for (std::size_t idx : nearest) {
            majority_count += ds.labels[idx] == 0 ? 1 : 0;
        }
        if (2 * majority_count >= m && majority_count < m) {
            danger.push_back(i);
        }
    }
    return danger;
}

SyntheticBatch borderline_smote(const dataset::Dataset& ds, std::size_t k,
                                std::size_t m, int variant, double target_ratio,
                                std::uint64_t seed) {
    check_target_ratio(target_ratio);
    check_both_classes(ds);
    if (variant != 1 && variant != 2) {
        fail(ErrorKind::Domain, "borderline variant must be 1 or 2");
    }
    const std::vector<std::size_t> minority_rows = ds.indices_of(1);
    const std::size_t n = minority_rows.size();
    if (n < 2) {
        fail(ErrorKind::CannotInterpolate,
             "interpolation needs at least two minority samples");
    }
    const std::size_t q = parity_quota(n, ds.count(0), target_ratio);

    const std::vector<std::size_t> danger = borderline_danger_set(ds, m);
    SyntheticBatch batch;
    batch.points = Matrix(0, ds.dim());

    if (danger.empty()) {
        batch = smote_batch(gather_rows(ds.features, minority_rows), k, q, seed);
        for (Provenance& p : batch.provenance) {
            auto& step = std::get<InterpolationStep>(p);
            step.central = minority_rows[step.central];
            step.neighbor = minority_rows[step.neighbor];
        }
        batch.borderline_fallback = true;
        return batch;
    }

    const Matrix minority = gather_rows(ds.features, minority_rows);
    std::vector<std::size_t> position_in_minority(ds.size(), ds.size());
    for (std::size_t p = 0; p < minority_rows.size(); ++p) {
        position_in_minority[minority_rows[p]] = p;
    }
    if (variant == 1 && (k < 1 || k > n - 1)) {
        fail(ErrorKind::InvalidK, "K must lie in [1, n-1]");
    }
    if (variant == 2 && (k < 1 || k > ds.size() - 1)) {
        fail(ErrorKind::InvalidK, "K must lie in [1, N-1]");
    }

    batch.points.reserve_rows(q);
    batch.provenance.reserve(q);
    std::vector<std::size_t> nearest(k);
    std::vector<double> distances(k);
    for (std::size_t j = 0; j < q; ++j) {
        Rng rng(derive_seed(seed, j));
        const std::size_t central = danger[rng.next_below(danger.size())];
        InterpolationStep step;
        step.central = central;
        if (variant == 1) {
            neighbors::knn_query(minority, ds.features.row_span(central), k,
                                 position_in_minority[central], nearest,
                                 distances);
            step.neighbor = minority_rows[nearest[rng.next_below(k)]];
            step.w = rng.next_unit();
        } else {
            neighbors::knn_query(ds.features, ds.features.row_span(central), k,
                                 central, nearest, distances);
            step.neighbor = nearest[rng.next_below(k)];
            step.w = 0.5 * rng.next_unit();
        }
        batch.points.push_row(interpolate(ds.features.row_span(step.central),
                                          ds.features.row_span(step.neighbor),
                                          step.w));
        batch.provenance.emplace_back(step);
    }
    return batch;
}

namespace {

std::vector<std::size_t> ros_sources(std::size_t n_minority, std::size_t copies,
                                     std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::size_t> sources(copies);
    for (std::size_t j = 0; j < copies; ++j) {
        sources[j] = rng.next_below(n_minority);
    }
    return sources;
}

dataset::Dataset append_minority_rows(const dataset::Dataset& ds,
                                      const Matrix& points) {
    dataset::Dataset out = ds;
    out.features.reserve_rows(out.size() + points.rows());
    for (std::size_t j = 0; j < points.rows(); ++j) {
        out.features.push_row(points.row_span(j));
        out.labels.push_back(1);
    }
    return out;
}

}  // namespace

dataset::Dataset ros(const dataset::Dataset& ds, double target_ratio,
                     std::uint64_t seed) {
    check_target_ratio(target_ratio);
    check_both_classes(ds);
    const std::vector<std::size_t> minority_rows = ds.indices_of(1);
    const std::size_t copies =
        parity_quota(minority_rows.size(), ds.count(0), target_ratio);
    dataset::Dataset out = ds;
    out.features.reserve_rows(out.size() + copies);
    for (std::size_t src : ros_sources(minority_rows.size(), copies, seed)) {
        out.features.push_row(ds.features.row_span(minority_rows[src]));
        out.labels.push_back(1);
    }
    return out;
}

dataset::Dataset rus(const dataset::Dataset& ds, double target_ratio,
                     std::uint64_t seed) {
    check_target_ratio(target_ratio);
    check_both_classes(ds);
    const std::size_t n = ds.count(1);
    std::vector<std::size_t> majority_rows = ds.indices_of(0);
    const auto wanted = static_cast<long long>(
        std::llround(static_cast<double>(n) / target_ratio));
    if (wanted < 1) {
        fail(ErrorKind::Infeasible, "undersampling target is below one sample");
    }
    const std::size_t keep = std::min<std::size_t>(
        static_cast<std::size_t>(wanted), majority_rows.size());

    Rng rng(seed);
    for (std::size_t t = 0; t < keep; ++t) {
        const std::size_t pick = t + rng.next_below(majority_rows.size() - t);
        std::swap(majority_rows[t], majority_rows[pick]);
    }
    majority_rows.resize(keep);

    std::vector<std::size_t> rows = ds.indices_of(1);
    rows.insert(rows.end(), majority_rows.begin(), majority_rows.end());
    std::sort(rows.begin(), rows.end());
    return ds.select(rows);
}

dataset::Dataset nearmiss1(const dataset::Dataset& ds, std::size_t k,
                           double target_ratio) {
    check_target_ratio(target_ratio);
    check_both_classes(ds);
    const std::vector<std::size_t> minority_rows = ds.indices_of(1);
    const std::vector<std::size_t> majority_rows = ds.indices_of(0);
    const std::size_t n = minority_rows.size();
    if (k < 1 || k > n) {
        fail(ErrorKind::InvalidK,
             "K must lie in [1, minority count] for NearMiss1");
    }
    const auto wanted = static_cast<long long>(
        std::llround(static_cast<double>(n) / target_ratio));
    if (wanted < 1) {
        fail(ErrorKind::Infeasible, "undersampling target is below one sample");
    }
    const std::size_t keep = std::min<std::size_t>(
        static_cast<std::size_t>(wanted), majority_rows.size());

    const Matrix minority = gather_rows(ds.features, minority_rows);
    std::vector<std::size_t> nearest(k);
    std::vector<double> distances(k);
    // (mean distance to K nearest minority, original row) per majority row.
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(majority_rows.size());
    for (std::size_t row : majority_rows) {
        neighbors::knn_query(minority, ds.features.row_span(row), k,
                             std::nullopt, nearest, distances);
        const double mean =
            std::accumulate(distances.begin(), distances.end(), 0.0) /
            static_cast<double>(k);
        scored.emplace_back(mean, row);
    }
    // Smallest mean distance is dropped first; ties drop the smaller index.
    std::sort(scored.begin(), scored.end());
    std::vector<std::size_t> rows = minority_rows;
    for (std::size_t t = scored.size() - keep; t < scored.size(); ++t) {
        rows.push_back(scored[t].second);
    }
    std::sort(rows.begin(), rows.end());
    return ds.select(rows);
}

ClassWeights class_weights(const dataset::Dataset& ds) {
    check_both_classes(ds);
    const auto n = static_cast<double>(ds.count(1));
    const auto rest = static_cast<double>(ds.count(0));
    return {rest / n, 1.0};
}

std::vector<double> sample_weight_vector(const dataset::Dataset& ds,
                                         const ClassWeights& weights) {
    std::vector<double> out(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out[i] = ds.labels[i] == 1 ? weights.minority : weights.majority;
    }
    return out;
}

std::vector<std::size_t> cv_smote_grid(std::size_t n_train, std::size_t clip_max) {
    std::vector<std::size_t> grid;
    for (std::size_t k = 1; k <= 15; ++k) {
        grid.push_back(k);
    }
    grid.push_back(n_train / 100);
    grid.push_back(n_train / 10);
    grid.push_back(n_train / 2);
    grid.push_back(7 * n_train / 10);
    grid.push_back(isqrt_floor(n_train));
    for (std::size_t& k : grid) {
        k = std::clamp<std::size_t>(k, 1, clip_max);
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

CvSmoteResult cv_smote(const dataset::Dataset& ds, std::size_t folds,
                       InnerClassifier classifier, std::uint64_t seed) {
    check_both_classes(ds);
    const std::size_t n = ds.count(1);
    if (n < 2) {
        fail(ErrorKind::TooSmall, "CV-SMOTE needs at least two minority samples");
    }
    const std::vector<std::size_t> grid = cv_smote_grid(n, n - 1);
    const dataset::FoldAssignment assignment =
        dataset::stratified_kfold(ds, folds, derive_seed(seed, 0x666f6c64u));

    struct FoldData {
        dataset::Dataset train;
        dataset::Dataset test;
        std::size_t train_minority = 0;
    };
    std::vector<FoldData> prepared;
    CvSmoteResult result;
    for (std::size_t f = 0; f < folds; ++f) {
        FoldData data;
        data.train = ds.select(assignment.complement_members(f));
        data.test = ds.select(assignment.fold_members(f));
        data.train_minority = data.train.count(1);
        if (data.train_minority < 2 || data.test.count(0) == 0 ||
            data.test.count(1) == 0) {
            result.skipped_folds.push_back(f);
            continue;
        }
        prepared.push_back(std::move(data));
    }
    if (prepared.empty()) {
        fail(ErrorKind::UndefinedMetric, "every cross-validation fold was skipped");
    }

    double best_mean = -std::numeric_limits<double>::infinity();
    for (std::size_t k : grid) {
        double sum = 0.0;
        std::size_t fold_id = 0;
        for (const FoldData& data : prepared) {
            const std::size_t k_eff = std::min(k, data.train_minority - 1);
            const std::size_t quota =
                parity_quota(data.train_minority, data.train.count(0), 1.0);
            const std::uint64_t fold_seed =
                derive_seed(derive_seed(seed, k), fold_id);
            const SyntheticBatch batch = smote_batch(
                gather_rows(data.train.features, data.train.indices_of(1)),
                k_eff, quota, fold_seed);
            const dataset::Dataset augmented =
                append_minority_rows(data.train, batch.points);
            std::vector<double> scores;
            const std::vector<double> unit(augmented.size(), 1.0);
            if (classifier == InnerClassifier::WeightedLogReg) {
                const classify::LogRegModel model = classify::fit_logreg(
                    augmented.features, augmented.labels, unit);
                scores = classify::predict_proba(model, data.test.features);
            } else {
                const classify::ForestModel model = classify::fit_forest(
                    augmented.features, augmented.labels, unit,
                    classify::ForestConfig{}, derive_seed(fold_seed, 1));
                scores = classify::predict_proba(model, data.test.features);
            }
            sum += classify::roc_auc(scores, data.test.labels);
            ++fold_id;
        }
        const double mean = sum / static_cast<double>(prepared.size());
        result.scores.emplace_back(k, mean);
        if (mean > best_mean) {
            best_mean = mean;
            result.chosen_k = k;
        }
    }
    return result;
}

RebalanceResult rebalance(const dataset::Dataset& ds, const StrategyConfig& config) {
    check_target_ratio(config.target_ratio);
    check_both_classes(ds);
    const std::vector<std::size_t> minority_rows = ds.indices_of(1);
    const std::size_t n = minority_rows.size();
    const std::size_t quota = parity_quota(n, ds.count(0), config.target_ratio);

    RebalanceResult result;
    const auto remap_and_append = [&](SyntheticBatch batch, bool already_rows) {
        if (!already_rows) {
            for (Provenance& p : batch.provenance) {
                if (auto* step = std::get_if<InterpolationStep>(&p)) {
                    step->central = minority_rows[step->central];
                    step->neighbor = minority_rows[step->neighbor];
                } else {
                    std::get<GaussianStep>(p).central =
                        minority_rows[std::get<GaussianStep>(p).central];
                }
            }
        }
        result.data = append_minority_rows(ds, batch.points);
        result.synthetic.assign(ds.size(), 0);
        result.synthetic.resize(ds.size() + batch.points.rows(), 1);
        result.provenance = std::move(batch.provenance);
        result.borderline_fallback = batch.borderline_fallback;
    };

    switch (config.kind) {
        case StrategyKind::None:
            result.data = ds;
            result.synthetic.assign(ds.size(), 0);
            break;
        case StrategyKind::ClassWeight:
            result.data = ds;
            result.synthetic.assign(ds.size(), 0);
            result.weights = class_weights(ds);
            break;
        case StrategyKind::Ros: {
            const std::size_t copies = quota;
            result.data = ds;
            result.data.features.reserve_rows(ds.size() + copies);
            result.synthetic.assign(ds.size(), 0);
            for (std::size_t src :
                 ros_sources(minority_rows.size(), copies, config.seed)) {
                const std::size_t row = minority_rows[src];
                result.data.features.push_row(ds.features.row_span(row));
                result.data.labels.push_back(1);
                result.synthetic.push_back(1);
                result.provenance.emplace_back(InterpolationStep{row, row, 0.0});
            }
            break;
        }
        case StrategyKind::Rus:
            result.data = rus(ds, config.target_ratio, config.seed);
            result.synthetic.assign(result.data.size(), 0);
            break;
        case StrategyKind::NearMiss1: {
            const std::size_t k = config.k.value_or(5);
            result.data = nearmiss1(ds, k, config.target_ratio);
            result.synthetic.assign(result.data.size(), 0);
            result.effective_k = k;
            break;
        }
        case StrategyKind::Smote: {
            const std::size_t k = config.k.value_or(5);
            remap_and_append(
                smote_batch(gather_rows(ds.features, minority_rows), k, quota,
                            config.seed),
                false);
            result.effective_k = k;
            break;
        }
        case StrategyKind::BorderlineSmote1:
        case StrategyKind::BorderlineSmote2: {
            const std::size_t k = config.k.value_or(5);
            const int variant =
                config.kind == StrategyKind::BorderlineSmote1 ? 1 : 2;
            remap_and_append(borderline_smote(ds, k, config.m, variant,
                                              config.target_ratio, config.seed),
                             true);
            result.effective_k = k;
            break;
        }
        case StrategyKind::CvSmote: {
            const CvSmoteResult cv = cv_smote(
                ds, 5, InnerClassifier::WeightedLogReg,
                derive_seed(config.seed, 0x63767376u));
            remap_and_append(
                smote_batch(gather_rows(ds.features, minority_rows),
                            cv.chosen_k, quota, config.seed),
                false);
            result.chosen_k = cv.chosen_k;
            result.effective_k = cv.chosen_k;
            break;
        }
        case StrategyKind::Mgs: {
            std::size_t k = config.k.value_or(ds.dim() + 1);
            if (n >= 1 && k > n - 1) {
                k = n - 1;
                result.k_clipped = true;
            }
            remap_and_append(
                mgs_batch(gather_rows(ds.features, minority_rows), k, quota,
                          config.seed),
                false);
            result.effective_k = k;
            break;
        }
    }
    return result;
}

}  // namespace rebal::samplers
