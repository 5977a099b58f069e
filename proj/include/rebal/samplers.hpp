#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rebal/core.hpp"
#include "rebal/dataset.hpp"

namespace rebal::samplers {

enum class StrategyKind {
    None,
    ClassWeight,
    Rus,
    Ros,
    NearMiss1,
    Smote,
    BorderlineSmote1,
    BorderlineSmote2,
    CvSmote,
    Mgs,
};

StrategyKind parse_strategy(const std::string& name);
std::string to_string(StrategyKind kind);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::Smote;
    std::optional<std::size_t> k;  // neighbor count; defaults: 5, or d+1 for Mgs
    std::size_t m = 10;            // danger-zone neighbor count (Borderline)
    double target_ratio = 1.0;     // minority/majority ratio after rebalancing
    std::uint64_t seed = 0;
};

// One interpolation iteration: Z = central + w (neighbor - central).
struct InterpolationStep {
    std::size_t central = 0;
    std::size_t neighbor = 0;
    double w = 0.0;
};

// One Gaussian iteration: Z ~ N(mean, Sigma) around the central's K+1 set.
struct GaussianStep {
    std::size_t central = 0;
    std::vector<double> mean;
    std::uint64_t cov_digest = 0;
};

using Provenance = std::variant<InterpolationStep, GaussianStep>;

struct SyntheticBatch {
    Matrix points;
    std::vector<Provenance> provenance;
    bool borderline_fallback = false;  // danger set was empty, plain fallback
};

// One iteration each; provenance indices refer to rows of `minority`.
std::vector<double> smote_draw(const Matrix& minority, std::size_t k, Rng& rng,
                               InterpolationStep* step = nullptr);
std::vector<double> mgs_draw(const Matrix& minority, std::size_t k, Rng& rng,
                             GaussianStep* step = nullptr);

// q independent iterations with per-point derived RNG streams, so batches
// are pure functions of (inputs, seed) no matter how work is scheduled.
SyntheticBatch smote_batch(const Matrix& minority, std::size_t k, std::size_t q,
                           std::uint64_t seed);
SyntheticBatch mgs_batch(const Matrix& minority, std::size_t k, std::size_t q,
                         std::uint64_t seed);

// Borderline SMOTE over a full dataset; provenance indices are dataset row
// indices (variant 2 may pick majority neighbors).
SyntheticBatch borderline_smote(const dataset::Dataset& ds, std::size_t k,
                                std::size_t m, int variant, double target_ratio,
                                std::uint64_t seed);

// Minority rows whose m nearest neighbors among all samples contain m_-
// majority points with m/2 <= m_- < m.
std::vector<std::size_t> borderline_danger_set(const dataset::Dataset& ds,
                                               std::size_t m);

dataset::Dataset ros(const dataset::Dataset& ds, double target_ratio, std::uint64_t seed);
dataset::Dataset rus(const dataset::Dataset& ds, double target_ratio, std::uint64_t seed);
dataset::Dataset nearmiss1(const dataset::Dataset& ds, std::size_t k,
                           double target_ratio);

struct ClassWeights {
    double minority = 1.0;
    double majority = 1.0;
};

ClassWeights class_weights(const dataset::Dataset& ds);

// Expands a ClassWeights pair into one weight per dataset row.
std::vector<double> sample_weight_vector(const dataset::Dataset& ds,
                                         const ClassWeights& weights);

// Inner model used by the CV-SMOTE grid search.
enum class InnerClassifier { WeightedLogReg, Forest };

struct CvSmoteResult {
    std::size_t chosen_k = 1;
    std::vector<std::pair<std::size_t, double>> scores;  // (K, mean ROC AUC)
    std::vector<std::size_t> skipped_folds;
};

// Grid {1..15} + {floor(0.01 n), floor(0.1 n), floor(0.5 n), floor(0.7 n),
// floor(sqrt(n))}, deduplicated and clipped to [1, clip_max].
std::vector<std::size_t> cv_smote_grid(std::size_t n_train, std::size_t clip_max);

CvSmoteResult cv_smote(const dataset::Dataset& ds, std::size_t folds,
                       InnerClassifier classifier, std::uint64_t seed);

struct RebalanceResult {
    dataset::Dataset data;
    std::vector<int> synthetic;          // 0/1 flag per row of data
    std::vector<Provenance> provenance;  // one entry per synthetic row,
                                         // indices remapped to dataset rows
    ClassWeights weights;                // meaningful for ClassWeight only
    bool borderline_fallback = false;
    bool k_clipped = false;
    std::optional<std::size_t> effective_k;
    std::optional<std::size_t> chosen_k;  // CV-SMOTE selection
};

RebalanceResult rebalance(const dataset::Dataset& ds, const StrategyConfig& config);

}  // namespace rebal::samplers
