#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rebal/core.hpp"
#include "rebal/dataset.hpp"
#include "rebal/samplers.hpp"

namespace rebal::classify {

inline constexpr int kUnlimitedDepth = -1;

struct LogRegConfig {
    double learning_rate = 0.0;  // 0 selects a step from the data scale
    std::size_t max_iters = 2000;
    double l2 = 1e-4;            // excludes the bias term
    double tol = 1e-6;           // gradient L2 norm target
};

struct LogRegModel {
    std::vector<double> weights;  // d+1 entries, bias last
    std::size_t iters_run = 0;
    double final_grad_norm = 0.0;

    double decision_function(std::span<const double> x) const;
    double predict_proba(std::span<const double> x) const;
};

// Weighted L2-regularized maximum likelihood via full-batch gradient descent
// from a zero start; the objective is normalized by total weight so that
// integer weighting and row duplication share the same optimum.
LogRegModel fit_logreg(const Matrix& x, const std::vector<int>& y,
                       const std::vector<double>& sample_weights,
                       const LogRegConfig& config = {});

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double prob = 0.0;  // leaf weighted class-1 fraction
};

struct Tree {
    std::vector<TreeNode> nodes;  // node 0 is the root
    int depth = 0;                // edges on the longest root-to-leaf path

    double predict(std::span<const double> x) const;
};

struct ForestConfig {
    std::size_t n_trees = 100;
    int max_depth = kUnlimitedDepth;
    std::size_t mtry = 0;  // features tried per split; 0 selects ceil(sqrt(d))
    bool bootstrap = true;
    std::size_t min_samples_leaf = 1;
    unsigned threads = 1;
};

struct ForestModel {
    std::size_t dim = 0;
    ForestConfig config;
    std::vector<Tree> trees;

    double predict_proba(std::span<const double> x) const;
    double mean_depth() const;
};

ForestModel fit_forest(const Matrix& x, const std::vector<int>& y,
                       const std::vector<double>& sample_weights,
                       const ForestConfig& config, std::uint64_t seed);

std::vector<double> predict_proba(const LogRegModel& model, const Matrix& x);
std::vector<double> predict_proba(const ForestModel& model, const Matrix& x);

// Probability of concordance with the midrank tie convention.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);
// Step-wise average precision over distinct score thresholds.
double pr_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct DepthGrid {
    std::vector<int> depths;  // sorted finite candidates, kUnlimitedDepth last
};

// Eight integers spaced from 5 to the mean untuned depth, deduplicated,
// plus the unlimited sentinel.
DepthGrid make_depth_grid(double mean_untuned_depth);

// Fits one unlimited forest on the rebalanced dataset and builds the grid
// from its mean tree depth.
DepthGrid depth_grid_for(const dataset::Dataset& ds,
                         const samplers::StrategyConfig& strategy,
                         const ForestConfig& forest, std::uint64_t seed);

// Nested stratified CV: rebalances each training split with the strategy,
// fits a forest per candidate depth, and keeps the depth with the highest
// mean held-out ROC AUC; ties prefer the smallest depth.
int tune_max_depth(const dataset::Dataset& ds,
                   const samplers::StrategyConfig& strategy,
                   const DepthGrid& grid, const ForestConfig& forest,
                   std::uint64_t seed);

std::string to_json(const LogRegModel& model);
std::string to_json(const ForestModel& model);
LogRegModel logreg_from_json(const std::string& text);
ForestModel forest_from_json(const std::string& text);

}  // namespace rebal::classify
