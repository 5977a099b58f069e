#include "rebal/classify.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>

#include <json.hpp>

namespace rebal::classify {
namespace {

using nlohmann::ordered_json;

void check_training_input(const Matrix& x, const std::vector<int>& y,
                          const std::vector<double>& sample_weights) {
    if (y.size() != x.rows() || sample_weights.size() != x.rows()) {
        fail(ErrorKind::Shape, "feature, label, and weight counts must agree");
    }
    bool seen[2] = {false, false};
    for (std::size_t i = 0; i < x.rows(); ++i) {
        if (y[i] != 0 && y[i] != 1) {
            fail(ErrorKind::InvalidDataset, "labels must be 0 or 1");
        }
        seen[y[i]] = true;
        if (!(sample_weights[i] >= 0.0)) {
            fail(ErrorKind::Domain, "sample weights must be nonnegative");
        }
        for (std::size_t j = 0; j < x.cols(); ++j) {
            if (!std::isfinite(x.at(i, j))) {
                fail(ErrorKind::Domain, "features must be finite");
            }
        }
    }
    if (!seen[0] || !seen[1]) {
        fail(ErrorKind::InvalidDataset, "training data must contain both classes");
    }
}

double sigmoid(double s) {
    if (s >= 0.0) {
        return 1.0 / (1.0 + std::exp(-s));
    }
    const double e = std::exp(s);
    return e / (1.0 + e);
}

double gini_sum(double total, double positives) {
    if (total <= 0.0) {
        return 0.0;
    }
    const double p = positives / total;
    return total * 2.0 * p * (1.0 - p);
}

struct SplitChoice {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
};

struct TreeBuilder {
    const Matrix& x;
    const std::vector<int>& y;
    const std::vector<double>& weights;  // effective per-row weights
    const ForestConfig& config;
    Rng& rng;
    Tree tree;

    // Scratch reused across nodes.
    std::vector<std::size_t> feature_pool;
    std::vector<std::pair<double, std::size_t>> sorted;  // (value, row)

    explicit TreeBuilder(const Matrix& x_in, const std::vector<int>& y_in,
                         const std::vector<double>& w_in,
                         const ForestConfig& config_in, Rng& rng_in)
        : x(x_in), y(y_in), weights(w_in), config(config_in), rng(rng_in) {
        feature_pool.resize(x.cols());
        std::iota(feature_pool.begin(), feature_pool.end(), std::size_t{0});
    }

    std::size_t mtry() const {
        if (config.mtry > 0) {
            return std::min(config.mtry, x.cols());
        }
        return static_cast<std::size_t>(
            std::ceil(std::sqrt(static_cast<double>(x.cols()))));
    }

    SplitChoice best_split(const std::vector<std::size_t>& rows, double total,
                           double positives) {
        const double parent_score = gini_sum(total, positives);
        double best_score = parent_score;
        SplitChoice choice;
        const std::size_t tries = mtry();
        for (std::size_t t = 0; t < tries; ++t) {
            const std::size_t swap_at = t + rng.next_below(feature_pool.size() - t);
            std::swap(feature_pool[t], feature_pool[swap_at]);
            const std::size_t feature = feature_pool[t];
            sorted.clear();
            for (std::size_t r : rows) {
                sorted.emplace_back(x.at(r, feature), r);
            }
            std::sort(sorted.begin(), sorted.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            double left_total = 0.0;
            double left_pos = 0.0;
            for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
                const auto [value, row] = sorted[i];
                left_total += weights[row];
                left_pos += y[row] * weights[row];
                if (value == sorted[i + 1].first) {
                    continue;
                }
                const double score = gini_sum(left_total, left_pos) +
                                     gini_sum(total - left_total,
                                              positives - left_pos);
                if (score < best_score) {
                    best_score = score;
                    choice.found = true;
                    choice.feature = feature;
                    choice.threshold = std::midpoint(value, sorted[i + 1].first);
                }
            }
        }
        return choice;
    }

    int build(std::vector<std::size_t> rows, int depth) {
        double total = 0.0;
        double positives = 0.0;
        for (std::size_t r : rows) {
            total += weights[r];
            positives += y[r] * weights[r];
        }
        const int node_index = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[node_index].prob = positives / total;
        tree.depth = std::max(tree.depth, depth);

        const bool pure = positives == 0.0 || positives == total;
        const bool depth_capped =
            config.max_depth != kUnlimitedDepth && depth >= config.max_depth;
        if (pure || depth_capped || rows.size() < 2 * config.min_samples_leaf) {
            return node_index;
        }
        const SplitChoice choice = best_split(rows, total, positives);
        if (!choice.found) {
            return node_index;
        }
        std::vector<std::size_t> left_rows;
        std::vector<std::size_t> right_rows;
        for (std::size_t r : rows) {
            if (x.at(r, choice.feature) <= choice.threshold) {
                left_rows.push_back(r);
            } else {
                right_rows.push_back(r);
            }
        }
        if (left_rows.size() < config.min_samples_leaf ||
            right_rows.size() < config.min_samples_leaf) {
            return node_index;
        }
        rows.clear();
        rows.shrink_to_fit();
        const int left = build(std::move(left_rows), depth + 1);
        const int right = build(std::move(right_rows), depth + 1);
        tree.nodes[node_index].feature = static_cast<int>(choice.feature);
        tree.nodes[node_index].threshold = choice.threshold;
        tree.nodes[node_index].left = left;
        tree.nodes[node_index].right = right;
        return node_index;
    }
};

Tree fit_tree(const Matrix& x, const std::vector<int>& y,
              const std::vector<double>& sample_weights,
              const ForestConfig& config, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = x.rows();
    std::vector<double> effective(n, 0.0);
    if (config.bootstrap) {
        std::vector<std::uint32_t> counts(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[rng.next_below(n)];
        }
        for (std::size_t i = 0; i < n; ++i) {
            effective[i] = counts[i] * sample_weights[i];
        }
    } else {
        effective = sample_weights;
    }
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i) {
        if (effective[i] > 0.0) {
            rows.push_back(i);
        }
    }
    if (rows.empty()) {
        // A bootstrap can land only on zero-weight rows; fall back to the
        // full weighted sample so the tree stays well defined.
        for (std::size_t i = 0; i < n; ++i) {
            if (sample_weights[i] > 0.0) {
                rows.push_back(i);
            }
        }
        effective = sample_weights;
    }
    TreeBuilder builder(x, y, effective, config, rng);
    builder.build(std::move(rows), 0);
    return std::move(builder.tree);
}

ordered_json tree_to_json(const Tree& tree) {
    ordered_json nodes = ordered_json::array();
    for (const TreeNode& node : tree.nodes) {
        nodes.push_back({{"feature", node.feature},
                         {"threshold", node.threshold},
                         {"left", node.left},
                         {"right", node.right},
                         {"prob", node.prob}});
    }
    return {{"depth", tree.depth}, {"nodes", std::move(nodes)}};
}

Tree tree_from_json(const ordered_json& doc) {
    Tree tree;
    tree.depth = doc.at("depth").get<int>();
    for (const auto& node_doc : doc.at("nodes")) {
        TreeNode node;
        node.feature = node_doc.at("feature").get<int>();
        node.threshold = node_doc.at("threshold").get<double>();
        node.left = node_doc.at("left").get<int>();
        node.right = node_doc.at("right").get<int>();
        node.prob = node_doc.at("prob").get<double>();
        tree.nodes.push_back(node);
    }
    return tree;
}

ordered_json parse_model_document(const std::string& text, const char* expected) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::MalformedInput, std::string("invalid model JSON: ") + e.what());
    }
    if (doc.value("format_version", 0) != 1) {
        fail(ErrorKind::MalformedInput, "unsupported model format_version");
    }
    if (doc.value("model", std::string{}) != expected) {
        fail(ErrorKind::MalformedInput, "model document has the wrong type tag");
    }
    return doc;
}

}  // namespace

double LogRegModel::decision_function(std::span<const double> x) const {
    if (x.size() + 1 != weights.size()) {
        fail(ErrorKind::Shape, "feature dimension does not match the model");
    }
    double s = weights.back();
    for (std::size_t j = 0; j < x.size(); ++j) {
        s += weights[j] * x[j];
    }
    return s;
}

double LogRegModel::predict_proba(std::span<const double> x) const {
    return sigmoid(decision_function(x));
}

LogRegModel fit_logreg(const Matrix& x, const std::vector<int>& y,
                       const std::vector<double>& sample_weights,
                       const LogRegConfig& config) {
    check_training_input(x, y, sample_weights);
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    const double total_weight =
        std::accumulate(sample_weights.begin(), sample_weights.end(), 0.0);
    if (total_weight <= 0.0) {
        fail(ErrorKind::Domain, "total sample weight must be positive");
    }

    double step = config.learning_rate;
    if (step <= 0.0) {
        // Inverse of the logistic-loss curvature bound, so a constant step
        // converges on raw (unstandardized) features as well.
        double squared_scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double row_sq = 1.0;  // intercept column
            for (std::size_t j = 0; j < d; ++j) {
                row_sq += x.at(i, j) * x.at(i, j);
            }
            squared_scale += sample_weights[i] * row_sq;
        }
        step = 1.0 / (0.25 * squared_scale / total_weight + config.l2);
    }

    LogRegModel model;
    model.weights.assign(d + 1, 0.0);
    std::vector<double> gradient(d + 1, 0.0);
    for (std::size_t iter = 0; iter < config.max_iters; ++iter) {
        std::fill(gradient.begin(), gradient.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (sample_weights[i] == 0.0) {
                continue;
            }
            const double* row = x.row(i);
            double s = model.weights[d];
            for (std::size_t j = 0; j < d; ++j) {
                s += model.weights[j] * row[j];
            }
            const double residual =
                sample_weights[i] * (sigmoid(s) - static_cast<double>(y[i]));
            for (std::size_t j = 0; j < d; ++j) {
                gradient[j] += residual * row[j];
            }
            gradient[d] += residual;
        }
        double norm_sq = 0.0;
        for (std::size_t j = 0; j <= d; ++j) {
            gradient[j] /= total_weight;
            if (j < d) {
                gradient[j] += config.l2 * model.weights[j];
            }
            norm_sq += gradient[j] * gradient[j];
        }
        model.final_grad_norm = std::sqrt(norm_sq);
        model.iters_run = iter;
        if (model.final_grad_norm <= config.tol) {
            return model;
        }
        for (std::size_t j = 0; j <= d; ++j) {
            model.weights[j] -= step * gradient[j];
        }
        model.iters_run = iter + 1;
    }
    return model;
}

double Tree::predict(std::span<const double> x) const {
    int at = 0;
    while (nodes[at].feature >= 0) {
        const TreeNode& node = nodes[at];
        at = x[node.feature] <= node.threshold ? node.left : node.right;
    }
    return nodes[at].prob;
}

double ForestModel::predict_proba(std::span<const double> x) const {
    if (x.size() != dim) {
        fail(ErrorKind::Shape, "feature dimension does not match the model");
    }
    double sum = 0.0;
    for (const Tree& tree : trees) {
        sum += tree.predict(x);
    }
    return sum / static_cast<double>(trees.size());
}

double ForestModel::mean_depth() const {
    double sum = 0.0;
    for (const Tree& tree : trees) {
        sum += tree.depth;
    }
    return sum / static_cast<double>(trees.size());
}

ForestModel fit_forest(const Matrix& x, const std::vector<int>& y,
                       const std::vector<double>& sample_weights,
                       const ForestConfig& config, std::uint64_t seed) {
    check_training_input(x, y, sample_weights);
    if (config.n_trees < 1) {
        fail(ErrorKind::Domain, "a forest needs at least one tree");
    }
    if (config.max_depth != kUnlimitedDepth && config.max_depth < 1) {
        fail(ErrorKind::Domain, "max_depth must be >= 1 or unlimited");
    }
    ForestModel model;
    model.dim = x.cols();
    model.config = config;
    model.trees.resize(config.n_trees);
    parallel_for(config.n_trees, config.threads, [&](std::size_t t) {
        model.trees[t] =
            fit_tree(x, y, sample_weights, config, derive_seed(seed, t));
    });
    return model;
}

std::vector<double> predict_proba(const LogRegModel& model, const Matrix& x) {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        out[i] = model.predict_proba(x.row_span(i));
    }
    return out;
}

std::vector<double> predict_proba(const ForestModel& model, const Matrix& x) {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        out[i] = model.predict_proba(x.row_span(i));
    }
    return out;
}

namespace {

std::pair<std::size_t, std::size_t> count_classes(const std::vector<int>& labels) {
    std::size_t positives = 0;
    for (int label : labels) {
        if (label != 0 && label != 1) {
            fail(ErrorKind::InvalidDataset, "labels must be 0 or 1");
        }
        positives += label;
    }
    if (positives == 0 || positives == labels.size()) {
        fail(ErrorKind::UndefinedMetric,
             "ranking metrics need both classes present");
    }
    return {positives, labels.size() - positives};
}

}  // namespace

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        fail(ErrorKind::Shape, "scores and labels must have equal nonzero size");
    }
    const auto [n_pos, n_neg] = count_classes(labels);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });
    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        std::size_t tied_pos = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            tied_pos += labels[order[j]];
            ++j;
        }
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
        positive_rank_sum += midrank * static_cast<double>(tied_pos);
        i = j;
    }
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double pr_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        fail(ErrorKind::Shape, "scores and labels must have equal nonzero size");
    }
    const auto [n_pos, n_neg] = count_classes(labels);
    (void)n_neg;
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });
    double area = 0.0;
    double previous_recall = 0.0;
    std::size_t tp = 0;
    std::size_t seen = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            tp += labels[order[j]];
            ++j;
        }
        seen = j;
        const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        const double precision =
            static_cast<double>(tp) / static_cast<double>(seen);
        area += (recall - previous_recall) * precision;
        previous_recall = recall;
        i = j;
    }
    return area;
}

DepthGrid make_depth_grid(double mean_untuned_depth) {
    DepthGrid grid;
    const double top = std::max(5.0, mean_untuned_depth);
    for (int j = 0; j < 8; ++j) {
        const double value = 5.0 + (top - 5.0) * static_cast<double>(j) / 7.0;
        const int depth = static_cast<int>(std::lround(value));
        if (grid.depths.empty() || grid.depths.back() != depth) {
            grid.depths.push_back(depth);
        }
    }
    grid.depths.push_back(kUnlimitedDepth);
    return grid;
}

DepthGrid depth_grid_for(const dataset::Dataset& ds,
                         const samplers::StrategyConfig& strategy,
                         const ForestConfig& forest, std::uint64_t seed) {
    samplers::StrategyConfig probe = strategy;
    probe.seed = derive_seed(seed, 0x67726964u);
    const samplers::RebalanceResult balanced = samplers::rebalance(ds, probe);
    const std::vector<double> weights =
        samplers::sample_weight_vector(balanced.data, balanced.weights);
    ForestConfig untuned = forest;
    untuned.max_depth = kUnlimitedDepth;
    const ForestModel model =
        fit_forest(balanced.data.features, balanced.data.labels, weights, untuned,
                   derive_seed(seed, 0x756e74u));
    return make_depth_grid(model.mean_depth());
}

int tune_max_depth(const dataset::Dataset& ds,
                   const samplers::StrategyConfig& strategy,
                   const DepthGrid& grid, const ForestConfig& forest,
                   std::uint64_t seed) {
    if (grid.depths.empty()) {
        fail(ErrorKind::Domain, "depth grid must be nonempty");
    }
    if (grid.depths.size() == 1) {
        return grid.depths.front();
    }
    const std::size_t folds = 5;
    const dataset::FoldAssignment assignment =
        dataset::stratified_kfold(ds, folds, derive_seed(seed, 0x666f6cu));

    struct FoldData {
        dataset::Dataset train;
        std::vector<double> train_weights;
        dataset::Dataset test;
        std::uint64_t forest_seed = 0;
    };
    std::vector<FoldData> prepared;
    for (std::size_t f = 0; f < folds; ++f) {
        samplers::StrategyConfig per_fold = strategy;
        per_fold.seed = derive_seed(seed, 0x1000 + f);
        const samplers::RebalanceResult balanced = samplers::rebalance(
            ds.select(assignment.complement_members(f)), per_fold);
        FoldData data;
        data.train = balanced.data;
        data.train_weights =
            samplers::sample_weight_vector(balanced.data, balanced.weights);
        data.test = ds.select(assignment.fold_members(f));
        data.forest_seed = derive_seed(seed, 0x2000 + f);
        prepared.push_back(std::move(data));
    }

    int best_depth = grid.depths.front();
    double best_mean = -std::numeric_limits<double>::infinity();
    for (int depth : grid.depths) {
        ForestConfig candidate = forest;
        candidate.max_depth = depth;
        double sum = 0.0;
        std::size_t used = 0;
        for (const FoldData& data : prepared) {
            const ForestModel model =
                fit_forest(data.train.features, data.train.labels,
                           data.train_weights, candidate, data.forest_seed);
            try {
                sum += roc_auc(predict_proba(model, data.test.features),
                               data.test.labels);
                ++used;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::UndefinedMetric) {
                    throw;
                }
            }
        }
        if (used == 0) {
            fail(ErrorKind::UndefinedMetric,
                 "no validation fold produced a defined ROC AUC");
        }
        const double mean = sum / static_cast<double>(used);
        if (mean > best_mean) {
            best_mean = mean;
            best_depth = depth;
        }
    }
    return best_depth;
}

std::string to_json(const LogRegModel& model) {
    ordered_json doc{{"format_version", 1},
                     {"model", "logreg"},
                     {"weights", model.weights},
                     {"iters_run", model.iters_run},
                     {"final_grad_norm", model.final_grad_norm}};
    return doc.dump(2);
}

std::string to_json(const ForestModel& model) {
    ordered_json trees = ordered_json::array();
    for (const Tree& tree : model.trees) {
        trees.push_back(tree_to_json(tree));
    }
    ordered_json doc{{"format_version", 1},
                     {"model", "forest"},
                     {"dim", model.dim},
                     {"config",
                      {{"n_trees", model.config.n_trees},
                       {"max_depth", model.config.max_depth},
                       {"mtry", model.config.mtry},
                       {"bootstrap", model.config.bootstrap},
                       {"min_samples_leaf", model.config.min_samples_leaf}}},
                     {"trees", std::move(trees)}};
    return doc.dump(2);
}

LogRegModel logreg_from_json(const std::string& text) {
    const ordered_json doc = parse_model_document(text, "logreg");
    LogRegModel model;
    model.weights = doc.at("weights").get<std::vector<double>>();
    model.iters_run = doc.at("iters_run").get<std::size_t>();
    model.final_grad_norm = doc.at("final_grad_norm").get<double>();
    return model;
}

ForestModel forest_from_json(const std::string& text) {
    const ordered_json doc = parse_model_document(text, "forest");
    ForestModel model;
    model.dim = doc.at("dim").get<std::size_t>();
    const ordered_json& config = doc.at("config");
    model.config.n_trees = config.at("n_trees").get<std::size_t>();
    model.config.max_depth = config.at("max_depth").get<int>();
    model.config.mtry = config.at("mtry").get<std::size_t>();
    model.config.bootstrap = config.at("bootstrap").get<bool>();
    model.config.min_samples_leaf = config.at("min_samples_leaf").get<std::size_t>();
    for (const auto& tree_doc : doc.at("trees")) {
        model.trees.push_back(tree_from_json(tree_doc));
    }
    return model;
}

}  // namespace rebal::classify
