#include "rebal/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rebal::neighbors {

namespace {

struct Candidate {
    double d2;
    std::size_t index;

    bool operator<(const Candidate& other) const {
        if (d2 != other.d2) return d2 < other.d2;
        return index < other.index;
    }
};

void check_query_args(const Matrix& points, std::size_t query_dim, std::size_t k,
                      bool excludes_one) {
    if (query_dim != points.cols()) {
        fail(ErrorKind::Shape, "query dimension does not match points");
    }
    const std::size_t excluded = excludes_one ? 1 : 0;
    const std::size_t available = points.rows() > excluded ? points.rows() - excluded : 0;
    if (k < 1 || k > available) {
        fail(ErrorKind::InvalidK,
             "K must satisfy 1 <= K <= " + std::to_string(available));
    }
}

}  // namespace

void knn_query(const Matrix& points, std::span<const double> query, std::size_t k,
               std::optional<std::size_t> exclude_index,
               std::span<std::size_t> out_indices, std::span<double> out_distances) {
    check_query_args(points, query.size(), k, exclude_index.has_value());

    std::vector<Candidate> candidates;
    candidates.reserve(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        if (exclude_index && *exclude_index == i) continue;
        candidates.push_back({squared_distance(points.row_span(i), query), i});
    }
    auto middle = candidates.begin() + static_cast<std::ptrdiff_t>(k);
    std::nth_element(candidates.begin(), middle - 1, candidates.end());
    std::sort(candidates.begin(), middle);
    for (std::size_t j = 0; j < k; ++j) {
        out_indices[j] = candidates[j].index;
        out_distances[j] = std::sqrt(candidates[j].d2);
    }
}

NeighborTable knn(const Matrix& points, const Matrix& queries, std::size_t k,
                  bool exclude_self) {
    NeighborTable table;
    table.k = k;
    table.query_count = queries.rows();
    table.indices.resize(queries.rows() * k);
    table.distances.resize(queries.rows() * k);
    for (std::size_t q = 0; q < queries.rows(); ++q) {
        std::optional<std::size_t> exclude;
        if (exclude_self) exclude = q;
        knn_query(points, queries.row_span(q), k, exclude,
                  {table.indices.data() + q * k, k},
                  {table.distances.data() + q * k, k});
    }
    return table;
}

double kth_distance(const Matrix& points, std::span<const double> query, std::size_t k,
                    std::optional<std::size_t> exclude_index) {
    check_query_args(points, query.size(), k, exclude_index.has_value());
    std::vector<double> d2;
    d2.reserve(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        if (exclude_index && *exclude_index == i) continue;
        d2.push_back(squared_distance(points.row_span(i), query));
    }
    auto middle = d2.begin() + static_cast<std::ptrdiff_t>(k) - 1;
    std::nth_element(d2.begin(), middle, d2.end());
    return std::sqrt(*middle);
}

double nearest_distance(const Matrix& points, std::span<const double> query) {
    if (query.size() != points.cols()) {
        fail(ErrorKind::Shape, "query dimension does not match points");
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.rows(); ++i) {
        best = std::min(best, squared_distance(points.row_span(i), query));
    }
    return std::sqrt(best);
}

}  // namespace rebal::neighbors
