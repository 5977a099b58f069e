#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "rebal/core.hpp"

namespace rebal::neighbors {

// K nearest neighbors per query, distances nondecreasing, ties broken by
// ascending point index. Stored flat: row q covers [q*k, (q+1)*k).
struct NeighborTable {
    std::size_t k = 0;
    std::size_t query_count = 0;
    std::vector<std::size_t> indices;
    std::vector<double> distances;

    std::span<const std::size_t> neighbor_row(std::size_t query) const {
        return {indices.data() + query * k, k};
    }
    std::span<const double> distance_row(std::size_t query) const {
        return {distances.data() + query * k, k};
    }
};

// Nearest neighbors of one query point. exclude_index removes that point
// (self-exclusion under index identification with the query set).
void knn_query(const Matrix& points, std::span<const double> query, std::size_t k,
               std::optional<std::size_t> exclude_index,
               std::span<std::size_t> out_indices, std::span<double> out_distances);

// Brute-force table for every query row. When exclude_self is set, query i
// never reports point i (queries and points must then be index-aligned).
NeighborTable knn(const Matrix& points, const Matrix& queries, std::size_t k,
                  bool exclude_self);

// Distance to the k-th nearest point under the same tie rule.
double kth_distance(const Matrix& points, std::span<const double> query, std::size_t k,
                    std::optional<std::size_t> exclude_index = std::nullopt);

// Distance from one query to its single nearest point (k = 1 shortcut used
// by the similarity metric).
double nearest_distance(const Matrix& points, std::span<const double> query);

}  // namespace rebal::neighbors
