#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rebal/core.hpp"

namespace rebal::dataset {

// Binary-labeled dataset; the minority class is always label 1.
// label_values keeps the original file values so CSV output round-trips
// ([0] = value mapped to 0, [1] = value mapped to 1).
struct Dataset {
    Matrix features;
    std::vector<int> labels;
    std::vector<std::string> feature_names;
    std::string label_name = "label";
    double label_values[2] = {0.0, 1.0};

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols(); }
    std::size_t count(int cls) const;
    std::vector<std::size_t> indices_of(int cls) const;
    double minority_fraction() const;

    Dataset select(std::span<const std::size_t> row_indices) const;
};

struct FoldAssignment {
    std::size_t k = 0;
    std::vector<std::size_t> fold_of;

    std::vector<std::size_t> fold_members(std::size_t fold) const;
    std::vector<std::size_t> complement_members(std::size_t fold) const;
};

struct ImbalanceSpec {
    double target_ratio = 0.1;  // desired minority fraction, in (0, 0.5]
    std::uint64_t seed = 0;
};

// Result of subsample_minority: the reduced dataset plus the original-row
// indices of the kept minority samples, so further calls can nest.
struct SubsampleResult {
    Dataset data;
    std::vector<std::size_t> minority_rows;  // indices into the input dataset
};

Dataset make_dataset(Matrix features, std::vector<int> labels);

Dataset load_csv(const std::string& path, const std::string& label_column = "label");
void save_csv(const Dataset& ds, const std::string& path,
              const std::vector<int>* synthetic_flags = nullptr);

FoldAssignment stratified_kfold(const Dataset& ds, std::size_t k, std::uint64_t seed);

SubsampleResult subsample_minority(
    const Dataset& ds, const ImbalanceSpec& spec,
    const std::vector<std::size_t>* nested_within = nullptr);

// Shuffles the minority rows of ds and splits them into two disjoint halves
// of sizes floor(n/2) and ceil(n/2).
std::pair<Dataset, Dataset> split_half(const Dataset& ds_minority, std::uint64_t seed);

// Deterministic Fisher-Yates shuffle used by all dataset operations.
void shuffle_indices(std::vector<std::size_t>& indices, Rng& rng);

}  // namespace rebal::dataset
