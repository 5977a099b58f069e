#include "rebal/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace rebal::dataset {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream stream(line);
    while (std::getline(stream, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_field(const std::string& text, std::size_t line_no, std::size_t column) {
    std::string trimmed = text;
    while (!trimmed.empty() && (trimmed.back() == '\r' || trimmed.back() == ' ')) {
        trimmed.pop_back();
    }
    std::size_t start = 0;
    while (start < trimmed.size() && trimmed[start] == ' ') ++start;
    trimmed = trimmed.substr(start);
    double value = 0.0;
    const char* begin = trimmed.data();
    const char* end = begin + trimmed.size();
    const auto result = std::from_chars(begin, end, value);
    if (result.ec != std::errc() || result.ptr != end || !std::isfinite(value)) {
        fail(ErrorKind::MalformedInput,
             "cannot parse numeric field at line " + std::to_string(line_no) +
                 ", column " + std::to_string(column + 1) + ": '" + text + "'");
    }
    return value;
}

}  // namespace

std::size_t Dataset::count(int cls) const {
    std::size_t total = 0;
    for (int label : labels) {
        if (label == cls) ++total;
    }
    return total;
}

std::vector<std::size_t> Dataset::indices_of(int cls) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == cls) out.push_back(i);
    }
    return out;
}

double Dataset::minority_fraction() const {
    if (labels.empty()) return 0.0;
    return static_cast<double>(count(1)) / static_cast<double>(labels.size());
}

Dataset Dataset::select(std::span<const std::size_t> row_indices) const {
    Dataset out;
    out.features = features.select_rows(row_indices);
    out.labels.reserve(row_indices.size());
    for (std::size_t row : row_indices) out.labels.push_back(labels[row]);
    out.feature_names = feature_names;
    out.label_name = label_name;
    out.label_values[0] = label_values[0];
    out.label_values[1] = label_values[1];
    return out;
}

Dataset make_dataset(Matrix features, std::vector<int> labels) {
    if (features.rows() != labels.size()) {
        fail(ErrorKind::Shape, "feature row count does not match label count");
    }
    Dataset ds;
    ds.features = std::move(features);
    ds.labels = std::move(labels);
    ds.feature_names.reserve(ds.features.cols());
    for (std::size_t j = 0; j < ds.features.cols(); ++j) {
        ds.feature_names.push_back("x" + std::to_string(j));
    }
    return ds;
}

Dataset load_csv(const std::string& path, const std::string& label_column) {
    std::ifstream input(path);
    if (!input) {
        fail(ErrorKind::Io, "cannot open input file: " + path);
    }

    std::string line;
    if (!std::getline(input, line)) {
        fail(ErrorKind::MalformedInput, "empty file: " + path);
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = split_line(line);
    if (header.size() < 2) {
        fail(ErrorKind::MalformedInput, "need at least one feature column and a label column");
    }

    std::size_t label_index = header.size();
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == label_column) {
            label_index = j;
            break;
        }
    }
    if (label_index == header.size()) {
        // Accept a numeric column index as the selector.
        std::size_t parsed = 0;
        const auto result = std::from_chars(
            label_column.data(), label_column.data() + label_column.size(), parsed);
        if (result.ec == std::errc() &&
            result.ptr == label_column.data() + label_column.size() &&
            parsed < header.size()) {
            label_index = parsed;
        } else {
            fail(ErrorKind::MalformedInput,
                 "label column '" + label_column + "' not found in header");
        }
    }

    Dataset ds;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j != label_index) ds.feature_names.push_back(header[j]);
    }
    ds.label_name = header[label_index];

    std::vector<double> raw_labels;
    Matrix features(0, header.size() - 1);
    std::vector<double> row(header.size() - 1);
    std::size_t line_no = 1;
    while (std::getline(input, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_line(line);
        if (fields.size() != header.size()) {
            fail(ErrorKind::MalformedInput,
                 "line " + std::to_string(line_no) + " has " +
                     std::to_string(fields.size()) + " fields, expected " +
                     std::to_string(header.size()));
        }
        std::size_t out_col = 0;
        for (std::size_t j = 0; j < fields.size(); ++j) {
            const double value = parse_field(fields[j], line_no, j);
            if (j == label_index) {
                raw_labels.push_back(value);
            } else {
                row[out_col++] = value;
            }
        }
        features.push_row(row);
    }
    if (raw_labels.empty()) {
        fail(ErrorKind::InvalidDataset, "file contains no data rows: " + path);
    }

    std::map<double, std::size_t> counts;
    for (double value : raw_labels) ++counts[value];
    if (counts.size() != 2) {
        fail(ErrorKind::InvalidDataset,
             "expected exactly 2 label values, found " + std::to_string(counts.size()));
    }
    // Rarer value becomes the minority label 1; ties go to the larger value.
    const auto first = *counts.begin();
    const auto second = *std::next(counts.begin());
    double minority_value = second.first;
    double majority_value = first.first;
    if (second.second > first.second) {
        minority_value = first.first;
        majority_value = second.first;
    }

    ds.features = std::move(features);
    ds.labels.reserve(raw_labels.size());
    for (double value : raw_labels) ds.labels.push_back(value == minority_value ? 1 : 0);
    ds.label_values[0] = majority_value;
    ds.label_values[1] = minority_value;
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path,
              const std::vector<int>* synthetic_flags) {
    if (synthetic_flags && synthetic_flags->size() != ds.size()) {
        fail(ErrorKind::Shape, "synthetic flag count does not match dataset size");
    }
    std::ofstream output(path);
    if (!output) {
        fail(ErrorKind::Io, "cannot open output file: " + path);
    }
    for (std::size_t j = 0; j < ds.feature_names.size(); ++j) {
        if (j > 0) output << ',';
        output << ds.feature_names[j];
    }
    output << ',' << ds.label_name;
    if (synthetic_flags) output << ",synthetic";
    output << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < ds.dim(); ++j) {
            if (j > 0) output << ',';
            output << format_double(ds.features.at(i, j));
        }
        output << ',' << format_double(ds.label_values[ds.labels[i]]);
        if (synthetic_flags) output << ',' << (*synthetic_flags)[i];
        output << '\n';
    }
    if (!output) {
        fail(ErrorKind::Io, "failed writing output file: " + path);
    }
}

void shuffle_indices(std::vector<std::size_t>& indices, Rng& rng) {
    for (std::size_t i = indices.size(); i > 1; --i) {
        const std::size_t j = rng.next_below(i);
        std::swap(indices[i - 1], indices[j]);
    }
}

FoldAssignment stratified_kfold(const Dataset& ds, std::size_t k, std::uint64_t seed) {
    if (k < 2) {
        fail(ErrorKind::Domain, "fold count must be at least 2");
    }
    FoldAssignment assignment;
    assignment.k = k;
    assignment.fold_of.assign(ds.size(), 0);
    for (int cls : {0, 1}) {
        std::vector<std::size_t> members = ds.indices_of(cls);
        if (members.size() < k) {
            fail(ErrorKind::StratificationImpossible,
                 "class " + std::to_string(cls) + " has " +
                     std::to_string(members.size()) + " members, need >= " +
                     std::to_string(k));
        }
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(cls)));
        shuffle_indices(members, rng);
        for (std::size_t i = 0; i < members.size(); ++i) {
            assignment.fold_of[members[i]] = i % k;
        }
    }
    return assignment;
}

std::vector<std::size_t> FoldAssignment::fold_members(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] == fold) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldAssignment::complement_members(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] != fold) out.push_back(i);
    }
    return out;
}

SubsampleResult subsample_minority(const Dataset& ds, const ImbalanceSpec& spec,
                                   const std::vector<std::size_t>* nested_within) {
    if (!(spec.target_ratio > 0.0 && spec.target_ratio <= 0.5)) {
        fail(ErrorKind::Domain, "target ratio must lie in (0, 0.5]");
    }
    const double current = ds.minority_fraction();
    if (spec.target_ratio >= current) {
        fail(ErrorKind::NoOp, "target ratio " + format_double(spec.target_ratio) +
                                  " is not below the current ratio " +
                                  format_double(current));
    }

    std::vector<std::size_t> pool;
    if (nested_within) {
        pool = *nested_within;
        for (std::size_t row : pool) {
            if (row >= ds.size() || ds.labels[row] != 1) {
                fail(ErrorKind::InfeasibleNesting,
                     "nested selection contains a non-minority row");
            }
        }
    } else {
        pool = ds.indices_of(1);
    }

    const std::size_t majority = ds.count(0);
    const double raw = spec.target_ratio * static_cast<double>(majority) /
                       (1.0 - spec.target_ratio);
    const std::size_t wanted =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(raw)));
    if (wanted > pool.size()) {
        fail(ErrorKind::InfeasibleNesting,
             "need " + std::to_string(wanted) + " minority rows but only " +
                 std::to_string(pool.size()) + " are available");
    }

    Rng rng(spec.seed);
    shuffle_indices(pool, rng);
    std::vector<std::size_t> chosen(pool.begin(),
                                    pool.begin() + static_cast<std::ptrdiff_t>(wanted));
    std::sort(chosen.begin(), chosen.end());

    std::vector<bool> keep_minority(ds.size(), false);
    for (std::size_t row : chosen) keep_minority[row] = true;
    std::vector<std::size_t> rows;
    rows.reserve(majority + wanted);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i] == 0 || keep_minority[i]) rows.push_back(i);
    }

    SubsampleResult result;
    result.data = ds.select(rows);
    result.minority_rows = std::move(chosen);
    return result;
}

std::pair<Dataset, Dataset> split_half(const Dataset& ds_minority, std::uint64_t seed) {
    std::vector<std::size_t> members = ds_minority.indices_of(1);
    if (members.size() < 4) {
        fail(ErrorKind::TooSmall, "split_half needs at least 4 minority rows");
    }
    Rng rng(seed);
    shuffle_indices(members, rng);
    const std::size_t half = members.size() / 2;
    std::vector<std::size_t> first(members.begin(),
                                   members.begin() + static_cast<std::ptrdiff_t>(half));
    std::vector<std::size_t> second(members.begin() + static_cast<std::ptrdiff_t>(half),
                                    members.end());
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    return {ds_minority.select(first), ds_minority.select(second)};
}

}  // namespace rebal::dataset
