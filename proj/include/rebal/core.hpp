#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rebal {

enum class ErrorKind {
    MalformedInput,
    InvalidDataset,
    StratificationImpossible,
    NoOp,
    InfeasibleNesting,
    TooSmall,
    InvalidK,
    Shape,
    CannotInterpolate,
    Infeasible,
    Domain,
    UndefinedMetric,
    Singularity,
    GridError,
    InapplicableBound,
    Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

// Dense row-major matrix of doubles. Rows are contiguous so samplers and
// neighbor queries can hand out spans without copying.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    double& at(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
    double at(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }

    double* row(std::size_t i) { return values_.data() + i * cols_; }
    const double* row(std::size_t i) const { return values_.data() + i * cols_; }

    std::span<const double> row_span(std::size_t i) const {
        return {values_.data() + i * cols_, cols_};
    }

    void push_row(std::span<const double> row);
    void push_row(std::initializer_list<double> row) {
        push_row(std::span<const double>(row.begin(), row.size()));
    }
    void reserve_rows(std::size_t rows) { values_.reserve(rows * cols_); }

    Matrix select_rows(std::span<const std::size_t> indices) const;

    const std::vector<double>& values() const noexcept { return values_; }
    std::vector<double>& values() noexcept { return values_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

double squared_distance(std::span<const double> a, std::span<const double> b);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

// SplitMix64 finalizer; also used to derive independent per-task streams.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stream splitting: every parallel task draws from derive_seed(master, task)
// so results never depend on scheduling or thread count.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t task) {
    return mix64(master ^ mix64(task ^ 0x5851f42d4c957f2dULL));
}

// Counter-based 64-bit generator (SplitMix64). Deterministic across
// platforms; each next_normal() consumes exactly two uniforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform on [0, 1) with 53 random bits.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer on [0, n); rejection keeps it unbiased.
    std::uint64_t next_below(std::uint64_t n);

    // Standard normal via Box-Muller (cosine branch only, two uniforms).
    double next_normal();

private:
    std::uint64_t state_;
};

// Runs task(i) for i in [0, count) over the requested number of threads.
// Tasks must be independent; use derive_seed for any randomness.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& task);

// FNV-1a 64-bit digest; used for provenance and manifest file digests.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64_append(std::uint64_t state, const void* data, std::size_t size);
std::string digest_hex(std::uint64_t digest);

// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

}  // namespace rebal
