#include "rebal/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <mutex>
#include <numbers>
#include <thread>

namespace rebal {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MalformedInput: return "malformed-input";
        case ErrorKind::InvalidDataset: return "invalid-dataset";
        case ErrorKind::StratificationImpossible: return "stratification-impossible";
        case ErrorKind::NoOp: return "no-op";
        case ErrorKind::InfeasibleNesting: return "infeasible-nesting";
        case ErrorKind::TooSmall: return "too-small";
        case ErrorKind::InvalidK: return "invalid-K";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::CannotInterpolate: return "cannot-interpolate";
        case ErrorKind::Infeasible: return "infeasible";
        case ErrorKind::Domain: return "domain";
        case ErrorKind::UndefinedMetric: return "undefined-metric";
        case ErrorKind::Singularity: return "singularity";
        case ErrorKind::GridError: return "grid";
        case ErrorKind::InapplicableBound: return "inapplicable-bound";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix out;
    for (const auto& r : rows) {
        if (out.rows_ == 0 && out.cols_ == 0) {
            out.cols_ = r.size();
        }
        if (r.size() != out.cols_) {
            fail(ErrorKind::Shape, "inconsistent row widths in matrix literal");
        }
        out.values_.insert(out.values_.end(), r.begin(), r.end());
        ++out.rows_;
    }
    return out;
}

void Matrix::push_row(std::span<const double> row) {
    if (rows_ == 0 && cols_ == 0) {
        cols_ = row.size();
    }
    if (row.size() != cols_) {
        fail(ErrorKind::Shape, "row width does not match matrix columns");
    }
    values_.insert(values_.end(), row.begin(), row.end());
    ++rows_;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const double* src = row(indices[i]);
        double* dst = out.row(i);
        for (std::size_t j = 0; j < cols_; ++j) dst[j] = src[j];
    }
    return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        fail(ErrorKind::Shape, "dimension mismatch in distance computation");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        sum += diff * diff;
    }
    return sum;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

std::uint64_t Rng::next_below(std::uint64_t n) {
    if (n == 0) {
        fail(ErrorKind::Domain, "next_below requires n >= 1");
    }
    const std::uint64_t limit = (UINT64_MAX / n) * n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
}

double Rng::next_normal() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double radius = std::sqrt(-2.0 * std::log1p(-u1));
    return radius * std::cos(2.0 * std::numbers::pi * u2);
}

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& task) {
    if (count == 0) return;
    if (threads == 0) {
        threads = std::thread::hardware_concurrency();
        if (threads == 0) threads = 1;
    }
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr error;
    std::mutex error_mutex;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = count * w / workers;
        const std::size_t end = count * (w + 1) / workers;
        pool.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) task(i);
            } catch (...) {
                std::scoped_lock lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

std::uint64_t fnv1a64_append(std::uint64_t state, const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        state ^= bytes[i];
        state *= 0x100000001b3ULL;
    }
    return state;
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    return fnv1a64_append(0xcbf29ce484222325ULL, data, size);
}

std::string digest_hex(std::uint64_t digest) {
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = hex[digest & 0xf];
        digest >>= 4;
    }
    return out;
}

std::string format_double(double value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

}  // namespace rebal
