#include "rebal/core.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstring>
#include <set>

#include "doctest.h"

using namespace rebal;

TEST_CASE("rng streams are deterministic and distinct") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const std::uint64_t x = a.next_u64();
        CHECK(x == b.next_u64());
    }
    bool any_diff = false;
    Rng a2(42);
    for (int i = 0; i < 100; ++i) {
        if (a2.next_u64() != c.next_u64()) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("derived seeds differ across tasks and masters") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t master : {0ULL, 1ULL, 42ULL}) {
        for (std::uint64_t task = 0; task < 100; ++task) {
            seen.insert(derive_seed(master, task));
        }
    }
    CHECK(seen.size() == 300);
}

TEST_CASE("next_unit lies in [0,1) and has the right mean") {
    Rng rng(7);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.next_unit();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    // SE of the mean is 1/sqrt(12 n) ~ 6.5e-4; allow 5 sigma.
    CHECK(std::fabs(sum / n - 0.5) < 5.0 / std::sqrt(12.0 * n));
}

TEST_CASE("next_below is bounded and roughly uniform") {
    Rng rng(9);
    std::vector<int> counts(10, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const std::uint64_t v = rng.next_below(10);
        REQUIRE(v < 10);
        ++counts[static_cast<std::size_t>(v)];
    }
    for (int count : counts) {
        CHECK(std::fabs(count - n / 10.0) < 5.0 * std::sqrt(n * 0.1 * 0.9));
    }
}

TEST_CASE("next_normal consumes two uniforms and matches moments") {
    Rng rng(11), mirror(11);
    (void)mirror.next_unit();
    (void)mirror.next_unit();
    (void)rng.next_normal();
    CHECK(rng.next_u64() == mirror.next_u64());

    Rng sampler(13);
    double sum = 0.0, sum_sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = sampler.next_normal();
        sum += z;
        sum_sq += z * z;
    }
    CHECK(std::fabs(sum / n) < 5.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::fabs(sum_sq / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
}

TEST_CASE("parallel_for covers every index once, any thread count") {
    for (unsigned threads : {1u, 2u, 8u}) {
        std::vector<std::atomic<int>> hits(1000);
        parallel_for(1000, threads, [&](std::size_t i) { hits[i].fetch_add(1); });
        for (const auto& h : hits) CHECK(h.load() == 1);
    }
}

TEST_CASE("parallel results equal serial results") {
    auto run = [](unsigned threads) {
        std::vector<double> out(517);
        parallel_for(out.size(), threads, [&](std::size_t i) {
            Rng rng(derive_seed(99, i));
            out[i] = rng.next_normal() + rng.next_unit();
        });
        return out;
    };
    CHECK(run(1) == run(8));
}

TEST_CASE("parallel_for propagates exceptions") {
    CHECK_THROWS_AS(
        parallel_for(100, 4,
                     [](std::size_t i) {
                         if (i == 57) fail(ErrorKind::Domain, "boom");
                     }),
        Error);
}

TEST_CASE("format_double round-trips exactly") {
    Rng rng(21);
    for (int i = 0; i < 1000; ++i) {
        double value = (rng.next_unit() - 0.5) * std::pow(10.0, rng.next_below(12));
        if (i % 7 == 0) value = std::floor(value);
        const std::string text = format_double(value);
        double parsed = 0.0;
        const auto result =
            std::from_chars(text.data(), text.data() + text.size(), parsed);
        REQUIRE(result.ec == std::errc());
        CHECK(parsed == value);
    }
    CHECK(format_double(63.0) == "63");
    CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("fnv1a64 matches reference vectors") {
    CHECK(fnv1a64(nullptr, 0) == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cULL);
    const char* text = "hello";
    CHECK(fnv1a64(text, std::strlen(text)) == 0xa430d84680aabd0bULL);
    CHECK(digest_hex(0xcbf29ce484222325ULL) == "cbf29ce484222325");
}

TEST_CASE("matrix rows and selection behave") {
    Matrix m = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}});
    CHECK(m.rows() == 3);
    CHECK(m.cols() == 2);
    CHECK(m.at(1, 1) == 4.0);

    const std::vector<std::size_t> pick = {2, 0};
    Matrix sub = m.select_rows(pick);
    CHECK(sub.rows() == 2);
    CHECK(sub.at(0, 0) == 5.0);
    CHECK(sub.at(1, 1) == 2.0);

    const double extra[2] = {7.0, 8.0};
    m.push_row(extra);
    CHECK(m.rows() == 4);
    CHECK(m.at(3, 0) == 7.0);

    const double bad[3] = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS(m.push_row(bad), Error);
}

TEST_CASE("distance helpers agree with hand values") {
    const double a[2] = {0.0, 0.0};
    const double b[2] = {3.0, 4.0};
    CHECK(squared_distance(a, b) == 25.0);
    CHECK(euclidean_distance(a, b) == 5.0);
    const double c[3] = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS(squared_distance(a, c), Error);
}
