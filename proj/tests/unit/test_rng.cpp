#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "hboa/rng.hpp"

using hboa::Rng;

TEST_SUITE("rng") {

TEST_CASE("splitmix64 reference outputs") {
    // First outputs for state 0 from the reference C implementation.
    std::uint64_t state = 0;
    CHECK(hboa::splitmix64(state) == 0xe220a8397b1dcdafULL);
    CHECK(hboa::splitmix64(state) == 0x6e789e6aa1b965f4ULL);
    CHECK(hboa::splitmix64(state) == 0x06c45d188009454fULL);
}

TEST_CASE("same seed gives the same stream, different seeds differ") {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a();
        CHECK(x == b());
        differs = differs || x != c();
    }
    CHECK(differs);
}

TEST_CASE("uniform stays in [0, 1)") {
    Rng rng(1);
    double lo = 1.0, hi = 0.0, sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
    }
    CHECK(lo < 0.001);
    CHECK(hi > 0.999);
    CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("below covers its range evenly") {
    Rng rng(9);
    for (std::uint64_t bound : {1ULL, 2ULL, 3ULL, 7ULL, 10ULL}) {
        std::vector<int> hits(bound, 0);
        const int draws = 20000;
        for (int i = 0; i < draws; ++i) {
            const auto v = rng.below(bound);
            REQUIRE(v < bound);
            ++hits[v];
        }
        for (int h : hits) CHECK(std::abs(h - draws / double(bound)) < 5 * std::sqrt(double(draws)));
    }
}

TEST_CASE("shuffle is a permutation and reaches every order of 3") {
    Rng rng(5);
    std::set<std::vector<int>> seen;
    for (int t = 0; t < 600; ++t) {
        std::vector<int> v{0, 1, 2};
        rng.shuffle(std::span<int>(v));
        std::vector<int> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        REQUIRE(sorted == std::vector<int>{0, 1, 2});
        seen.insert(v);
    }
    CHECK(seen.size() == 6);
}

TEST_CASE("mix_seed separates neighboring inputs") {
    std::set<std::uint64_t> seeds;
    for (std::uint64_t n = 0; n < 50; ++n)
        for (std::uint64_t r = 0; r < 10; ++r) seeds.insert(hboa::mix_seed(7, n, r));
    CHECK(seeds.size() == 500);
    CHECK(hboa::mix_seed(7, 1, 2) != hboa::mix_seed(7, 2, 1));
}

}
