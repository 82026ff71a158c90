#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "mritherm/mritherm.hpp"

using namespace mritherm;

TEST_CASE("same seed gives the same stream", "[rng]") {
    Rng a(123), b(123), c(124);
    bool all_same = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        const std::uint64_t x = a.next_u64();
        all_same = all_same && x == b.next_u64();
        any_diff = any_diff || x != c.next_u64();
    }
    REQUIRE(all_same);
    REQUIRE(any_diff);
}

TEST_CASE("uniform stays in range", "[rng]") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform(-2.5, 4.0);
        REQUIRE(u >= -2.5);
        REQUIRE(u <= 4.0);
    }
}

TEST_CASE("below covers all residues and respects the bound", "[rng]") {
    Rng rng(42);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const std::uint64_t v = rng.below(7);
        REQUIRE(v < 7);
        seen.insert(v);
    }
    REQUIRE(seen.size() == 7);
    for (int i = 0; i < 100; ++i) REQUIRE(rng.below(1) == 0);
}

TEST_CASE("shuffle permutes deterministically", "[rng]") {
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[i] = i;
    std::vector<int> w = v, u = v;
    Rng a(9), b(9), c(10);
    a.shuffle(v);
    b.shuffle(w);
    c.shuffle(u);
    REQUIRE(v == w);
    REQUIRE(v != u);

    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) REQUIRE(sorted[i] == i);
}
