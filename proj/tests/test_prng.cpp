#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "ttm/prng.hpp"

using ttm::SplitMix64;

TEST_CASE("splitmix64 matches the reference output stream") {
    // Reference values computed independently from the published constants.
    SplitMix64 r0(0);
    CHECK(r0.next() == 0xe220a8397b1dcdafull);
    CHECK(r0.next() == 0x6e789e6aa1b965f4ull);
    CHECK(r0.next() == 0x06c45d188009454full);
    CHECK(r0.next() == 0xf88bb8a8724c81ecull);

    SplitMix64 r42(42);
    CHECK(r42.next() == 0xbdd732262feb6e95ull);
    CHECK(r42.next() == 0x28efe333b266f103ull);

    SplitMix64 rx(0x123456789abcdefull);
    CHECK(rx.next() == 0x157a3807a48faa9dull);
}

TEST_CASE("uniform maps the top 53 bits into [0, 1)") {
    SplitMix64 r(42);
    const double u = r.uniform();
    CHECK(u == doctest::Approx(0.7415648787718233).epsilon(1e-15));
    for (int i = 0; i < 10000; ++i) {
        const double v = r.uniform();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("uniform(lo, hi) stays inside the interval") {
    SplitMix64 r(7);
    for (int i = 0; i < 1000; ++i) {
        const double v = r.uniform(-2.5, 3.5);
        CHECK(v >= -2.5);
        CHECK(v < 3.5);
    }
}

TEST_CASE("below(n) is bounded and roughly balanced") {
    SplitMix64 r(9);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 100000; ++i) {
        const uint64_t v = r.below(10);
        REQUIRE(v < 10);
        ++counts[static_cast<size_t>(v)];
    }
    for (int c : counts) {
        CHECK(c > 9000);
        CHECK(c < 11000);
    }
}

TEST_CASE("gaussian moments are sane and streams are reproducible") {
    SplitMix64 a(1234), b(1234);
    for (int i = 0; i < 100; ++i) CHECK(a.gaussian() == b.gaussian());

    SplitMix64 r(555);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = r.gaussian();
        sum += g;
        sq += g * g;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);

    SplitMix64 s(556);
    double shifted = 0.0;
    for (int i = 0; i < n; ++i) shifted += s.gaussian(3.0, 0.5);
    CHECK(std::abs(shifted / n - 3.0) < 0.01);
}

TEST_CASE("gamma and beta draws match their analytic means") {
    SplitMix64 r(777);
    const int n = 200000;
    double g = 0.0;
    for (int i = 0; i < n; ++i) g += r.gamma(2.5);
    CHECK(std::abs(g / n - 2.5) < 0.02); // E[Gamma(a,1)] = a

    double baccum = 0.0;
    for (int i = 0; i < n; ++i) baccum += r.beta(2.0, 3.0);
    CHECK(std::abs(baccum / n - 0.4) < 0.01); // E[Beta(a,b)] = a/(a+b)

    // alpha < 1 exercises the boost path
    double small = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = r.beta(0.4, 0.4);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        small += v;
    }
    CHECK(std::abs(small / n - 0.5) < 0.01);
}

TEST_CASE("shuffle permutes without losing elements") {
    SplitMix64 r(31337);
    std::vector<int> v(257);
    std::iota(v.begin(), v.end(), 0);
    const std::vector<int> original = v;
    r.shuffle(v);
    CHECK(v != original); // astronomically unlikely to be identity
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == original);

    SplitMix64 r2(31337);
    std::vector<int> w(257);
    std::iota(w.begin(), w.end(), 0);
    r2.shuffle(w);
    CHECK(w == v);
}
