#include <doctest.h>

#include "hetnet/placement.hpp"
#include "support.hpp"

using namespace hetnet;
using hetnet::test::urand;

namespace {

PlacementInstance one_bs(std::vector<double> sizes, std::vector<double> pop, double M, double Q) {
    PlacementInstance in;
    in.sizes = std::move(sizes);
    in.popularity = std::move(pop);
    in.storage = {M};
    in.budget = {Q};
    return in;
}

double enumerate_best(const PlacementInstance& in) {
    const int C = static_cast<int>(in.sizes.size());
    double best = 0;
    for (int m = 0; m < (1 << C); ++m) {
        double s = 0, q = 0, v = 0;
        for (int c = 0; c < C; ++c)
            if (m >> c & 1) {
                s += in.sizes[c];
                q += in.popularity[c] * in.sizes[c];
                v += in.popularity[c] * in.sizes[c];
            }
        if (s <= in.storage[0] && q <= in.budget[0]) best = std::max(best, v);
    }
    return best;
}

bool within_caps(const PlacementInstance& in, const Array2<std::uint8_t>& rho, int b) {
    double s = 0, q = 0;
    for (int c = 0; c < rho.dim1(); ++c)
        if (rho(b, c)) {
            s += in.sizes[c];
            q += in.popularity[c] * in.sizes[c];
        }
    return s <= in.storage[b] * (1 + 1e-9) && q <= in.budget[b] * (1 + 1e-9);
}

}  // namespace

TEST_CASE("placement with slack constraints caches everything") {
    auto in = one_bs({3, 4, 5}, {0.5, 0.3, 0.2}, 100, 100);
    auto rho = solve_placement(in);
    for (int c = 0; c < 3; ++c) CHECK(rho(0, c) == 1);
}

TEST_CASE("placement with no storage caches nothing") {
    auto in = one_bs({3, 4, 5}, {0.5, 0.3, 0.2}, 0, 100);
    auto rho = solve_placement(in);
    for (int c = 0; c < 3; ++c) CHECK(rho(0, c) == 0);
}

TEST_CASE("placement picks the best subset under storage") {
    auto in = one_bs({3, 4, 5}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 7, 1e9);
    auto rho = solve_placement(in);
    CHECK(rho(0, 0) == 1);
    CHECK(rho(0, 1) == 1);
    CHECK(rho(0, 2) == 0);
}

TEST_CASE("exact placement matches subset enumeration") {
    Rng rng(12);
    for (int k = 0; k < 300; ++k) {
        int C = 1 + k % 15;
        std::vector<double> s(C), d(C);
        double total = 0;
        for (int c = 0; c < C; ++c) {
            s[c] = urand(rng, 1, 10);
            d[c] = urand(rng, 0.01, 1);
            total += d[c];
        }
        for (auto& v : d) v /= total;
        double M = urand(rng, 0, 40), Q = urand(rng, 0, 5);
        auto in = one_bs(s, d, M, Q);
        auto rho = solve_placement(in);
        CHECK(within_caps(in, rho, 0));
        CHECK(placement_value(in, rho, 0) == doctest::Approx(enumerate_best(in)).epsilon(1e-9));
    }
}

TEST_CASE("greedy placement stays within both capacities") {
    Rng rng(13);
    for (int k = 0; k < 50; ++k) {
        int C = 40;
        std::vector<double> v(C), w1(C), w2(C);
        for (int c = 0; c < C; ++c) {
            v[c] = urand(rng, 0, 1);
            w1[c] = urand(rng, 1, 10);
            w2[c] = urand(rng, 0, 2);
        }
        auto r = knapsack_greedy(v, w1, 60, w2, 10);
        double s1 = 0, s2 = 0;
        for (int c = 0; c < C; ++c)
            if (r.take[c]) {
                s1 += w1[c];
                s2 += w2[c];
            }
        CHECK(s1 <= 60 * (1 + 1e-9));
        CHECK(s2 <= 10 * (1 + 1e-9));
    }
}

TEST_CASE("placement value is monotone in storage and budget") {
    Rng rng(14);
    for (int k = 0; k < 100; ++k) {
        int C = 8;
        std::vector<double> s(C), d(C);
        for (int c = 0; c < C; ++c) {
            s[c] = urand(rng, 1, 10);
            d[c] = 1.0 / C;
        }
        double M = urand(rng, 0, 30), Q = urand(rng, 0, 5);
        auto base = one_bs(s, d, M, Q);
        double v0 = placement_value(base, solve_placement(base), 0);
        auto moreM = one_bs(s, d, M * 1.3, Q);
        auto moreQ = one_bs(s, d, M, Q * 1.3);
        CHECK(placement_value(moreM, solve_placement(moreM), 0) >= v0 - 1e-12);
        CHECK(placement_value(moreQ, solve_placement(moreQ), 0) >= v0 - 1e-12);
    }
}

TEST_CASE("diversity factor steers later BSs away from earlier contents") {
    PlacementInstance in;
    in.sizes = {1, 1, 1};
    in.popularity = {0.5, 0.3, 0.2};
    in.storage = {1, 1};
    in.budget = {10, 10};
    auto same = solve_placement(in);
    CHECK(same(0, 0) == 1);
    CHECK(same(1, 0) == 1);
    in.diversity_factor = 0.35;
    auto div = solve_placement(in);
    CHECK(div(0, 0) == 1);
    CHECK(div(1, 1) == 1);
    CHECK(div(1, 0) == 0);
}
