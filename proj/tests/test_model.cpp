#include <doctest.h>

#include <cmath>
#include <numeric>

#include "hetnet/model.hpp"
#include "support.hpp"

using namespace hetnet;
using hetnet::test::make_scenario;
using hetnet::test::urand;

TEST_CASE("zipf popularity closed forms") {
    auto d = zipf_popularity(2, 1.0);
    CHECK(d[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(d[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    auto u = zipf_popularity(3, 0.0);
    for (double v : u) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("zipf head probability matches an extended-precision normalizer") {
    // 1 / sum_{k=1}^{1000} k^-0.65, evaluated with 30-digit arithmetic.
    auto d = zipf_popularity(1000, 0.65);
    CHECK(d[0] == doctest::Approx(0.0336052112554658721).epsilon(1e-12));
    CHECK(std::accumulate(d.begin(), d.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    for (size_t c = 1; c < d.size(); ++c) CHECK(d[c] <= d[c - 1]);
}

TEST_CASE("zipf rejects an empty catalog and sharpens with alpha") {
    CHECK_THROWS_AS(zipf_popularity(0, 0.5), StructuralError);
    double prev = 0;
    for (double a : {0.1, 0.3, 0.54, 0.8, 1.0}) {
        double head = zipf_popularity(20, a)[0];
        CHECK(head > prev);
        prev = head;
    }
}

TEST_CASE("log-normal sizes are positive and rescaled to the requested mean") {
    auto s = lognormal_sizes(200, 0.5, 1.5, 1000.0, 7);
    for (double v : s) CHECK(v > 0);
    CHECK(std::accumulate(s.begin(), s.end(), 0.0) / 200 == doctest::Approx(1000.0).epsilon(1e-12));
    CHECK(lognormal_sizes(200, 0.5, 1.5, 1000.0, 7) == s);
}

TEST_CASE("total cost of the zero allocation is zero") {
    Scenario sc = make_scenario(1, {{10, 0}, {90, 0}}, 2);
    AllocationState st(sc.B(), sc.U(), sc.N(), 3);
    ContentCatalog cat = test::make_catalog({1, 1, 1}, 0.5);
    auto c = total_cost(st, sc, cat);
    CHECK(c.total == 0);
    CHECK(c.power_cost == 0);
}

TEST_CASE("total cost direct substitution") {
    Scenario sc = make_scenario(0, {{10, 0}}, 1, 1000.0);
    sc.bss[0].p_hardware = 0;
    ContentCatalog cat = test::make_catalog({1}, 0.5);
    AllocationState st(1, 1, 1, 1);
    st.tau(0, 0, 0) = 1;
    st.p(0, 0, 0) = 2;
    auto c = total_cost(st, sc, cat);
    CHECK(c.power_cost == doctest::Approx(10));
    CHECK(c.radio_bw_cost == doctest::Approx(3));
    CHECK(c.total == doctest::Approx(13));
}

namespace {

AllocationState random_state(const Scenario& sc, int C, Rng& rng) {
    const int B = sc.B(), U = sc.U(), N = sc.N();
    AllocationState st(B, U, N, C);
    for (int b = 0; b < B; ++b)
        for (int u = 0; u < U; ++u)
            for (int n = 0; n < N; ++n)
                if (uniform01(rng) < 0.4) {
                    st.tau(b, u, n) = 1;
                    st.p(b, u, n) = urand(rng, 0, 500);
                }
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            double r = uniform01(rng);
            if (r < 0.3) {
                st.z(b, c) = 1;
                st.r_bh(b, c) = urand(rng, 0, 1e6);
            } else if (r < 0.6) {
                int i = (b + 1) % B;
                st.y(i, b, c) = 1;
                st.r_fh(i, b, c) = urand(rng, 0, 1e6);
            }
        }
    return st;
}

// Straight-line evaluation of the three cost sums.
double reference_total(const AllocationState& st, const Scenario& sc, int C) {
    double power = 0, radio = 0, link = 0;
    for (int b = 0; b < sc.B(); ++b) {
        double sum = 0;
        bool on = false;
        for (int u = 0; u < sc.U(); ++u)
            for (int n = 0; n < sc.N(); ++n) {
                sum += st.p(b, u, n);
                if (st.p(b, u, n) > 0) on = true;
                radio += sc.cost.c_bw * st.tau(b, u, n) * sc.sub_bw / 1000.0;
            }
        power += (on ? sc.bss[b].p_hardware + sc.cost.c_power * sum : sc.bss[b].p_sleep) + sc.bss[b].p_bbu;
        for (int c = 0; c < C; ++c) {
            link += sc.cost.c_bh * st.z(b, c) * st.r_bh(b, c);
            for (int i = 0; i < sc.B(); ++i)
                if (i != b) link += sc.cost.c_fh * st.y(i, b, c) * st.r_fh(i, b, c);
        }
    }
    return power + radio + link;
}

}  // namespace

TEST_CASE("total cost equals an independent summation on random states") {
    Rng rng(11);
    Scenario sc = make_scenario(2, {{5, 1}, {50, 3}, {120, -4}, {210, 9}}, 3);
    sc.bss[1].p_sleep = 7;
    sc.bss[2].p_bbu = 3;
    ContentCatalog cat = test::make_catalog({1, 2, 3, 4}, 0.7);
    for (int k = 0; k < 200; ++k) {
        auto st = random_state(sc, 4, rng);
        auto c = total_cost(st, sc, cat);
        CHECK(c.total == doctest::Approx(reference_total(st, sc, 4)).epsilon(1e-12));
        CHECK(c.total == doctest::Approx(c.power_cost + c.radio_bw_cost + c.link_bw_cost).epsilon(1e-12));
    }
}

TEST_CASE("total cost rejects mismatched dimensions") {
    Scenario sc = make_scenario(1, {{10, 0}}, 2);
    ContentCatalog cat = test::make_catalog({1, 1}, 0.5);
    AllocationState st(2, 1, 3, 2);
    CHECK_THROWS_AS(total_cost(st, sc, cat), StructuralError);
}

TEST_CASE("total cost is additive over BSs and monotone in every power and rate") {
    Rng rng(5);
    Scenario sc = make_scenario(2, {{5, 1}, {50, 3}, {120, -4}}, 2);
    ContentCatalog cat = test::make_catalog({1, 2, 3}, 0.7);
    for (int k = 0; k < 50; ++k) {
        auto st = random_state(sc, 3, rng);
        double whole = total_cost(st, sc, cat).total;
        double parts = 0;
        for (int b = 0; b < sc.B(); ++b) {
            AllocationState only(sc.B(), sc.U(), sc.N(), 3);
            for (int u = 0; u < sc.U(); ++u)
                for (int n = 0; n < sc.N(); ++n) {
                    only.tau(b, u, n) = st.tau(b, u, n);
                    only.p(b, u, n) = st.p(b, u, n);
                }
            for (int c = 0; c < 3; ++c) {
                only.z(b, c) = st.z(b, c);
                only.r_bh(b, c) = st.r_bh(b, c);
                for (int i = 0; i < sc.B(); ++i) {
                    only.y(i, b, c) = st.y(i, b, c);
                    only.r_fh(i, b, c) = st.r_fh(i, b, c);
                }
            }
            double c = total_cost(only, sc, cat).total;
            // BSs outside `only` sleep at p_sleep = 0.
            parts += c;
        }
        CHECK(whole == doctest::Approx(parts).epsilon(1e-12));

        auto up = st;
        for (auto& v : up.p.raw()) v *= 1.5;
        for (auto& v : up.r_bh.raw()) v *= 1.5;
        for (auto& v : up.r_fh.raw()) v *= 1.5;
        CHECK(total_cost(up, sc, cat).total >= whole);
    }
}

TEST_CASE("scenario validation catches structural errors") {
    Scenario sc = make_scenario(1, {{10, 0}}, 2);
    CHECK_NOTHROW(sc.validate());
    auto bad = sc;
    bad.bss[1].p_mask = bad.bss[1].p_max + 1;
    CHECK_THROWS_AS(bad.validate(), StructuralError);
    bad = sc;
    bad.total_bw *= 2;
    CHECK_THROWS_AS(bad.validate(), StructuralError);
    bad = sc;
    bad.cost.c_fh = bad.cost.c_bh;
    CHECK_THROWS_AS(bad.validate(), StructuralError);
    CHECK(sc.distance(0, 0) == doctest::Approx(10));
    Scenario same = make_scenario(0, {{0, 0}}, 1);
    CHECK(same.distance(0, 0) == 1.0);
}
