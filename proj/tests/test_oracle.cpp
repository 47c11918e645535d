#include <doctest.h>

#include "hetnet/harness.hpp"
#include "hetnet/oracle.hpp"
#include "hetnet/orchestrator.hpp"
#include "hetnet/placement.hpp"
#include "support.hpp"

using namespace hetnet;
using hetnet::test::make_scenario;

namespace {

struct Tiny {
    Scenario sc;
    ContentCatalog cat;
    Array2<std::uint8_t> rho;
    RequestMatrix req;
    ChannelState ch;
    std::vector<std::uint8_t> served;
};

Tiny random_tiny(std::uint64_t seed) {
    Rng rng(seed);
    Tiny t{make_scenario(1, {{test::urand(rng, -60, 60), test::urand(rng, -60, 60)},
                             {100 + test::urand(rng, -15, 15), test::urand(rng, -15, 15)},
                             {test::urand(rng, 20, 80), test::urand(rng, -30, 30)}},
                         2, 2.5e6),
           test::make_catalog({700, 1000, 1200, 900}, 0.54), Array2<std::uint8_t>(2, 4, 0), {}, {}, {1, 1, 1}};
    for (auto& v : t.rho.raw()) v = uniform01(rng) < 0.3;
    t.req.content = {uniform_int(rng, 4), uniform_int(rng, 4), uniform_int(rng, 4)};
    t.ch = sample_channel(t.sc, rng);
    return t;
}

}  // namespace

TEST_CASE("power grid is geometric over the mask range") {
    auto g = power_grid(640, 4);
    REQUIRE(g.size() == 5);
    CHECK(g[0] == 0);
    CHECK(g[1] == doctest::Approx(10));
    CHECK(g[4] == doctest::Approx(640));
    for (size_t k = 2; k < g.size(); ++k) CHECK(g[k] / g[k - 1] == doctest::Approx(g[2] / g[1]));
    CHECK_THROWS(power_grid(1, 0));
}

TEST_CASE("oracle over a singleton space returns that state's cost") {
    Scenario sc = make_scenario(0, {{30, 0}}, 1);
    auto cat = test::make_catalog({1000}, 0.5);
    Array2<std::uint8_t> rho(1, 1, 1);
    auto ch = mean_channel(sc);
    OracleBudget bud;
    bud.power_grid_levels = 1;  // grid {0, p_mask}; p = 0 misses the deadline
    auto res = exhaustive_delivery(sc, cat, rho, {{0}}, ch, {1}, true, bud, OracleMode::Grid);
    REQUIRE(res.feasible);
    AllocationState st(1, 1, 1, 1);
    st.tau(0, 0, 0) = 1;
    st.p(0, 0, 0) = sc.bss[0].p_mask;
    st.rho(0, 0) = st.x(0, 0) = 1;
    CHECK(res.cost == doctest::Approx(total_cost(st, sc, cat).total).epsilon(1e-12));
    CHECK(res.argmin.p(0, 0, 0) == sc.bss[0].p_mask);
}

TEST_CASE("oracle refuses instances past its budget") {
    Scenario sc = make_scenario(1, {{10, 0}, {20, 0}, {100, 0}}, 3);
    auto cat = test::make_catalog({1, 1}, 0.5);
    OracleBudget bud;
    bud.max_states = 1e3;
    CHECK_THROWS_AS(exhaustive_delivery(sc, cat, Array2<std::uint8_t>(2, 2, 0), {{0, 1, 0}}, mean_channel(sc),
                                        {1, 1, 1}, true, bud),
                    OracleBudgetError);
    Scenario big = make_scenario(1, {{10, 0}, {20, 0}, {100, 0}, {1, 1}, {2, 2}}, 2);
    CHECK_THROWS_AS(exhaustive_delivery(big, cat, Array2<std::uint8_t>(2, 2, 0), {{0, 1, 0, 0, 0}},
                                        mean_channel(big), {1, 1, 1, 1, 1}, true, OracleBudget{}),
                    OracleBudgetError);
}

TEST_CASE("empty caches force backhaul for the oracle and the heuristic") {
    for (std::uint64_t s = 1; s <= 4; ++s) {
        auto t = random_tiny(s);
        t.rho = Array2<std::uint8_t>(2, 4, 0);
        PolicyConfig pc = parse_policy("NC/NC-NOMA");
        OrchestratorConfig oc;
        auto dr = run_delivery_slot(t.sc, t.cat, t.rho, t.req, t.ch, pc, oc, 3);
        auto orc = exhaustive_delivery(t.sc, t.cat, t.rho, t.req, t.ch, dr.served, false, OracleBudget{},
                                       OracleMode::Grid);
        REQUIRE(orc.feasible);
        auto bs_o = serving_bs(orc.argmin.tau);
        auto bs_h = serving_bs(dr.state.tau);
        for (int u = 0; u < 3; ++u) {
            if (!dr.served[u]) continue;
            CHECK(orc.argmin.z(bs_o[u], t.req.content[u]) == 1);
            CHECK(dr.state.z(bs_h[u], t.req.content[u]) == 1);
        }
        for (auto v : orc.argmin.y.raw()) CHECK(v == 0);
        auto relaxed = exhaustive_delivery(t.sc, t.cat, t.rho, t.req, t.ch, dr.served, false, OracleBudget{});
        CHECK(dr.cost.total >= relaxed.cost * (1 - 1e-9));
        CHECK(dr.cost.total <= relaxed.cost * 1.01);
    }
}

TEST_CASE("refining a nested grid never raises the oracle cost") {
    // Levels 4 and 7 nest: 7 - 1 is a multiple of 4 - 1.
    auto coarse = power_grid(1, 4), fine = power_grid(1, 7);
    for (double g : coarse) CHECK(std::any_of(fine.begin(), fine.end(), [&](double f) { return std::abs(f - g) < 1e-12; }));
    int compared = 0;
    for (std::uint64_t s = 10; s < 16; ++s) {
        auto t = random_tiny(s);
        for (auto mode : {OracleMode::Grid, OracleMode::Relaxed}) {
            OracleBudget b4, b7;
            b4.power_grid_levels = 4;
            b7.power_grid_levels = 7;
            auto r4 = exhaustive_delivery(t.sc, t.cat, t.rho, t.req, t.ch, t.served, true, b4, mode);
            auto r7 = exhaustive_delivery(t.sc, t.cat, t.rho, t.req, t.ch, t.served, true, b7, mode);
            if (!r4.feasible) continue;
            REQUIRE(r7.feasible);
            CHECK(r7.cost <= r4.cost * (1 + 1e-12));
            ++compared;
        }
    }
    CHECK(compared > 0);
}

TEST_CASE("relaxed oracle is a floor for the grid oracle") {
    for (std::uint64_t s = 20; s < 24; ++s) {
        auto t = random_tiny(s);
        auto grid = exhaustive_delivery(t.sc, t.cat, t.rho, t.req, t.ch, t.served, true, OracleBudget{}, OracleMode::Grid);
        auto rel = exhaustive_delivery(t.sc, t.cat, t.rho, t.req, t.ch, t.served, true, OracleBudget{});
        if (grid.feasible) CHECK(rel.cost <= grid.cost * (1 + 1e-12));
    }
}

TEST_CASE("caching oracle caches a single content that fits") {
    Scenario sc = make_scenario(0, {{20, 0}}, 1);
    sc.bss[0].cache_bits = 2000;
    auto cat = test::make_catalog({1000}, 0.5);
    Array3<std::uint8_t> tau(1, 1, 1, 1);
    auto res = exhaustive_caching(sc, cat, sample_channels(sc, 10, 1), tau, OracleBudget{});
    CHECK(res.feasible);
    CHECK(res.rho(0, 0) == 1);
    CHECK(res.value == doctest::Approx(1000));
}

TEST_CASE("caching oracle agrees with the placement solver") {
    Scenario sc = make_scenario(0, {{120, 0}}, 1);
    sc.bss[0].cache_bits = 2100;
    auto cat = test::make_catalog({700, 1000, 1400, 900}, 0.54);
    Array3<std::uint8_t> tau(1, 1, 1, 1);
    auto samples = sample_channels(sc, 10, 2);
    auto res = exhaustive_caching(sc, cat, samples, tau, OracleBudget{});
    // The best grid power is the mask; its ergodic delivery is the budget.
    Array3<double> p(1, 1, 1, sc.bss[0].p_mask);
    PlacementInstance in;
    in.sizes = cat.sizes;
    in.popularity = cat.popularity;
    in.storage = {sc.bss[0].cache_bits};
    in.budget = {sc.slot_T * ergodic_rate(samples, tau, p, sc)(0, 0)};
    auto rho = solve_placement(in);
    CHECK(res.value == doctest::Approx(placement_value(in, rho, 0)).epsilon(1e-12));
    CHECK(res.rho == rho);
}

TEST_CASE("caching oracle infeasibility matches admission control") {
    Scenario sc = make_scenario(0, {{400, 0}}, 1);
    for (auto& b : sc.bss) b.p_mask = 1e-6;
    auto cat = test::make_catalog({1000, 1000}, 0.5);
    Array3<std::uint8_t> tau(1, 1, 1, 1);
    auto res = exhaustive_caching(sc, cat, sample_channels(sc, 10, 3), tau, OracleBudget{});
    CHECK_FALSE(res.feasible);
    OrchestratorConfig oc;
    oc.channel_seed = 3;
    auto init = init_caching(sc, cat, oc);
    CHECK_FALSE(init.feasible);
    CHECK(init.elastic > 0);
}

TEST_CASE("heuristic never beats the oracle on tiny instances") {
    auto cfg = load_config(HETNET_SOURCE_DIR "/configs/tiny.json");
    auto study = oracle_gap_study(cfg, 6, 8, 2);
    CHECK(study.floor_violations == 0);
    for (const auto& g : study.instances) CHECK(g.floor_ok);
    CHECK(study.mean_gap <= 0.15);
}
