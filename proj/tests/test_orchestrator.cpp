#include <doctest.h>

#include "hetnet/audit.hpp"
#include "hetnet/orchestrator.hpp"
#include "support.hpp"

using namespace hetnet;
using hetnet::test::make_scenario;

namespace {

OrchestratorConfig quick_config() {
    OrchestratorConfig cfg;
    cfg.channel_seed = 7;
    return cfg;
}

Scenario cell_scenario() {
    Scenario sc = make_scenario(2, {{30, 20}, {-40, 10}, {105, 4}, {96, -5}, {203, 2}, {198, -6}}, 4);
    sc.bss[0].cache_bits = 3000;
    sc.bss[1].cache_bits = sc.bss[2].cache_bits = 1500;
    return sc;
}

int slot_count(const Array3<std::uint8_t>& tau) {
    int k = 0;
    for (auto t : tau.raw()) k += t;
    return k;
}

}  // namespace

TEST_CASE("policy labels round-trip") {
    for (const char* s : {"Ergodic/CO-NOMA", "MPC/CO-OMA", "PRC/NC-NOMA", "RC/NC-OMA", "NC/CO-NOMA"})
        CHECK(parse_policy(s).label() == s);
    CHECK_THROWS(parse_policy("Foo/CO-NOMA"));
    CHECK_THROWS(parse_policy("MPC/XX"));
}

TEST_CASE("NC policy caches nothing") {
    Scenario sc = cell_scenario();
    auto cat = test::make_catalog(std::vector<double>(10, 500), 0.8);
    PolicyConfig pc;
    pc.caching = CachingPolicy::NC;
    auto rho = apply_policy(cat, sc, pc, 1);
    for (auto v : rho.raw()) CHECK(v == 0);
}

TEST_CASE("MPC caches exactly the top contents that fit") {
    Scenario sc = make_scenario(0, {{10, 0}}, 1);
    sc.bss[0].cache_bits = 3;
    auto cat = test::make_catalog(std::vector<double>(8, 1.0), 0.8);
    PolicyConfig pc;
    pc.caching = CachingPolicy::MPC;
    auto rho = apply_policy(cat, sc, pc, 1);
    for (int c = 0; c < 8; ++c) CHECK(rho(0, c) == (c < 3));
}

TEST_CASE("RC caches each of two equal contents half the time") {
    Scenario sc = make_scenario(0, {{10, 0}}, 1);
    sc.bss[0].cache_bits = 1;
    auto cat = test::make_catalog({1.0, 1.0}, 0.8);
    PolicyConfig pc;
    pc.caching = CachingPolicy::RC;
    int first = 0;
    const int seeds = 10000;
    for (int s = 0; s < seeds; ++s) {
        auto rho = apply_policy(cat, sc, pc, static_cast<std::uint64_t>(s));
        CHECK(rho(0, 0) + rho(0, 1) == 1);
        first += rho(0, 0);
    }
    CHECK(static_cast<double>(first) / seeds == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("PRC favours popular contents by the square root of popularity") {
    Scenario sc = make_scenario(0, {{10, 0}}, 1);
    sc.bss[0].cache_bits = 1;
    auto cat = test::make_catalog({1.0, 1.0}, 1.0);  // d = 2/3, 1/3
    PolicyConfig pc;
    pc.caching = CachingPolicy::PRC;
    int first = 0;
    const int seeds = 10000;
    for (int s = 0; s < seeds; ++s) first += apply_policy(cat, sc, pc, static_cast<std::uint64_t>(s))(0, 0);
    double expect = std::sqrt(2.0) / (std::sqrt(2.0) + 1.0);
    CHECK(static_cast<double>(first) / seeds == doctest::Approx(expect).epsilon(0.03));
}

TEST_CASE("init_caching on a slack instance admits everyone at once") {
    Scenario sc = make_scenario(1, {{10, 0}, {100, 8}}, 2);
    auto cat = test::make_catalog({1000, 1000}, 0.5);
    auto init = init_caching(sc, cat, quick_config());
    CHECK(init.feasible);
    CHECK(init.elastic == 0);
    CHECK(init.dropped.empty());
    for (int u : init.dropped) MESSAGE("dropped " << u);
    CHECK(slot_count(init.tau) >= 2);
}

TEST_CASE("init_caching drops every user when no power is available") {
    Scenario sc = make_scenario(1, {{10, 0}, {100, 8}, {50, 50}}, 2);
    for (auto& b : sc.bss) b.p_max = b.p_mask = 0;
    auto cat = test::make_catalog({1000, 1000}, 0.5);
    auto init = init_caching(sc, cat, quick_config());
    CHECK_FALSE(init.feasible);
    CHECK(init.dropped.size() == 3);
    CHECK(init.elastic > 0);
    CHECK_THROWS_AS(run_caching_phase(sc, cat, quick_config()), InfeasibleError);
}

TEST_CASE("init_caching drops the weakest user first") {
    // One subcarrier at l_max 1 per BS: three users cannot all be served.
    Scenario sc = make_scenario(1, {{10, 0}, {100, 3}, {50, 60}}, 1);
    for (auto& b : sc.bss) b.l_max = 1;
    auto cat = test::make_catalog({1000}, 0.5);
    auto init = init_caching(sc, cat, quick_config());
    CHECK(init.feasible);
    REQUIRE(init.dropped.size() == 1);
    CHECK(init.dropped[0] == 2);
}

TEST_CASE("caching phase on a single roomy cell caches the content") {
    Scenario sc = make_scenario(0, {{15, 0}}, 1);
    sc.bss[0].cache_bits = 1e9;
    auto cat = test::make_catalog({1000}, 0.5);
    auto res = run_caching_phase(sc, cat, quick_config());
    CHECK(res.rho(0, 0) == 1);
    CHECK(res.tau(0, 0, 0) == 1);
    // Minimal power: the ergodic budget sits at the demand.
    auto er = ergodic_rate(sample_channels(sc, sc.mc_samples, 7), res.tau, res.p, sc);
    CHECK(sc.slot_T * er(0, 0) >= 1000 * (1 - 1e-9));
    CHECK(sc.slot_T * er(0, 0) <= 1000 * 1.01);
}

TEST_CASE("zero storage converges quickly with an empty placement") {
    Scenario sc = cell_scenario();
    for (auto& b : sc.bss) b.cache_bits = 0;
    auto cat = test::make_catalog(std::vector<double>(6, 800), 0.7);
    auto res = run_caching_phase(sc, cat, quick_config());
    for (auto v : res.rho.raw()) CHECK(v == 0);
    CHECK(res.iterations <= 2);
}

TEST_CASE("caching traces are monotone and the output passes the audit") {
    Scenario sc = cell_scenario();
    auto cat = test::make_catalog({400, 700, 1000, 1300, 500, 900}, 0.7);
    auto cfg = quick_config();
    auto res = run_caching_phase(sc, cat, cfg);
    for (size_t i = 1; i < res.trace.size(); ++i) CHECK(res.trace[i] <= res.trace[i - 1]);
    for (const auto& t : res.sca_traces)
        for (size_t i = 1; i < t.size(); ++i) CHECK(t[i].objective <= t[i - 1].objective);
    auto samples = sample_channels(sc, sc.mc_samples, cfg.channel_seed);
    auto msgs = audit_caching(sc, cat, samples, res.rho, res.tau, res.p, true);
    CHECK(msgs.empty());
    for (const auto& m : msgs) MESSAGE(m);
}

TEST_CASE("requests follow popularity and skip dropped users") {
    auto cat = test::make_catalog({1, 1, 1}, 1.0);
    std::vector<std::uint8_t> admitted(20000, 1);
    admitted[5] = 0;
    auto req = draw_requests(cat, admitted, 3);
    CHECK(req.content[5] == -1);
    int first = 0;
    for (int c : req.content) first += c == 0;
    CHECK(first / 20000.0 == doctest::Approx(cat.popularity[0]).epsilon(0.03));
}

namespace {

DeliveryResult deliver(const Scenario& sc, const ContentCatalog& cat, const Array2<std::uint8_t>& rho,
                       const RequestMatrix& req, const std::string& policy, std::uint64_t seed = 5) {
    Rng rng(seed);
    auto ch = sample_channel(sc, rng);
    auto res = run_delivery_slot(sc, cat, rho, req, ch, parse_policy(policy), quick_config(), 11);
    AuditOptions ao;
    ao.cooperative = parse_policy(policy).cooperation == Cooperation::Cooperative;
    auto msgs = audit_delivery(effective_scenario(sc, parse_policy(policy)), cat, ch, res.state, req, res.served, ao);
    CHECK(msgs.empty());
    for (const auto& m : msgs) MESSAGE(m);
    for (size_t i = 1; i < res.trace.size(); ++i) CHECK(res.trace[i] <= res.trace[i - 1]);
    return res;
}

}  // namespace

TEST_CASE("all local hits cost no link bandwidth") {
    Scenario sc = cell_scenario();
    auto cat = test::make_catalog({800, 900, 1000}, 0.7);
    for (auto& b : sc.bss) b.cache_bits = 2700;
    Array2<std::uint8_t> rho(3, 3, 1);
    RequestMatrix req{{0, 1, 2, 0, 1, 2}};
    auto res = deliver(sc, cat, rho, req, "Ergodic/CO-NOMA");
    CHECK(res.cost.acceptance_ratio == 1.0);
    CHECK(res.cost.link_bw_cost == 0.0);
}

TEST_CASE("non-cooperative delivery with empty caches is all backhaul") {
    Scenario sc = cell_scenario();
    auto cat = test::make_catalog({800, 900, 1000}, 0.7);
    Array2<std::uint8_t> rho(3, 3, 0);
    RequestMatrix req{{0, 1, 2, 0, 1, 2}};
    auto res = deliver(sc, cat, rho, req, "NC/NC-NOMA");
    CHECK(res.cost.acceptance_ratio == 1.0);
    auto bs = serving_bs(res.state.tau);
    for (int u = 0; u < sc.U(); ++u) CHECK(res.state.z(bs[u], req.content[u]) == 1);
    for (auto v : res.state.y.raw()) CHECK(v == 0);
    for (auto v : res.state.x.raw()) CHECK(v == 0);
    CHECK(res.cost.link_bw_cost > 0.9 * res.cost.total);
}

TEST_CASE("mode restrictions hold in delivery outputs") {
    Scenario sc = cell_scenario();
    auto cat = test::make_catalog({800, 900, 1000, 700}, 0.7);
    Array2<std::uint8_t> rho(3, 4, 0);
    rho(0, 0) = rho(1, 1) = rho(2, 2) = 1;
    RequestMatrix req{{0, 1, 2, 3, 0, 1}};
    for (std::uint64_t seed : {1, 2, 3}) {
        auto oma = deliver(sc, cat, rho, req, "Ergodic/CO-OMA", seed);
        for (int b = 0; b < 3; ++b)
            for (int n = 0; n < sc.N(); ++n) {
                int occ = 0;
                for (int u = 0; u < sc.U(); ++u) occ += oma.state.tau(b, u, n);
                CHECK(occ <= 1);
            }
        auto nc = deliver(sc, cat, rho, req, "Ergodic/NC-NOMA", seed);
        for (auto v : nc.state.y.raw()) CHECK(v == 0);
        auto co = deliver(sc, cat, rho, req, "Ergodic/CO-NOMA", seed);
        CHECK(co.cost.total <= nc.cost.total * (1 + 1e-12));
        CHECK(co.cost.total <= oma.cost.total * (1 + 1e-12));
    }
}
