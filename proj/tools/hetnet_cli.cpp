#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hetnet/audit.hpp"
#include "hetnet/harness.hpp"
#include "hetnet/oracle.hpp"

using namespace hetnet;
using nlohmann::json;

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

template <class T>
json to_json(const Array2<T>& a) {
    json j = json::array();
    for (int i = 0; i < a.dim0(); ++i) {
        json row = json::array();
        for (int k = 0; k < a.dim1(); ++k) row.push_back(a(i, k));
        j.push_back(row);
    }
    return j;
}

template <class T>
json to_json(const Array3<T>& a) {
    json j = json::array();
    for (int i = 0; i < a.dim0(); ++i) {
        json m = json::array();
        for (int k = 0; k < a.dim1(); ++k) {
            json row = json::array();
            for (int l = 0; l < a.dim2(); ++l) row.push_back(a(i, k, l));
            m.push_back(row);
        }
        j.push_back(m);
    }
    return j;
}

json cost_json(const CostBreakdown& c) {
    return {{"power_cost", c.power_cost},
            {"radio_bw_cost", c.radio_bw_cost},
            {"link_bw_cost", c.link_bw_cost},
            {"total", c.total},
            {"acceptance_ratio", c.acceptance_ratio}};
}

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

HarnessConfig load(const Common& c) {
    HarnessConfig cfg = load_config(c.config);
    if (c.seed_set) cfg.sweep.seed = c.seed;
    return cfg;
}

int cmd_validate(const Common& c) {
    load(c);
    std::cout << "ok: " << c.config << "\n";
    return 0;
}

int cmd_cache(const Common& c, int run, const std::string& policy, const std::string& out) {
    HarnessConfig cfg = load(c);
    PolicyConfig pc = parse_policy(policy);
    std::uint64_t rs = run_seed(cfg.sweep.seed, run);
    Instance in = build_instance(cfg, rs);
    OrchestratorConfig oc = cfg.orch;
    oc.channel_seed = stream_seed(rs, Stream::CachingChannel);
    CachingResult res = caching_for_policy(in.sc, in.cat, pc, stream_seed(rs, Stream::Policy), oc);
    auto samples = sample_channels(in.sc, in.sc.mc_samples, oc.channel_seed);
    auto audit = audit_caching(effective_scenario(in.sc, pc), in.cat, samples, res.rho, res.tau, res.p,
                               pc.caching == CachingPolicy::Ergodic);
    json j = {{"format", "hetnet-placement/1"},
              {"seed", cfg.sweep.seed},
              {"run", run},
              {"policy", pc.label()},
              {"rho", to_json(res.rho)},
              {"tau", to_json(res.tau)},
              {"p_mw", to_json(res.p)},
              {"admitted", res.admitted},
              {"dropped", res.dropped},
              {"trace", res.trace},
              {"iterations", res.iterations},
              {"audit", audit}};
    write_file(out, j.dump(1) + "\n");
    std::cout << "caching: " << pc.label() << " iterations=" << res.iterations << " objective=" << res.trace.back()
              << " audit_violations=" << audit.size() << "\n";
    return audit.empty() ? 0 : 1;
}

template <class T>
Array2<T> array2_from(const json& j) {
    int d0 = static_cast<int>(j.size()), d1 = d0 ? static_cast<int>(j[0].size()) : 0;
    Array2<T> a(d0, d1);
    for (int i = 0; i < d0; ++i)
        for (int k = 0; k < d1; ++k) a(i, k) = j.at(i).at(k).get<T>();
    return a;
}

int cmd_deliver(const Common& c, const std::string& placement, int slots, const std::string& policy_override,
                const std::string& out) {
    HarnessConfig cfg = load(c);
    std::ifstream in(placement);
    if (!in) throw std::runtime_error("cannot open " + placement);
    json pj = json::parse(in);
    if (pj.value("format", "") != "hetnet-placement/1") throw std::runtime_error("not a placement file: " + placement);
    std::uint64_t seed = c.seed_set ? c.seed : pj.at("seed").get<std::uint64_t>();
    int run = pj.at("run").get<int>();
    PolicyConfig pc = parse_policy(policy_override.empty() ? pj.at("policy").get<std::string>() : policy_override);
    std::uint64_t rs = run_seed(seed, run);
    Instance inst = build_instance(cfg, rs);
    auto rho = array2_from<std::uint8_t>(pj.at("rho"));
    if (rho.dim0() != inst.sc.B() || rho.dim1() != inst.cat.C())
        throw std::runtime_error("placement does not match the configured scenario");
    std::vector<std::uint8_t> admitted = pj.at("admitted").get<std::vector<std::uint8_t>>();
    OrchestratorConfig oc = cfg.orch;
    json slots_j = json::array();
    int bad = 0;
    for (int t = 0; t < slots; ++t) {
        Rng chr(stream_seed(rs, Stream::DeliveryChannel, t));
        ChannelState ch = sample_channel(inst.sc, chr);
        RequestMatrix req = draw_requests(inst.cat, admitted, stream_seed(rs, Stream::Requests, t));
        DeliveryResult dr = run_delivery_slot(inst.sc, inst.cat, rho, req, ch, pc, oc, stream_seed(rs, Stream::Ties, t));
        AuditOptions ao;
        ao.cooperative = pc.cooperation == Cooperation::Cooperative;
        auto audit = audit_delivery(effective_scenario(inst.sc, pc), inst.cat, ch, dr.state, req, dr.served, ao);
        bad += static_cast<int>(audit.size());
        json rej = json::array();
        for (auto [u, cc] : dr.decision.rejected) rej.push_back({u, cc});
        slots_j.push_back({{"slot", t},
                           {"requests", req.content},
                           {"served", dr.served},
                           {"rejected", rej},
                           {"cost", cost_json(dr.cost)},
                           {"trace", dr.trace},
                           {"tau", to_json(dr.state.tau)},
                           {"p_mw", to_json(dr.state.p)},
                           {"x", to_json(dr.state.x)},
                           {"y", to_json(dr.state.y)},
                           {"z", to_json(dr.state.z)},
                           {"r_fh", to_json(dr.state.r_fh)},
                           {"r_bh", to_json(dr.state.r_bh)},
                           {"audit", audit}});
        std::printf("slot %d: total=%.6g accepted=%.3f iterations=%d audit_violations=%zu\n", t, dr.cost.total,
                    dr.cost.acceptance_ratio, dr.iterations, audit.size());
    }
    json j = {{"format", "hetnet-delivery/1"}, {"seed", seed}, {"run", run}, {"policy", pc.label()}, {"slots", slots_j}};
    if (!out.empty()) write_file(out, j.dump(1) + "\n");
    return bad ? 1 : 0;
}

std::vector<double> parse_values(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
    return v;
}

int cmd_sweep(const Common& c, int runs, int threads, const std::string& param, const std::string& values,
              const std::string& policies, const std::string& out, const std::string& manifest_path,
              const std::string& traces_path) {
    HarnessConfig cfg = load(c);
    SweepSpec spec = cfg.sweep;
    if (runs > 0) spec.runs = runs;
    if (!param.empty()) {
        spec.parameter = param;
        spec.values = parse_values(values);
        if (spec.values.empty()) throw CLI::ValidationError("--values", "required with --param");
        with_parameter(cfg, param, spec.values[0]);
    }
    if (!policies.empty()) {
        spec.policies.clear();
        std::stringstream ss(policies);
        std::string tok;
        while (std::getline(ss, tok, ',')) spec.policies.push_back(tok);
    }
    for (const auto& p : spec.policies) parse_policy(p);
    SweepResult res = run_sweep(cfg, spec, threads);
    std::string csv = rows_to_csv(res.rows);
    if (out.empty()) std::cout << csv;
    else write_file(out, csv);
    if (!manifest_path.empty()) write_file(manifest_path, manifest(cfg, spec, res).dump(2) + "\n");
    if (!traces_path.empty()) write_file(traces_path, traces_to_csv(res.traces));
    for (const auto& m : res.audit_messages) std::cerr << "audit: " << m << "\n";
    std::cerr << "sweep: " << res.rows.size() << " rows, " << res.threads << " threads, " << res.wall_time << " s\n";
    return res.audit_messages.empty() ? 0 : 1;
}

int cmd_oracle_gap(const Common& c, int instances, int levels, int threads) {
    HarnessConfig cfg = load(c);
    GapStudy st = oracle_gap_study(cfg, instances, levels, threads);
    for (const auto& g : st.instances)
        std::printf("instance %d: heuristic=%.10g oracle=%.10g gap=%.4f%%%s\n", g.index, g.heuristic, g.oracle,
                    100 * g.gap, g.floor_ok ? "" : " FLOOR-VIOLATION");
    std::printf("instances=%d mean_gap=%.4f%% max_gap=%.4f%% floor_violations=%d audit_violations=%d skipped=%d\n",
                static_cast<int>(st.instances.size()), 100 * st.mean_gap, 100 * st.max_gap, st.floor_violations,
                st.audit_violations, st.skipped);
    return st.floor_violations || st.audit_violations ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cache-enabled HetNet PD-NOMA cost-minimization simulator"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", common.config, "Scenario/experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t s) { common.seed = s; common.seed_set = true; }, "Override experiment.seed");
    };

    auto* validate = app.add_subcommand("validate-config", "Check a config against the schema");
    add_common(validate);

    auto* cache = app.add_subcommand("cache", "Run the caching phase and write rho/tau/p");
    add_common(cache);
    int cache_run = 0;
    std::string cache_policy = "Ergodic/CO-NOMA", cache_out;
    cache->add_option("--run", cache_run, "Monte Carlo run index used to derive the instance")->check(CLI::NonNegativeNumber);
    cache->add_option("--policy", cache_policy, "Policy label, e.g. Ergodic/CO-NOMA or MPC/NC-OMA");
    cache->add_option("-o,--out", cache_out, "Placement JSON output")->required();

    auto* deliver = app.add_subcommand("deliver", "Run delivery slots from a saved placement");
    add_common(deliver);
    std::string placement, deliver_policy, deliver_out;
    int slots = 1;
    deliver->add_option("-p,--placement", placement, "Placement JSON written by `cache`")->required()->check(CLI::ExistingFile);
    deliver->add_option("--slots", slots, "Number of delivery slots")->check(CLI::PositiveNumber);
    deliver->add_option("--policy", deliver_policy, "Delivery policy override (default: the placement's policy)");
    deliver->add_option("-o,--out", deliver_out, "Delivery JSON output");

    auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweep; writes the result CSV");
    add_common(sweep);
    int runs = 0, threads = 0;
    std::string param, values, policies, out, manifest_path, traces_path;
    sweep->add_option("--runs", runs, "Override experiment.runs")->check(CLI::PositiveNumber);
    sweep->add_option("--threads", threads, "Worker threads (default: HETNET_THREADS or all cores)")->check(CLI::PositiveNumber);
    sweep->add_option("--param", param, "Swept parameter")->check(CLI::IsMember({"users", "sbs_count", "sbs_cache_pct", "zipf_alpha"}));
    sweep->add_option("--values", values, "Comma-separated values for --param");
    sweep->add_option("--policies", policies, "Comma-separated policy labels");
    sweep->add_option("-o,--out", out, "CSV output (default: stdout)");
    sweep->add_option("--manifest", manifest_path, "JSON manifest output");
    sweep->add_option("--traces", traces_path, "ASM trace CSV output (run 0 of every row)");

    auto* gap = app.add_subcommand("oracle-gap", "Heuristic vs. exhaustive search on tiny instances");
    add_common(gap);
    int instances = 20, levels = 8, gap_threads = 0;
    gap->add_option("--instances", instances, "Number of instances")->check(CLI::PositiveNumber);
    gap->add_option("--levels", levels, "Power grid levels")->check(CLI::Range(2, 64));
    gap->add_option("--threads", gap_threads, "Worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*validate) return cmd_validate(common);
        if (*cache) return cmd_cache(common, cache_run, cache_policy, cache_out);
        if (*deliver) return cmd_deliver(common, placement, slots, deliver_policy, deliver_out);
        if (*sweep) return cmd_sweep(common, runs, threads, param, values, policies, out, manifest_path, traces_path);
        if (*gap) return cmd_oracle_gap(common, instances, levels, gap_threads);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
