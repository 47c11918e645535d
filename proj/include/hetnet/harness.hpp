#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetnet/model.hpp"
#include "hetnet/orchestrator.hpp"

namespace hetnet {

// Schema or range error; `field` is the dotted path of the offending key.
struct ConfigError : std::runtime_error {
    std::string field;
    ConfigError(std::string f, const std::string& what) : std::runtime_error(f + ": " + what), field(std::move(f)) {}
};

struct SweepSpec {
    std::string parameter;  // users | sbs_count | sbs_cache_pct | zipf_alpha; empty for a single point
    std::vector<double> values;
    std::vector<std::string> policies;
    int runs = 1;
    std::uint64_t seed = 1;
};

struct HarnessConfig {
    // geometry
    double mbs_radius = 500, sbs_radius = 20;
    int sbs_count = 2, users = 10;
    // radio
    int subcarriers = 8;
    double total_bw = 2.5e6, noise_dbm_hz = -174, kappa = 3, slot_T = 300e-6;
    int l_max = 2;
    // catalog
    int contents = 50;
    double zipf_alpha = 0.54, size_mu = 0.5, size_sigma2 = 1.5, mean_size_bits = 1000;
    // cache, percent of the catalog's total size
    double mbs_cache_pct = 10, sbs_cache_pct = 3;
    // power, mW
    double mbs_p_max = 40000, sbs_p_max = 5000, mbs_p_mask = 500, sbs_p_mask = 500;
    double mbs_p_hardware = 5000, sbs_p_hardware = 1000, p_sleep = 0, p_bbu = 0;
    CostConstants cost;
    // links
    double fh_capacity = 2.5e9;
    LinkRateBound link_bound = LinkRateBound::Min;
    // solver
    int mc_samples = 50;
    OrchestratorConfig orch;
    // experiment
    int slots = 1;
    SweepSpec sweep;
};

HarnessConfig parse_config(const nlohmann::json& j);
HarnessConfig load_config(const std::string& path);
nlohmann::json config_to_json(const HarnessConfig& cfg);

// Applies one value of a swept parameter.
HarnessConfig with_parameter(HarnessConfig cfg, const std::string& parameter, double value);

struct Instance {
    Scenario sc;
    ContentCatalog cat;
};

// Seed streams derived from a run seed.
enum class Stream : std::uint64_t { Geometry = 1, Catalog, CachingChannel, DeliveryChannel, Requests, Policy, Ties };
std::uint64_t stream_seed(std::uint64_t run_seed, Stream s, std::uint64_t sub = 0);
std::uint64_t run_seed(std::uint64_t seed, int run);

Instance build_instance(const HarnessConfig& cfg, std::uint64_t run_seed);

// Outcome of one (run, policy): caching phase plus `slots` delivery slots.
struct RunOutcome {
    CostBreakdown cost;  // averaged over slots
    int caching_iters = 0;
    int delivery_iters = 0;  // max over slots
    int audit_violations = 0;
    int nonmonotone_traces = 0;
    bool infeasible = false;
    std::vector<double> caching_trace;
    std::vector<double> delivery_trace;  // first slot
    std::vector<std::string> audit_messages;
};

std::vector<RunOutcome> run_policies(const HarnessConfig& cfg, std::uint64_t run_seed,
                                     const std::vector<PolicyConfig>& policies);

bool non_increasing(const std::vector<double>& trace, double rel_tol = 1e-12);

struct ResultRow {
    std::string parameter;
    double value = 0;
    std::string policy;
    int runs = 0;
    double total_mean = 0, total_std = 0, power_mean = 0, power_std = 0, radio_mean = 0, radio_std = 0;
    double link_mean = 0, link_std = 0, acceptance_mean = 0, acceptance_std = 0;
    double caching_iters_mean = 0, delivery_iters_mean = 0;
    int max_asm_iters = 0, audit_violations = 0, nonmonotone_traces = 0, infeasible_runs = 0;
    double wall_time = 0;  // seconds; reported in the manifest only
};

struct TraceRow {
    double value;
    std::string policy;
    std::string phase;
    int iteration;
    double objective;
};

struct SweepResult {
    std::vector<ResultRow> rows;
    std::vector<TraceRow> traces;  // run 0 of every (value, policy)
    std::vector<std::string> audit_messages;
    double wall_time = 0;
    int threads = 1;
};

// Thread count: `threads` if > 0, else HETNET_THREADS, else hardware concurrency.
int resolve_threads(int threads);

SweepResult run_sweep(const HarnessConfig& cfg, const SweepSpec& spec, int threads = 0);

extern const char* const kCsvHeader;
std::string rows_to_csv(const std::vector<ResultRow>& rows);
std::string traces_to_csv(const std::vector<TraceRow>& rows);
nlohmann::json manifest(const HarnessConfig& cfg, const SweepSpec& spec, const SweepResult& res);

}  // namespace hetnet
