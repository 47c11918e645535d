#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hetnet/channel.hpp"
#include "hetnet/delivery.hpp"
#include "hetnet/model.hpp"
#include "hetnet/powerdc.hpp"

namespace hetnet {

struct AsmConfig {
    double tolerance = 1e-3;  // relative objective change
    int max_iters = 10;
};

enum class CachingPolicy { Ergodic, MPC, PRC, RC, NC };
enum class Access { NOMA, OMA };
enum class Cooperation { Cooperative, NonCooperative };

struct PolicyConfig {
    CachingPolicy caching = CachingPolicy::Ergodic;
    Access access = Access::NOMA;
    Cooperation cooperation = Cooperation::Cooperative;
    std::string label() const;  // e.g. "Ergodic/CO-NOMA"
};

std::string to_string(CachingPolicy p);
CachingPolicy parse_caching_policy(const std::string& s);
PolicyConfig parse_policy(const std::string& s);  // "Ergodic/CO-NOMA", "RC/NC-OMA", ...

struct OrchestratorConfig {
    AsmConfig caching_asm;
    AsmConfig delivery_asm;
    ScaOptions sca;
    double diversity_factor = 1.0;
    bool reassociation = true;  // cache-aware user and request-group moves in the delivery ASM
    std::uint64_t channel_seed = 1;  // common random numbers for ergodic expectations
};

// Scenario as seen by a policy: OMA caps every l_max at 1.
Scenario effective_scenario(const Scenario& sc, const PolicyConfig& policy);

struct InitCachingResult {
    bool feasible = false;
    double elastic = 0;  // A* of the last attempt
    std::vector<std::uint8_t> admitted;
    std::vector<int> dropped;  // in drop order
    Array3<std::uint8_t> tau;
    Array3<double> p;
};

InitCachingResult init_caching(const Scenario& sc, const ContentCatalog& cat, const OrchestratorConfig& cfg);

struct CachingResult {
    Array2<std::uint8_t> rho;
    Array3<std::uint8_t> tau;
    Array3<double> p;
    std::vector<double> trace;  // objective per accepted ASM iteration
    std::vector<std::vector<ScaTraceRow>> sca_traces;
    std::vector<std::uint8_t> admitted;
    std::vector<int> dropped;
    int iterations = 0;
};

// Throws InfeasibleError when admission control drops every user.
CachingResult run_caching_phase(const Scenario& sc, const ContentCatalog& cat, const OrchestratorConfig& cfg);

Array2<std::uint8_t> apply_policy(const ContentCatalog& cat, const Scenario& sc, const PolicyConfig& policy,
                                  std::uint64_t seed, const OrchestratorConfig& cfg = {});

// Caching placement for any policy plus the admitted user set.
CachingResult caching_for_policy(const Scenario& sc, const ContentCatalog& cat, const PolicyConfig& policy,
                                 std::uint64_t seed, const OrchestratorConfig& cfg);

struct DeliveryResult {
    AllocationState state;
    DeliveryDecision decision;
    std::vector<std::uint8_t> served;
    CostBreakdown cost;
    std::vector<double> trace;
    std::vector<std::vector<ScaTraceRow>> sca_traces;
    int iterations = 0;
    int requests = 0;
};

DeliveryResult run_delivery_slot(const Scenario& sc, const ContentCatalog& cat, const Array2<std::uint8_t>& rho,
                                 const RequestMatrix& req, const ChannelState& ch, const PolicyConfig& policy,
                                 const OrchestratorConfig& cfg, std::uint64_t tie_seed);

RequestMatrix draw_requests(const ContentCatalog& cat, const std::vector<std::uint8_t>& admitted, std::uint64_t seed);

// Best path gain over all BSs; the admission-control ranking key.
double mean_channel_gain(const Scenario& sc, int u);

}  // namespace hetnet
