#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hetnet/channel.hpp"
#include "hetnet/model.hpp"

namespace hetnet {

struct HarnessConfig;

struct OracleBudget {
    int max_users = 4;
    int max_bss = 3;
    int max_subcarriers = 3;
    int max_contents = 8;
    int power_grid_levels = 8;
    double max_states = 1e8;
};

struct OracleBudgetError : std::runtime_error {
    double estimate;
    OracleBudgetError(const std::string& what, double est) : std::runtime_error(what), estimate(est) {}
};

// Relaxed: each power ranges over a grid cell [g_{k-1}, g_k] and the cost of
// the cell is bounded from below, so the result never exceeds the cost of any
// feasible continuous state. Grid: powers are exactly the grid points.
enum class OracleMode { Relaxed, Grid };

// {0, g_1, ..., g_L} with g_k = p_mask * 64^{-(L-k)/(L-1)}.
std::vector<double> power_grid(double p_mask, int levels);

struct OracleResult {
    bool feasible = false;
    double cost = 0;
    double states = 0;         // power states visited
    AllocationState argmin;    // grid mode only; powers are the cells' lower ends in relaxed mode
};

// Minimum delivery-slot cost over all assignments, cases and power levels
// that serve exactly the users flagged in `served` (their requests) within
// every delivery constraint. Throws OracleBudgetError past the budget.
OracleResult exhaustive_delivery(const Scenario& sc, const ContentCatalog& cat, const Array2<std::uint8_t>& rho,
                                 const RequestMatrix& req, const ChannelState& ch,
                                 const std::vector<std::uint8_t>& served, bool cooperative,
                                 const OracleBudget& budget, OracleMode mode = OracleMode::Relaxed);

double estimate_delivery_states(const Scenario& sc, const std::vector<std::uint8_t>& served, OracleMode mode,
                                int levels);

struct CachingOracleResult {
    bool feasible = false;     // some grid power gives every user the reference ergodic rate
    double value = 0;          // sum of d_c * s_c over cached items, all BSs
    Array2<std::uint8_t> rho;
    double cost = 0;           // cheapest grid power supporting rho
};

// Exhaustive placement for a fixed assignment tau: every rho within storage,
// supported by some grid power through the ergodic delivery budget.
CachingOracleResult exhaustive_caching(const Scenario& sc, const ContentCatalog& cat,
                                       const std::vector<ChannelState>& samples, const Array3<std::uint8_t>& tau,
                                       const OracleBudget& budget);

struct GapInstance {
    int index = 0;
    double heuristic = 0;
    double oracle = 0;
    double gap = 0;
    bool floor_ok = true;
    int audit_violations = 0;
};

struct GapStudy {
    std::vector<GapInstance> instances;
    double mean_gap = 0;
    double max_gap = 0;
    int floor_violations = 0;
    int audit_violations = 0;
    int skipped = 0;
};

// Heuristic delivery slot vs. the relaxed oracle on instances drawn from cfg.
GapStudy oracle_gap_study(const HarnessConfig& cfg, int instances, int levels, int threads = 0);

}  // namespace hetnet
