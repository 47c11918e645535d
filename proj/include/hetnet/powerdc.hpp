#pragma once

#include <string>
#include <vector>

#include "hetnet/barrier.hpp"
#include "hetnet/channel.hpp"
#include "hetnet/model.hpp"

namespace hetnet {

struct DcValue {
    double f = 0;  // W log2(signal + interference + noise)
    double g = 0;  // W log2(interference + noise)
};

DcValue dc_decompose(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p, int b, int u,
                     int n, const Scenario& sc);

// Gradients over every p entry, in bits/s per mW.
Array3<double> grad_g(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p_anchor, int b,
                      int u, int n, const Scenario& sc);
Array3<double> grad_f(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p_anchor, int b,
                      int u, int n, const Scenario& sc);

// Lower surrogate: g linearized at the anchor. Never above the true rate.
double rate_lower_dc(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p_anchor,
                     const Array3<double>& p, int b, int u, int n, const Scenario& sc);
// Upper surrogate: f linearized at the anchor. Never below the true rate.
double rate_upper_dc(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p_anchor,
                     const Array3<double>& p, int b, int u, int n, const Scenario& sc);

struct ScaOptions {
    double epsilon = 1e-3;  // relative objective change
    int k_max = 30;
    BarrierOptions inner;
    std::string trace_path;  // optional CSV dump: iteration,objective,max_violation
};

struct ScaTraceRow {
    int iteration = 0;
    double objective = 0;
    double max_violation = 0;
};

struct PowerCachingResult {
    Array3<double> p;
    std::vector<ScaTraceRow> trace;
};

// Caching-phase power step. demand[b] = sum_c d_c rho_bc s_c. The budget
// constraint is the sample average over `samples`; SIC pairs use `sic_channel`.
PowerCachingResult solve_power_caching(const Scenario& sc, const std::vector<ChannelState>& samples,
                                       const ChannelState& sic_channel, const Array3<std::uint8_t>& tau,
                                       const std::vector<double>& demand, const Array3<double>& p0,
                                       const ScaOptions& opt = {});

struct CapacityViolation {
    int from, to;
    double load, capacity;
};

struct PowerDeliveryResult {
    Array3<double> p;
    Array3<double> r_fh;
    Array2<double> r_bh;
    std::vector<ScaTraceRow> trace;
    std::vector<CapacityViolation> capacity_violations;
    bool feasible() const { return capacity_violations.empty(); }
};

// Delivery-phase power and link-rate step with x, y, z fixed in `state`.
// state.tau and the case indicators are read; state.p is ignored in favour of p0.
// `served[u]` marks users whose deadline must be met.
PowerDeliveryResult solve_power_delivery(const Scenario& sc, const ContentCatalog& cat, const ChannelState& ch,
                                         const AllocationState& state, const RequestMatrix& req,
                                         const std::vector<std::uint8_t>& served, const Array3<double>& p0,
                                         const ScaOptions& opt = {});

// Sets r_fh / r_bh of every active case to its tight bound over the served
// requesters' access rates (min or max per scenario setting).
void set_link_rates(AllocationState& state, const Scenario& sc, const RequestMatrix& req,
                    const std::vector<std::uint8_t>& served, const std::vector<double>& access);

// Caching objective: power cost plus radio bandwidth cost.
double caching_objective(const Scenario& sc, const Array3<std::uint8_t>& tau, const Array3<double>& p);

void write_trace_csv(const std::string& path, const std::vector<ScaTraceRow>& trace);

}  // namespace hetnet
