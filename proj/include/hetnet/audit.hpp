#pragma once

#include <string>
#include <vector>

#include "hetnet/channel.hpp"
#include "hetnet/model.hpp"

namespace hetnet {

struct AuditOptions {
    double rel_tol = 1e-9;
    bool cooperative = true;
};

// Re-evaluates the original delivery-slot constraints on an emitted state.
// Returns one human-readable line per violation; empty means clean.
std::vector<std::string> audit_delivery(const Scenario& sc, const ContentCatalog& cat, const ChannelState& ch,
                                        const AllocationState& st, const RequestMatrix& req,
                                        const std::vector<std::uint8_t>& served, const AuditOptions& opt = {});

// Caching-epoch constraints: storage, power, occupancy, single BS, SIC on the
// mean channel and the ergodic delivery budget over the given samples.
std::vector<std::string> audit_caching(const Scenario& sc, const ContentCatalog& cat,
                                       const std::vector<ChannelState>& samples, const Array2<std::uint8_t>& rho,
                                       const Array3<std::uint8_t>& tau, const Array3<double>& p, bool check_budget,
                                       const AuditOptions& opt = {});

}  // namespace hetnet
