#pragma once

#include <cstdint>
#include <vector>

#include "hetnet/model.hpp"
#include "hetnet/rng.hpp"

namespace hetnet {

struct ChannelState {
    Array3<double> h;  // [b][u][n], linear power gain
};

ChannelState sample_channel(const Scenario& sc, Rng& rng);

// Path loss only (fading fixed at its mean of 1).
ChannelState mean_channel(const Scenario& sc);

// S independent draws from one seed; reused across iterations as common random numbers.
std::vector<ChannelState> sample_channels(const Scenario& sc, int S, std::uint64_t seed);

double intra_interference(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p, int b,
                          int u, int n);
double inter_interference(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p, int b,
                          int u, int n);

double sinr(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p, int b, int u, int n,
            const Scenario& sc);

double rate(int tau, double gamma, double W);

// Instantaneous rate for every (b,u,n); zero where tau is zero.
Array3<double> all_rates(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p,
                         const Scenario& sc);

// Sum over subcarriers of the rate of user u at the BS serving it (0 if unserved).
std::vector<double> access_rates(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p,
                                 const Scenario& sc);

struct SicViolation {
    int b, n, strong, weak;
};

struct SicReport {
    bool ok = true;
    std::vector<SicViolation> violations;
};

SicReport sic_feasible(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p,
                       const Scenario& sc);

Array2<double> ergodic_rate(const Scenario& sc, const Array3<std::uint8_t>& tau, const Array3<double>& p, int S,
                            Rng& rng);
Array2<double> ergodic_rate(const std::vector<ChannelState>& samples, const Array3<std::uint8_t>& tau,
                            const Array3<double>& p, const Scenario& sc);

}  // namespace hetnet
