#pragma once

#include <utility>
#include <vector>

#include "hetnet/model.hpp"
#include "hetnet/rng.hpp"

namespace hetnet {

struct DeliveryDecision {
    Array2<std::uint8_t> x;  // [b][c]
    Array3<std::uint8_t> y;  // [i][b][c]
    Array2<std::uint8_t> z;  // [b][c]
    std::vector<std::pair<int, int>> rejected;  // (user, content)
};

struct NoRequesterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Tight link-rate bound for content c at BS b: min (or max) over the served
// requesters' access rates. bs_of[u] is the serving BS, -1 if none.
double required_fronthaul_rate(int b, int c, const RequestMatrix& req, const std::vector<int>& bs_of,
                               const std::vector<std::uint8_t>& served, const std::vector<double>& access,
                               LinkRateBound mode);

// Case selection per (BS, requested content). Requests of users that are not
// served are rejected. Donor ties are broken with `rng`.
DeliveryDecision decide_cases(const Scenario& sc, const Array2<std::uint8_t>& rho, const Array3<std::uint8_t>& tau,
                              const RequestMatrix& req, const std::vector<std::uint8_t>& served,
                              const std::vector<double>& access, bool cooperative, Rng& rng);

std::vector<int> serving_bs(const Array3<std::uint8_t>& tau);

}  // namespace hetnet
