#pragma once

#include <cstdint>
#include <vector>

#include "hetnet/model.hpp"

namespace hetnet {

struct PlacementInstance {
    std::vector<double> sizes;       // s_c, bits
    std::vector<double> popularity;  // d_c
    std::vector<double> storage;     // M_b per BS, bits
    std::vector<double> budget;      // Q_b per BS, bits deliverable per slot
    // Multiplier in [0,1] on the value of items already cached at a BS filled
    // earlier (BSs are filled in index order). 1 disables the coupling.
    double diversity_factor = 1.0;
};

inline constexpr int kExactPlacementLimit = 25;

struct KnapsackResult {
    std::vector<std::uint8_t> take;
    double value = 0;
};

// Two-constraint 0/1 knapsack: sum(w1) <= cap1, sum(w2) <= cap2, maximize value.
KnapsackResult knapsack_exact(const std::vector<double>& value, const std::vector<double>& w1, double cap1,
                              const std::vector<double>& w2, double cap2);
KnapsackResult knapsack_greedy(const std::vector<double>& value, const std::vector<double>& w1, double cap1,
                               const std::vector<double>& w2, double cap2);

Array2<std::uint8_t> solve_placement(const PlacementInstance& inst);

// Sum of v_c over cached items of one BS, with v_c = d_c * s_c.
double placement_value(const PlacementInstance& inst, const Array2<std::uint8_t>& rho, int b);

}  // namespace hetnet
