#pragma once

#include <functional>
#include <vector>

#include "hetnet/model.hpp"

namespace hetnet {

using Matrix = std::vector<std::vector<double>>;

// Stand-in for "not reachable at mask power". Replaced by a finite, matrix
// dependent value before solving so potentials keep their precision.
inline constexpr double kUnreachable = 1e300;

struct Assignment {
    std::vector<int> col_of_row;
    double cost = 0;
};

// Exact minimum-cost perfect matching of a square matrix.
Assignment solve_square(const Matrix& cost);

// Rectangular problem padded with zero-cost virtual rows or columns.
// col_of_row[r] is -1 when row r lands on a virtual column.
Assignment solve_rectangular(const Matrix& cost);

// P1 is indexed [b][u]. Each BS is offered `slots[b]` identical columns.
// Returns the serving BS per user, -1 for users left on a virtual BS or only
// reachable at unreachable cost.
std::vector<int> associate_users(const Matrix& P1, const std::vector<int>& slots);

struct SubcarrierResult {
    std::vector<std::vector<int>> subs;  // per local user, ascending
    std::vector<int> flagged;            // local users still failing the rate check
    int repair_rounds = 0;
};

// P2 is indexed [local user][n]. rate_ok(u, subs) reports whether user u meets
// the phase's rate requirement with the given subcarriers.
SubcarrierResult allocate_subcarriers(const Matrix& P2, int l_max,
                                      const std::function<bool(int, const std::vector<int>&)>& rate_ok);

// Minimum transmit power reaching `target_rate` on one subcarrier of bandwidth W
// with gain h against interference-plus-noise `in`; kUnreachable above p_mask.
double min_power_for_rate(double target_rate, double W, double h, double in, double p_mask);

}  // namespace hetnet
