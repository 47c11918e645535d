#include "hetnet/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hetnet {

namespace {

// Shortest augmenting path with row/column potentials, O(n^3).
std::vector<int> kuhn_munkres(const Matrix& a) {
    const int n = static_cast<int>(a.size());
    const double INF = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), INF);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = 0;
            double delta = INF;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> col_of_row(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j]) col_of_row[p[j] - 1] = j - 1;
    return col_of_row;
}

// Replace unreachable entries by a finite value larger than any assignment
// made only of reachable entries.
Matrix finite_copy(const Matrix& m) {
    double maxf = 0;
    for (const auto& row : m)
        for (double x : row)
            if (x < kUnreachable) maxf = std::max(maxf, std::abs(x));
    double big = (maxf + 1.0) * static_cast<double>(m.size() + 1) * 4.0;
    Matrix out = m;
    for (auto& row : out)
        for (double& x : row)
            if (x >= kUnreachable) x = big;
    return out;
}

}  // namespace

Assignment solve_square(const Matrix& cost) {
    const size_t n = cost.size();
    for (const auto& row : cost) {
        if (row.size() != n) throw StructuralError("solve_square needs a square matrix");
        for (double x : row)
            if (!std::isfinite(x)) throw StructuralError("solve_square needs finite entries");
    }
    Assignment out;
    if (n == 0) return out;
    out.col_of_row = kuhn_munkres(cost);
    for (size_t r = 0; r < n; ++r) out.cost += cost[r][out.col_of_row[r]];
    return out;
}

Assignment solve_rectangular(const Matrix& cost) {
    const int rows = static_cast<int>(cost.size());
    const int cols = rows ? static_cast<int>(cost[0].size()) : 0;
    for (const auto& row : cost)
        if (static_cast<int>(row.size()) != cols) throw StructuralError("ragged cost matrix");
    Assignment out;
    if (rows == 0) return out;
    const int n = std::max(rows, cols);
    Matrix fin = finite_copy(cost);
    Matrix sq(n, std::vector<double>(n, 0.0));
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) sq[r][c] = fin[r][c];
    auto perm = kuhn_munkres(sq);
    out.col_of_row.assign(rows, -1);
    for (int r = 0; r < rows; ++r) {
        int c = perm[r];
        if (c < cols) {
            out.col_of_row[r] = c;
            out.cost += cost[r][c];
        }
    }
    return out;
}

std::vector<int> associate_users(const Matrix& P1, const std::vector<int>& slots) {
    const int B = static_cast<int>(P1.size());
    if (static_cast<int>(slots.size()) != B) throw StructuralError("slots must have one entry per BS");
    const int U = B ? static_cast<int>(P1[0].size()) : 0;
    std::vector<int> owner;
    for (int b = 0; b < B; ++b)
        for (int k = 0; k < slots[b]; ++k) owner.push_back(b);
    Matrix m(U, std::vector<double>(owner.size()));
    for (int u = 0; u < U; ++u)
        for (size_t c = 0; c < owner.size(); ++c) m[u][c] = P1[owner[c]][u];
    std::vector<int> bs_of(U, -1);
    if (owner.empty()) return bs_of;
    auto a = solve_rectangular(m);
    for (int u = 0; u < U; ++u) {
        int c = a.col_of_row[u];
        if (c >= 0 && m[u][c] < kUnreachable) bs_of[u] = owner[c];
    }
    return bs_of;
}

SubcarrierResult allocate_subcarriers(const Matrix& P2, int l_max,
                                      const std::function<bool(int, const std::vector<int>&)>& rate_ok) {
    SubcarrierResult res;
    const int Ub = static_cast<int>(P2.size());
    res.subs.assign(Ub, {});
    if (Ub == 0) return res;
    const int N = static_cast<int>(P2[0].size());
    std::vector<int> load(N, 0);

    auto first = solve_rectangular(P2);
    for (int u = 0; u < Ub; ++u) {
        int n = first.col_of_row[u];
        if (n >= 0) {
            res.subs[u].push_back(n);
            ++load[n];
        }
    }

    auto failing = [&] {
        std::vector<int> f;
        for (int u = 0; u < Ub; ++u)
            if (res.subs[u].empty() || !rate_ok(u, res.subs[u])) f.push_back(u);
        return f;
    };

    std::vector<int> bad = failing();
    for (int round = 0; round < l_max && !bad.empty(); ++round) {
        ++res.repair_rounds;
        for (int u : bad) {
            int best = -1;
            for (int n = 0; n < N; ++n) {
                if (load[n] >= l_max) continue;  // saturated column is omitted
                if (std::find(res.subs[u].begin(), res.subs[u].end(), n) != res.subs[u].end()) continue;
                if (best < 0 || P2[u][n] < P2[u][best]) best = n;
            }
            if (best < 0) continue;
            res.subs[u].insert(std::upper_bound(res.subs[u].begin(), res.subs[u].end(), best), best);
            ++load[best];
        }
        bad = failing();
    }
    res.flagged = bad;
    return res;
}

double min_power_for_rate(double target_rate, double W, double h, double in, double p_mask) {
    if (target_rate <= 0) return 0.0;
    double gamma = std::exp2(target_rate / W) - 1.0;
    double p = gamma * in / h;
    if (!std::isfinite(p) || p > p_mask) return kUnreachable;
    return p;
}

}  // namespace hetnet
