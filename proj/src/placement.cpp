#include "hetnet/placement.hpp"

#include <algorithm>
#include <numeric>

namespace hetnet {

namespace {

constexpr double kRelTol = 1e-12;

bool fits(double used, double w, double cap) { return used + w <= cap * (1 + kRelTol) + 1e-12; }

std::vector<int> density_order(const std::vector<double>& value, const std::vector<double>& w1) {
    std::vector<int> idx(value.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto dens = [&](int i) { return w1[i] > 0 ? value[i] / w1[i] : value[i] > 0 ? 1e300 : 0.0; };
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return dens(a) > dens(b); });
    return idx;
}

struct BnB {
    const std::vector<double>& v;
    const std::vector<double>& w1;
    const std::vector<double>& w2;
    double cap1, cap2;
    std::vector<int> order1, order2;
    std::vector<std::uint8_t> cur, best;
    double best_val = -1;

    // Fractional relaxation over items with index >= k, for one constraint.
    double frac_bound(int k, const std::vector<int>& order, const std::vector<double>& w, double room) const {
        double add = 0;
        for (int i : order) {
            if (i < k || v[i] <= 0) continue;
            if (w[i] <= room) {
                room -= w[i];
                add += v[i];
            } else {
                add += v[i] * (room / w[i]);
                break;
            }
        }
        return add;
    }

    void dfs(int k, double val, double u1, double u2) {
        const int C = static_cast<int>(v.size());
        if (k == C) {
            if (val > best_val * (1 + kRelTol) + 1e-300 || best_val < 0) {
                best_val = val;
                best = cur;
            }
            return;
        }
        double bound = val + std::min(frac_bound(k, order1, w1, std::max(0.0, cap1 - u1)),
                                      frac_bound(k, order2, w2, std::max(0.0, cap2 - u2)));
        if (best_val >= 0 && bound <= best_val * (1 + kRelTol)) return;
        if (v[k] > 0 && fits(u1, w1[k], cap1) && fits(u2, w2[k], cap2)) {
            cur[k] = 1;
            dfs(k + 1, val + v[k], u1 + w1[k], u2 + w2[k]);
            cur[k] = 0;
        }
        dfs(k + 1, val, u1, u2);
    }
};

}  // namespace

KnapsackResult knapsack_exact(const std::vector<double>& value, const std::vector<double>& w1, double cap1,
                              const std::vector<double>& w2, double cap2) {
    const size_t C = value.size();
    BnB s{value, w1, w2, cap1, cap2, density_order(value, w1), density_order(value, w2),
          std::vector<std::uint8_t>(C, 0), std::vector<std::uint8_t>(C, 0)};
    s.dfs(0, 0.0, 0.0, 0.0);
    return {s.best, std::max(0.0, s.best_val)};
}

KnapsackResult knapsack_greedy(const std::vector<double>& value, const std::vector<double>& w1, double cap1,
                               const std::vector<double>& w2, double cap2) {
    const int C = static_cast<int>(value.size());
    KnapsackResult r{std::vector<std::uint8_t>(C, 0), 0};
    double u1 = 0, u2 = 0;
    for (int i : density_order(value, w1)) {
        if (value[i] <= 0) continue;
        if (fits(u1, w1[i], cap1) && fits(u2, w2[i], cap2)) {
            r.take[i] = 1;
            u1 += w1[i];
            u2 += w2[i];
            r.value += value[i];
        }
    }
    // 1-swap local search: drop one cached item for one better uncached item.
    for (int pass = 0; pass < 4 * C; ++pass) {
        int bi = -1, bj = -1;
        double gain_best = 0;
        for (int i = 0; i < C; ++i) {
            if (!r.take[i]) continue;
            for (int j = 0; j < C; ++j) {
                if (r.take[j]) continue;
                double gain = value[j] - value[i];
                if (gain <= gain_best * (1 + kRelTol) + 1e-300) continue;
                if (fits(u1 - w1[i], w1[j], cap1) && fits(u2 - w2[i], w2[j], cap2)) {
                    gain_best = gain;
                    bi = i;
                    bj = j;
                }
            }
        }
        if (bi < 0) break;
        r.take[bi] = 0;
        r.take[bj] = 1;
        u1 += w1[bj] - w1[bi];
        u2 += w2[bj] - w2[bi];
        r.value += gain_best;
        for (int k : density_order(value, w1)) {
            if (r.take[k] || value[k] <= 0) continue;
            if (fits(u1, w1[k], cap1) && fits(u2, w2[k], cap2)) {
                r.take[k] = 1;
                u1 += w1[k];
                u2 += w2[k];
                r.value += value[k];
            }
        }
    }
    return r;
}

Array2<std::uint8_t> solve_placement(const PlacementInstance& inst) {
    const int B = static_cast<int>(inst.storage.size());
    const int C = static_cast<int>(inst.sizes.size());
    if (static_cast<int>(inst.budget.size()) != B || static_cast<int>(inst.popularity.size()) != C)
        throw StructuralError("placement instance dimensions disagree");
    Array2<std::uint8_t> rho(B, C, 0);
    std::vector<double> demand(C), base(C);
    for (int c = 0; c < C; ++c) {
        demand[c] = inst.popularity[c] * inst.sizes[c];
        base[c] = demand[c];
    }
    for (int b = 0; b < B; ++b) {
        std::vector<double> v = base;
        if (inst.diversity_factor < 1.0)
            for (int c = 0; c < C; ++c)
                for (int e = 0; e < b; ++e)
                    if (rho(e, c)) {
                        v[c] *= inst.diversity_factor;
                        break;
                    }
        auto r = C <= kExactPlacementLimit
                     ? knapsack_exact(v, inst.sizes, inst.storage[b], demand, inst.budget[b])
                     : knapsack_greedy(v, inst.sizes, inst.storage[b], demand, inst.budget[b]);
        for (int c = 0; c < C; ++c) rho(b, c) = r.take[c];
    }
    return rho;
}

double placement_value(const PlacementInstance& inst, const Array2<std::uint8_t>& rho, int b) {
    double s = 0;
    for (int c = 0; c < rho.dim1(); ++c)
        if (rho(b, c)) s += inst.popularity[c] * inst.sizes[c];
    return s;
}

}  // namespace hetnet
