#pragma once

#include <utility>
#include <vector>

#include "hetnet/model.hpp"
#include "hetnet/rng.hpp"

namespace hetnet::test {

// MBS at the origin, SBS b at (100 b, 0); users at the given points.
inline Scenario make_scenario(int n_sbs, const std::vector<std::pair<double, double>>& users, int N,
                              double sub_bw = 312500.0) {
    Scenario sc;
    for (int b = 0; b <= n_sbs; ++b) {
        BaseStation bs;
        bs.id = b;
        bs.kind = b == 0 ? BsKind::Macro : BsKind::Small;
        bs.x = 100.0 * b;
        bs.radius = b == 0 ? 500 : 20;
        bs.cache_bits = 0;
        bs.p_max = b == 0 ? 40000 : 5000;
        bs.p_mask = 500;
        bs.l_max = 2;
        bs.p_hardware = b == 0 ? 5000 : 1000;
        sc.bss.push_back(bs);
    }
    for (size_t u = 0; u < users.size(); ++u) sc.users.push_back({static_cast<int>(u), users[u].first, users[u].second});
    sc.n_sub = N;
    sc.sub_bw = sub_bw;
    sc.total_bw = sub_bw * N;
    sc.fh_cap = Array2<double>(n_sbs + 1, n_sbs + 1, 0.0);
    for (int i = 0; i <= n_sbs; ++i)
        for (int b = 0; b <= n_sbs; ++b)
            if (i != b) sc.fh_cap(i, b) = 2.5e9;
    sc.mc_samples = 20;
    return sc;
}

inline ContentCatalog make_catalog(std::vector<double> sizes, double alpha) {
    ContentCatalog cat;
    cat.popularity = zipf_popularity(static_cast<int>(sizes.size()), alpha);
    cat.sizes = std::move(sizes);
    cat.alpha = alpha;
    return cat;
}

inline double urand(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

}  // namespace hetnet::test
