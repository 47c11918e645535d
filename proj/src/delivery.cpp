#include "hetnet/delivery.hpp"

#include <algorithm>
#include <limits>

namespace hetnet {

std::vector<int> serving_bs(const Array3<std::uint8_t>& tau) {
    std::vector<int> bs_of(tau.dim1(), -1);
    for (int b = 0; b < tau.dim0(); ++b)
        for (int u = 0; u < tau.dim1(); ++u)
            for (int n = 0; n < tau.dim2(); ++n)
                if (tau(b, u, n)) bs_of[u] = b;
    return bs_of;
}

double required_fronthaul_rate(int b, int c, const RequestMatrix& req, const std::vector<int>& bs_of,
                               const std::vector<std::uint8_t>& served, const std::vector<double>& access,
                               LinkRateBound mode) {
    bool found = false;
    double r = 0;
    for (size_t u = 0; u < req.content.size(); ++u) {
        if (req.content[u] != c || bs_of[u] != b || !served[u]) continue;
        if (!found) r = access[u];
        else r = mode == LinkRateBound::Min ? std::min(r, access[u]) : std::max(r, access[u]);
        found = true;
    }
    if (!found) throw NoRequesterError("no served requester for this content at this BS");
    return r;
}

DeliveryDecision decide_cases(const Scenario& sc, const Array2<std::uint8_t>& rho, const Array3<std::uint8_t>& tau,
                              const RequestMatrix& req, const std::vector<std::uint8_t>& served,
                              const std::vector<double>& access, bool cooperative, Rng& rng) {
    const int B = sc.B(), C = rho.dim1();
    DeliveryDecision d{Array2<std::uint8_t>(B, C, 0), Array3<std::uint8_t>(B, B, C, 0), Array2<std::uint8_t>(B, C, 0),
                       {}};
    auto bs_of = serving_bs(tau);
    for (int u = 0; u < sc.U(); ++u)
        if (req.content[u] >= 0 && (!served[u] || bs_of[u] < 0)) d.rejected.emplace_back(u, req.content[u]);

    Array2<double> load(B, B, 0.0);
    struct Pending {
        int donor, b, c;
        double rate;
    };
    std::vector<Pending> coop;

    for (int b = 0; b < B; ++b) {
        std::vector<int> wanted;
        for (int u = 0; u < sc.U(); ++u)
            if (served[u] && bs_of[u] == b && req.content[u] >= 0) wanted.push_back(req.content[u]);
        std::sort(wanted.begin(), wanted.end());
        wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
        for (int c : wanted) {
            if (rho(b, c)) {
                d.x(b, c) = 1;
                continue;
            }
            double need = required_fronthaul_rate(b, c, req, bs_of, served, access, sc.link_bound);
            std::vector<int> donors;
            if (cooperative) {
                double best = std::numeric_limits<double>::infinity();
                for (int i = 0; i < B; ++i) {
                    if (i == b || !rho(i, c)) continue;
                    if (need > sc.fh_cap(i, b)) continue;
                    double score = sc.cost.c_fh * need;
                    if (score < best) {
                        best = score;
                        donors = {i};
                    } else if (score == best) {
                        donors.push_back(i);
                    }
                }
            }
            if (donors.empty()) {
                d.z(b, c) = 1;
                continue;
            }
            int pick = donors.size() == 1 ? donors[0] : donors[uniform_int(rng, static_cast<int>(donors.size()))];
            d.y(pick, b, c) = 1;
            load(pick, b) += need;
            coop.push_back({pick, b, c, need});
        }
    }

    // Joint capacity check per link: spill the smallest contents to backhaul first.
    for (int i = 0; i < B; ++i)
        for (int b = 0; b < B; ++b) {
            if (i == b || load(i, b) <= sc.fh_cap(i, b)) continue;
            std::vector<Pending> on;
            for (const auto& pc : coop)
                if (pc.donor == i && pc.b == b) on.push_back(pc);
            std::stable_sort(on.begin(), on.end(), [](const Pending& a, const Pending& q) { return a.rate < q.rate; });
            for (const auto& pc : on) {
                if (load(i, b) <= sc.fh_cap(i, b)) break;
                d.y(i, b, pc.c) = 0;
                d.z(b, pc.c) = 1;
                load(i, b) -= pc.rate;
            }
        }
    return d;
}

}  // namespace hetnet
