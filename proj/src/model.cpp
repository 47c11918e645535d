#include "hetnet/model.hpp"

#include <cmath>
#include <numeric>

#include "hetnet/rng.hpp"

namespace hetnet {

double Scenario::noise_mw() const {
    return std::pow(10.0, noise_dbm_hz / 10.0) * sub_bw;
}

double Scenario::distance(int b, int u) const {
    double dx = bss[b].x - users[u].x;
    double dy = bss[b].y - users[u].y;
    return std::max(1.0, std::hypot(dx, dy));
}

void Scenario::validate() const {
    if (bss.empty()) throw StructuralError("scenario has no base stations");
    if (bss[0].kind != BsKind::Macro || bss[0].id != 0) throw StructuralError("bss[0] must be the macro BS with id 0");
    for (const auto& b : bss) {
        if (b.p_mask > b.p_max) throw StructuralError("p_mask exceeds p_max at BS " + std::to_string(b.id));
        if (b.cache_bits < 0) throw StructuralError("negative cache capacity at BS " + std::to_string(b.id));
        if (b.l_max < 1) throw StructuralError("l_max must be >= 1 at BS " + std::to_string(b.id));
    }
    if (n_sub < 1) throw StructuralError("n_sub must be >= 1");
    if (std::abs(sub_bw * n_sub - total_bw) > 1e-6 * total_bw) throw StructuralError("sub_bw * N != total_bw");
    if (!(slot_T > 0)) throw StructuralError("slot duration must be positive");
    if (!(cost.c_fh < cost.c_bh)) throw StructuralError("c_fh must be below c_bh");
    if (fh_cap.dim0() != B() || fh_cap.dim1() != B()) throw StructuralError("fronthaul capacity matrix has wrong shape");
    for (double v : fh_cap.raw())
        if (v < 0) throw StructuralError("negative fronthaul capacity");
}

double ContentCatalog::total_size() const { return std::accumulate(sizes.begin(), sizes.end(), 0.0); }

double ContentCatalog::mean_size() const { return sizes.empty() ? 0.0 : total_size() / sizes.size(); }

AllocationState::AllocationState(int B, int U, int N, int C)
    : tau(B, U, N, 0), rho(B, C, 0), x(B, C, 0), y(B, B, C, 0), z(B, C, 0),
      p(B, U, N, 0.0), r_fh(B, B, C, 0.0), r_bh(B, C, 0.0) {}

std::vector<double> zipf_popularity(int C, double alpha) {
    if (C <= 0) throw StructuralError("empty catalog");
    if (alpha < 0) throw StructuralError("zipf alpha must be non-negative");
    std::vector<double> d(C);
    double norm = 0;
    for (int c = 0; c < C; ++c) {
        d[c] = std::pow(static_cast<double>(c + 1), -alpha);
        norm += d[c];
    }
    for (auto& v : d) v /= norm;
    return d;
}

std::vector<double> lognormal_sizes(int C, double mu, double sigma2, double mean_bits, std::uint64_t seed) {
    if (C <= 0) throw StructuralError("empty catalog");
    Rng rng(seed);
    std::vector<double> s(C);
    double sigma = std::sqrt(sigma2);
    for (auto& v : s) v = std::exp(mu + sigma * standard_normal(rng));
    double m = std::accumulate(s.begin(), s.end(), 0.0) / C;
    for (auto& v : s) v *= mean_bits / m;
    return s;
}

double bs_power_cost(const AllocationState& s, const Scenario& sc, int b) {
    const auto& bs = sc.bss[b];
    double sum = 0;
    bool on = false;
    for (int u = 0; u < sc.U(); ++u)
        for (int n = 0; n < sc.N(); ++n) {
            double p = s.p(b, u, n);
            sum += p;
            on = on || p > 0;
        }
    double comm = on ? bs.p_hardware + sc.cost.c_power * sum : bs.p_sleep;
    return comm + bs.p_bbu;
}

double link_cost(const AllocationState& s, const Scenario& sc) {
    int B = sc.B();
    int C = s.rho.dim1();
    double total = 0;
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            for (int i = 0; i < B; ++i)
                if (i != b && s.y(i, b, c)) total += sc.cost.c_fh * s.r_fh(i, b, c);
            if (s.z(b, c)) total += sc.cost.c_bh * s.r_bh(b, c);
        }
    return total;
}

CostBreakdown total_cost(const AllocationState& s, const Scenario& sc, const ContentCatalog& cat) {
    int B = sc.B(), U = sc.U(), N = sc.N(), C = cat.C();
    auto bad3 = [&](auto& a, int d0, int d1, int d2) { return a.dim0() != d0 || a.dim1() != d1 || a.dim2() != d2; };
    auto bad2 = [&](auto& a, int d0, int d1) { return a.dim0() != d0 || a.dim1() != d1; };
    if (bad3(s.tau, B, U, N) || bad3(s.p, B, U, N) || bad2(s.rho, B, C) || bad2(s.x, B, C) || bad2(s.z, B, C) ||
        bad3(s.y, B, B, C) || bad3(s.r_fh, B, B, C) || bad2(s.r_bh, B, C))
        throw StructuralError("allocation dimensions do not match scenario");

    CostBreakdown out;
    for (int b = 0; b < B; ++b) out.power_cost += bs_power_cost(s, sc, b);
    long long taus = 0;
    for (auto t : s.tau.raw()) taus += t;
    out.radio_bw_cost = sc.cost.c_bw * static_cast<double>(taus) * (sc.sub_bw / 1000.0);
    out.link_bw_cost = link_cost(s, sc);
    out.total = out.power_cost + out.radio_bw_cost + out.link_bw_cost;
    return out;
}

}  // namespace hetnet
