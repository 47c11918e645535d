#include "hetnet/audit.hpp"

#include <cmath>
#include <sstream>

namespace hetnet {

namespace {

template <class... Args>
std::string msg(Args&&... args) {
    std::ostringstream os;
    os.precision(17);
    (os << ... << args);
    return os.str();
}

bool exceeds(double lhs, double rhs, double tol) { return lhs > rhs + tol * std::max(1.0, std::abs(rhs)); }

void audit_radio(const Scenario& sc, const ChannelState& sic_ch, const Array3<std::uint8_t>& tau,
                 const Array3<double>& p, const AuditOptions& opt, std::vector<std::string>& out) {
    const int B = sc.B(), U = sc.U(), N = sc.N();
    for (int b = 0; b < B; ++b) {
        double sum = 0;
        for (int u = 0; u < U; ++u)
            for (int n = 0; n < N; ++n) {
                double v = p(b, u, n);
                if (!(v >= 0) || !std::isfinite(v)) out.push_back(msg("power: negative or non-finite p at b=", b, " u=", u, " n=", n));
                if (!tau(b, u, n) && v > 0) out.push_back(msg("power: p > 0 on unassigned entry b=", b, " u=", u, " n=", n));
                if (exceeds(v, sc.bss[b].p_mask, opt.rel_tol))
                    out.push_back(msg("mask: p=", v, " > ", sc.bss[b].p_mask, " at b=", b, " u=", u, " n=", n));
                sum += v;
            }
        if (exceeds(sum, sc.bss[b].p_max, opt.rel_tol)) out.push_back(msg("budget: BS ", b, " total ", sum, " > ", sc.bss[b].p_max));
        for (int n = 0; n < N; ++n) {
            int occ = 0;
            for (int u = 0; u < U; ++u) occ += tau(b, u, n) != 0;
            if (occ > sc.bss[b].l_max) out.push_back(msg("occupancy: BS ", b, " subcarrier ", n, " carries ", occ));
        }
    }
    for (int u = 0; u < U; ++u) {
        int bs = -1;
        for (int b = 0; b < B; ++b)
            for (int n = 0; n < N; ++n)
                if (tau(b, u, n)) {
                    if (bs >= 0 && bs != b) out.push_back(msg("association: user ", u, " on BSs ", bs, " and ", b));
                    bs = b;
                }
    }
    // SIC in cross-multiplied form, vacuous for a pair with a silent member.
    auto rep = sic_feasible(sic_ch, tau, p, sc);
    for (const auto& v : rep.violations)
        if (p(v.b, v.strong, v.n) > 0 && p(v.b, v.weak, v.n) > 0)
            out.push_back(msg("sic: BS ", v.b, " subcarrier ", v.n, " strong ", v.strong, " weak ", v.weak));
}

}  // namespace

std::vector<std::string> audit_delivery(const Scenario& sc, const ContentCatalog& cat, const ChannelState& ch,
                                        const AllocationState& st, const RequestMatrix& req,
                                        const std::vector<std::uint8_t>& served, const AuditOptions& opt) {
    std::vector<std::string> out;
    const int B = sc.B(), U = sc.U(), C = cat.C();
    if (st.tau.dim0() != B || st.tau.dim1() != U || st.tau.dim2() != sc.N() || st.rho.dim1() != C)
        return {"structure: state dimensions do not match the scenario"};
    audit_radio(sc, ch, st.tau, st.p, opt, out);

    for (int b = 0; b < B; ++b) {
        double used = 0;
        for (int c = 0; c < C; ++c) used += st.rho(b, c) * cat.sizes[c];
        if (exceeds(used, sc.bss[b].cache_bits, opt.rel_tol)) out.push_back(msg("storage: BS ", b, " holds ", used));
    }

    auto acc = access_rates(ch, st.tau, st.p, sc);
    std::vector<int> bs_of(U, -1);
    for (int b = 0; b < B; ++b)
        for (int u = 0; u < U; ++u)
            for (int n = 0; n < sc.N(); ++n)
                if (st.tau(b, u, n)) bs_of[u] = b;

    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            int ny = 0;
            for (int i = 0; i < B; ++i) {
                if (i == b) {
                    if (st.y(i, b, c)) out.push_back(msg("cases: self-fetch y at b=", b, " c=", c));
                    continue;
                }
                if (!st.y(i, b, c)) {
                    if (st.r_fh(i, b, c) > 0) out.push_back(msg("link: r_fh without y at i=", i, " b=", b, " c=", c));
                    continue;
                }
                ++ny;
                if (!opt.cooperative) out.push_back(msg("cases: cooperative fetch while cooperation is off, b=", b));
                if (!st.rho(i, c)) out.push_back(msg("cases: donor ", i, " does not cache c=", c));
            }
            int cnt = st.x(b, c) + ny + st.z(b, c);
            if (cnt > 1) out.push_back(msg("cases: more than one case at b=", b, " c=", c));
            if (st.x(b, c) && !st.rho(b, c)) out.push_back(msg("cases: local hit without cache at b=", b, " c=", c));
            if (!st.z(b, c) && st.r_bh(b, c) > 0) out.push_back(msg("link: r_bh without z at b=", b, " c=", c));

            // Tight link-rate lower bounds against the requesters' access rates.
            double need = -1;
            bool requested = false;
            for (int u = 0; u < U; ++u)
                if (served[u] && bs_of[u] == b && req.content[u] == c) {
                    requested = true;
                    double r = acc[u];
                    if (need < 0) need = r;
                    else need = sc.link_bound == LinkRateBound::Min ? std::min(need, r) : std::max(need, r);
                }
            if (requested && cnt == 0) out.push_back(msg("cases: served request without a case at b=", b, " c=", c));
            if (!requested) continue;
            for (int i = 0; i < B; ++i)
                if (i != b && st.y(i, b, c) && st.r_fh(i, b, c) < need * (1 - opt.rel_tol))
                    out.push_back(msg("link: r_fh ", st.r_fh(i, b, c), " below access rate ", need));
            if (st.z(b, c) && st.r_bh(b, c) < need * (1 - opt.rel_tol))
                out.push_back(msg("link: r_bh ", st.r_bh(b, c), " below access rate ", need));
        }

    for (int i = 0; i < B; ++i)
        for (int b = 0; b < B; ++b) {
            if (i == b) continue;
            double load = 0;
            for (int c = 0; c < C; ++c) load += st.r_fh(i, b, c);
            if (exceeds(load, sc.fh_cap(i, b), opt.rel_tol))
                out.push_back(msg("fronthaul: link ", i, "->", b, " load ", load, " > ", sc.fh_cap(i, b)));
        }

    for (int u = 0; u < U; ++u) {
        if (!served[u] || req.content[u] < 0) continue;
        if (bs_of[u] < 0) {
            out.push_back(msg("deadline: served user ", u, " has no subcarrier"));
            continue;
        }
        double s = cat.sizes[req.content[u]];
        if (sc.slot_T * acc[u] < s * (1 - opt.rel_tol))
            out.push_back(msg("deadline: user ", u, " delivers ", sc.slot_T * acc[u], " of ", s, " bits"));
    }
    return out;
}

std::vector<std::string> audit_caching(const Scenario& sc, const ContentCatalog& cat,
                                       const std::vector<ChannelState>& samples, const Array2<std::uint8_t>& rho,
                                       const Array3<std::uint8_t>& tau, const Array3<double>& p, bool check_budget,
                                       const AuditOptions& opt) {
    std::vector<std::string> out;
    const int B = sc.B(), C = cat.C();
    audit_radio(sc, mean_channel(sc), tau, p, opt, out);
    Array2<double> er;
    if (check_budget) er = ergodic_rate(samples, tau, p, sc);
    for (int b = 0; b < B; ++b) {
        double used = 0, demand = 0;
        for (int c = 0; c < C; ++c)
            if (rho(b, c)) {
                used += cat.sizes[c];
                demand += cat.popularity[c] * cat.sizes[c];
            }
        if (exceeds(used, sc.bss[b].cache_bits, opt.rel_tol)) out.push_back(msg("storage: BS ", b, " holds ", used));
        if (!check_budget || demand <= 0) continue;
        double q = 0;
        for (int u = 0; u < sc.U(); ++u) q += sc.slot_T * er(b, u);
        if (q < demand * (1 - 1e-6)) out.push_back(msg("ergodic budget: BS ", b, " delivers ", q, " of ", demand));
    }
    return out;
}

}  // namespace hetnet
