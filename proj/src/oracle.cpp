#include "hetnet/oracle.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include "hetnet/audit.hpp"
#include "hetnet/harness.hpp"
#include "hetnet/orchestrator.hpp"
#include "hetnet/powerdc.hpp"

namespace hetnet {

std::vector<double> power_grid(double p_mask, int levels) {
    if (levels < 1) throw std::invalid_argument("power grid needs at least one level");
    std::vector<double> g{0.0};
    for (int k = 1; k <= levels; ++k) {
        double e = levels == 1 ? 0.0 : static_cast<double>(levels - k) / (levels - 1);
        g.push_back(p_mask * std::pow(64.0, -e));
    }
    return g;
}

double estimate_delivery_states(const Scenario& sc, const std::vector<std::uint8_t>& served, OracleMode mode,
                                int levels) {
    const double per_entry = mode == OracleMode::Relaxed ? levels : levels + 1;
    double total = 1;
    for (size_t u = 0; u < served.size(); ++u)
        if (served[u]) total *= sc.B() * (std::pow(1.0 + per_entry, sc.N()) - 1.0);
    return total;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Entry {
    int b, u, n;
    double h;
};

// One candidate assignment with everything that does not depend on powers.
struct TauCase {
    Array3<std::uint8_t> tau;
    std::vector<Entry> es;
    std::vector<std::vector<double>> coef;  // coef[e][f]: gain of p_f inside the interference of e
    std::vector<std::vector<int>> of_user;
    double bw_cost = 0;
    std::vector<int> bs_of;
};

struct Pair {
    int b, c;
    bool local;
    std::vector<int> users;
    std::vector<int> donors;
};

class DeliveryOracle {
public:
    DeliveryOracle(const Scenario& sc, const ContentCatalog& cat, const Array2<std::uint8_t>& rho,
                   const RequestMatrix& req, const ChannelState& ch, const std::vector<std::uint8_t>& served,
                   bool coop, int levels, OracleMode mode)
        : sc_(sc), cat_(cat), rho_(rho), req_(req), ch_(ch), coop_(coop), mode_(mode) {
        grid_ = power_grid(1.0, levels);  // scaled per BS below
        for (int u = 0; u < sc.U(); ++u)
            if (served[u] && req.content[u] >= 0) users_.push_back(u);
        s2_ = sc.noise_mw();
        W_ = sc.sub_bw;
    }

    OracleResult run() {
        OracleResult res;
        Array3<std::uint8_t> tau(sc_.B(), sc_.U(), sc_.N(), 0);
        Array2<int> occ(sc_.B(), sc_.N(), 0);
        enumerate_tau(0, tau, occ);
        res.feasible = std::isfinite(best_);
        res.cost = res.feasible ? best_ : 0;
        res.states = states_;
        res.argmin = best_state_;
        return res;
    }

private:
    void enumerate_tau(size_t k, Array3<std::uint8_t>& tau, Array2<int>& occ) {
        if (k == users_.size()) {
            evaluate_tau(tau);
            return;
        }
        int u = users_[k];
        for (int b = 0; b < sc_.B(); ++b)
            for (int mask = 1; mask < (1 << sc_.N()); ++mask) {
                bool ok = true;
                for (int n = 0; n < sc_.N(); ++n)
                    if ((mask >> n & 1) && occ(b, n) >= sc_.bss[b].l_max) ok = false;
                if (!ok) continue;
                for (int n = 0; n < sc_.N(); ++n)
                    if (mask >> n & 1) {
                        tau(b, u, n) = 1;
                        ++occ(b, n);
                    }
                enumerate_tau(k + 1, tau, occ);
                for (int n = 0; n < sc_.N(); ++n)
                    if (mask >> n & 1) {
                        tau(b, u, n) = 0;
                        --occ(b, n);
                    }
            }
    }

    void evaluate_tau(const Array3<std::uint8_t>& tau) {
        TauCase tc;
        tc.tau = tau;
        tc.bs_of.assign(sc_.U(), -1);
        tc.of_user.assign(sc_.U(), {});
        for (int b = 0; b < sc_.B(); ++b)
            for (int u = 0; u < sc_.U(); ++u)
                for (int n = 0; n < sc_.N(); ++n)
                    if (tau(b, u, n)) {
                        tc.of_user[u].push_back(static_cast<int>(tc.es.size()));
                        tc.es.push_back({b, u, n, ch_.h(b, u, n)});
                        tc.bs_of[u] = b;
                    }
        const int E = static_cast<int>(tc.es.size());
        tc.coef.assign(E, std::vector<double>(E, 0.0));
        for (int e = 0; e < E; ++e)
            for (int f = 0; f < E; ++f) {
                const Entry &a = tc.es[e], &q = tc.es[f];
                if (e == f || a.n != q.n || a.u == q.u) continue;
                if (q.b == a.b) {
                    if (q.h >= a.h) tc.coef[e][f] = a.h;
                } else {
                    tc.coef[e][f] = ch_.h(q.b, a.u, a.n);
                }
            }
        tc.bw_cost = sc_.cost.c_bw * E * (sc_.sub_bw / 1000.0);

        // Requested (BS, content) pairs and their case options.
        pairs_.clear();
        for (int u : users_) {
            int b = tc.bs_of[u], c = req_.content[u];
            auto it = std::find_if(pairs_.begin(), pairs_.end(), [&](const Pair& p) { return p.b == b && p.c == c; });
            if (it == pairs_.end()) {
                Pair p{b, c, rho_(b, c) != 0, {}, {}};
                if (!p.local && coop_)
                    for (int i = 0; i < sc_.B(); ++i)
                        if (i != b && rho_(i, c)) p.donors.push_back(i);
                pairs_.push_back(p);
                it = pairs_.end() - 1;
            }
            it->users.push_back(u);
        }

        // Bound with every power at zero cost and every link at its deadline rate.
        std::vector<double> floor_need(pairs_.size());
        for (size_t k = 0; k < pairs_.size(); ++k) floor_need[k] = cat_.sizes[pairs_[k].c] / sc_.slot_T;
        std::vector<char> has(sc_.B(), 0);
        for (const auto& e : tc.es) has[e.b] = 1;
        double quick = tc.bw_cost + fixed_power(has) + link_cost(floor_need, nullptr);
        if (quick >= best_) return;

        std::vector<int> cell(E, 0);
        const int per = mode_ == OracleMode::Relaxed ? static_cast<int>(grid_.size()) - 1 : static_cast<int>(grid_.size());
        std::vector<double> lo(E), hi(E);
        while (true) {
            ++states_;
            for (int e = 0; e < E; ++e) {
                double pm = sc_.bss[tc.es[e].b].p_mask;
                if (mode_ == OracleMode::Relaxed) {
                    lo[e] = grid_[cell[e]] * pm;
                    hi[e] = grid_[cell[e] + 1] * pm;
                } else {
                    lo[e] = hi[e] = grid_[cell[e]] * pm;
                }
            }
            evaluate_powers(tc, lo, hi, has);
            int k = 0;
            while (k < E && ++cell[k] == per) cell[k++] = 0;
            if (k == E) break;
        }
    }

    double fixed_power(const std::vector<char>& on) const {
        double s = 0;
        for (int b = 0; b < sc_.B(); ++b) s += (on[b] ? sc_.bss[b].p_hardware : sc_.bss[b].p_sleep) + sc_.bss[b].p_bbu;
        return s;
    }

    // Cheapest case per pair given link needs; respects fronthaul capacity.
    double link_cost(const std::vector<double>& need, std::vector<int>* choice) const {
        std::vector<int> pick(pairs_.size(), -1), best_pick;
        double best = kInf;
        Array2<double> load(sc_.B(), sc_.B(), 0.0);
        std::function<void(size_t, double)> rec = [&](size_t k, double acc) {
            if (acc >= best) return;
            if (k == pairs_.size()) {
                best = acc;
                best_pick = pick;
                return;
            }
            const Pair& p = pairs_[k];
            if (p.local) {
                pick[k] = -2;
                rec(k + 1, acc);
                return;
            }
            for (int i : p.donors) {
                if (load(i, p.b) + need[k] > sc_.fh_cap(i, p.b)) continue;
                load(i, p.b) += need[k];
                pick[k] = i;
                rec(k + 1, acc + sc_.cost.c_fh * need[k]);
                load(i, p.b) -= need[k];
            }
            pick[k] = -1;
            rec(k + 1, acc + sc_.cost.c_bh * need[k]);
        };
        rec(0, 0.0);
        if (choice) *choice = best_pick;
        return best;
    }

    void evaluate_powers(const TauCase& tc, const std::vector<double>& lo, const std::vector<double>& hi,
                         const std::vector<char>& has) {
        const int E = static_cast<int>(tc.es.size());
        std::vector<double> sum_lo(sc_.B(), 0.0);
        std::vector<char> on(sc_.B(), 0);
        for (int e = 0; e < E; ++e) {
            sum_lo[tc.es[e].b] += lo[e];
            if (hi[e] > 0) on[tc.es[e].b] = 1;
        }
        for (int b = 0; b < sc_.B(); ++b)
            if (sum_lo[b] > sc_.bss[b].p_max * (1 + 1e-12)) return;
        (void)has;
        double power = fixed_power(on);
        for (int b = 0; b < sc_.B(); ++b) power += sc_.cost.c_power * sum_lo[b];
        if (power + tc.bw_cost >= best_) return;

        std::vector<double> i_lo(E, 0.0), i_hi(E, 0.0);
        for (int e = 0; e < E; ++e)
            for (int f = 0; f < E; ++f) {
                i_lo[e] += tc.coef[e][f] * lo[f];
                i_hi[e] += tc.coef[e][f] * hi[f];
            }
        // Deadline with the most favourable powers in the cell.
        std::vector<double> pess(sc_.U(), 0.0);
        for (int u : users_) {
            double opt = 0;
            for (int e : tc.of_user[u]) {
                opt += W_ * std::log2(1.0 + hi[e] * tc.es[e].h / (i_lo[e] + s2_));
                pess[u] += W_ * std::log2(1.0 + lo[e] * tc.es[e].h / (i_hi[e] + s2_));
            }
            if (sc_.slot_T * opt < cat_.sizes[req_.content[u]] * (1 - 1e-12)) return;
        }
        // SIC, vacuous when either power may be zero.
        for (int e = 0; e < E; ++e)
            for (int f = 0; f < E; ++f) {
                const Entry &s = tc.es[e], &w = tc.es[f];
                if (e == f || s.b != w.b || s.n != w.n || s.h < w.h) continue;
                if (lo[e] <= 0 || lo[f] <= 0) continue;
                double val = (s.h - w.h) * s2_, mag = (s.h + w.h) * s2_;
                for (int g = 0; g < E; ++g) {
                    double k = s.h * tc.coef[f][g] - w.h * tc.coef[e][g];
                    val += k * (k > 0 ? hi[g] : lo[g]);
                    mag += std::abs(k) * hi[g];
                }
                if (val < -1e-12 * mag) return;
            }
        std::vector<double> need(pairs_.size());
        for (size_t k = 0; k < pairs_.size(); ++k) {
            const Pair& p = pairs_[k];
            double floor = cat_.sizes[p.c] / sc_.slot_T;
            double agg = -1;
            for (int u : p.users) {
                double a = std::max(floor, pess[u]);
                if (agg < 0) agg = a;
                else agg = sc_.link_bound == LinkRateBound::Min ? std::min(agg, a) : std::max(agg, a);
            }
            need[k] = agg;
        }
        std::vector<int> choice;
        double link = link_cost(need, mode_ == OracleMode::Grid ? &choice : nullptr);
        double total = power + tc.bw_cost + link;
        if (total < best_) {
            best_ = total;
            if (mode_ == OracleMode::Grid) record(tc, lo, need, choice);
        }
    }

    void record(const TauCase& tc, const std::vector<double>& p, const std::vector<double>& need,
                const std::vector<int>& choice) {
        AllocationState st(sc_.B(), sc_.U(), sc_.N(), cat_.C());
        st.tau = tc.tau;
        st.rho = rho_;
        for (size_t e = 0; e < tc.es.size(); ++e) st.p(tc.es[e].b, tc.es[e].u, tc.es[e].n) = p[e];
        for (size_t k = 0; k < pairs_.size(); ++k) {
            const Pair& pr = pairs_[k];
            if (choice[k] == -2) st.x(pr.b, pr.c) = 1;
            else if (choice[k] == -1) {
                st.z(pr.b, pr.c) = 1;
                st.r_bh(pr.b, pr.c) = need[k];
            } else {
                st.y(choice[k], pr.b, pr.c) = 1;
                st.r_fh(choice[k], pr.b, pr.c) = need[k];
            }
        }
        best_state_ = st;
    }

    const Scenario& sc_;
    const ContentCatalog& cat_;
    const Array2<std::uint8_t>& rho_;
    const RequestMatrix& req_;
    const ChannelState& ch_;
    bool coop_;
    OracleMode mode_;
    std::vector<double> grid_;
    std::vector<int> users_;
    std::vector<Pair> pairs_;
    double s2_ = 0, W_ = 0;
    double best_ = kInf;
    double states_ = 0;
    AllocationState best_state_;
};

void check_dims(const Scenario& sc, int C, const OracleBudget& bud) {
    if (sc.U() > bud.max_users || sc.B() > bud.max_bss || sc.N() > bud.max_subcarriers || C > bud.max_contents)
        throw OracleBudgetError("instance exceeds the oracle dimension limits", kInf);
}

}  // namespace

OracleResult exhaustive_delivery(const Scenario& sc, const ContentCatalog& cat, const Array2<std::uint8_t>& rho,
                                 const RequestMatrix& req, const ChannelState& ch,
                                 const std::vector<std::uint8_t>& served, bool cooperative,
                                 const OracleBudget& budget, OracleMode mode) {
    check_dims(sc, cat.C(), budget);
    double est = estimate_delivery_states(sc, served, mode, budget.power_grid_levels);
    if (est > budget.max_states)
        throw OracleBudgetError("oracle enumeration of about " + std::to_string(est) + " states exceeds the budget", est);
    DeliveryOracle o(sc, cat, rho, req, ch, served, cooperative, budget.power_grid_levels, mode);
    return o.run();
}

CachingOracleResult exhaustive_caching(const Scenario& sc, const ContentCatalog& cat,
                                       const std::vector<ChannelState>& samples, const Array3<std::uint8_t>& tau,
                                       const OracleBudget& budget) {
    check_dims(sc, cat.C(), budget);
    const int B = sc.B(), U = sc.U(), N = sc.N(), C = cat.C();
    std::vector<std::array<int, 3>> es;
    for (int b = 0; b < B; ++b)
        for (int u = 0; u < U; ++u)
            for (int n = 0; n < N; ++n)
                if (tau(b, u, n)) es.push_back({b, u, n});
    const int L = budget.power_grid_levels;
    double est = std::pow(L + 1.0, static_cast<double>(es.size())) * std::pow(2.0, static_cast<double>(B * C));
    if (est > budget.max_states)
        throw OracleBudgetError("caching oracle of about " + std::to_string(est) + " states exceeds the budget", est);

    std::vector<double> grid = power_grid(1.0, L);
    std::vector<char> has_user(U, 0);
    for (const auto& e : es) has_user[e[1]] = 1;
    const double ref = cat.mean_size() / sc.slot_T;
    ChannelState mch = mean_channel(sc);

    struct Point {
        std::vector<double> q;
        double cost;
    };
    std::vector<Point> points;
    CachingOracleResult res;
    std::vector<int> cell(es.size(), 0);
    Array3<double> p(B, U, N, 0.0);
    while (true) {
        std::vector<double> sum(B, 0.0);
        for (size_t e = 0; e < es.size(); ++e) {
            double v = grid[cell[e]] * sc.bss[es[e][0]].p_mask;
            p(es[e][0], es[e][1], es[e][2]) = v;
            sum[es[e][0]] += v;
        }
        bool ok = true;
        for (int b = 0; b < B; ++b)
            if (sum[b] > sc.bss[b].p_max * (1 + 1e-12)) ok = false;
        if (ok) {
            auto rep = sic_feasible(mch, tau, p, sc);
            for (const auto& v : rep.violations)
                if (p(v.b, v.strong, v.n) > 0 && p(v.b, v.weak, v.n) > 0) ok = false;
        }
        if (ok) {
            auto er = ergodic_rate(samples, tau, p, sc);
            bool meets = true;
            std::vector<double> q(B, 0.0);
            for (int u = 0; u < U; ++u) {
                double r = 0;
                for (int b = 0; b < B; ++b) {
                    r += er(b, u);
                    q[b] += sc.slot_T * er(b, u);
                }
                if (has_user[u] && r < ref) meets = false;
            }
            if (meets) res.feasible = true;
            points.push_back({q, caching_objective(sc, tau, p)});
        }
        size_t k = 0;
        while (k < es.size() && ++cell[k] == static_cast<int>(grid.size())) cell[k++] = 0;
        if (k == es.size()) break;
    }

    res.value = -1;
    const std::uint64_t combos = 1ULL << (B * C);
    for (std::uint64_t m = 0; m < combos; ++m) {
        std::vector<double> used(B, 0.0), demand(B, 0.0);
        double value = 0;
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c)
                if (m >> (b * C + c) & 1) {
                    used[b] += cat.sizes[c];
                    demand[b] += cat.popularity[c] * cat.sizes[c];
                    value += cat.popularity[c] * cat.sizes[c];
                }
        bool fits = true;
        for (int b = 0; b < B; ++b)
            if (used[b] > sc.bss[b].cache_bits) fits = false;
        if (!fits || value < res.value) continue;
        double cost = kInf;
        for (const auto& pt : points) {
            bool sup = true;
            for (int b = 0; b < B; ++b)
                if (demand[b] > 0 && pt.q[b] < demand[b]) sup = false;
            if (sup) cost = std::min(cost, pt.cost);
        }
        if (!std::isfinite(cost)) continue;
        if (value > res.value || cost < res.cost) {
            res.value = value;
            res.cost = cost;
            res.rho = Array2<std::uint8_t>(B, C, 0);
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < C; ++c) res.rho(b, c) = (m >> (b * C + c)) & 1;
        }
    }
    if (res.value < 0) res.value = 0;
    return res;
}

GapStudy oracle_gap_study(const HarnessConfig& cfg, int instances, int levels, int threads) {
    PolicyConfig pc = parse_policy(cfg.sweep.policies.front());
    OracleBudget bud;
    bud.power_grid_levels = levels;
    std::vector<GapInstance> out(instances);
    std::vector<char> skipped(instances, 0);
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    auto worker = [&] {
        while (true) {
            int i = next.fetch_add(1);
            if (i >= instances) return;
            try {
                std::uint64_t rs = run_seed(cfg.sweep.seed, i);
                Instance in = build_instance(cfg, rs);
                OrchestratorConfig oc = cfg.orch;
                oc.channel_seed = stream_seed(rs, Stream::CachingChannel);
                CachingResult cr;
                try {
                    cr = caching_for_policy(in.sc, in.cat, pc, stream_seed(rs, Stream::Policy), oc);
                } catch (const InfeasibleError&) {
                    skipped[i] = 1;
                    continue;
                }
                Rng chr(stream_seed(rs, Stream::DeliveryChannel, 0));
                ChannelState ch = sample_channel(in.sc, chr);
                RequestMatrix req = draw_requests(in.cat, cr.admitted, stream_seed(rs, Stream::Requests, 0));
                DeliveryResult dr =
                    run_delivery_slot(in.sc, in.cat, cr.rho, req, ch, pc, oc, stream_seed(rs, Stream::Ties, 0));
                Scenario eff = effective_scenario(in.sc, pc);
                OracleResult orc = exhaustive_delivery(eff, in.cat, cr.rho, req, ch, dr.served,
                                                       pc.cooperation == Cooperation::Cooperative, bud);
                GapInstance g;
                g.index = i;
                g.heuristic = dr.cost.total;
                g.oracle = orc.cost;
                g.gap = orc.cost > 0 ? (g.heuristic - g.oracle) / g.oracle : 0.0;
                g.floor_ok = orc.feasible && g.heuristic >= g.oracle * (1 - 1e-9);
                AuditOptions ao;
                ao.cooperative = pc.cooperation == Cooperation::Cooperative;
                g.audit_violations =
                    static_cast<int>(audit_delivery(eff, in.cat, ch, dr.state, req, dr.served, ao).size());
                out[i] = g;
            } catch (...) {
                std::lock_guard<std::mutex> lk(mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    int T = std::min(resolve_threads(threads), std::max(1, instances));
    std::vector<std::thread> pool;
    for (int t = 1; t < T; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    GapStudy st;
    for (int i = 0; i < instances; ++i) {
        if (skipped[i]) {
            ++st.skipped;
            continue;
        }
        st.instances.push_back(out[i]);
        st.mean_gap += out[i].gap;
        st.max_gap = std::max(st.max_gap, out[i].gap);
        st.floor_violations += !out[i].floor_ok;
        st.audit_violations += out[i].audit_violations;
    }
    if (!st.instances.empty()) st.mean_gap /= st.instances.size();
    return st;
}

}  // namespace hetnet
