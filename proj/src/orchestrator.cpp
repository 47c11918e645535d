#include "hetnet/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hetnet/hungarian.hpp"
#include "hetnet/placement.hpp"
#include "hetnet/rng.hpp"

namespace hetnet {

// ---------------------------------------------------------------------------
// Policy labels

std::string to_string(CachingPolicy p) {
    switch (p) {
        case CachingPolicy::Ergodic: return "Ergodic";
        case CachingPolicy::MPC: return "MPC";
        case CachingPolicy::PRC: return "PRC";
        case CachingPolicy::RC: return "RC";
        case CachingPolicy::NC: return "NC";
    }
    return "?";
}

CachingPolicy parse_caching_policy(const std::string& s) {
    for (auto p : {CachingPolicy::Ergodic, CachingPolicy::MPC, CachingPolicy::PRC, CachingPolicy::RC, CachingPolicy::NC})
        if (to_string(p) == s) return p;
    throw std::invalid_argument("unknown caching policy '" + s + "'");
}

std::string PolicyConfig::label() const {
    return to_string(caching) + "/" + (cooperation == Cooperation::Cooperative ? "CO-" : "NC-") +
           (access == Access::NOMA ? "NOMA" : "OMA");
}

PolicyConfig parse_policy(const std::string& s) {
    PolicyConfig pc;
    auto slash = s.find('/');
    pc.caching = parse_caching_policy(s.substr(0, slash));
    if (slash == std::string::npos) return pc;
    std::string mode = s.substr(slash + 1);
    if (mode == "CO-NOMA") {
    } else if (mode == "CO-OMA") {
        pc.access = Access::OMA;
    } else if (mode == "NC-NOMA") {
        pc.cooperation = Cooperation::NonCooperative;
    } else if (mode == "NC-OMA") {
        pc.cooperation = Cooperation::NonCooperative;
        pc.access = Access::OMA;
    } else {
        throw std::invalid_argument("unknown delivery mode '" + mode + "'");
    }
    return pc;
}

Scenario effective_scenario(const Scenario& sc, const PolicyConfig& policy) {
    Scenario out = sc;
    if (policy.access == Access::OMA)
        for (auto& b : out.bss) b.l_max = 1;
    return out;
}

double mean_channel_gain(const Scenario& sc, int u) {
    double best = 0;
    for (int b = 0; b < sc.B(); ++b) best = std::max(best, std::pow(sc.distance(b, u), -sc.kappa));
    return best;
}

// ---------------------------------------------------------------------------
// Assignment step shared by both phases

namespace {

constexpr double kDeadlineMargin = 1e-7;

// Interference plus noise user u would see on (b, n), ignoring u's own entries.
double snapshot_in(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p, int b, int u,
                   int n, double noise) {
    double hu = ch.h(b, u, n);
    double s = noise;
    for (int i = 0; i < tau.dim1(); ++i)
        if (i != u && tau(b, i, n) && ch.h(b, i, n) >= hu) s += p(b, i, n) * hu;
    for (int j = 0; j < tau.dim0(); ++j) {
        if (j == b) continue;
        for (int d = 0; d < tau.dim1(); ++d)
            if (d != u && tau(j, d, n)) s += p(j, d, n) * ch.h(j, u, n);
    }
    return s;
}

struct TauResult {
    Array3<std::uint8_t> tau;
    std::vector<int> flagged;
};

TauResult assign_tau(const Scenario& sc, const ChannelState& ch, const Array3<std::uint8_t>& tau_cur,
                     const Array3<double>& p_cur, const std::vector<double>& ref_rate,
                     const std::vector<std::uint8_t>& eligible) {
    const int B = sc.B(), U = sc.U(), N = sc.N();
    const double W = sc.sub_bw, s2 = sc.noise_mw();
    Matrix P1(B, std::vector<double>(U, kUnreachable));
    for (int b = 0; b < B; ++b)
        for (int u = 0; u < U; ++u) {
            if (!eligible[u]) continue;
            for (int n = 0; n < N; ++n) {
                double in = snapshot_in(ch, tau_cur, p_cur, b, u, n, s2);
                P1[b][u] = std::min(P1[b][u], min_power_for_rate(ref_rate[u], W, ch.h(b, u, n), in, sc.bss[b].p_mask));
            }
        }
    std::vector<int> slots(B);
    for (int b = 0; b < B; ++b) slots[b] = N * sc.bss[b].l_max;
    auto bs_of = associate_users(P1, slots);
    // Users no single subcarrier can carry go to their strongest BS and rely on repair.
    for (int u = 0; u < U; ++u) {
        if (!eligible[u] || bs_of[u] >= 0) continue;
        int best = 0;
        double hb = -1;
        for (int b = 0; b < B; ++b) {
            double h = 0;
            for (int n = 0; n < N; ++n) h += ch.h(b, u, n);
            if (h > hb) {
                hb = h;
                best = b;
            }
        }
        bs_of[u] = best;
    }

    // BSs are allocated in turn, each seeing the fresh allocation of those before it,
    // so neighbouring cells do not all jump to the same subcarriers at once.
    Array3<std::uint8_t> tau_w = tau_cur;
    Array3<double> p_w = p_cur;
    TauResult res{Array3<std::uint8_t>(B, U, N, 0), {}};
    for (int b = 0; b < B; ++b) {
        std::vector<int> local;
        for (int u = 0; u < U; ++u)
            if (eligible[u] && bs_of[u] == b) local.push_back(u);
        if (local.empty()) continue;
        Matrix P2(local.size(), std::vector<double>(N));
        Matrix cap(local.size(), std::vector<double>(N));
        for (size_t k = 0; k < local.size(); ++k) {
            int u = local[k];
            for (int n = 0; n < N; ++n) {
                double in = snapshot_in(ch, tau_w, p_w, b, u, n, s2);
                P2[k][n] = min_power_for_rate(ref_rate[u], W, ch.h(b, u, n), in, sc.bss[b].p_mask);
                cap[k][n] = W * std::log2(1.0 + sc.bss[b].p_mask * ch.h(b, u, n) / in);
            }
        }
        auto rate_ok = [&](int k, const std::vector<int>& subs) {
            double r = 0;
            for (int n : subs) r += cap[k][n];
            return r >= ref_rate[local[k]];
        };
        auto sr = allocate_subcarriers(P2, sc.bss[b].l_max, rate_ok);
        for (int u = 0; u < U; ++u)
            for (int n = 0; n < N; ++n) {
                tau_w(b, u, n) = 0;
                p_w(b, u, n) = 0;
            }
        for (size_t k = 0; k < local.size(); ++k)
            for (int n : sr.subs[k]) {
                res.tau(b, local[k], n) = 1;
                tau_w(b, local[k], n) = 1;
                p_w(b, local[k], n) = std::min(P2[k][n], sc.bss[b].p_mask);
            }
        for (int k : sr.flagged) res.flagged.push_back(local[k]);
    }
    std::sort(res.flagged.begin(), res.flagged.end());
    return res;
}

void clear_user(Array3<std::uint8_t>& tau, Array3<double>& p, int u) {
    for (int b = 0; b < tau.dim0(); ++b)
        for (int n = 0; n < tau.dim2(); ++n) {
            tau(b, u, n) = 0;
            p(b, u, n) = 0;
        }
}

struct PowerControl {
    Array3<double> p;
    std::vector<int> violators;  // users whose targets cannot be met
};

// Minimal powers meeting per-user rate targets split evenly over the user's
// subcarriers (fixed-point iteration of the standard interference function).
PowerControl power_control(const Scenario& sc, const ChannelState& ch, const Array3<std::uint8_t>& tau,
                           const std::vector<double>& target, const std::vector<std::uint8_t>& served) {
    const int B = sc.B(), U = sc.U(), N = sc.N();
    const double s2 = sc.noise_mw();
    PowerControl pc{Array3<double>(B, U, N, 0.0), {}};
    struct Entry {
        int b, u, n;
        double gamma;
    };
    std::vector<Entry> es;
    for (int u = 0; u < U; ++u) {
        if (!served[u]) continue;
        std::vector<std::pair<int, int>> subs;
        for (int b = 0; b < B; ++b)
            for (int n = 0; n < N; ++n)
                if (tau(b, u, n)) subs.emplace_back(b, n);
        if (subs.empty()) {
            pc.violators.push_back(u);
            continue;
        }
        double g = std::exp2(target[u] / (subs.size() * sc.sub_bw)) - 1.0;
        for (auto [b, n] : subs) es.push_back({b, u, n, g});
    }
    std::vector<char> bad(U, 0);
    for (int it = 0; it < 2000; ++it) {
        double change = 0;
        bool over = false;
        Array3<double> next = pc.p;
        for (const auto& e : es) {
            double in = intra_interference(ch, tau, pc.p, e.b, e.u, e.n) +
                        inter_interference(ch, tau, pc.p, e.b, e.u, e.n) + s2;
            double v = e.gamma * in / ch.h(e.b, e.u, e.n);
            if (!std::isfinite(v) || v > sc.bss[e.b].p_mask) {
                bad[e.u] = 1;
                over = true;
                v = sc.bss[e.b].p_mask;
            }
            change = std::max(change, std::abs(v - pc.p(e.b, e.u, e.n)) / std::max(v, 1e-300));
            next(e.b, e.u, e.n) = v;
        }
        pc.p = next;
        if (over) break;
        if (change < 1e-13) break;
    }
    for (int b = 0; b < B; ++b) {
        double sum = 0;
        for (const auto& e : es)
            if (e.b == b) sum += pc.p(e.b, e.u, e.n);
        if (sum > sc.bss[b].p_max)
            for (const auto& e : es)
                if (e.b == b) bad[e.u] = 1;
    }
    if (std::none_of(bad.begin(), bad.end(), [](char c) { return c; })) {
        auto rep = sic_feasible(ch, tau, pc.p, sc);
        for (const auto& v : rep.violations)
            if (pc.p(v.b, v.strong, v.n) > 0 && pc.p(v.b, v.weak, v.n) > 0) bad[v.weak] = 1;
        // Fixed point may stop a hair short of the target; verify rates directly.
        auto acc = access_rates(ch, tau, pc.p, sc);
        for (int u = 0; u < U; ++u)
            if (served[u] && acc[u] < target[u] * (1 - 1e-9)) bad[u] = 1;
    }
    for (int u = 0; u < U; ++u)
        if (bad[u]) pc.violators.push_back(u);
    std::sort(pc.violators.begin(), pc.violators.end());
    pc.violators.erase(std::unique(pc.violators.begin(), pc.violators.end()), pc.violators.end());
    return pc;
}

int weakest(const Scenario& sc, const std::vector<int>& users) {
    int w = users.front();
    for (int u : users)
        if (mean_channel_gain(sc, u) < mean_channel_gain(sc, w)) w = u;
    return w;
}

struct ErgodicPower {
    Array3<double> p;
    std::vector<double> shortfall;  // relative ergodic-rate shortfall per user, 1 when a budget is exceeded
};

// Minimal powers giving each admitted user at least the reference ergodic rate:
// start from the mean-channel fixed point, then raise short users' powers by
// the high-SNR rate gap until the sampled ergodic rates clear the target.
ErgodicPower ergodic_power_control(const Scenario& sc, const std::vector<ChannelState>& samples,
                                   const ChannelState& mch, const Array3<std::uint8_t>& tau,
                                   const std::vector<std::uint8_t>& admitted, double ref) {
    const int B = sc.B(), U = sc.U(), N = sc.N();
    const double target = ref * (1 + 1e-3);
    std::vector<double> tgt(U, target);
    ErgodicPower ep{power_control(sc, mch, tau, tgt, admitted).p, std::vector<double>(U, 0.0)};
    std::vector<int> k(U, 0);
    for (int b = 0; b < B; ++b)
        for (int u = 0; u < U; ++u)
            for (int n = 0; n < N; ++n) {
                k[u] += tau(b, u, n);
                if (tau(b, u, n) && admitted[u] && ep.p(b, u, n) <= 0) ep.p(b, u, n) = sc.bss[b].p_mask * 1e-6;
            }
    Array2<double> er = ergodic_rate(samples, tau, ep.p, sc);
    auto rate = [&](int u) {
        double r = 0;
        for (int b = 0; b < B; ++b) r += er(b, u);
        return r;
    };
    for (int it = 0; it < 100; ++it) {
        bool moved = false;
        for (int u = 0; u < U; ++u) {
            if (!admitted[u] || !k[u]) continue;
            double r = rate(u);
            if (r >= target) continue;
            double f = std::exp2((target * (1 + 1e-3) - r) / (k[u] * sc.sub_bw));
            for (int b = 0; b < B; ++b)
                for (int n = 0; n < N; ++n)
                    if (tau(b, u, n)) {
                        double v = std::min(sc.bss[b].p_mask, ep.p(b, u, n) * f);
                        moved |= v > ep.p(b, u, n);
                        ep.p(b, u, n) = v;
                    }
        }
        if (!moved) break;
        er = ergodic_rate(samples, tau, ep.p, sc);
    }
    for (int u = 0; u < U; ++u)
        if (admitted[u]) ep.shortfall[u] = k[u] ? std::max(0.0, (ref - rate(u)) / ref) : 1.0;
    for (int b = 0; b < B; ++b) {
        double sum = 0;
        for (int u = 0; u < U; ++u)
            for (int n = 0; n < N; ++n) sum += ep.p(b, u, n);
        if (sum > sc.bss[b].p_max)
            for (int u = 0; u < U; ++u)
                for (int n = 0; n < N; ++n)
                    if (tau(b, u, n) && admitted[u]) ep.shortfall[u] = 1.0;
    }
    return ep;
}

}  // namespace

// ---------------------------------------------------------------------------
// Caching phase

InitCachingResult init_caching(const Scenario& sc, const ContentCatalog& cat, const OrchestratorConfig& cfg) {
    const int U = sc.U();
    InitCachingResult res;
    res.admitted.assign(U, 1);
    ChannelState mch = mean_channel(sc);
    auto samples = sample_channels(sc, std::max(1, sc.mc_samples), cfg.channel_seed);
    const double ref = cat.mean_size() / sc.slot_T;
    std::vector<double> ref_rate(U, ref);
    Array3<std::uint8_t> zero_tau(sc.B(), U, sc.N(), 0);
    Array3<double> zero_p(sc.B(), U, sc.N(), 0.0);

    struct Pass {
        Array3<std::uint8_t> tau;
        Array3<double> p;
        std::vector<int> viol;
        double A = 0;
    };
    // Assignment and powers against the interference of `snap_tau`/`snap_p`.
    auto evaluate = [&](const Array3<std::uint8_t>& snap_tau, const Array3<double>& snap_p) {
        auto tr = assign_tau(sc, mch, snap_tau, snap_p, ref_rate, res.admitted);
        auto ep = ergodic_power_control(sc, samples, mch, tr.tau, res.admitted, ref);
        std::vector<double>& shortfall = ep.shortfall;
        for (int u : tr.flagged) shortfall[u] = 1.0;
        auto rep = sic_feasible(mch, tr.tau, ep.p, sc);
        for (const auto& v : rep.violations)
            if (ep.p(v.b, v.strong, v.n) > 0 && ep.p(v.b, v.weak, v.n) > 0)
                shortfall[v.weak] = std::max(shortfall[v.weak], 1e-6);
        Pass ps{tr.tau, ep.p, {}, 0.0};
        for (int u = 0; u < U; ++u)
            if (res.admitted[u] && shortfall[u] > 0) {
                ps.viol.push_back(u);
                ps.A = std::max(ps.A, shortfall[u]);
            }
        return ps;
    };
    auto better = [](const Pass& a, const Pass& b) {
        return a.viol.size() != b.viol.size() ? a.viol.size() < b.viol.size() : a.A < b.A;
    };

    Array3<std::uint8_t> snap_tau = zero_tau;
    Array3<double> snap_p = zero_p;
    while (std::any_of(res.admitted.begin(), res.admitted.end(), [](auto a) { return a; })) {
        Pass best = evaluate(snap_tau, snap_p);
        Pass cur = best;
        for (int pass = 1; pass < 8 && !best.viol.empty(); ++pass) {
            Pass next = evaluate(cur.tau, cur.p);
            if (next.tau == cur.tau) break;
            cur = std::move(next);
            if (better(cur, best)) best = cur;
        }
        res.elastic = best.A;
        if (best.viol.empty()) {
            res.feasible = true;
            res.tau = best.tau;
            res.p = best.p;
            return res;
        }
        int drop = weakest(sc, best.viol);
        res.admitted[drop] = 0;
        res.dropped.push_back(drop);
        snap_tau = best.tau;
        snap_p = best.p;
        clear_user(snap_tau, snap_p, drop);
    }
    res.tau = zero_tau;
    res.p = zero_p;
    return res;
}

namespace {

double budget_slack(const Scenario& sc, const std::vector<ChannelState>& samples, const Array3<std::uint8_t>& tau,
                    const Array3<double>& p, const std::vector<double>& demand) {
    auto er = ergodic_rate(samples, tau, p, sc);
    double worst = 1.0;
    for (int b = 0; b < sc.B(); ++b) {
        if (demand[b] <= 0) continue;
        double q = 0;
        for (int u = 0; u < sc.U(); ++u) q += sc.slot_T * er(b, u);
        worst = std::min(worst, (q - demand[b]) / demand[b]);
    }
    return worst;
}

CachingResult caching_asm(const Scenario& sc, const ContentCatalog& cat, const OrchestratorConfig& cfg,
                          const InitCachingResult& init) {
    CachingResult res;
    res.admitted = init.admitted;
    res.dropped = init.dropped;
    const int B = sc.B(), U = sc.U(), C = cat.C();
    auto samples = sample_channels(sc, std::max(1, sc.mc_samples), cfg.channel_seed);
    ChannelState mch = mean_channel(sc);
    std::vector<double> ref_rate(U, cat.mean_size() / sc.slot_T);

    Array3<std::uint8_t> tau = init.tau;
    Array3<double> p = init.p;
    Array2<std::uint8_t> rho(B, C, 0);
    double obj = caching_objective(sc, tau, p);
    res.trace.push_back(obj);

    PlacementInstance inst;
    inst.sizes = cat.sizes;
    inst.popularity = cat.popularity;
    for (const auto& bs : sc.bss) inst.storage.push_back(bs.cache_bits);
    inst.diversity_factor = cfg.diversity_factor;

    for (int it = 1; it <= cfg.caching_asm.max_iters; ++it) {
        // Placement against the deliverable budget of the current (tau, p).
        auto er = ergodic_rate(samples, tau, p, sc);
        inst.budget.assign(B, 0.0);
        for (int b = 0; b < B; ++b)
            for (int u = 0; u < U; ++u) inst.budget[b] += sc.slot_T * er(b, u);
        rho = solve_placement(inst);
        std::vector<double> demand(B, 0.0);
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c)
                if (rho(b, c)) demand[b] += cat.popularity[c] * cat.sizes[c];

        // Power on the current assignment.
        auto cur = solve_power_caching(sc, samples, mch, tau, demand, p, cfg.sca);
        double cur_obj = caching_objective(sc, tau, cur.p);
        Array3<std::uint8_t> best_tau = tau;
        Array3<double> best_p = cur.p;
        double best_obj = cur_obj;
        std::vector<ScaTraceRow> best_trace = cur.trace;

        // Assignment candidate under the current interference snapshot.
        auto tr = assign_tau(sc, mch, tau, p, ref_rate, res.admitted);
        if (tr.flagged.empty() && !(tr.tau == tau)) {
            Array3<double> p0 = ergodic_power_control(sc, samples, mch, tr.tau, res.admitted, ref_rate[0]).p;
            if (budget_slack(sc, samples, tr.tau, p0, demand) >= 0) {
                try {
                    auto cand = solve_power_caching(sc, samples, mch, tr.tau, demand, p0, cfg.sca);
                    double cobj = caching_objective(sc, tr.tau, cand.p);
                    if (cobj < best_obj) {
                        best_obj = cobj;
                        best_tau = tr.tau;
                        best_p = cand.p;
                        best_trace = cand.trace;
                    }
                } catch (const InfeasibleError&) {
                }
            }
        }
        res.sca_traces.push_back(best_trace);
        res.iterations = it;
        double prev = obj;
        if (best_obj <= obj) {
            tau = best_tau;
            p = best_p;
            obj = best_obj;
        }
        res.trace.push_back(obj);
        if (std::abs(prev - obj) <= cfg.caching_asm.tolerance * std::max(std::abs(prev), 1e-300)) break;
    }
    res.rho = rho;
    res.tau = tau;
    res.p = p;
    return res;
}

}  // namespace

CachingResult run_caching_phase(const Scenario& sc, const ContentCatalog& cat, const OrchestratorConfig& cfg) {
    auto init = init_caching(sc, cat, cfg);
    if (!init.feasible) throw InfeasibleError("caching phase infeasible: admission control dropped every user");
    return caching_asm(sc, cat, cfg, init);
}

Array2<std::uint8_t> apply_policy(const ContentCatalog& cat, const Scenario& sc, const PolicyConfig& policy,
                                  std::uint64_t seed, const OrchestratorConfig& cfg) {
    const int B = sc.B(), C = cat.C();
    Array2<std::uint8_t> rho(B, C, 0);
    if (policy.caching == CachingPolicy::NC) return rho;
    if (policy.caching == CachingPolicy::Ergodic) return run_caching_phase(sc, cat, cfg).rho;

    for (int b = 0; b < B; ++b) {
        std::vector<int> order(C);
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(b)}));
        if (policy.caching == CachingPolicy::MPC) {
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int q) { return cat.popularity[a] > cat.popularity[q]; });
        } else if (policy.caching == CachingPolicy::RC) {
            for (int i = C - 1; i > 0; --i) std::swap(order[i], order[uniform_int(rng, i + 1)]);
        } else {
            // Successive sampling without replacement, weight sqrt(d_c).
            std::vector<double> w(C);
            for (int c = 0; c < C; ++c) w[c] = std::sqrt(cat.popularity[c]);
            std::vector<int> pool = order;
            order.clear();
            double total = std::accumulate(w.begin(), w.end(), 0.0);
            while (!pool.empty()) {
                double r = uniform01(rng) * total;
                size_t k = 0;
                for (; k + 1 < pool.size(); ++k) {
                    r -= w[pool[k]];
                    if (r < 0) break;
                }
                order.push_back(pool[k]);
                total -= w[pool[k]];
                pool.erase(pool.begin() + static_cast<long>(k));
            }
        }
        double used = 0;
        for (int c : order)
            if (used + cat.sizes[c] <= sc.bss[b].cache_bits) {
                rho(b, c) = 1;
                used += cat.sizes[c];
            }
    }
    return rho;
}

CachingResult caching_for_policy(const Scenario& sc, const ContentCatalog& cat, const PolicyConfig& policy,
                                 std::uint64_t seed, const OrchestratorConfig& cfg) {
    Scenario eff = effective_scenario(sc, policy);
    auto init = init_caching(eff, cat, cfg);
    if (!init.feasible) throw InfeasibleError("caching phase infeasible: admission control dropped every user");
    if (policy.caching == CachingPolicy::Ergodic) return caching_asm(eff, cat, cfg, init);
    CachingResult res;
    res.rho = apply_policy(cat, eff, policy, seed, cfg);
    res.tau = init.tau;
    res.p = init.p;
    res.admitted = init.admitted;
    res.dropped = init.dropped;
    res.trace.push_back(caching_objective(eff, init.tau, init.p));
    return res;
}

// ---------------------------------------------------------------------------
// Delivery phase

RequestMatrix draw_requests(const ContentCatalog& cat, const std::vector<std::uint8_t>& admitted, std::uint64_t seed) {
    Rng rng(seed);
    RequestMatrix req;
    req.content.assign(admitted.size(), -1);
    for (size_t u = 0; u < admitted.size(); ++u) {
        double r = uniform01(rng);
        if (!admitted[u]) continue;
        int c = 0;
        double acc = cat.popularity[0];
        while (r >= acc && c + 1 < cat.C()) acc += cat.popularity[++c];
        req.content[u] = c;
    }
    return req;
}

namespace {

struct SlotState {
    AllocationState st;
    std::vector<std::uint8_t> served;
    double obj = 0;
    std::vector<ScaTraceRow> sca;
};

// Cases for the current rates, then the power/link-rate step. Returns false if
// the fronthaul capacity cannot be met.
bool cases_and_power(const Scenario& sc, const ContentCatalog& cat, const ChannelState& ch, const RequestMatrix& req,
                     bool coop, const OrchestratorConfig& cfg, Rng& rng, SlotState& s, DeliveryDecision& dec) {
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto acc = access_rates(ch, s.st.tau, s.st.p, sc);
        dec = decide_cases(sc, s.st.rho, s.st.tau, req, s.served, acc, coop, rng);
        s.st.x = dec.x;
        s.st.y = dec.y;
        s.st.z = dec.z;
        set_link_rates(s.st, sc, req, s.served, acc);
        auto pr = solve_power_delivery(sc, cat, ch, s.st, req, s.served, s.st.p, cfg.sca);
        if (pr.feasible()) {
            s.st.p = pr.p;
            s.st.r_fh = pr.r_fh;
            s.st.r_bh = pr.r_bh;
            s.sca = pr.trace;
            s.obj = total_cost(s.st, sc, cat).total;
            return true;
        }
        s.st.p = pr.p;
    }
    return false;
}


// Objective of a fixed (tau, p) with the cheapest cases for its rates.
double evaluate_fixed(const Scenario& sc, const ContentCatalog& cat, const ChannelState& ch, const RequestMatrix& req,
                      bool coop, Rng& rng, SlotState& s) {
    auto acc = access_rates(ch, s.st.tau, s.st.p, sc);
    auto dec = decide_cases(sc, s.st.rho, s.st.tau, req, s.served, acc, coop, rng);
    s.st.x = dec.x;
    s.st.y = dec.y;
    s.st.z = dec.z;
    set_link_rates(s.st, sc, req, s.served, acc);
    for (int i = 0; i < sc.B(); ++i)
        for (int b = 0; b < sc.B(); ++b) {
            if (i == b) continue;
            double load = 0;
            for (int c = 0; c < cat.C(); ++c) load += s.st.r_fh(i, b, c);
            if (load > sc.fh_cap(i, b)) return std::numeric_limits<double>::infinity();
        }
    s.obj = total_cost(s.st, sc, cat).total;
    return s.obj;
}

// Best move of one user, or of every requester of one content, to another BS,
// scored at minimal powers. The power based assignment ignores where contents
// are cached; this move does not.
bool best_reassociation(const Scenario& sc, const ContentCatalog& cat, const ChannelState& ch,
                        const RequestMatrix& req, const std::vector<double>& target, bool coop, Rng& rng,
                        const SlotState& cur, SlotState& out) {
    const int B = sc.B(), U = sc.U(), N = sc.N();
    const double W = sc.sub_bw, s2 = sc.noise_mw();
    auto bs_of = serving_bs(cur.st.tau);

    // Greedy subcarriers for u at b, least interference-to-gain first.
    auto place = [&](SlotState& cand, int u, int b) {
        std::vector<std::pair<double, int>> order;
        for (int n = 0; n < N; ++n) {
            int occ = 0;
            for (int i = 0; i < U; ++i) occ += cand.st.tau(b, i, n);
            if (occ >= sc.bss[b].l_max) continue;
            double in = snapshot_in(ch, cand.st.tau, cand.st.p, b, u, n, s2);
            order.emplace_back(in / ch.h(b, u, n), n);
        }
        std::sort(order.begin(), order.end());
        double cap = 0;
        for (auto [ratio, n] : order) {
            cand.st.tau(b, u, n) = 1;
            cap += W * std::log2(1.0 + sc.bss[b].p_mask / ratio);
            if (cap >= target[u]) break;
        }
        return cap >= target[u];
    };

    std::vector<std::vector<int>> groups;
    for (int u = 0; u < U; ++u)
        if (cur.served[u]) groups.push_back({u});
    for (int c = 0; c < cat.C(); ++c) {
        std::vector<int> g;
        for (int u = 0; u < U; ++u)
            if (cur.served[u] && req.content[u] == c) g.push_back(u);
        if (g.size() > 1) groups.push_back(g);
    }

    bool found = false;
    double best = cur.obj;
    for (const auto& g : groups) {
        for (int b = 0; b < B; ++b) {
            bool all_there = std::all_of(g.begin(), g.end(), [&](int u) { return bs_of[u] == b; });
            if (all_there) continue;
            SlotState cand = cur;
            for (int u : g)
                if (bs_of[u] != b) clear_user(cand.st.tau, cand.st.p, u);
            bool ok = true;
            for (int u : g)
                if (bs_of[u] != b && !(ok = place(cand, u, b))) break;
            if (!ok) continue;
            auto pc = power_control(sc, ch, cand.st.tau, target, cand.served);
            if (!pc.violators.empty()) continue;
            cand.st.p = pc.p;
            double obj = evaluate_fixed(sc, cat, ch, req, coop, rng, cand);
            if (obj < best) {
                best = obj;
                out = cand;
                found = true;
            }
        }
    }
    return found;
}
}  // namespace

namespace {

DeliveryResult delivery_slot(const Scenario& sc_in, const ContentCatalog& cat, const Array2<std::uint8_t>& rho,
                             const RequestMatrix& req, const ChannelState& ch, const PolicyConfig& policy,
                             const OrchestratorConfig& cfg, std::uint64_t tie_seed) {
    Scenario sc = effective_scenario(sc_in, policy);
    const int B = sc.B(), U = sc.U(), N = sc.N(), C = cat.C();
    const bool coop = policy.cooperation == Cooperation::Cooperative;
    Rng rng(tie_seed);
    DeliveryResult out;

    std::vector<std::uint8_t> served(U, 0);
    std::vector<double> target(U, 0.0);
    for (int u = 0; u < U; ++u)
        if (req.content[u] >= 0) {
            served[u] = 1;
            target[u] = cat.sizes[req.content[u]] / sc.slot_T * (1 + kDeadlineMargin);
            ++out.requests;
        }

    // Elastic initial point: assignment at zero interference, then minimal
    // powers; requests that still cannot meet their deadline are rejected.
    SlotState cur;
    cur.st = AllocationState(B, U, N, C);
    cur.st.rho = rho;
    {
        Array3<std::uint8_t> zt(B, U, N, 0);
        Array3<double> zp(B, U, N, 0.0);
        auto tr = assign_tau(sc, ch, zt, zp, target, served);
        cur.st.tau = tr.tau;
        for (int u : tr.flagged) {
            served[u] = 0;
            clear_user(cur.st.tau, cur.st.p, u);
        }
        while (true) {
            auto pc = power_control(sc, ch, cur.st.tau, target, served);
            if (pc.violators.empty()) {
                cur.st.p = pc.p;
                break;
            }
            int drop = weakest(sc, pc.violators);
            served[drop] = 0;
            clear_user(cur.st.tau, cur.st.p, drop);
        }
    }
    cur.served = served;
    DeliveryDecision dec;
    if (!cases_and_power(sc, cat, ch, req, coop, cfg, rng, cur, dec)) {
        // Capacity cannot be met even after spilling to backhaul: keep the
        // initial powers with backhaul-only fetches.
        auto acc = access_rates(ch, cur.st.tau, cur.st.p, sc);
        dec = decide_cases(sc, rho, cur.st.tau, req, served, acc, false, rng);
        cur.st.x = dec.x;
        cur.st.y = dec.y;
        cur.st.z = dec.z;
        set_link_rates(cur.st, sc, req, served, acc);
        cur.obj = total_cost(cur.st, sc, cat).total;
    }
    out.trace.push_back(cur.obj);
    out.sca_traces.push_back(cur.sca);

    for (int it = 1; it <= cfg.delivery_asm.max_iters; ++it) {
        SlotState best = cur;
        DeliveryDecision best_dec = dec;
        // Assignment step under the current interference snapshot.
        auto tr = assign_tau(sc, ch, cur.st.tau, cur.st.p, target, served);
        if (tr.flagged.empty() && !(tr.tau == cur.st.tau)) {
            auto pc = power_control(sc, ch, tr.tau, target, served);
            if (pc.violators.empty()) {
                SlotState cand = cur;
                cand.st.tau = tr.tau;
                cand.st.p = pc.p;
                DeliveryDecision cdec;
                if (cases_and_power(sc, cat, ch, req, coop, cfg, rng, cand, cdec) && cand.obj < best.obj) {
                    best = cand;
                    best_dec = cdec;
                }
            }
        }
        // Reassociation moves, then cases and resources from there.
        if (cfg.reassociation) {
            SlotState moved;
            if (best_reassociation(sc, cat, ch, req, target, coop, rng, cur, moved)) {
                DeliveryDecision mdec;
                if (cases_and_power(sc, cat, ch, req, coop, cfg, rng, moved, mdec) && moved.obj < best.obj) {
                    best = moved;
                    best_dec = mdec;
                }
            }
        }
        // Cases and resources on the current assignment.
        {
            SlotState again = cur;
            DeliveryDecision adec;
            if (cases_and_power(sc, cat, ch, req, coop, cfg, rng, again, adec) && again.obj < best.obj) {
                best = again;
                best_dec = adec;
            }
        }
        double prev = cur.obj;
        cur = best;
        dec = best_dec;
        out.trace.push_back(cur.obj);
        out.sca_traces.push_back(cur.sca);
        out.iterations = it;
        if (std::abs(prev - cur.obj) <= cfg.delivery_asm.tolerance * std::max(std::abs(prev), 1e-300)) break;
    }

    out.state = cur.st;
    out.decision = dec;
    out.served = cur.served;
    out.cost = total_cost(out.state, sc, cat);
    int ok = 0;
    for (int u = 0; u < U; ++u) ok += (req.content[u] >= 0 && out.served[u]);
    out.cost.acceptance_ratio = out.requests ? static_cast<double>(ok) / out.requests : 1.0;
    return out;
}

}  // namespace

DeliveryResult run_delivery_slot(const Scenario& sc, const ContentCatalog& cat, const Array2<std::uint8_t>& rho,
                                 const RequestMatrix& req, const ChannelState& ch, const PolicyConfig& policy,
                                 const OrchestratorConfig& cfg, std::uint64_t tie_seed) {
    // OMA and non-cooperative states are feasible for NOMA and cooperative
    // policies; solve each restriction too and keep the best.
    std::vector<PolicyConfig> variants{policy};
    auto add = [&](Access a, Cooperation c) {
        PolicyConfig v = policy;
        v.access = a;
        v.cooperation = c;
        for (const auto& w : variants)
            if (w.access == a && w.cooperation == c) return;
        variants.push_back(v);
    };
    if (policy.access == Access::NOMA) add(Access::OMA, policy.cooperation);
    if (policy.cooperation == Cooperation::Cooperative) add(policy.access, Cooperation::NonCooperative);
    if (policy.access == Access::NOMA && policy.cooperation == Cooperation::Cooperative)
        add(Access::OMA, Cooperation::NonCooperative);

    DeliveryResult best = delivery_slot(sc, cat, rho, req, ch, variants[0], cfg, tie_seed);
    for (size_t k = 1; k < variants.size(); ++k) {
        DeliveryResult r = delivery_slot(sc, cat, rho, req, ch, variants[k], cfg, tie_seed);
        bool more = r.cost.acceptance_ratio > best.cost.acceptance_ratio;
        bool same = r.cost.acceptance_ratio == best.cost.acceptance_ratio;
        if (more || (same && r.cost.total < best.cost.total)) best = std::move(r);
    }
    return best;
}

}  // namespace hetnet
