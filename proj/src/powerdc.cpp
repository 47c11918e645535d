#include "hetnet/powerdc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>

namespace hetnet {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kLn2 = 0.69314718055994530942;
constexpr double kFeasTol = 1e-9;

// ---------------------------------------------------------------------------
// Full-array helpers

double interference_plus_noise(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p,
                               int b, int u, int n, double noise) {
    return intra_interference(ch, tau, p, b, u, n) + inter_interference(ch, tau, p, b, u, n) + noise;
}

// d(interference)/dp for every entry; own entry stays 0.
Array3<double> interference_coefs(const ChannelState& ch, const Array3<std::uint8_t>& tau, int b, int u, int n) {
    Array3<double> c(tau.dim0(), tau.dim1(), tau.dim2(), 0.0);
    double hu = ch.h(b, u, n);
    for (int i = 0; i < tau.dim1(); ++i)
        if (i != u && tau(b, i, n) && ch.h(b, i, n) >= hu) c(b, i, n) = hu;
    for (int j = 0; j < tau.dim0(); ++j) {
        if (j == b) continue;
        for (int d = 0; d < tau.dim1(); ++d)
            if (tau(j, d, n)) c(j, d, n) = ch.h(j, u, n);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Reduced problem over the active power entries, in scaled units x = p / scale.

struct SparseAff {
    double c0 = 0;
    std::vector<int> idx;
    std::vector<double> coef;
    double eval(const VectorXd& x) const {
        double v = c0;
        for (size_t k = 0; k < idx.size(); ++k) v += coef[k] * x[idx[k]];
        return v;
    }
};

struct LogTerm {
    SparseAff aff;
    double w;
};

// c0 + lin'x - sum_t w_t ln(aff_t(x)); convex for w_t >= 0.
struct LogSumFn {
    double c0 = 0;
    VectorXd lin;
    std::vector<LogTerm> logs;
    std::vector<int> support;  // sorted union of the nonzero lin entries and every log term's variables

    void finalize() {
        support.clear();
        for (int k = 0; k < lin.size(); ++k)
            if (lin[k] != 0) support.push_back(k);
        for (const auto& t : logs) support.insert(support.end(), t.aff.idx.begin(), t.aff.idx.end());
        std::sort(support.begin(), support.end());
        support.erase(std::unique(support.begin(), support.end()), support.end());
    }

    // Writes g and H on `support` only.
    double operator()(const VectorXd& x, VectorXd* g, MatrixXd* H) const {
        if (g)
            for (int k : support) (*g)[k] = lin[k];
        if (H)
            for (int k : support)
                for (int l : support) (*H)(k, l) = 0;
        double v = c0 + lin.dot(x);
        for (const auto& t : logs) {
            double a = t.aff.eval(x);
            if (!(a > 0)) return std::numeric_limits<double>::infinity();
            v -= t.w * std::log(a);
            const auto& id = t.aff.idx;
            const auto& cf = t.aff.coef;
            if (g)
                for (size_t k = 0; k < id.size(); ++k) (*g)[id[k]] -= t.w * cf[k] / a;
            if (H) {
                double s = t.w / (a * a);
                for (size_t k = 0; k < id.size(); ++k)
                    for (size_t l = 0; l < id.size(); ++l) (*H)(id[k], id[l]) += s * cf[k] * cf[l];
            }
        }
        return v;
    }
};

// Appends f to `fns` and its support to `supports`.
void push_term(std::vector<SmoothFn>& fns, std::vector<std::vector<int>>& supports, LogSumFn f) {
    f.finalize();
    if (f.support.empty() && f.lin.size() > 0) f.support.push_back(0);  // constant term
    supports.push_back(f.support);
    auto sp = std::make_shared<LogSumFn>(std::move(f));
    fns.push_back([sp](const VectorXd& x, VectorXd* g, MatrixXd* H) { return (*sp)(x, g, H); });
}

struct VarMap {
    Array3<int> idx;
    std::vector<std::array<int, 3>> entries;
    std::vector<double> scale;
    int n_power() const { return static_cast<int>(entries.size()); }
};

VarMap make_varmap(const Scenario& sc, const Array3<std::uint8_t>& tau, const Array3<double>& p0,
                   const std::function<bool(int, int, int)>& active) {
    VarMap vm;
    vm.idx = Array3<int>(sc.B(), sc.U(), sc.N(), -1);
    for (int b = 0; b < sc.B(); ++b)
        for (int u = 0; u < sc.U(); ++u)
            for (int n = 0; n < sc.N(); ++n)
                if (tau(b, u, n) && active(b, u, n)) {
                    vm.idx(b, u, n) = static_cast<int>(vm.entries.size());
                    vm.entries.push_back({b, u, n});
                    vm.scale.push_back(std::max(p0(b, u, n), 1e-6 * sc.bss[b].p_mask));
                }
    return vm;
}

struct RateAff {
    SparseAff full;  // signal + interference + noise
    SparseAff intf;  // interference + noise
    double W;
};

RateAff build_rate_aff(const ChannelState& ch, const Array3<std::uint8_t>& tau, const VarMap& vm, int b, int u, int n,
                       const Scenario& sc) {
    RateAff r;
    r.W = sc.sub_bw;
    r.full.c0 = r.intf.c0 = sc.noise_mw();
    double hu = ch.h(b, u, n);
    auto add = [&](int j, int d, double c) {
        int k = vm.idx(j, d, n);
        if (k < 0) return;
        r.full.idx.push_back(k);
        r.full.coef.push_back(c * vm.scale[k]);
        r.intf.idx.push_back(k);
        r.intf.coef.push_back(c * vm.scale[k]);
    };
    for (int i = 0; i < sc.U(); ++i)
        if (i != u && tau(b, i, n) && ch.h(b, i, n) >= hu) add(b, i, hu);
    for (int j = 0; j < sc.B(); ++j) {
        if (j == b) continue;
        for (int d = 0; d < sc.U(); ++d)
            if (tau(j, d, n)) add(j, d, ch.h(j, u, n));
    }
    int own = vm.idx(b, u, n);
    if (own >= 0) {
        r.full.idx.push_back(own);
        r.full.coef.push_back(hu * vm.scale[own]);
    }
    return r;
}

// Adds  weight * sum_t r^DC_t(x)  with g linearized at x0, as
// constant / linear / log pieces of a LogSumFn with a leading minus sign.
void add_lower_surrogate(LogSumFn& fn, const RateAff& r, const VectorXd& x0, double weight) {
    double a0 = r.intf.eval(x0);
    double k = r.W / kLn2;
    double g0 = k * std::log(a0);
    fn.c0 += weight * g0;
    for (size_t i = 0; i < r.intf.idx.size(); ++i) {
        double gi = k * r.intf.coef[i] / a0;
        fn.lin[r.intf.idx[i]] += weight * gi;
        fn.c0 -= weight * gi * x0[r.intf.idx[i]];
    }
    fn.logs.push_back({r.full, weight * k});
}

// Adds  sum_t r'^DC_t(x)  with f linearized at x0.
void add_upper_surrogate(LogSumFn& fn, const RateAff& r, const VectorXd& x0, double weight) {
    double a0 = r.full.eval(x0);
    double k = r.W / kLn2;
    fn.c0 += weight * k * std::log(a0);
    for (size_t i = 0; i < r.full.idx.size(); ++i) {
        double gi = k * r.full.coef[i] / a0;
        fn.lin[r.full.idx[i]] += weight * gi;
        fn.c0 -= weight * gi * x0[r.full.idx[i]];
    }
    fn.logs.push_back({r.intf, weight * k});
}

struct LinearRows {
    std::vector<VectorXd> rows;
    std::vector<double> rhs;
    void add(VectorXd a, double b) {
        rows.push_back(std::move(a));
        rhs.push_back(b);
    }
};

void add_box_and_budget(LinearRows& L, const Scenario& sc, const VarMap& vm, int nvars) {
    for (int k = 0; k < vm.n_power(); ++k) {
        VectorXd a = VectorXd::Zero(nvars);
        a[k] = -1.0;
        L.add(a, 0.0);
        int b = vm.entries[k][0];
        VectorXd c = VectorXd::Zero(nvars);
        c[k] = 1.0;
        L.add(c, sc.bss[b].p_mask / vm.scale[k]);
    }
    for (int b = 0; b < sc.B(); ++b) {
        VectorXd a = VectorXd::Zero(nvars);
        bool any = false;
        for (int k = 0; k < vm.n_power(); ++k)
            if (vm.entries[k][0] == b) {
                a[k] = vm.scale[k] / sc.bss[b].p_max;
                any = true;
            }
        if (any) L.add(a, 1.0);
    }
}

// Cross-multiplied SIC rows for pairs at BSs that transmit; strict channel order only.
void add_sic_rows(LinearRows& L, const Scenario& sc, const ChannelState& ch, const Array3<std::uint8_t>& tau,
                  const VarMap& vm, int nvars) {
    for (int b = 0; b < sc.B(); ++b)
        for (int n = 0; n < sc.N(); ++n)
            for (int u = 0; u < sc.U(); ++u) {
                if (!tau(b, u, n) || vm.idx(b, u, n) < 0) continue;
                for (int w = 0; w < sc.U(); ++w) {
                    if (w == u || !tau(b, w, n) || vm.idx(b, w, n) < 0) continue;
                    double hu = ch.h(b, u, n), hw = ch.h(b, w, n);
                    if (!(hu > hw)) continue;
                    auto ru = build_rate_aff(ch, tau, vm, b, u, n, sc);
                    auto rw = build_rate_aff(ch, tau, vm, b, w, n, sc);
                    VectorXd a = VectorXd::Zero(nvars);
                    double s2 = sc.noise_mw();
                    double norm = hu * s2;
                    for (size_t i = 0; i < ru.intf.idx.size(); ++i) a[ru.intf.idx[i]] += hw * ru.intf.coef[i] / norm;
                    for (size_t i = 0; i < rw.intf.idx.size(); ++i) a[rw.intf.idx[i]] -= hu * rw.intf.coef[i] / norm;
                    L.add(a, 1.0 - hw / hu);
                }
            }
}

void load_rows(BarrierProblem& pr, const LinearRows& L) {
    pr.A = MatrixXd::Zero(static_cast<int>(L.rows.size()), pr.n);
    pr.b = VectorXd::Zero(static_cast<int>(L.rows.size()));
    for (size_t i = 0; i < L.rows.size(); ++i) {
        pr.A.row(static_cast<int>(i)) = L.rows[i].transpose();
        pr.b[static_cast<int>(i)] = L.rhs[i];
    }
}

Array3<double> to_full(const Scenario& sc, const VarMap& vm, const VectorXd& x) {
    Array3<double> p(sc.B(), sc.U(), sc.N(), 0.0);
    for (int k = 0; k < vm.n_power(); ++k) {
        auto [b, u, n] = vm.entries[k];
        p(b, u, n) = std::clamp(vm.scale[k] * x[k], 0.0, sc.bss[b].p_mask);
    }
    return p;
}

// Normalized violation of mask, budget and SIC; <= 0 when satisfied.
double power_violation(const Scenario& sc, const ChannelState& sic_ch, const Array3<std::uint8_t>& tau,
                       const Array3<double>& p) {
    double worst = -1.0;
    for (int b = 0; b < sc.B(); ++b) {
        double sum = 0;
        for (int u = 0; u < sc.U(); ++u)
            for (int n = 0; n < sc.N(); ++n) {
                double v = p(b, u, n);
                sum += v;
                worst = std::max(worst, -v / std::max(sc.bss[b].p_mask, 1e-300));
                worst = std::max(worst, (v - sc.bss[b].p_mask) / std::max(sc.bss[b].p_mask, 1e-300));
            }
        if (sc.bss[b].p_max > 0) worst = std::max(worst, sum / sc.bss[b].p_max - 1.0);
        else if (sum > 0) worst = std::max(worst, 1.0);
    }
    double s2 = sc.noise_mw();
    for (int b = 0; b < sc.B(); ++b)
        for (int n = 0; n < sc.N(); ++n)
            for (int u = 0; u < sc.U(); ++u) {
                if (!tau(b, u, n) || p(b, u, n) <= 0) continue;
                for (int w = 0; w < sc.U(); ++w) {
                    if (w == u || !tau(b, w, n) || p(b, w, n) <= 0) continue;
                    double hu = sic_ch.h(b, u, n), hw = sic_ch.h(b, w, n);
                    if (!(hu > hw)) continue;
                    double iu = interference_plus_noise(sic_ch, tau, p, b, u, n, s2);
                    double iw = interference_plus_noise(sic_ch, tau, p, b, w, n, s2);
                    worst = std::max(worst, (hw * iu - hu * iw) / (hu * iw));
                }
            }
    return worst;
}

}  // namespace

// ---------------------------------------------------------------------------

DcValue dc_decompose(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p, int b, int u,
                     int n, const Scenario& sc) {
    double in = interference_plus_noise(ch, tau, p, b, u, n, sc.noise_mw());
    double sig = tau(b, u, n) ? p(b, u, n) * ch.h(b, u, n) : 0.0;
    double W = sc.sub_bw;
    return {W * std::log2(sig + in), W * std::log2(in)};
}

Array3<double> grad_g(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p_anchor, int b,
                      int u, int n, const Scenario& sc) {
    auto c = interference_coefs(ch, tau, b, u, n);
    double in = interference_plus_noise(ch, tau, p_anchor, b, u, n, sc.noise_mw());
    double k = sc.sub_bw / (kLn2 * in);
    for (auto& v : c.raw()) v *= k;
    return c;
}

Array3<double> grad_f(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p_anchor, int b,
                      int u, int n, const Scenario& sc) {
    auto c = interference_coefs(ch, tau, b, u, n);
    if (tau(b, u, n)) c(b, u, n) = ch.h(b, u, n);
    double in = interference_plus_noise(ch, tau, p_anchor, b, u, n, sc.noise_mw());
    double sig = tau(b, u, n) ? p_anchor(b, u, n) * ch.h(b, u, n) : 0.0;
    double k = sc.sub_bw / (kLn2 * (sig + in));
    for (auto& v : c.raw()) v *= k;
    return c;
}

namespace {
double dot_delta(const Array3<double>& g, const Array3<double>& p, const Array3<double>& p0) {
    double s = 0;
    for (size_t i = 0; i < g.raw().size(); ++i) s += g.raw()[i] * (p.raw()[i] - p0.raw()[i]);
    return s;
}
}  // namespace

double rate_lower_dc(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p_anchor,
                     const Array3<double>& p, int b, int u, int n, const Scenario& sc) {
    auto cur = dc_decompose(ch, tau, p, b, u, n, sc);
    auto anc = dc_decompose(ch, tau, p_anchor, b, u, n, sc);
    return cur.f - (anc.g + dot_delta(grad_g(ch, tau, p_anchor, b, u, n, sc), p, p_anchor));
}

double rate_upper_dc(const ChannelState& ch, const Array3<std::uint8_t>& tau, const Array3<double>& p_anchor,
                     const Array3<double>& p, int b, int u, int n, const Scenario& sc) {
    auto cur = dc_decompose(ch, tau, p, b, u, n, sc);
    auto anc = dc_decompose(ch, tau, p_anchor, b, u, n, sc);
    return anc.f + dot_delta(grad_f(ch, tau, p_anchor, b, u, n, sc), p, p_anchor) - cur.g;
}

double caching_objective(const Scenario& sc, const Array3<std::uint8_t>& tau, const Array3<double>& p) {
    AllocationState s;
    s.p = p;
    double cost = 0;
    for (int b = 0; b < sc.B(); ++b) cost += bs_power_cost(s, sc, b);
    long long taus = 0;
    for (auto t : tau.raw()) taus += t;
    return cost + sc.cost.c_bw * static_cast<double>(taus) * (sc.sub_bw / 1000.0);
}

void write_trace_csv(const std::string& path, const std::vector<ScaTraceRow>& trace) {
    if (path.empty()) return;
    std::ofstream out(path);
    out << "iteration,objective,max_violation\n";
    char buf[128];
    for (const auto& r : trace) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", r.iteration, r.objective, r.max_violation);
        out << buf;
    }
}

// ---------------------------------------------------------------------------
// Caching phase

namespace {

// Worst normalized shortfall of T*E{r_b} against demand[b]; <= 0 when met.
double budget_violation(const Scenario& sc, const std::vector<ChannelState>& samples, const Array3<std::uint8_t>& tau,
                        const Array3<double>& p, const std::vector<double>& demand) {
    auto er = ergodic_rate(samples, tau, p, sc);
    double worst = -1.0;
    for (int b = 0; b < sc.B(); ++b) {
        if (demand[b] <= 0) continue;
        double q = 0;
        for (int u = 0; u < sc.U(); ++u) q += sc.slot_T * er(b, u);
        worst = std::max(worst, (demand[b] - q) / demand[b]);
    }
    return worst;
}

}  // namespace

PowerCachingResult solve_power_caching(const Scenario& sc, const std::vector<ChannelState>& samples,
                                       const ChannelState& sic_channel, const Array3<std::uint8_t>& tau,
                                       const std::vector<double>& demand, const Array3<double>& p0_in,
                                       const ScaOptions& opt) {
    if (static_cast<int>(demand.size()) != sc.B()) throw StructuralError("demand needs one entry per BS");
    PowerCachingResult res;
    // BSs with nothing to deliver stay silent.
    Array3<double> p0 = p0_in;
    for (int b = 0; b < sc.B(); ++b)
        if (demand[b] <= 0)
            for (int u = 0; u < sc.U(); ++u)
                for (int n = 0; n < sc.N(); ++n) p0(b, u, n) = 0;

    auto violation = [&](const Array3<double>& p) {
        return std::max(power_violation(sc, sic_channel, tau, p), budget_violation(sc, samples, tau, p, demand));
    };
    double v0 = violation(p0);
    if (v0 > kFeasTol) throw InfeasibleError("caching power anchor infeasible; use the elastic initial point");

    double obj = caching_objective(sc, tau, p0);
    res.p = p0;
    res.trace.push_back({0, obj, std::max(0.0, v0)});

    VarMap vm = make_varmap(sc, tau, p0, [&](int b, int, int) { return demand[b] > 0; });
    const int nv = vm.n_power();
    if (nv == 0) {
        write_trace_csv(opt.trace_path, res.trace);
        return res;
    }

    for (int k = 1; k <= opt.k_max; ++k) {
        vm = make_varmap(sc, tau, res.p, [&](int b, int, int) { return demand[b] > 0; });
        VectorXd x0(nv);
        for (int i = 0; i < nv; ++i) {
            auto [b, u, n] = vm.entries[i];
            x0[i] = res.p(b, u, n) / vm.scale[i];
        }
        BarrierProblem pr;
        pr.n = nv;
        pr.c = VectorXd::Zero(nv);
        for (int i = 0; i < nv; ++i) pr.c[i] = sc.cost.c_power * vm.scale[i];
        LinearRows L;
        add_box_and_budget(L, sc, vm, nv);
        add_sic_rows(L, sc, sic_channel, tau, vm, nv);
        load_rows(pr, L);
        const double inv_S = 1.0 / static_cast<double>(samples.size());
        for (int b = 0; b < sc.B(); ++b) {
            if (demand[b] <= 0) continue;
            LogSumFn fn;
            fn.lin = VectorXd::Zero(nv);
            fn.c0 = demand[b];
            // demand - T * mean_s sum_{u,n} r^DC  <= 0, scaled by 1/demand
            double w = -sc.slot_T * inv_S;
            for (const auto& ch : samples)
                for (int i = 0; i < nv; ++i) {
                    auto [bb, u, n] = vm.entries[i];
                    if (bb != b) continue;
                    auto r = build_rate_aff(ch, tau, vm, b, u, n, sc);
                    // add_*_surrogate adds +weight*(g pieces) and a log term with
                    // weight*k; negative weight flips the sign of r^DC.
                    double a0 = r.intf.eval(x0);
                    double kk = r.W / kLn2;
                    fn.c0 -= w * kk * std::log(a0);
                    for (size_t j = 0; j < r.intf.idx.size(); ++j) {
                        double gj = kk * r.intf.coef[j] / a0;
                        fn.lin[r.intf.idx[j]] -= w * gj;
                        fn.c0 += w * gj * x0[r.intf.idx[j]];
                    }
                    fn.logs.push_back({r.full, -w * kk});
                }
            fn.c0 /= demand[b];
            fn.lin /= demand[b];
            for (auto& t : fn.logs) t.w /= demand[b];
            push_term(pr.cons, pr.cons_support, std::move(fn));
        }
        auto sol = barrier_solve(pr, x0, opt.inner);
        if (sol.status != "optimal") break;
        Array3<double> pn = to_full(sc, vm, sol.x);
        double vn = violation(pn);
        double on = caching_objective(sc, tau, pn);
        if (vn > kFeasTol || on > obj) break;
        double prev = obj;
        res.p = pn;
        obj = on;
        res.trace.push_back({k, obj, std::max(0.0, vn)});
        if (std::abs(prev - obj) <= opt.epsilon * std::max(std::abs(prev), 1e-300)) break;
    }
    write_trace_csv(opt.trace_path, res.trace);
    return res;
}

// ---------------------------------------------------------------------------
// Delivery phase

void set_link_rates(AllocationState& st, const Scenario& sc, const RequestMatrix& req,
                    const std::vector<std::uint8_t>& served, const std::vector<double>& access) {
    const int B = sc.B(), C = st.rho.dim1();
    std::vector<int> bs_of(sc.U(), -1);
    for (int b = 0; b < B; ++b)
        for (int u = 0; u < sc.U(); ++u)
            for (int n = 0; n < sc.N(); ++n)
                if (st.tau(b, u, n)) bs_of[u] = b;
    std::fill(st.r_fh.raw().begin(), st.r_fh.raw().end(), 0.0);
    std::fill(st.r_bh.raw().begin(), st.r_bh.raw().end(), 0.0);
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            bool any_y = false;
            for (int i = 0; i < B; ++i) any_y = any_y || (i != b && st.y(i, b, c));
            if (!any_y && !st.z(b, c)) continue;
            double r = 0;
            bool first = true;
            for (int u = 0; u < sc.U(); ++u) {
                if (!served[u] || bs_of[u] != b || req.content[u] != c) continue;
                double a = access[u];
                if (first) r = a;
                else r = sc.link_bound == LinkRateBound::Min ? std::min(r, a) : std::max(r, a);
                first = false;
            }
            for (int i = 0; i < B; ++i)
                if (i != b && st.y(i, b, c)) st.r_fh(i, b, c) = r;
            if (st.z(b, c)) st.r_bh(b, c) = r;
        }
}

namespace {

struct DeliveryEval {
    double objective;
    double violation;
    AllocationState state;
};

DeliveryEval evaluate_delivery(const Scenario& sc, const ContentCatalog& cat, const ChannelState& ch,
                               const AllocationState& base, const RequestMatrix& req,
                               const std::vector<std::uint8_t>& served, const Array3<double>& p) {
    DeliveryEval ev{0, -1.0, base};
    ev.state.p = p;
    auto acc = access_rates(ch, base.tau, p, sc);
    set_link_rates(ev.state, sc, req, served, acc);
    ev.objective = total_cost(ev.state, sc, cat).total;
    ev.violation = power_violation(sc, ch, base.tau, p);
    for (int u = 0; u < sc.U(); ++u) {
        if (!served[u] || req.content[u] < 0) continue;
        double s = cat.sizes[req.content[u]];
        ev.violation = std::max(ev.violation, (s - sc.slot_T * acc[u]) / s);
    }
    return ev;
}

}  // namespace

PowerDeliveryResult solve_power_delivery(const Scenario& sc, const ContentCatalog& cat, const ChannelState& ch,
                                         const AllocationState& state, const RequestMatrix& req,
                                         const std::vector<std::uint8_t>& served, const Array3<double>& p0,
                                         const ScaOptions& opt) {
    PowerDeliveryResult res;
    const int B = sc.B(), U = sc.U(), C = cat.C();
    auto ev = evaluate_delivery(sc, cat, ch, state, req, served, p0);
    if (ev.violation > kFeasTol) throw InfeasibleError("delivery power anchor infeasible; use the elastic initial point");
    res.trace.push_back({0, ev.objective, std::max(0.0, ev.violation)});
    Array3<double> p = p0;
    double obj = ev.objective;
    AllocationState best = ev.state;

    std::vector<int> bs_of(U, -1);
    for (int b = 0; b < B; ++b)
        for (int u = 0; u < U; ++u)
            for (int n = 0; n < sc.N(); ++n)
                if (state.tau(b, u, n)) bs_of[u] = b;

    auto is_var = [&](int, int u, int) { return served[u] != 0; };
    VarMap vm0 = make_varmap(sc, state.tau, p0, is_var);
    if (vm0.n_power() > 0) {
        for (int k = 1; k <= opt.k_max; ++k) {
            VarMap vm = make_varmap(sc, state.tau, p, is_var);
            const int np = vm.n_power();
            auto acc = access_rates(ch, state.tau, p, sc);

            // One epigraph variable per active (b, c) link term.
            struct LinkTerm {
                double price;
                std::vector<int> users;
                double r0;
            };
            std::vector<LinkTerm> links;
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < C; ++c) {
                    bool any_y = false;
                    for (int i = 0; i < B; ++i) any_y = any_y || (i != b && state.y(i, b, c));
                    if (!any_y && !state.z(b, c)) continue;
                    double price = (any_y ? sc.cost.c_fh : 0.0) + (state.z(b, c) ? sc.cost.c_bh : 0.0);
                    std::vector<int> users;
                    for (int u = 0; u < U; ++u)
                        if (served[u] && bs_of[u] == b && req.content[u] == c) users.push_back(u);
                    if (users.empty()) continue;
                    LinkTerm lt{price, {}, 0};
                    if (sc.link_bound == LinkRateBound::Min) {
                        int arg = users[0];
                        for (int u : users)
                            if (acc[u] < acc[arg]) arg = u;
                        lt.users = {arg};
                        lt.r0 = acc[arg];
                    } else {
                        lt.users = users;
                        for (int u : users) lt.r0 = std::max(lt.r0, acc[u]);
                    }
                    lt.r0 = std::max(lt.r0, 1.0);
                    links.push_back(std::move(lt));
                }
            const int nv = np + static_cast<int>(links.size());

            VectorXd x0(nv);
            for (int i = 0; i < np; ++i) {
                auto [b, u, n] = vm.entries[i];
                x0[i] = p(b, u, n) / vm.scale[i];
            }
            for (size_t l = 0; l < links.size(); ++l) x0[np + static_cast<int>(l)] = 1.0 + 1e-3;

            BarrierProblem pr;
            pr.n = nv;
            pr.c = VectorXd::Zero(nv);
            for (int i = 0; i < np; ++i) pr.c[i] = sc.cost.c_power * vm.scale[i];
            for (size_t l = 0; l < links.size(); ++l) pr.c[np + static_cast<int>(l)] = links[l].price * links[l].r0;
            LinearRows L;
            add_box_and_budget(L, sc, vm, nv);
            add_sic_rows(L, sc, ch, state.tau, vm, nv);
            load_rows(pr, L);

            // Deadlines: s_c - T * sum_n r^DC <= 0, scaled by 1/s_c.
            for (int u = 0; u < U; ++u) {
                if (!served[u] || req.content[u] < 0 || bs_of[u] < 0) continue;
                double s = cat.sizes[req.content[u]];
                LogSumFn fn;
                fn.lin = VectorXd::Zero(nv);
                fn.c0 = 0;
                LogSumFn tmp;
                tmp.lin = VectorXd::Zero(nv);
                for (int n = 0; n < sc.N(); ++n)
                    if (vm.idx(bs_of[u], u, n) >= 0)
                        add_lower_surrogate(tmp, build_rate_aff(ch, state.tau, vm, bs_of[u], u, n, sc), x0, 1.0);
                // tmp encodes  c0 + lin'x - sum w ln(.)  =  -(sum r^DC); flip into s - T*sum r^DC.
                fn.c0 = (s + sc.slot_T * tmp.c0) / s;
                fn.lin = sc.slot_T * tmp.lin / s;
                for (auto& t : tmp.logs) fn.logs.push_back({t.aff, sc.slot_T * t.w / s});
                push_term(pr.cons, pr.cons_support, std::move(fn));
            }
            // Epigraph: sum_n r'^DC_u - r0 * x_t <= 0, scaled by 1/r0.
            for (size_t l = 0; l < links.size(); ++l) {
                for (int u : links[l].users) {
                    LogSumFn fn;
                    fn.lin = VectorXd::Zero(nv);
                    for (int n = 0; n < sc.N(); ++n)
                        if (vm.idx(bs_of[u], u, n) >= 0)
                            add_upper_surrogate(fn, build_rate_aff(ch, state.tau, vm, bs_of[u], u, n, sc), x0, 1.0);
                    fn.lin[np + static_cast<int>(l)] -= links[l].r0;
                    fn.c0 /= links[l].r0;
                    fn.lin /= links[l].r0;
                    for (auto& t : fn.logs) t.w /= links[l].r0;
                    push_term(pr.cons, pr.cons_support, std::move(fn));
                }
            }

            auto sol = barrier_solve(pr, x0, opt.inner);
            if (sol.status != "optimal") break;
            Array3<double> pn = to_full(sc, vm, sol.x.head(np));
            auto evn = evaluate_delivery(sc, cat, ch, state, req, served, pn);
            if (evn.violation > kFeasTol || evn.objective > obj) break;
            double prev = obj;
            p = pn;
            obj = evn.objective;
            best = evn.state;
            res.trace.push_back({k, obj, std::max(0.0, evn.violation)});
            if (std::abs(prev - obj) <= opt.epsilon * std::max(std::abs(prev), 1e-300)) break;
        }
    }
    res.p = p;
    res.r_fh = best.r_fh;
    res.r_bh = best.r_bh;
    for (int i = 0; i < B; ++i)
        for (int b = 0; b < B; ++b) {
            if (i == b) continue;
            double load = 0;
            for (int c = 0; c < C; ++c) load += res.r_fh(i, b, c);
            if (load > sc.fh_cap(i, b) * (1 + 1e-12)) res.capacity_violations.push_back({i, b, load, sc.fh_cap(i, b)});
        }
    write_trace_csv(opt.trace_path, res.trace);
    return res;
}

}  // namespace hetnet
