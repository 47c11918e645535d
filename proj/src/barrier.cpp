#include "hetnet/barrier.hpp"

#include <cmath>
#include <limits>

namespace hetnet {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Centered {
    double value;
    VectorXd grad;
    MatrixXd hess;
};

// t * objective + log barrier. Returns +inf outside the strict interior.
double barrier_value(const BarrierProblem& pr, double t, const VectorXd& x, VectorXd* g, MatrixXd* H) {
    const int n = pr.n;
    if (g) g->setZero(n);
    if (H) H->setZero(n, n);
    double val = t * pr.c.dot(x);
    if (g) *g += t * pr.c;
    VectorXd tg = g ? VectorXd::Zero(n) : VectorXd();
    MatrixXd tH = H ? MatrixXd::Zero(n, n) : MatrixXd();
    auto support = [](const std::vector<std::vector<int>>& s, size_t i) -> const std::vector<int>* {
        return i < s.size() && !s[i].empty() ? &s[i] : nullptr;
    };
    auto reset = [&](const std::vector<int>* sp) {
        if (sp) return;
        if (g) tg.setZero();
        if (H) tH.setZero();
    };
    for (size_t i = 0; i < pr.objective.size(); ++i) {
        const auto* sp = support(pr.objective_support, i);
        reset(sp);
        val += t * pr.objective[i](x, g ? &tg : nullptr, H ? &tH : nullptr);
        if (sp) {
            for (int k : *sp) {
                if (g) (*g)[k] += t * tg[k];
                if (H)
                    for (int l : *sp) (*H)(k, l) += t * tH(k, l);
            }
        } else {
            if (g) *g += t * tg;
            if (H) *H += t * tH;
        }
    }
    if (pr.A.rows() > 0) {
        VectorXd slack = pr.b - pr.A * x;
        for (int i = 0; i < slack.size(); ++i) {
            if (!(slack[i] > 0)) return kInf;
            val -= std::log(slack[i]);
        }
        if (g) *g += pr.A.transpose() * slack.cwiseInverse();
        if (H) *H += pr.A.transpose() * slack.array().square().inverse().matrix().asDiagonal() * pr.A;
    }
    for (size_t i = 0; i < pr.cons.size(); ++i) {
        const auto* sp = support(pr.cons_support, i);
        reset(sp);
        double gi = pr.cons[i](x, g ? &tg : nullptr, H ? &tH : nullptr);
        if (!(gi < 0)) return kInf;
        val -= std::log(-gi);
        if (sp) {
            for (int k : *sp) {
                if (g) (*g)[k] += tg[k] / (-gi);
                if (H)
                    for (int l : *sp) (*H)(k, l) += tg[k] * tg[l] / (gi * gi) + tH(k, l) / (-gi);
            }
        } else {
            if (g) *g += tg / (-gi);
            if (H) {
                H->noalias() += (tg / gi) * (tg / gi).transpose();
                *H += tH / (-gi);
            }
        }
    }
    return val;
}

int constraint_count(const BarrierProblem& pr) { return static_cast<int>(pr.A.rows() + pr.cons.size()); }

// Newton centering at fixed t. Returns the number of steps taken.
int center(const BarrierProblem& pr, double t, VectorXd& x, const BarrierOptions& opt,
           const std::function<bool(const VectorXd&)>& stop) {
    const int n = pr.n;
    VectorXd g(n), xn(n);
    MatrixXd H(n, n);
    int steps = 0;
    for (; steps < opt.max_newton; ++steps) {
        double f = barrier_value(pr, t, x, &g, &H);
        if (!std::isfinite(f)) break;
        Eigen::LDLT<MatrixXd> ldlt(H);
        VectorXd dx = ldlt.solve(-g);
        if (ldlt.info() != Eigen::Success || !dx.allFinite() || g.dot(dx) >= 0) {
            double ridge = 1e-12 * (H.diagonal().cwiseAbs().maxCoeff() + 1.0);
            MatrixXd Hr = H + ridge * MatrixXd::Identity(n, n);
            dx = Hr.ldlt().solve(-g);
            if (!dx.allFinite() || g.dot(dx) >= 0) dx = -g / (H.diagonal().cwiseAbs().maxCoeff() + 1.0);
        }
        double lambda2 = -g.dot(dx);
        if (lambda2 / 2 <= opt.newton_tol) break;
        double s = 1.0;
        double fn = kInf;
        for (int ls = 0; ls < 200; ++ls) {
            xn = x + s * dx;
            fn = barrier_value(pr, t, xn, nullptr, nullptr);
            if (std::isfinite(fn) && fn <= f - 0.25 * s * lambda2) break;
            s *= 0.5;
        }
        if (!std::isfinite(fn) || fn > f) break;
        x = xn;
        if (stop && stop(x)) {
            ++steps;
            break;
        }
    }
    return steps;
}

double objective_value(const BarrierProblem& pr, const VectorXd& x) {
    double v = pr.c.size() ? pr.c.dot(x) : 0.0;
    for (const auto& f : pr.objective) v += f(x, nullptr, nullptr);
    return v;
}

BarrierResult run(const BarrierProblem& pr, VectorXd x, const BarrierOptions& opt,
                  const std::function<bool(const VectorXd&)>& stop) {
    BarrierResult res;
    const int m = constraint_count(pr);
    double f0 = objective_value(pr, x);
    double t = m > 0 ? std::max(1e-8, m / std::max(std::abs(f0), 1e-8)) : 1.0;
    for (int outer = 0; outer < opt.max_outer; ++outer) {
        res.newton_steps += center(pr, t, x, opt, stop);
        if (stop && stop(x)) break;
        double scale = std::max(1.0, std::abs(objective_value(pr, x)));
        if (m == 0 || m / t <= opt.kkt_tol * scale) break;
        t *= opt.mu;
    }
    res.x = x;
    res.objective = objective_value(pr, x);
    res.ok = true;
    res.status = "optimal";
    return res;
}

}  // namespace

double barrier_objective(const BarrierProblem& pr, const VectorXd& x) { return objective_value(pr, x); }

double max_violation(const BarrierProblem& pr, const VectorXd& x) {
    double worst = -kInf;
    if (pr.A.rows() > 0) worst = std::max(worst, (pr.A * x - pr.b).maxCoeff());
    for (const auto& con : pr.cons) worst = std::max(worst, con(x, nullptr, nullptr));
    return worst;
}

BarrierResult barrier_solve(const BarrierProblem& pr, const VectorXd& x0, const BarrierOptions& opt) {
    if (constraint_count(pr) == 0 || max_violation(pr, x0) < 0) return run(pr, x0, opt, nullptr);

    // Phase I: minimize s subject to every constraint <= s, with s >= -1.
    const int n = pr.n;
    BarrierProblem ph;
    ph.n = n + 1;
    ph.c = VectorXd::Zero(n + 1);
    ph.c[n] = 1.0;
    const int rows = static_cast<int>(pr.A.rows());
    ph.A = MatrixXd::Zero(rows + 1, n + 1);
    ph.b = VectorXd::Zero(rows + 1);
    if (rows > 0) {
        ph.A.topLeftCorner(rows, n) = pr.A;
        ph.A.col(n).head(rows).setConstant(-1.0);
        ph.b.head(rows) = pr.b;
    }
    ph.A(rows, n) = -1.0;
    ph.b[rows] = 1.0;
    for (const auto& con : pr.cons) {
        ph.cons.push_back([con, n](const VectorXd& xs, VectorXd* g, MatrixXd* H) {
            // Sparse terms write only their support, so the buffers start zeroed.
            VectorXd gx = g ? VectorXd::Zero(n) : VectorXd();
            MatrixXd Hx = H ? MatrixXd::Zero(n, n) : MatrixXd();
            double v = con(xs.head(n), g ? &gx : nullptr, H ? &Hx : nullptr);
            if (g) {
                g->setZero(n + 1);
                g->head(n) = gx;
                (*g)[n] = -1.0;
            }
            if (H) {
                H->setZero(n + 1, n + 1);
                H->topLeftCorner(n, n) = Hx;
            }
            return v - xs[n];
        });
    }
    VectorXd xs(n + 1);
    xs.head(n) = x0;
    double v0 = max_violation(pr, x0);
    if (!std::isfinite(v0)) {
        BarrierResult r;
        r.x = x0;
        r.status = "no-interior";
        return r;
    }
    xs[n] = v0 + std::max(1.0, std::abs(v0));
    auto interior = [&](const VectorXd& z) { return max_violation(pr, z.head(n)) < -1e-3; };
    BarrierOptions popt = opt;
    auto p1 = run(ph, xs, popt, interior);
    VectorXd x1 = p1.x.head(n);
    if (!(max_violation(pr, x1) < 0)) {
        BarrierResult r;
        r.x = x0;
        r.status = "no-interior";
        return r;
    }
    auto res = run(pr, x1, opt, nullptr);
    res.newton_steps += p1.newton_steps;
    return res;
}

}  // namespace hetnet
