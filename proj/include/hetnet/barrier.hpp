#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hetnet {

// Returns f(x); fills gradient and Hessian when the pointers are non-null.
using SmoothFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*, Eigen::MatrixXd*)>;

// minimize c'x + sum(objective terms)   s.t.  A x <= b,  g_i(x) <= 0
// All objective terms and g_i must be convex.
struct BarrierProblem {
    int n = 0;
    Eigen::VectorXd c;
    std::vector<SmoothFn> objective;
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    std::vector<SmoothFn> cons;
    // Optional, parallel to `objective` / `cons`. A non-empty support lists the
    // only variables a term depends on; such a term writes exactly those
    // entries of g and H (rows and columns) and leaves the rest untouched.
    std::vector<std::vector<int>> objective_support;
    std::vector<std::vector<int>> cons_support;
};

struct BarrierOptions {
    double mu = 10.0;
    double newton_tol = 1e-8;
    double kkt_tol = 1e-6;
    int max_newton = 100;
    int max_outer = 40;
};

struct BarrierResult {
    Eigen::VectorXd x;
    double objective = 0;
    bool ok = false;
    int newton_steps = 0;
    std::string status;
};

double barrier_objective(const BarrierProblem& pr, const Eigen::VectorXd& x);

// Largest constraint value; the point is strictly feasible when this is < 0.
double max_violation(const BarrierProblem& pr, const Eigen::VectorXd& x);

// Log-barrier interior point method. Runs a phase-I search first when x0 is not
// strictly feasible; status is "no-interior" when none is found.
BarrierResult barrier_solve(const BarrierProblem& pr, const Eigen::VectorXd& x0, const BarrierOptions& opt = {});

}  // namespace hetnet
