#pragma once

// N-step apex planner over learned surrogates.
//
// Decision vector x = [s_1 .. s_N, a_0 .. a_{N-1}], each s = (y, xdot) and
// a = (alpha, delta_l). Equalities enforce the surrogate return map and the
// goal state; optional inequalities keep the surrogate failure margin at or
// above epsilon. Solved with an augmented Lagrangian outer loop around a
// projected limited-memory BFGS inner solver.

#include <aslip/box_lbfgs.hpp>
#include <aslip/dynamics.hpp>
#include <aslip/mlp.hpp>
#include <aslip/sampling.hpp>

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace aslip {

struct PlanTask {
    ApexState s0;
    ApexState s_goal;
    std::size_t horizon = 3;
    bool use_objective = true;
    bool use_margin = true;
    double epsilon = 0.05;
};

struct ObjectiveWeights {
    double y = 6.25;
    double xdot = 0.25;
};

struct SolverConfig {
    double feasibility_tol = 1e-6;
    double stationarity_tol = 1e-6;
    std::size_t max_outer_iterations = 500;
    std::size_t max_inner_iterations = 100;
    std::size_t lbfgs_memory = 7;
    std::size_t max_backtracks = 20;
    // Relative-decrease stop for inner solves looser than stationarity_tol; 0 disables.
    double inner_ftol = 0.0;
    double rho_init = 10.0;
    double rho_max = 1e10;
    // Infeasibility: violation decrease below stall_decrease over stall_window
    // outer iterations while violation stays above stall_floor.
    std::size_t stall_window = 3;
    double stall_decrease = 1e-8;
    double stall_floor = 1e-4;
};

enum class PlanStatus { Solved, Infeasible, IterationLimit };

inline std::string_view to_string(PlanStatus s) {
    switch (s) {
        case PlanStatus::Solved: return "Solved";
        case PlanStatus::Infeasible: return "Infeasible";
        case PlanStatus::IterationLimit: return "IterationLimit";
    }
    return "?";
}

struct PlanResult {
    PlanStatus status = PlanStatus::IterationLimit;
    Eigen::VectorXd x;
    std::vector<ApexState> states;   // s_1 .. s_N
    std::vector<Action> actions;     // a_0 .. a_{N-1}
    std::vector<double> margins;     // M(s_n, a_n)
    std::vector<double> predicted_dx;
    double predicted_displacement = 0.0;
    double objective = 0.0;
    double max_violation = 0.0;
    double kkt_residual = 0.0;
    std::size_t iterations = 0;        // inner iterations, summed
    std::size_t outer_iterations = 0;
    std::size_t evaluations = 0;       // augmented-Lagrangian evaluations
    double setup_time = 0.0;           // seconds
    double wall_time = 0.0;            // seconds, solver only
};

struct Constraints {
    Eigen::VectorXd eq;       // 2N dynamics residuals then 2 goal residuals
    Eigen::MatrixXd eq_jac;
    Eigen::VectorXd ineq;     // eps - M(s_n, a_n) <= 0, empty without margin
    Eigen::MatrixXd ineq_jac;
};

/// Problem data and derivative evaluation for one task.
class PlanProblem {
public:
    PlanProblem(const PlanTask& task, const Mlp& return_map, const Mlp& margin, const Bounds& bounds,
                const ObjectiveWeights& h = {})
        : task_(task), map_(return_map), margin_(margin), bounds_(bounds), h_(h) {
        if (task.horizon < 1) throw std::invalid_argument("plan: horizon must be >= 1");
        if (map_.input_size() != 4 || map_.output_size() != 3)
            throw std::invalid_argument("plan: return-map network must be 4 -> 3");
        if (margin_.input_size() != 4 || margin_.output_size() != 1)
            throw std::invalid_argument("plan: margin network must be 4 -> 1");
        bounds.validate();
        for (const auto& s : {task.s0, task.s_goal})
            if (!(s.y >= bounds.lower[0] && s.y <= bounds.upper[0] && s.xdot >= bounds.lower[1] &&
                  s.xdot <= bounds.upper[1]))
                throw std::invalid_argument("plan: s0 and s_goal must lie within the state bounds");
        if (h.y < 0.0 || h.xdot < 0.0) throw std::invalid_argument("plan: objective weights must be >= 0");
    }

    const PlanTask& task() const { return task_; }
    std::size_t horizon() const { return task_.horizon; }
    Eigen::Index size() const { return static_cast<Eigen::Index>(4 * task_.horizon); }

    Eigen::Index state_index(std::size_t n) const { return static_cast<Eigen::Index>(2 * (n - 1)); }  // n >= 1
    Eigen::Index action_index(std::size_t n) const { return static_cast<Eigen::Index>(2 * (task_.horizon + n)); }

    ApexState state(const Eigen::VectorXd& x, std::size_t n) const {
        if (n == 0) return task_.s0;
        const auto i = state_index(n);
        return {x[i], x[i + 1]};
    }
    Action action(const Eigen::VectorXd& x, std::size_t n) const {
        const auto i = action_index(n);
        return {x[i], x[i + 1]};
    }

    Eigen::VectorXd lower() const { return box(bounds_.lower); }
    Eigen::VectorXd upper() const { return box(bounds_.upper); }

    /// Linear interpolation of states from s0 to s_goal, actions at (0, 0.05).
    Eigen::VectorXd initial_guess() const {
        Eigen::VectorXd x(size());
        const double n_steps = static_cast<double>(task_.horizon);
        for (std::size_t n = 1; n <= task_.horizon; ++n) {
            const double t = static_cast<double>(n) / n_steps;
            x[state_index(n)] = task_.s0.y + t * (task_.s_goal.y - task_.s0.y);
            x[state_index(n) + 1] = task_.s0.xdot + t * (task_.s_goal.xdot - task_.s0.xdot);
        }
        for (std::size_t n = 0; n < task_.horizon; ++n) {
            x[action_index(n)] = 0.0;
            x[action_index(n) + 1] = 0.05;
        }
        return x;
    }

    /// f(x) = sum_i (s_i - s_{i+1})^T H (s_i - s_{i+1}); identically 0 with the objective off.
    double objective(const Eigen::VectorXd& x, Eigen::VectorXd* grad = nullptr) const {
        if (grad) grad->setZero(size());
        if (!task_.use_objective) return 0.0;
        double f = 0.0;
        for (std::size_t i = 0; i < task_.horizon; ++i) {
            const ApexState a = state(x, i), b = state(x, i + 1);
            const double dy = a.y - b.y, dv = a.xdot - b.xdot;
            f += h_.y * dy * dy + h_.xdot * dv * dv;
            if (grad) {
                if (i > 0) {
                    (*grad)[state_index(i)] += 2.0 * h_.y * dy;
                    (*grad)[state_index(i) + 1] += 2.0 * h_.xdot * dv;
                }
                (*grad)[state_index(i + 1)] -= 2.0 * h_.y * dy;
                (*grad)[state_index(i + 1) + 1] -= 2.0 * h_.xdot * dv;
            }
        }
        return f;
    }

    Constraints constraints(const Eigen::VectorXd& x, bool with_jacobian = true) const {
        const std::size_t N = task_.horizon;
        const Eigen::Index nx = size();
        Constraints c;
        c.eq.resize(static_cast<Eigen::Index>(2 * N + 2));
        c.ineq.resize(task_.use_margin ? static_cast<Eigen::Index>(N) : 0);
        if (with_jacobian) {
            c.eq_jac = Eigen::MatrixXd::Zero(c.eq.size(), nx);
            c.ineq_jac = Eigen::MatrixXd::Zero(c.ineq.size(), nx);
        }
        Eigen::VectorXd next, m;
        Eigen::MatrixXd jm, jg;
        for (std::size_t n = 0; n < N; ++n) {
            const Eigen::Vector4d in = input(x, n);
            if (with_jacobian) map_.forward_jacobian(in, next, jm);
            else next = map_.forward(in);
            const ApexState s_next = state(x, n + 1);
            const auto row = static_cast<Eigen::Index>(2 * n);
            c.eq[row] = next[1] - s_next.y;
            c.eq[row + 1] = next[2] - s_next.xdot;
            if (with_jacobian) {
                scatter(c.eq_jac, row, jm.bottomRows(2), n);
                c.eq_jac(row, state_index(n + 1)) -= 1.0;
                c.eq_jac(row + 1, state_index(n + 1) + 1) -= 1.0;
            }
            if (task_.use_margin) {
                const auto r = static_cast<Eigen::Index>(n);
                if (with_jacobian) {
                    margin_.forward_jacobian(in, m, jg);
                    scatter(c.ineq_jac, r, -jg, n);
                } else {
                    m = margin_.forward(in);
                }
                c.ineq[r] = task_.epsilon - m[0];
            }
        }
        const auto goal_row = static_cast<Eigen::Index>(2 * N);
        const ApexState last = state(x, N);
        c.eq[goal_row] = last.y - task_.s_goal.y;
        c.eq[goal_row + 1] = last.xdot - task_.s_goal.xdot;
        if (with_jacobian) {
            c.eq_jac(goal_row, state_index(N)) = 1.0;
            c.eq_jac(goal_row + 1, state_index(N) + 1) = 1.0;
        }
        return c;
    }

    static double violation(const Constraints& c) {
        double v = c.eq.size() ? c.eq.lpNorm<Eigen::Infinity>() : 0.0;
        for (Eigen::Index i = 0; i < c.ineq.size(); ++i) v = std::max(v, c.ineq[i]);
        return v;
    }

    Eigen::Vector4d input(const Eigen::VectorXd& x, std::size_t n) const {
        const ApexState s = state(x, n);
        const Action a = action(x, n);
        return {s.y, s.xdot, a.alpha, a.delta_l};
    }

    const Mlp& return_map() const { return map_; }
    const Mlp& margin_net() const { return margin_; }

private:
    Eigen::VectorXd box(const SAPoint& b) const {
        Eigen::VectorXd v(size());
        for (std::size_t n = 1; n <= task_.horizon; ++n) {
            v[state_index(n)] = b[0];
            v[state_index(n) + 1] = b[1];
        }
        for (std::size_t n = 0; n < task_.horizon; ++n) {
            v[action_index(n)] = b[2];
            v[action_index(n) + 1] = b[3];
        }
        return v;
    }

    // d(net input n)/dx: state columns only when n >= 1 (s_0 is fixed).
    template <class Block>
    void scatter(Eigen::MatrixXd& jac, Eigen::Index row, const Block& j_in, std::size_t n) const {
        const Eigen::Index rows = j_in.rows();
        if (n >= 1) jac.block(row, state_index(n), rows, 2) += j_in.leftCols(2);
        jac.block(row, action_index(n), rows, 2) += j_in.rightCols(2);
    }

    PlanTask task_;
    const Mlp& map_;
    const Mlp& margin_;
    Bounds bounds_;
    ObjectiveWeights h_;
};

/// Fills the per-step report fields of `r` from its decision vector.
inline void fill_report(const PlanProblem& prob, PlanResult& r) {
    const std::size_t N = prob.horizon();
    r.states.clear();
    r.actions.clear();
    r.margins.clear();
    r.predicted_dx.clear();
    r.predicted_displacement = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        r.states.push_back(prob.state(r.x, n + 1));
        r.actions.push_back(prob.action(r.x, n));
        const Eigen::Vector4d in = prob.input(r.x, n);
        r.margins.push_back(prob.margin_net().forward(in)[0]);
        const double dx = prob.return_map().forward(in)[0];
        r.predicted_dx.push_back(dx);
        r.predicted_displacement += dx;
    }
    r.objective = prob.objective(r.x);
}

inline PlanResult solve(const PlanProblem& prob, const SolverConfig& cfg = {}) {
    using Eigen::VectorXd;
    const auto t_start = std::chrono::steady_clock::now();
    const VectorXd lo = prob.lower(), hi = prob.upper();
    VectorXd x = project_box(prob.initial_guess(), lo, hi);
    Constraints c0 = prob.constraints(x, false);
    VectorXd lambda = VectorXd::Zero(c0.eq.size());
    VectorXd mu = VectorXd::Zero(c0.ineq.size());
    double rho = cfg.rho_init;
    double omega = 1.0 / rho;
    double eta = 1.0 / std::pow(rho, 0.1);
    constexpr double kInnerFloor = 1e-8;

    // Augmented Lagrangian at fixed multipliers; gradient written when requested.
    auto lagrangian = [&](const VectorXd& z, VectorXd* grad) {
        VectorXd gf;
        double val = prob.objective(z, grad ? &gf : nullptr);
        const Constraints c = prob.constraints(z, grad != nullptr);
        val += lambda.dot(c.eq) + 0.5 * rho * c.eq.squaredNorm();
        VectorXd shifted;
        if (c.ineq.size()) {
            shifted = (mu + rho * c.ineq).cwiseMax(0.0);
            val += (shifted.squaredNorm() - mu.squaredNorm()) / (2.0 * rho);
        }
        if (grad) {
            *grad = gf + c.eq_jac.transpose() * (lambda + rho * c.eq);
            if (c.ineq.size()) *grad += c.ineq_jac.transpose() * shifted;
        }
        return val;
    };

    PlanResult result;
    std::vector<double> violations;
    BoxLbfgsConfig inner_cfg;
    inner_cfg.max_iterations = cfg.max_inner_iterations;
    inner_cfg.memory = cfg.lbfgs_memory;
    inner_cfg.max_backtracks = cfg.max_backtracks;

    result.setup_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    const auto t_solve = std::chrono::steady_clock::now();
    for (std::size_t k = 0; k < cfg.max_outer_iterations; ++k) {
        // Loose subproblems may stop on stalled decrease; the final ones may not.
        inner_cfg.ftol = omega > cfg.stationarity_tol ? cfg.inner_ftol : 0.0;
        const BoxLbfgsResult inner =
            box_lbfgs(lagrangian, x, lo, hi, std::max(omega, kInnerFloor), inner_cfg);
        x = inner.x;
        result.iterations += inner.iterations;
        result.evaluations += inner.evaluations;
        result.outer_iterations = k + 1;

        const Constraints c = prob.constraints(x, false);
        const double viol = PlanProblem::violation(c);
        violations.push_back(viol);
        result.max_violation = viol;
        // With first-order multiplier estimates, grad of the augmented
        // Lagrangian equals grad of the ordinary Lagrangian.
        result.kkt_residual = inner.projected_gradient;

        if (viol <= cfg.feasibility_tol && inner.projected_gradient <= cfg.stationarity_tol) {
            result.status = PlanStatus::Solved;
            break;
        }
        if (violations.size() > cfg.stall_window) {
            const double earlier = violations[violations.size() - 1 - cfg.stall_window];
            if (viol > cfg.stall_floor && earlier - viol < cfg.stall_decrease) {
                result.status = PlanStatus::Infeasible;
                break;
            }
        }
        if (viol <= eta) {
            lambda += rho * c.eq;
            if (mu.size()) mu = (mu + rho * c.ineq).cwiseMax(0.0);
            eta = std::max(eta / std::pow(rho, 0.9), 0.1 * cfg.feasibility_tol);
            omega = std::max(omega / rho, kInnerFloor);
        } else {
            rho = std::min(rho * 10.0, cfg.rho_max);
            eta = 1.0 / std::pow(rho, 0.1);
            omega = 1.0 / rho;
        }
    }
    result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_solve).count();
    result.x = x;
    fill_report(prob, result);
    return result;
}

inline PlanResult solve(const PlanTask& task, const Mlp& return_map, const Mlp& margin, const Bounds& bounds,
                        const SolverConfig& cfg = {}, const ObjectiveWeights& h = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    const PlanProblem prob(task, return_map, margin, bounds, h);
    const double build = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    PlanResult r = solve(prob, cfg);
    r.setup_time += build;
    return r;
}

}  // namespace aslip
