#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <vector>

namespace aslip {

struct BoxLbfgsConfig {
    std::size_t memory = 7;
    std::size_t max_iterations = 200;
    std::size_t max_backtracks = 40;
    double armijo = 1e-4;
    // Stop when (f_k - f_{k+1}) / max(|f_k|, |f_{k+1}|, 1) <= ftol; 0 disables.
    double ftol = 0.0;
};

struct BoxLbfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    double projected_gradient = 0.0;  // inf-norm of P(x - g) - x
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
};

inline Eigen::VectorXd project_box(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

inline double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                                      const Eigen::VectorXd& hi) {
    return (project_box(x - g, lo, hi) - x).lpNorm<Eigen::Infinity>();
}

/// Projected limited-memory BFGS for min f(x) s.t. lo <= x <= hi.
///
/// Variables pinned at a bound with the gradient pushing outward are frozen
/// for the direction computation; the two-loop recursion acts on the rest,
/// and a projected Armijo backtracking search follows the bent path.
/// `fg(x, grad)` returns f(x) and, when `grad` is non-null, writes the
/// gradient there. Trial points of the line search are evaluated value-only.
template <class ValueGrad>
BoxLbfgsResult box_lbfgs(ValueGrad&& fg, Eigen::VectorXd x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                         double tolerance, const BoxLbfgsConfig& cfg = {}) {
    using Eigen::VectorXd;
    const Eigen::Index n = x.size();
    BoxLbfgsResult res;
    x = project_box(x, lo, hi);
    VectorXd g(n);
    double f = fg(x, &g);
    ++res.evaluations;

    struct Pair {
        VectorXd s, y;
        double rho;
    };
    std::deque<Pair> mem;

    for (; res.iterations < cfg.max_iterations; ++res.iterations) {
        if (projected_gradient_norm(x, g, lo, hi) <= tolerance) break;

        VectorXd free_mask(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool pinned = (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0);
            free_mask[i] = pinned ? 0.0 : 1.0;
        }

        auto direction = [&]() {
            VectorXd q = g.cwiseProduct(free_mask);
            std::vector<double> alpha(mem.size());
            for (std::size_t k = mem.size(); k-- > 0;) {
                alpha[k] = mem[k].rho * mem[k].s.cwiseProduct(free_mask).dot(q);
                q -= alpha[k] * mem[k].y.cwiseProduct(free_mask);
            }
            double gamma = 1.0;
            if (!mem.empty()) gamma = mem.back().s.dot(mem.back().y) / mem.back().y.squaredNorm();
            else gamma = 1.0 / std::max(1.0, g.cwiseProduct(free_mask).lpNorm<Eigen::Infinity>());
            q *= gamma;
            for (std::size_t k = 0; k < mem.size(); ++k) {
                const double beta = mem[k].rho * mem[k].y.cwiseProduct(free_mask).dot(q);
                q += (alpha[k] - beta) * mem[k].s.cwiseProduct(free_mask);
            }
            return VectorXd(-q.cwiseProduct(free_mask));
        };

        VectorXd d = direction();
        if (!(g.dot(d) < 0.0)) {
            mem.clear();
            d = direction();
        }

        bool accepted = false;
        VectorXd x_new, g_new(n);
        double f_new = 0.0;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            // A move longer than the box width is always clipped, so start no further out.
            double t = 1.0;
            for (Eigen::Index i = 0; i < n; ++i)
                if (d[i] != 0.0) t = std::min(t, (hi[i] - lo[i]) / std::abs(d[i]));
            for (std::size_t bt = 0; bt < cfg.max_backtracks; ++bt, t *= 0.5) {
                x_new = project_box(x + t * d, lo, hi);
                const VectorXd step = x_new - x;
                if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
                f_new = fg(x_new, nullptr);
                ++res.evaluations;
                if (std::isfinite(f_new) && f_new <= f + cfg.armijo * g.dot(step)) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                if (mem.empty()) break;
                mem.clear();
                d = direction();
            }
        }
        if (!accepted) break;
        fg(x_new, &g_new);

        const VectorXd s = x_new - x;
        const VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm() && sy > 0.0) {
            mem.push_back({s, y, 1.0 / sy});
            if (mem.size() > cfg.memory) mem.pop_front();
        }
        const double rel_decrease = (f - f_new) / std::max({std::abs(f), std::abs(f_new), 1.0});
        x = std::move(x_new);
        g = g_new;
        f = f_new;
        if (cfg.ftol > 0.0 && rel_decrease <= cfg.ftol) {
            ++res.iterations;
            break;
        }
    }

    res.x = std::move(x);
    res.value = f;
    res.gradient = std::move(g);
    res.projected_gradient = projected_gradient_norm(res.x, res.gradient, lo, hi);
    return res;
}

}  // namespace aslip
