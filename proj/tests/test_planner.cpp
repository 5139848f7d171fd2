#include <aslip/pipeline.hpp>
#include <aslip/planner.hpp>
#include <aslip/rng.hpp>
#include <aslip/sampling.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace aslip;
using Eigen::VectorXd;

namespace {

// y' = y + dl, xdot' = xdot + alpha, dx = xdot.
Mlp additive_map() {
    Mlp net({4, 3});
    net.weight(0) << 0, 1, 0, 0,  //
        1, 0, 0, 1,               //
        0, 1, 1, 0;
    return net;
}

// M = b + w . (y, xdot, alpha, dl)
Mlp affine_margin(double b, std::array<double, 4> w = {0, 0, 0, 0}) {
    Mlp net({4, 1});
    for (int i = 0; i < 4; ++i) net.weight(0)(0, i) = w[i];
    net.bias(0)[0] = b;
    return net;
}

PlanTask task(ApexState s0, ApexState goal, bool objective, bool margin) {
    PlanTask t;
    t.s0 = s0;
    t.s_goal = goal;
    t.horizon = 3;
    t.use_objective = objective;
    t.use_margin = margin;
    return t;
}

}  // namespace

TEST(BoxLbfgs, ProjectsUnconstrainedMinimizer) {
    const VectorXd c = (VectorXd(3) << 2.0, -3.0, 0.5).finished();
    auto f = [&](const VectorXd& x, VectorXd* g) {
        if (g) *g = 2.0 * (x - c);
        return (x - c).squaredNorm();
    };
    const VectorXd lo = VectorXd::Constant(3, -1.0), hi = VectorXd::Constant(3, 1.0);
    const auto r = box_lbfgs(f, VectorXd::Zero(3), lo, hi, 1e-10);
    EXPECT_NEAR(r.x[0], 1.0, 1e-12);
    EXPECT_NEAR(r.x[1], -1.0, 1e-12);
    EXPECT_NEAR(r.x[2], 0.5, 1e-9);
    EXPECT_LE(r.projected_gradient, 1e-10);
}

TEST(BoxLbfgs, Rosenbrock) {
    auto f = [](const VectorXd& x, VectorXd* g) {
        const double a = 1 - x[0], b = x[1] - x[0] * x[0];
        if (g) *g = (VectorXd(2) << -2 * a - 400 * x[0] * b, 200 * b).finished();
        return a * a + 100 * b * b;
    };
    const VectorXd lo = VectorXd::Constant(2, -5), hi = VectorXd::Constant(2, 5);
    BoxLbfgsConfig cfg;
    cfg.max_iterations = 500;
    const auto r = box_lbfgs(f, (VectorXd(2) << -1.2, 1.0).finished(), lo, hi, 1e-8, cfg);
    EXPECT_NEAR(r.x[0], 1.0, 1e-6);
    EXPECT_NEAR(r.x[1], 1.0, 1e-6);
}

TEST(BoxLbfgs, StartsOutsideBoxIsProjected) {
    auto f = [](const VectorXd& x, VectorXd* g) {
        if (g) *g = 2 * x;
        return x.squaredNorm();
    };
    const auto r = box_lbfgs(f, VectorXd::Constant(2, 10), VectorXd::Constant(2, 1), VectorXd::Constant(2, 2), 1e-12);
    EXPECT_EQ(r.x, VectorXd::Constant(2, 1));
}

TEST(PlanProblem, LayoutAndBounds) {
    const Mlp P = additive_map(), M = affine_margin(1.0);
    const PlanProblem prob(task({1.0, 0.0}, {1.1, 0.3}, true, true), P, M, Bounds{});
    EXPECT_EQ(prob.size(), 12);
    EXPECT_EQ(prob.state_index(1), 0);
    EXPECT_EQ(prob.state_index(3), 4);
    EXPECT_EQ(prob.action_index(0), 6);
    EXPECT_EQ(prob.action_index(2), 10);
    const VectorXd lo = prob.lower();
    EXPECT_EQ(lo[0], 0.8);
    EXPECT_EQ(lo[1], -1.0);
    EXPECT_EQ(lo[6], -0.6);
    EXPECT_EQ(lo[7], -0.05);
    const VectorXd x0 = prob.initial_guess();
    EXPECT_DOUBLE_EQ(x0[4], 1.1);
    EXPECT_DOUBLE_EQ(x0[5], 0.3);
    EXPECT_EQ(x0[7], 0.05);
}

TEST(PlanProblem, RejectsBadInputs) {
    const Mlp P = additive_map(), M = affine_margin(1.0);
    EXPECT_THROW(PlanProblem(task({1.0, 0.0}, {1.5, 0.0}, true, true), P, M, Bounds{}), std::invalid_argument);
    EXPECT_THROW(PlanProblem(task({1.0, 0.0}, {1.0, 0.0}, true, true), M, M, Bounds{}), std::invalid_argument);
    auto t = task({1.0, 0.0}, {1.0, 0.0}, true, true);
    t.horizon = 0;
    EXPECT_THROW(PlanProblem(t, P, M, Bounds{}), std::invalid_argument);
}

TEST(PlanProblem, ConstraintValuesAtKnownPoint) {
    const Mlp P = additive_map(), M = affine_margin(0.2, {0, 0, 0, -1});
    const PlanProblem prob(task({1.0, 0.0}, {1.15, 0.3}, false, true), P, M, Bounds{});
    VectorXd x(12);
    x << 1.05, 0.1, 1.10, 0.2, 1.15, 0.3, 0.1, 0.05, 0.1, 0.05, 0.1, 0.05;
    const Constraints c = prob.constraints(x);
    EXPECT_LT(c.eq.cwiseAbs().maxCoeff(), 1e-15);
    ASSERT_EQ(c.ineq.size(), 3);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(c.ineq[i], 0.05 - 0.15, 1e-15);
    EXPECT_LE(PlanProblem::violation(c), 1e-15);
}

TEST(PlanProblem, ObjectiveGradientMatchesFiniteDifferences) {
    const Mlp P = additive_map(), M = affine_margin(1.0);
    const PlanProblem prob(task({1.0, 0.2}, {1.1, -0.3}, true, false), P, M, Bounds{});
    VectorXd x = VectorXd::Random(12) * 0.3;
    VectorXd g;
    prob.objective(x, &g);
    for (int i = 0; i < 12; ++i) {
        VectorXd a = x, b = x;
        a[i] += 1e-6;
        b[i] -= 1e-6;
        EXPECT_NEAR(g[i], (prob.objective(a) - prob.objective(b)) / 2e-6, 1e-7);
    }
    EXPECT_EQ(PlanProblem(task({1.0, 0.2}, {1.1, -0.3}, false, false), P, M, Bounds{}).objective(x), 0.0);
}

TEST(PlanProblem, ConstraintJacobianMatchesFiniteDifferences) {
    const Mlp P = mlp_init({4, 64, 64, 3}, 1), M = mlp_init({4, 64, 64, 1}, 2);
    for (std::size_t horizon : {1u, 3u, 4u}) {
        auto t = task({1.0, 0.2}, {1.1, -0.3}, true, true);
        t.horizon = horizon;
        const PlanProblem prob(t, P, M, Bounds{});
        SeqRng rng(horizon);
        for (int trial = 0; trial < 10; ++trial) {
            VectorXd x(prob.size());
            const VectorXd lo = prob.lower(), hi = prob.upper();
            for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(lo[i], hi[i]);
            bool near_kink = false;
            for (std::size_t n = 0; n < horizon; ++n)
                near_kink |= P.min_abs_preactivation(prob.input(x, n)) < 1e-4 ||
                             M.min_abs_preactivation(prob.input(x, n)) < 1e-4;
            if (near_kink) continue;
            const Constraints c = prob.constraints(x);
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                VectorXd a = x, b = x;
                a[i] += 1e-6;
                b[i] -= 1e-6;
                const Constraints ca = prob.constraints(a, false), cb = prob.constraints(b, false);
                EXPECT_LT(((ca.eq - cb.eq) / 2e-6 - c.eq_jac.col(i)).cwiseAbs().maxCoeff(), 1e-6);
                EXPECT_LT(((ca.ineq - cb.ineq) / 2e-6 - c.ineq_jac.col(i)).cwiseAbs().maxCoeff(), 1e-6);
            }
        }
    }
}

TEST(PlanProblem, ObjectiveHandValues) {
    const Mlp P = additive_map(), M = affine_margin(1.0);
    PlanTask t = task({1.0, 0.0}, {1.1, 0.2}, true, false);
    t.horizon = 1;
    const PlanProblem prob(t, P, M, Bounds{});
    VectorXd x(4);
    x << 1.1, 0.2, 0.0, 0.05;
    EXPECT_NEAR(prob.objective(x), 6.25 * 0.01 + 0.25 * 0.04, 1e-15);
    x.head(2) << 1.0, 0.0;
    EXPECT_EQ(prob.objective(x), 0.0);
}

TEST(Solve, EvenStepsAreOptimalForAdditiveMap) {
    // Sum of squared state increments with fixed endpoints: equal increments.
    const Mlp P = additive_map(), M = affine_margin(1.0);
    const auto r = solve(task({1.0, 0.0}, {1.15, 0.3}, true, false), P, M, Bounds{});
    ASSERT_EQ(r.status, PlanStatus::Solved);
    EXPECT_LE(r.max_violation, 1e-6);
    for (std::size_t n = 0; n < 3; ++n) {
        EXPECT_NEAR(r.actions[n].alpha, 0.1, 1e-5);
        EXPECT_NEAR(r.actions[n].delta_l, 0.05, 1e-5);
        EXPECT_NEAR(r.states[n].y, 1.0 + 0.05 * (n + 1), 1e-5);
    }
    EXPECT_NEAR(r.predicted_displacement, 0.0 + 0.1 + 0.2, 1e-5);
    ASSERT_EQ(r.predicted_dx.size(), 3u);
    EXPECT_NEAR(r.objective, 3 * (6.25 * 0.05 * 0.05 + 0.25 * 0.1 * 0.1), 1e-6);
}

TEST(Solve, MarginConstraintIsRespected) {
    // M = 0.1 - dl with eps = 0.05 forces dl <= 0.05 on every step.
    const Mlp P = additive_map(), M = affine_margin(0.1, {0, 0, 0, -1});
    const auto r = solve(task({0.9, 0.0}, {1.02, 0.0}, true, true), P, M, Bounds{});
    ASSERT_EQ(r.status, PlanStatus::Solved);
    for (std::size_t n = 0; n < 3; ++n) {
        EXPECT_GE(r.margins[n], 0.05 - 1e-6);
        EXPECT_NEAR(r.actions[n].delta_l, 0.04, 1e-5);
    }
}

TEST(Solve, ConstantNegativeMarginIsInfeasible) {
    const Mlp P = additive_map(), M = affine_margin(-0.5);
    const auto r = solve(task({1.0, 0.0}, {1.1, 0.0}, false, true), P, M, Bounds{});
    EXPECT_EQ(r.status, PlanStatus::Infeasible);
    EXPECT_NEAR(r.max_violation, 0.55, 1e-9);
    const auto off = solve(task({1.0, 0.0}, {1.1, 0.0}, false, false), P, M, Bounds{});
    EXPECT_EQ(off.status, PlanStatus::Solved);
}

TEST(Solve, UnreachableGoalIsNotSolved) {
    // Total height gain is capped at 3 * 0.15.
    const Mlp P = additive_map(), M = affine_margin(1.0);
    const auto r = solve(task({0.8, 0.0}, {1.2, 0.0}, false, false), P, M,
                         [] {
                             Bounds b;
                             b.upper[3] = 0.1;
                             return b;
                         }());
    EXPECT_NE(r.status, PlanStatus::Solved);
    EXPECT_GT(r.max_violation, 1e-4);
}

TEST(Solve, SingleStepRecoversManufacturedGoal) {
    // Goals are images of random actions under a small return map trained on simulator data.
    const Bounds b;
    TrainConfig cfg;
    cfg.iterations = 4000;
    cfg.batch_size = 256;
    cfg.seed = 4;
    const Mlp P = train_return_map(sample_dataset(20000, b, ModelParams{}, 4), {32, 32}, cfg).net;
    const Mlp M = affine_margin(1.0);
    SeqRng rng(5);
    for (int rep = 0; rep < 20;) {
        const ApexState s0{rng.uniform(b.lower[0], b.upper[0]), rng.uniform(b.lower[1], b.upper[1])};
        const double alpha = rng.uniform(b.lower[2], b.upper[2]), dl = rng.uniform(b.lower[3], b.upper[3]);
        const VectorXd out = P.forward((VectorXd(4) << s0.y, s0.xdot, alpha, dl).finished());
        if (out[1] <= b.lower[0] || out[1] >= b.upper[0] || out[2] <= b.lower[1] || out[2] >= b.upper[1]) continue;
        ++rep;
        PlanTask t = task(s0, {out[1], out[2]}, false, true);
        t.horizon = 1;
        const auto r = solve(t, P, M, b);
        ASSERT_EQ(r.status, PlanStatus::Solved) << rep;
        const VectorXd got =
            P.forward((VectorXd(4) << s0.y, s0.xdot, r.actions[0].alpha, r.actions[0].delta_l).finished());
        // Two chained equalities, each within the 1e-6 feasibility tolerance.
        EXPECT_LE(std::max(std::abs(got[1] - out[1]), std::abs(got[2] - out[2])), 2e-6);
    }
}

TEST(Solve, SingleStepUnreachableGoal) {
    // Height gain per step is at most the leg-extension upper bound.
    const Mlp P = additive_map(), M = affine_margin(1.0);
    PlanTask t = task({0.8, -1.0}, {1.2, 1.0}, false, true);
    t.horizon = 1;
    const auto r = solve(t, P, M, Bounds{});
    EXPECT_TRUE(r.status == PlanStatus::Infeasible || r.status == PlanStatus::IterationLimit);
}

TEST(Solve, IterationLimitReported) {
    const Mlp P = additive_map(), M = affine_margin(1.0);
    SolverConfig cfg;
    cfg.max_outer_iterations = 1;
    cfg.max_inner_iterations = 1;
    const auto r = solve(task({0.9, -0.8}, {1.2, 0.9}, true, false), P, M, Bounds{}, cfg);
    EXPECT_EQ(r.status, PlanStatus::IterationLimit);
    EXPECT_EQ(r.outer_iterations, 1u);
}

TEST(Solve, Deterministic) {
    const Mlp P = mlp_init({4, 32, 32, 3}, 3), M = mlp_init({4, 32, 32, 1}, 4);
    const auto t = task({1.0, 0.2}, {1.1, -0.3}, true, true);
    const auto a = solve(t, P, M, Bounds{}), b = solve(t, P, M, Bounds{});
    EXPECT_EQ(a.status, b.status);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.outer_iterations, b.outer_iterations);
}

TEST(PlanStatusNames, Strings) {
    EXPECT_EQ(to_string(PlanStatus::Solved), "Solved");
    EXPECT_EQ(to_string(PlanStatus::Infeasible), "Infeasible");
    EXPECT_EQ(to_string(PlanStatus::IterationLimit), "IterationLimit");
}
