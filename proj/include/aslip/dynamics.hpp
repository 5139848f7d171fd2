#pragma once

// Nondimensional actuated spring-loaded inverted pendulum (aSLIP).
//
// Units: lengths in leg rest length l0, time in sqrt(l0/g), velocities in
// sqrt(g*l0), forces in m*g. The body is a point mass on a massless leg made
// of a damped spring in series with an extension actuator. The leg is placed
// instantly during flight; the actuator steps from 0 to delta_l at the
// instant of maximum leg compression.

#include <aslip/ode.hpp>

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace aslip {

/// Model constants. Gravity and leg rest length are fixed at 1 by the
/// nondimensionalization; the damping constant is derived once on construction.
class ModelParams {
public:
    ModelParams() : ModelParams(20.0, 0.1, 0.5) {}
    ModelParams(double stiffness, double damping_ratio, double mu)
        : stiffness_(stiffness), damping_ratio_(damping_ratio), mu_(mu) {
        if (!(stiffness_ > 0.0)) throw std::invalid_argument("stiffness must be positive");
        if (!(damping_ratio_ >= 0.0)) throw std::invalid_argument("damping ratio must be >= 0");
        if (!(mu_ > 0.0)) throw std::invalid_argument("friction coefficient must be positive");
        damping_ = 2.0 * damping_ratio_ * std::sqrt(stiffness_);
    }

    double stiffness() const { return stiffness_; }
    double damping_ratio() const { return damping_ratio_; }
    double mu() const { return mu_; }
    double gravity() const { return 1.0; }
    double leg_length() const { return 1.0; }
    /// c = 2*zeta*sqrt(k*m), m = 1.
    double damping() const { return damping_; }

private:
    double stiffness_;
    double damping_ratio_;
    double mu_;
    double damping_;
};

struct ApexState {
    double y = 0.0;     // apex height
    double xdot = 0.0;  // apex horizontal velocity

    bool operator==(const ApexState&) const = default;
};

struct Action {
    double alpha = 0.0;    // touchdown angle from vertical, positive = foot forward
    double delta_l = 0.0;  // actuator extension at maximum compression

    bool operator==(const Action&) const = default;
};

enum class Phase { Flight, StanceCompressing, StanceExtended };

struct FullState {
    double x = 0.0, y = 0.0, xdot = 0.0, ydot = 0.0;
    Phase phase = Phase::Flight;
    double foot_x = 0.0;
    double u = 0.0;
};

enum class StepTag { Valid, FailSlip, FailFall, FailNoApex, FailGeometry, FailTimeout };

inline std::string_view to_string(StepTag tag) {
    switch (tag) {
        case StepTag::Valid: return "Valid";
        case StepTag::FailSlip: return "Fail_Slip";
        case StepTag::FailFall: return "Fail_Fall";
        case StepTag::FailNoApex: return "Fail_NoApex";
        case StepTag::FailGeometry: return "Fail_Geometry";
        case StepTag::FailTimeout: return "Fail_Timeout";
    }
    return "?";
}

inline StepTag step_tag_from_string(std::string_view s) {
    for (auto t : {StepTag::Valid, StepTag::FailSlip, StepTag::FailFall, StepTag::FailNoApex,
                   StepTag::FailGeometry, StepTag::FailTimeout})
        if (to_string(t) == s) return t;
    throw std::invalid_argument("unknown step tag '" + std::string(s) + "'");
}

enum class EventKind { Apex, Touchdown, MaxCompression, Liftoff };

struct StepEvent {
    EventKind kind;
    double t;
};

struct NextApex {
    double dx = 0.0;  // horizontal displacement apex to apex
    ApexState apex;
};

struct StepOutcome {
    StepTag tag = StepTag::Valid;
    std::optional<NextApex> next;  // present iff tag == Valid
    double t_elapsed = 0.0;
    std::vector<StepEvent> events;

    bool valid() const { return tag == StepTag::Valid; }
};

/// Body height at which the extended leg touches flat ground.
inline double touchdown_height(const Action& a, const ModelParams& p) {
    return p.leg_length() * std::cos(a.alpha);
}

struct StanceDerivative {
    OdeVec<4> deriv;      // (xdot, ydot, xddot, yddot)
    double leg_force;     // axial force, positive = compressive
    double leg_length;
    double leg_rate;
};

/// Stance-phase dynamics. Throws std::domain_error on a degenerate leg
/// (length <= 1e-6).
inline StanceDerivative stance_derivative(const FullState& s, const ModelParams& p) {
    const double rx = s.x - s.foot_x;
    const double ry = s.y;
    const double l = std::hypot(rx, ry);
    if (!(l > 1e-6)) throw std::domain_error("degenerate stance geometry");
    const double ex = rx / l, ey = ry / l;
    const double ldot = ex * s.xdot + ey * s.ydot;
    const double force = p.stiffness() * (p.leg_length() + s.u - l) - p.damping() * ldot;
    return {{s.xdot, s.ydot, force * ex, force * ey - p.gravity()}, force, l, ldot};
}

inline double total_energy(const FullState& s, const ModelParams& p) {
    double e = 0.5 * (s.xdot * s.xdot + s.ydot * s.ydot) + p.gravity() * s.y;
    if (s.phase != Phase::Flight) {
        const double stretch = p.leg_length() + s.u - std::hypot(s.x - s.foot_x, s.y);
        e += 0.5 * p.stiffness() * stretch * stretch;
    }
    return e;
}

/// Energy of an apex state (flight, vertical velocity zero).
inline double apex_energy(const ApexState& s, const ModelParams& p) {
    return 0.5 * s.xdot * s.xdot + p.gravity() * s.y;
}

inline constexpr double kStepTimeout = 50.0;

namespace detail {

// Stance events, encoded as scalar functions with a crossing direction.
enum class StanceEvent { MaxCompression, Liftoff, Slip, Fall, None };

struct StanceProbe {
    double leg_rate;
    double force;
    double slip_margin;  // mu*y - |x - foot_x|; negative means friction cone violated
    double height;
};

inline StanceProbe probe(const FullState& s, const ModelParams& p) {
    const auto d = stance_derivative(s, p);
    return {d.leg_rate, d.leg_force, p.mu() * s.y - std::abs(s.x - s.foot_x), s.y};
}

inline bool crossed(StanceEvent ev, const StanceProbe& a, const StanceProbe& b, Phase phase) {
    switch (ev) {
        case StanceEvent::MaxCompression:
            return phase == Phase::StanceCompressing && a.leg_rate < 0.0 && b.leg_rate >= 0.0;
        case StanceEvent::Liftoff: return a.force > 0.0 && b.force <= 0.0;
        case StanceEvent::Slip: return a.slip_margin >= 0.0 && b.slip_margin < 0.0;
        case StanceEvent::Fall: return a.height > 0.0 && b.height <= 0.0;
        case StanceEvent::None: return false;
    }
    return false;
}

}  // namespace detail

/// Controlled first return map: integrates one apex-to-apex step.
///
/// Flight segments are ballistic and evaluated in closed form; stance is
/// integrated with Dormand-Prince 5(4) and events are localized by bisection
/// on fresh steps from the last accepted point.
inline StepOutcome simulate_step(const ApexState& s, const Action& a, const ModelParams& p,
                                 const OdeTolerances& tol = {}) {
    if (!std::isfinite(s.y) || !std::isfinite(s.xdot) || !std::isfinite(a.alpha) ||
        !std::isfinite(a.delta_l))
        throw std::invalid_argument("simulate_step: non-finite input");
    if (!(std::abs(a.alpha) < std::numbers::pi / 2)) throw std::invalid_argument("simulate_step: |alpha| >= pi/2");

    StepOutcome out;
    out.events.push_back({EventKind::Apex, 0.0});
    const double g = p.gravity();
    const double h_td = touchdown_height(a, p);
    if (s.y <= h_td) {
        out.tag = StepTag::FailGeometry;
        return out;
    }

    // Descent to touchdown.
    const double t_td = std::sqrt(2.0 * (s.y - h_td) / g);
    FullState st;
    st.x = s.xdot * t_td;
    st.y = h_td;
    st.xdot = s.xdot;
    st.ydot = -g * t_td;
    st.phase = Phase::StanceCompressing;
    st.foot_x = st.x + p.leg_length() * std::sin(a.alpha);
    st.u = 0.0;
    double t = t_td;
    out.events.push_back({EventKind::Touchdown, t});

    auto fail = [&](StepTag tag) {
        out.tag = tag;
        out.t_elapsed = t;
        return out;
    };

    auto pr = detail::probe(st, p);
    if (pr.slip_margin < 0.0) return fail(StepTag::FailSlip);
    if (pr.leg_rate >= 0.0) return fail(StepTag::FailFall);  // leg cannot load

    auto pack = [](const FullState& f) { return OdeVec<4>{f.x, f.y, f.xdot, f.ydot}; };
    auto unpack = [](FullState f, const OdeVec<4>& v) {
        f.x = v[0];
        f.y = v[1];
        f.xdot = v[2];
        f.ydot = v[3];
        return f;
    };

    bool lifted = false;
    double h = tol.h_init;
    while (!lifted) {
        if (t > kStepTimeout) return fail(StepTag::FailTimeout);
        const FullState base = st;
        auto rhs = [&](double, const OdeVec<4>& v) {
            return stance_derivative(unpack(base, v), p).deriv;
        };
        const OdeVec<4> y0 = pack(st);
        h = std::min(h, tol.h_max);
        DoprStep<4> step;
        try {
            step = dopri_step<4>(rhs, t, y0, h, tol);
        } catch (const std::domain_error&) {
            return fail(StepTag::FailFall);
        }
        for (double v : step.y)
            if (!std::isfinite(v)) throw IntegrationError("non-finite state in stance integration");
        if (!std::isfinite(step.err_norm) || step.err_norm > 1.0) {
            h = next_step_size(h, std::isfinite(step.err_norm) ? step.err_norm : 1e10);
            if (h < tol.h_min) throw IntegrationError("stance step size underflow");
            continue;
        }

        const FullState end = unpack(st, step.y);
        detail::StanceProbe end_pr;
        try {
            end_pr = detail::probe(end, p);
        } catch (const std::domain_error&) {
            end_pr = {0.0, 0.0, 0.0, 0.0};  // treat as fallen
        }

        using detail::StanceEvent;
        StanceEvent first = StanceEvent::None;
        double first_tau = h;
        FullState first_state = end;
        for (auto ev : {StanceEvent::Slip, StanceEvent::Fall, StanceEvent::MaxCompression,
                        StanceEvent::Liftoff}) {
            if (!detail::crossed(ev, pr, end_pr, st.phase)) continue;
            double lo = 0.0, hi = h;
            FullState at_hi = end;
            while (hi - lo > tol.event_time_tol) {
                const double mid = 0.5 * (lo + hi);
                const FullState m = unpack(st, dopri_step<4>(rhs, t, y0, mid, tol).y);
                detail::StanceProbe mp;
                bool hit;
                try {
                    mp = detail::probe(m, p);
                    hit = detail::crossed(ev, pr, mp, st.phase);
                } catch (const std::domain_error&) {
                    hit = true;
                }
                if (hit) {
                    hi = mid;
                    at_hi = m;
                } else {
                    lo = mid;
                }
            }
            if (hi < first_tau || first == StanceEvent::None) {
                first = ev;
                first_tau = hi;
                first_state = at_hi;
            }
        }

        if (first == StanceEvent::None) {
            st = end;
            t += h;
            pr = end_pr;
            h = next_step_size(h, step.err_norm);
            continue;
        }

        st = first_state;
        t += first_tau;
        switch (first) {
            case StanceEvent::Slip: return fail(StepTag::FailSlip);
            case StanceEvent::Fall: return fail(StepTag::FailFall);
            case StanceEvent::MaxCompression: {
                out.events.push_back({EventKind::MaxCompression, t});
                st.phase = Phase::StanceExtended;
                st.u = a.delta_l;
                pr = detail::probe(st, p);
                if (pr.force <= 0.0) lifted = true;
                break;
            }
            case StanceEvent::Liftoff: lifted = true; break;
            case StanceEvent::None: break;
        }
    }

    out.events.push_back({EventKind::Liftoff, t});
    if (st.y <= 0.0) return fail(StepTag::FailFall);
    if (st.ydot <= 0.0) return fail(StepTag::FailNoApex);

    // Ascent to the next apex.
    const double t_up = st.ydot / g;
    NextApex next;
    next.apex.y = st.y + 0.5 * st.ydot * st.ydot / g;
    next.apex.xdot = st.xdot;
    next.dx = st.x + st.xdot * t_up;
    t += t_up;
    if (t > kStepTimeout) return fail(StepTag::FailTimeout);
    out.events.push_back({EventKind::Apex, t});
    out.tag = StepTag::Valid;
    out.next = next;
    out.t_elapsed = t;
    return out;
}

}  // namespace aslip
