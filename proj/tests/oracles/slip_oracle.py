"""Reference aSLIP step simulator built on scipy's event-locating solvers.

Used offline to produce the frozen values in tests/test_dynamics.cpp:

    python3 tests/oracles/slip_oracle.py
"""
import math

import numpy as np
from scipy.integrate import solve_ivp

K, ZETA, MU = 20.0, 0.1, 0.5


def step(y0, xd0, alpha, dl, k=K, zeta=ZETA, mu=MU):
    c = 2.0 * zeta * math.sqrt(k)
    htd = math.cos(alpha)
    if y0 <= htd:
        return "Fail_Geometry", None
    ttd = math.sqrt(2.0 * (y0 - htd))
    x, y, xd, yd = xd0 * ttd, htd, xd0, -ttd
    foot = x + math.sin(alpha)

    def slip(s):
        return mu * s[1] - abs(s[0] - foot)

    def geom(s):
        rx, ry = s[0] - foot, s[1]
        l = math.hypot(rx, ry)
        return rx / l, ry / l, l, (rx * s[2] + ry * s[3]) / l

    if slip((x, y, xd, yd)) < 0:
        return "Fail_Slip", None
    if geom((x, y, xd, yd))[3] >= 0:
        return "Fail_Fall", None

    def rhs_for(u):
        def rhs(t, s):
            ex, ey, l, ld = geom(s)
            f = k * (1.0 + u - l) - c * ld
            return [s[2], s[3], f * ex, f * ey - 1.0]
        return rhs

    def ev_slip(t, s):
        return slip(s)
    ev_slip.terminal, ev_slip.direction = True, -1

    def ev_fall(t, s):
        return s[1]
    ev_fall.terminal, ev_fall.direction = True, -1

    def ev_maxc(t, s):
        return geom(s)[3]
    ev_maxc.terminal, ev_maxc.direction = True, 1

    def ev_lift_for(u):
        def ev(t, s):
            ex, ey, l, ld = geom(s)
            return k * (1.0 + u - l) - c * ld
        ev.terminal, ev.direction = True, -1
        return ev

    opts = dict(method="DOP853", rtol=1e-13, atol=1e-13, max_step=0.01)
    s = np.array([x, y, xd, yd])
    # compression
    sol = solve_ivp(rhs_for(0.0), (0, 50), s, events=[ev_slip, ev_fall, ev_maxc, ev_lift_for(0.0)], **opts)
    hit = [i for i, e in enumerate(sol.t_events) if len(e)]
    if not hit:
        return "Fail_Timeout", None
    i = min(hit, key=lambda j: sol.t_events[j][0])
    s = sol.y_events[i][0]
    if i == 0:
        return "Fail_Slip", None
    if i == 1:
        return "Fail_Fall", None
    if i == 2:
        ex, ey, l, ld = geom(s)
        if k * (1.0 + dl - l) - c * ld > 0:
            sol = solve_ivp(rhs_for(dl), (0, 50), s, events=[ev_slip, ev_fall, ev_lift_for(dl)], **opts)
            hit = [j for j, e in enumerate(sol.t_events) if len(e)]
            if not hit:
                return "Fail_Timeout", None
            j = min(hit, key=lambda q: sol.t_events[q][0])
            s = sol.y_events[j][0]
            if j == 0:
                return "Fail_Slip", None
            if j == 1:
                return "Fail_Fall", None
    if s[3] <= 0:
        return "Fail_NoApex", None
    tup = s[3]
    return "Valid", (s[0] + s[2] * tup, s[1] + 0.5 * s[3] ** 2, s[2])


CASES = [
    (1.1, 0.0, 0.0, 0.0),
    (1.1, 0.0, 0.0, 0.1),
    (1.0, 0.5, 0.15, 0.05),
    (1.05, -0.3, -0.1, 0.0),
    (1.2, 0.8, 0.3, 0.1),
    (1.0, 0.2, 0.05, 0.12),
    (1.15, 1.0, 0.35, -0.05),
    (0.9, -0.6, -0.2, 0.02),
    (1.1, 0.0, 0.5, 0.0),
    (0.8, 0.5, 0.6, 0.0),
]

if __name__ == "__main__":
    for c in CASES:
        tag, nxt = step(*c)
        vals = ", ".join("%.12f" % v for v in nxt) if nxt else "-"
        print(c, tag, vals)
