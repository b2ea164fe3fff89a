"""Scratch: validate He-connection shooting geometry (not part of package)."""
import numpy as np
from scipy.optimize import brentq
from triplezero import Params, equilibria, EquilibriumKind
from triplezero.model import conjugate_params, jacobian
from triplezero.integrate import (EventSpec, IntegratorSettings, advance,
                                  local_manifold_seed, propagate_to_event)

EPS2, B, D = -1.0, -0.1, 0.01


def axis_saddle_chart(e1loc, e2loc, e3loc):
    """Quadratic W^s graph z = q(x,y) for a z-axis saddle whose stable space
    is the (x,y) eigenplane (local params: pair from (e1loc,e2loc) stable,
    z-rate e3loc > 0 unstable). Returns (c20,c11,c02) and the weak stable
    eigvec direction in (x,y)."""
    # invariance: e3*q + x^2 + D q^2 = q_x*y + q_y*(e1 x + e2 y - x q + B y q)
    # quadratic order: e3*q + x^2 = q_x*y + q_y*(e1 x + e2 y)
    # q = c20 x^2 + c11 x y + c02 y^2
    # x^2: e3 c20 + 1 = c11 e1
    # xy : e3 c11 = 2 c20 + c11 e2 + 2 c02 e1
    # y^2: e3 c02 = c11 + 2 c02 e2
    A = np.array([
        [e3loc, -e1loc, 0.0],
        [-2.0, e3loc - e2loc, -2.0 * e1loc],
        [0.0, -1.0, e3loc - 2.0 * e2loc],
    ])
    rhs = np.array([-1.0, 0.0, 0.0])
    c20, c11, c02 = np.linalg.solve(A, rhs)
    # stable pair of [[0,1],[e1,e2]]
    disc = e2loc**2 + 4*e1loc
    sq = np.sqrt(complex(disc))
    lams = [(e2loc + sq)/2, (e2loc - sq)/2]
    lam_weak = max(lams, key=lambda l: l.real)  # closest to zero (both Re<0)
    v = np.array([1.0, lam_weak.real])  # eigvec (1, lambda) for the block
    v = v/np.linalg.norm(v)
    return (c20, c11, c02), v, lams


def he_miss(eps1, eps3, r0=1e-2, offset_scale=1e-6, verbose=False):
    p = Params(eps1, EPS2, eps3, B, D)
    eqs = {e.kind: e for e in equilibria(p)}
    conj, shift = conjugate_params(p)
    # fourth quadrant: source E1 (1D unstable in-plane), target E2
    e1, e2 = eqs[EquilibriumKind.E1], eqs[EquilibriumKind.E2]
    src, tgt = e1, e2
    tgt_loc = (conj.eps1, conj.eps2, conj.eps3)
    if eps1 < 0:   # second quadrant: roles swap
        src, tgt = e2, e1
        tgt_loc = (p.eps1, p.eps2, p.eps3)
    (c20, c11, c02), vw, lams = axis_saddle_chart(*tgt_loc)
    zt = tgt.state[2]
    seed = local_manifold_seed(p, src, "unstable",
                               offset=offset_scale*(1+np.linalg.norm(src.state)),
                               side=+1)
    # events: planes <vw,(x,y)> = +-r0 (through target)
    n3 = np.array([vw[0], vw[1], 0.0])
    evp = EventSpec.plane(n3, n3 @ tgt.state + r0, terminal=True, name="+")
    evm = EventSpec.plane(n3, n3 @ tgt.state - r0, terminal=True, name="-")
    st = IntegratorSettings(max_time=2000.0, rel_tol=1e-10, abs_tol=1e-12)
    y = seed.copy()
    t_total = 0.0
    for k in range(60):
        status, t, y = propagate_to_event(p, y, [evp, evm], st)
        t_total += t
        if status != "terminal-event":
            return np.nan, t_total, status
        dx = y - tgt.state
        rho = np.hypot(dx[0], dx[1])
        if rho <= 2.0*r0 and abs(dx[2]) <= 20*r0:
            side = np.sign(n3 @ dx)
            q = c20*dx[0]**2 + c11*dx[0]*dx[1] + c02*dx[1]**2
            miss = side*((dx[2]) - q)
            if verbose:
                print(f"  arrive t={t_total:.1f} rho={rho:.3e} w={dx[2]:.3e} q={q:.3e}")
            return miss, t_total, "ok"
        # not a qualifying crossing: nudge past and continue
        y = advance(p, y, 0.05, st)
        t_total += 0.05
    return np.nan, t_total, "no-arrival"


print("=== fourth quadrant: eps1=0.2, free eps3 (expect ~ -0.0043175)")
for e3 in (-0.006, -0.005, -0.0045, -0.0043, -0.004, -0.003):
    m, t, s = he_miss(0.2, e3)
    print(f"eps3={e3:+.5f}  miss={m:+.6e}  t={t:7.1f}  {s}")

f = lambda e3: he_miss(0.2, e3)[0]
try:
    root = brentq(f, -0.006, -0.003, xtol=1e-14)
    print("root eps3 =", root, " (ref -0.0043175)  miss:", f(root))
except Exception as ex:
    print("brentq failed:", ex)

print("=== second quadrant: eps1=-0.2, free eps3 (expect ~ 0.0037414)")
for e3 in (0.003, 0.0035, 0.0037, 0.0038, 0.004, 0.005):
    m, t, s = he_miss(-0.2, e3)
    print(f"eps3={e3:+.5f}  miss={m:+.6e}  t={t:7.1f}  {s}")
try:
    root2 = brentq(lambda e3: he_miss(-0.2, e3)[0], 0.003, 0.005, xtol=1e-14)
    print("root eps3 =", root2, " (ref 0.0037414)")
except Exception as ex:
    print("brentq failed:", ex)
