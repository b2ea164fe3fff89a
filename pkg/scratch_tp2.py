"""Scratch: T-point 2D Newton on (eps1, eps3)."""
import numpy as np
from triplezero import Params, equilibria, EquilibriumKind
from triplezero.model import jacobian
from triplezero.integrate import (EventSpec, IntegratorSettings, advance,
                                  local_manifold_seed, propagate_to_event)

EPS2, B, D = -1.0, -0.1, 0.01
ST = IntegratorSettings(max_time=300.0, rel_tol=1e-11, abs_tol=1e-13)


def tp_miss(e1v, e3v, target_kind, r0=5e-3, diag=False):
    p = Params(e1v, EPS2, e3v, B, D)
    eqs = {e.kind: e for e in equilibria(p)}
    E2 = eqs[EquilibriumKind.E2]
    Et = eqs[target_kind]
    j = jacobian(p, Et.state)
    w, v = np.linalg.eig(j)
    i = int(np.argmin(w.real))
    vs = np.real(v[:, i]); vs /= np.linalg.norm(vs)
    # in-plane basis of the section plane <vs, s-Et> = sigma*r0
    b1 = np.cross(vs, [0.0, 0.0, 1.0]); b1 /= np.linalg.norm(b1)
    b2 = np.cross(vs, b1)

    # backward trace of W^s(Et): find which side's backward orbit crosses
    def ws_point(sigma):
        seed = Et.state + sigma * 1e-7 * (1 + np.linalg.norm(Et.state)) * vs
        ev = EventSpec.plane(vs, vs @ Et.state + sigma * r0, terminal=True)
        status, t, y = propagate_to_event(p, seed, [ev], ST, fdir=-1.0)
        return (y if status == "terminal-event" else None), t

    # forward leg from W^u(E2), side +
    seedf = local_manifold_seed(p, E2, "unstable", side=+1)
    evs = [EventSpec.plane(vs, vs @ Et.state + r0, terminal=False, name="p"),
           EventSpec.plane(vs, vs @ Et.state - r0, terminal=False, name="m")]
    from triplezero.integrate import integrate
    tr = integrate(p, seedf, ST, evs)
    cands = []
    for t, name, s in tr.events:
        d = np.linalg.norm(s - Et.state)
        cands.append((d, t, name, s))
    cands.sort()
    if diag:
        for d, t, name, s in cands[:5]:
            print(f"   cand {name} t={t:7.1f} dist={d:.4e}")
    if not cands:
        return None
    d, t, name, s = cands[0]
    sigma = +1 if name == "p" else -1
    pw, tb = ws_point(sigma)
    if pw is None:
        return None
    delta = s - pw
    return np.array([b1 @ delta, b2 @ delta]), t, d


def newton_tp(e1v, e3v, target_kind, steps=8):
    u = np.array([e1v, e3v])
    for k in range(steps):
        res = tp_miss(u[0], u[1], target_kind)
        if res is None:
            print("  miss eval failed"); return None
        m, t, d = res
        print(f"  it{k}: u=({u[0]:.7f}, {u[1]:.7f}) |miss|={np.linalg.norm(m):.3e} arrival_d={d:.3e}")
        if np.linalg.norm(m) < 1e-10:
            break
        J = np.zeros((2, 2))
        h = np.array([1e-7, 1e-8])
        for jcol in range(2):
            up = u.copy(); up[jcol] += h[jcol]
            mp = tp_miss(up[0], up[1], target_kind)[0]
            J[:, jcol] = (mp - m) / h[jcol]
        du = np.linalg.solve(J, -m)
        # damp big steps
        lim = np.array([5e-3, 5e-5])
        sc = min(1.0, np.min(lim / (np.abs(du) + 1e-300)))
        u = u + sc * du
    return u


print("=== principal T-point (target E4), seeded off-reference")
u = newton_tp(-8.37, 0.0842, EquilibriumKind.E4)
print("TP_p found:", u, " ref (-8.3738877, 0.0841835)")

print("=== secondary T-point (target E3), seeded off-reference")
u = newton_tp(-8.415, 0.0850, EquilibriumKind.E3)
print("TP_s found:", u, " ref (-8.4159326, 0.0850368)")
