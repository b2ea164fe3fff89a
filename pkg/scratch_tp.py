"""Scratch: explore T-point loop geometry near the reference values."""
import numpy as np
from triplezero import Params, equilibria, EquilibriumKind
from triplezero.model import jacobian
from triplezero.integrate import (EventSpec, IntegratorSettings, advance,
                                  integrate, local_manifold_seed)

EPS2, B, D = -1.0, -0.1, 0.01


def setup(eps1, eps3):
    p = Params(eps1, EPS2, eps3, B, D)
    eqs = {e.kind: e for e in equilibria(p)}
    return p, eqs


def stable_dir_E3(p, e3eq):
    j = jacobian(p, e3eq.state)
    w, v = np.linalg.eig(j)
    i = np.argmin(w.real)
    assert abs(w[i].imag) < 1e-12
    vec = np.real(v[:, i]); vec /= np.linalg.norm(vec)
    return w[i].real, vec


e1v, e3v = -8.3738877, 0.0841835
p, eqs = setup(e1v, e3v)
E2, E3 = eqs[EquilibriumKind.E2], eqs[EquilibriumKind.E3]
print("E2:", E2.state, [f"{ev:.4f}" for ev in E2.spectrum.eigenvalues])
print("E3:", E3.state, [f"{ev:.4f}" for ev in E3.spectrum.eigenvalues])
lam_s, vs = stable_dir_E3(p, E3)
print("E3 stable:", lam_s, vs)

# forward leg: W^u(E2), side toward +x
seed = local_manifold_seed(p, E2, "unstable", side=+1)
st = IntegratorSettings(max_time=400.0, rel_tol=1e-11, abs_tol=1e-13)
x_mid = 0.5 * E3.state[0]
ev = EventSpec.coordinate(0, x_mid, terminal=False, name="xsec")
tr = integrate(p, seed, st, [ev])
print("forward: steps", len(tr), "crossings:", len(tr.events), "status", tr.status)
d_to_E3 = np.linalg.norm(tr.states - E3.state, axis=1)
print("closest approach to E3:", d_to_E3.min(), "at t=", tr.times[np.argmin(d_to_E3)])
for t, name, s in tr.events[:8]:
    print(f"  cross t={t:8.2f}  y={s[1]:+.5f} z={s[2]:+.5f}  |s-E3|={np.linalg.norm(s-E3.state):.4f}")

# backward leg: W^s(E3)
for side in (+1, -1):
    seedb = E3.state + side * 1e-7 * (1+np.linalg.norm(E3.state)) * vs
    trb = integrate(Params(e1v, EPS2, e3v, B, D), seedb,
                    IntegratorSettings(max_time=400.0, rel_tol=1e-11, abs_tol=1e-13), [ev])
    # backward: integrate with reversed field via fdir... integrate() is forward-only;
    # use advance loop instead
    from triplezero.integrate import propagate_to_event
    y = seedb.copy(); ttot = 0.0; crossings = []
    evt = EventSpec.coordinate(0, x_mid, terminal=True, name="xsec")
    for k in range(12):
        status, t, y = propagate_to_event(p, y, [evt], st, fdir=-1.0)
        ttot += t
        if status != "terminal-event":
            break
        crossings.append((ttot, y.copy()))
        y = advance(p, y, 0.05, st, fdir=-1.0); ttot += 0.05
    print(f"backward side={side:+d}: {len(crossings)} crossings, status {status}")
    for t, s in crossings[:4]:
        print(f"   t={t:8.2f}  y={s[1]:+.6f} z={s[2]:+.6f}  |s-E2|={np.linalg.norm(s-E2.state):.4f}")
