"""Scratch: symmetric periodic orbits near the E2 Hopf line, fold hunting."""
import numpy as np
from triplezero import Params
from triplezero.model import vector_field, equilibria, EquilibriumKind
from triplezero.continuation import first_lyapunov_coefficient
from triplezero.integrate import IntegratorSettings, advance, variational_matrix

EPS2, B, D = -1.0, -0.1, 0.01
R = np.diag([-1.0, -1.0, 1.0])
ST = IntegratorSettings(rel_tol=1e-10, abs_tol=1e-12, max_time=1e6)


def half_shoot(p, c, tau):
    """Symmetric orbit closure R*Phi_tau(s0) - s0 with s0=(0, c1, c2)."""
    s0 = np.array([0.0, c[0], c[1]])
    y, M = variational_matrix(p, s0, tau)
    res = R @ y - s0
    f_end = vector_field(p, y)
    Jc = (R @ M)[:, 1:] - np.eye(3)[:, 1:]
    Jtau = R @ f_end
    return res, Jc, Jtau, y


def newton_po(p, c, tau, tol=1e-11, itmax=30):
    c = np.array(c, float); tau = float(tau)
    for it in range(itmax):
        res, Jc, Jtau, _ = half_shoot(p, c, tau)
        if np.linalg.norm(res) < tol:
            return c, tau, it
        J = np.column_stack([Jc, Jtau])
        du = np.linalg.solve(J, -res)
        # damped
        lam = 1.0
        for _ in range(6):
            c2 = c + lam*du[:2]; t2 = tau + lam*du[2]
            if t2 > 0.05:
                r2 = half_shoot(p, c2, t2)[0]
                if np.linalg.norm(r2) < np.linalg.norm(res):
                    break
            lam *= 0.5
        c, tau = c + lam*du[:2], tau + lam*du[2]
    return None


# 1) Hopf data at (eps1=-10.15, eps3=0.1)
e1fix = -10.15
p_h = Params(e1fix, EPS2, 0.1, B, D)
E2z = -0.1/D
l1 = first_lyapunov_coefficient(p_h, [0, 0, E2z], tol=1e-7)
om = np.sqrt(-(e1fix + 0.1/D))
print(f"l1 at eps1={e1fix} on Hopf line: {l1:+.4f}, omega={om:.4f}")
# Re lambda(eps3) = (eps2 - (B/D) eps3)/2 -> d/de3 = -(B/D)/2 = +5
# orbit where Re/l1 < 0: l1>0 (subcritical): need Re<0: eps3 < 0.1  ✓ expect

for de3 in (-2e-4, -1e-3):
    e3 = 0.1 + de3
    p = Params(e1fix, EPS2, e3, B, D)
    re = (EPS2 - (B/D)*e3)/2
    r = np.sqrt(abs(re/l1))
    # q = (1, i*omega, 0)-ish for the in-plane block; s0 on x=0: phase with x=0
    # x-component of Re(q e^{i phi}) = cos(phi) -> phi=pi/2: Re(i q)=(0, -om, 0)
    c0 = np.array([-om*r, E2z])
    sol = newton_po(p, c0, np.pi/om)
    print(f"eps3={e3}: r_guess={r:.4f} ->",
          None if sol is None else f"converged c=({sol[0][0]:.5f},{sol[0][1]:.4f}) tau={sol[1]:.3f} its={sol[2]}")

# 2) continue in eps1 at fixed eps3=0.099, crude natural continuation + fold probe
e3 = 0.099
p = Params(e1fix, EPS2, e3, B, D)
re = (EPS2 - (B/D)*e3)/2
r = np.sqrt(abs(re/l1))
sol = newton_po(p, [-om*r, E2z], np.pi/om)
print("seed at eps3=0.099:", sol[0], sol[1])

# pseudo-arclength in (c1,c2,tau,eps1)
def residual_ext(u):
    c = u[:2]; tau = u[2]; e1 = u[3]
    res, _, _, _ = half_shoot(Params(e1, EPS2, e3, B, D), c, tau)
    return res

def jac_ext(u):
    c = u[:2]; tau = u[2]; e1 = u[3]
    p = Params(e1, EPS2, e3, B, D)
    res, Jc, Jtau, _ = half_shoot(p, c, tau)
    h = 1e-7
    rp = half_shoot(Params(e1+h, EPS2, e3, B, D), c, tau)[0]
    rm = half_shoot(Params(e1-h, EPS2, e3, B, D), c, tau)[0]
    return np.column_stack([Jc, Jtau, (rp-rm)/(2*h)])

from triplezero.continuation import ZeroProblem, ContinuationSettings, continue_branch
prob = ZeroProblem(residual_ext, jac_ext, names=("y0","z0","tau","eps1"))
start = np.array([sol[0][0], sol[0][1], sol[1], e1fix])
sett = ContinuationSettings(step=0.02, step_max=0.3, step_min=1e-8, max_points=400,
                            residual_tol=1e-9)
br = continue_branch(prob, start, sett, fold_index=3, direction=+1)
print("dir+1:", br.termination, "points:", len(br), "eps1 range:",
      br.points[:,3].min(), br.points[:,3].max())
print("folds:", [(sp.kind, sp.point[3]) for sp in br.special_points])
br2 = continue_branch(prob, start, sett, fold_index=3, direction=-1)
print("dir-1:", br2.termination, "points:", len(br2), "eps1 range:",
      br2.points[:,3].min(), br2.points[:,3].max())
print("folds:", [(sp.kind, sp.point[3]) for sp in br2.special_points])
for brx, lbl in ((br,'+'),(br2,'-')):
    pts = brx.points
    print(lbl, "sample:", [(round(pt[3],4), round(pt[2],2), round(pt[0],4)) for pt in pts[::max(1,len(pts)//8)]])
