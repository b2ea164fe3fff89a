"""Periodic-orbit shooting, continuation, folds, and the cusp of folds.

Single shooting with the analytic variational matrix.  Symmetric orbits
(invariant under the reflection (x,y,z) -> (-x,-y,z)) close over half a
period composed with the reflection, which halves the integration cost and
pins the symmetry exactly.  Orbit families are continued with the generic
pseudo-arclength engine; folds are detected as tangent sign changes of the
free parameter and refined by secant iteration.

The saddle-node curves of symmetric orbits in the (eps1, eps3) plane are
traced slice-wise: at each fixed eps1 the family is continued in eps3, its
two folds recorded, and the cusp where the folds collide is located by a
square-root-law fit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


import numpy as np

from .continuation import (Branch, ContinuationError, ContinuationSettings,
                           ZeroProblem, continue_branch,
                           first_lyapunov_coefficient)
from .integrate import IntegratorSettings, variational_matrix
from .model import Params, jacobian, vector_field, z2_image

__all__ = [
    "PeriodicOrbitProblem", "PeriodicOrbit", "solve_periodic_orbit",
    "hopf_orbit_seed", "continue_periodic_orbit", "branch_orbit",
    "refine_fold", "fold_curve", "cusp_of_fold_curve",
]

_REFLECT = np.diag([-1.0, -1.0, 1.0])
_SHOOT_SETTINGS = IntegratorSettings(rel_tol=1e-10, abs_tol=1e-12,
                                     max_time=1e9, escape_radius=1e7)


@dataclass(frozen=True)
class PeriodicOrbitProblem:
    """Shooting setup: the section pins one coordinate of the start state.

    ``anchor_axis``/``anchor_value`` fix the section (default x = 0, the
    natural anchor for reflection-symmetric orbits).  The two remaining
    coordinates plus the integration time are the shooting unknowns; for
    symmetric orbits the integration time is the half period.
    """

    params: Params
    symmetric: bool = True
    anchor_axis: int = 0
    anchor_value: float = 0.0
    settings: IntegratorSettings = _SHOOT_SETTINGS

    @property
    def free_axes(self) -> tuple[int, int]:
        return tuple(i for i in range(3) if i != self.anchor_axis)

    def start_state(self, c) -> np.ndarray:
        s = np.empty(3)
        s[self.anchor_axis] = self.anchor_value
        s[self.free_axes[0]] = c[0]
        s[self.free_axes[1]] = c[1]
        return s


@dataclass(frozen=True)
class PeriodicOrbit:
    params: Params
    s0: np.ndarray
    period: float
    symmetric: bool
    monodromy: np.ndarray     # full-period fundamental matrix at s0

    @property
    def floquet_multipliers(self) -> np.ndarray:
        return np.linalg.eigvals(self.monodromy)

    def closure_error(self, settings: IntegratorSettings = _SHOOT_SETTINGS
                      ) -> float:
        end, _ = variational_matrix(self.params, self.s0, self.period,
                                    settings)
        return float(np.linalg.norm(end - self.s0))

    def half_symmetry_error(self,
                            settings: IntegratorSettings = _SHOOT_SETTINGS
                            ) -> float:
        end, _ = variational_matrix(self.params, self.s0, 0.5 * self.period,
                                    settings)
        return float(np.linalg.norm(z2_image(end) - self.s0))


def _shoot(problem: PeriodicOrbitProblem, params: Params, c, tau):
    """Closure residual and its derivatives wrt (c1, c2, tau)."""
    s0 = problem.start_state(c)
    end, M = variational_matrix(params, s0, tau, problem.settings)
    if problem.symmetric:
        res = _REFLECT @ end - s0
        dM = _REFLECT @ M
        f_end = _REFLECT @ vector_field(params, end)
    else:
        res = end - s0
        dM = M
        f_end = vector_field(params, end)
    ia, ib = problem.free_axes
    Jc = np.column_stack([dM[:, ia], dM[:, ib]])
    Jc[ia, 0] -= 1.0
    Jc[ib, 1] -= 1.0
    # the anchor coordinate of s0 does not vary, so only subtract identity
    # on the free axes (done above); anchor row of -I is zero
    return res, Jc, f_end, end, M


def solve_periodic_orbit(problem: PeriodicOrbitProblem, c_guess, tau_guess,
                         params: Params | None = None, tol: float = 1e-11,
                         max_iter: int = 40) -> PeriodicOrbit:
    """Damped Newton on the shooting closure at fixed parameters."""
    params = params or problem.params
    c = np.array(c_guess, dtype=float)
    tau = float(tau_guess)
    res, Jc, f_end, end, M = _shoot(problem, params, c, tau)
    for _ in range(max_iter):
        rn = np.linalg.norm(res)
        if rn < tol:
            break
        J = np.column_stack([Jc, f_end])
        try:
            du = np.linalg.solve(J, -res)
        except np.linalg.LinAlgError as ex:
            raise ContinuationError(f"singular shooting Jacobian: {ex}")
        lam = 1.0
        for _ in range(8):
            c_n = c + lam * du[:2]
            tau_n = tau + lam * du[2]
            if tau_n > 1e-3:
                r_n, Jc_n, f_n, end_n, M_n = _shoot(problem, params, c_n,
                                                    tau_n)
                if np.linalg.norm(r_n) < rn:
                    c, tau = c_n, tau_n
                    res, Jc, f_end, end, M = r_n, Jc_n, f_n, end_n, M_n
                    break
            lam *= 0.5
        else:
            raise ContinuationError(
                f"shooting Newton stalled at |res| = {rn:.3e}")
    else:
        raise ContinuationError(
            f"shooting Newton did not converge (|res| = "
            f"{np.linalg.norm(res):.3e})")
    s0 = problem.start_state(c)
    if problem.symmetric:
        mono = (_REFLECT @ M) @ (_REFLECT @ M)
        period = 2.0 * tau
    else:
        mono = M
        period = tau
    return PeriodicOrbit(params, s0, period, problem.symmetric, mono)


def hopf_orbit_seed(params_hopf: Params, equilibrium_state,
                    amplitude: float, free: str = "eps3",
                    symmetric: bool = True,
                    problem: PeriodicOrbitProblem | None = None
                    ) -> tuple[PeriodicOrbit, Params]:
    """A finite-amplitude orbit born at a Hopf point, by pinned shooting.

    The closure is solved with one start coordinate pinned at
    ``equilibrium_state +- amplitude`` and the bifurcation parameter freed,
    which avoids the collapse onto the trivial equilibrium solution.
    Returns the orbit and the parameter point where it lives.
    """
    x_star = np.asarray(equilibrium_state, dtype=float)
    w = np.linalg.eigvals(jacobian(params_hopf, x_star))
    om = max(abs(ev.imag) for ev in w)
    if om <= 0:
        raise ContinuationError("no rotating pair at the given state")
    problem = problem or PeriodicOrbitProblem(params_hopf,
                                              symmetric=symmetric)
    ia, ib = problem.free_axes
    pin_axis, free_axis = ia, ib
    tau = np.pi / om if symmetric else 2.0 * np.pi / om
    c = np.array([x_star[pin_axis] - amplitude, x_star[free_axis]])
    pval = getattr(params_hopf, free)

    for _ in range(50):
        p = params_hopf.replace(**{free: pval})
        res, Jc, f_end, _, _ = _shoot(problem, p, c, tau)
        if np.linalg.norm(res) < 1e-11:
            orbit = solve_periodic_orbit(problem, c, tau, p)
            return orbit, p
        h = 1e-7 * (1.0 + abs(pval))
        rp = _shoot(problem, params_hopf.replace(**{free: pval + h}), c,
                    tau)[0]
        Jp = (rp - res) / h
        J = np.column_stack([Jc[:, 1], f_end, Jp])
        try:
            du = np.linalg.solve(J, -res)
        except np.linalg.LinAlgError:
            raise ContinuationError("pinned Hopf seed: singular Jacobian")
        c[1] += du[0]
        tau += du[1]
        pval += du[2]
        if tau <= 1e-3 or not np.isfinite(tau):
            raise ContinuationError("pinned Hopf seed left the valid range")
    raise ContinuationError("pinned Hopf seed did not converge")


def _extended_problem(problem: PeriodicOrbitProblem, free: str
                      ) -> ZeroProblem:
    base = problem.params

    def residual(u):
        p = base.replace(**{free: u[3]})
        return _shoot(problem, p, u[:2], u[2])[0]

    def jac(u):
        p = base.replace(**{free: u[3]})
        res, Jc, f_end, _, _ = _shoot(problem, p, u[:2], u[2])
        h = 1e-7 * (1.0 + abs(u[3]))
        rp = _shoot(problem, base.replace(**{free: u[3] + h}), u[:2],
                    u[2])[0]
        return np.column_stack([Jc, f_end, (rp - res) / h])

    names = (f"c{problem.free_axes[0]}", f"c{problem.free_axes[1]}", "tau",
             free)
    return ZeroProblem(residual, jac, names)


def continue_periodic_orbit(problem: PeriodicOrbitProblem,
                            orbit: PeriodicOrbit, free: str,
                            settings: ContinuationSettings | None = None,
                            direction=+1, tau_max: float = 2000.0) -> Branch:
    """Arclength continuation of an orbit family in one parameter.

    The branch carries a ``fold`` test on the free parameter.  Termination
    by period blow-up (``tau`` above ``tau_max``) is reported as
    "global-bifurcation-proximity".
    """
    zp = _extended_problem(problem, free)
    tau0 = 0.5 * orbit.period if problem.symmetric else orbit.period
    ia, ib = problem.free_axes
    start = np.array([orbit.s0[ia], orbit.s0[ib], tau0,
                      getattr(orbit.params, free)])
    settings = settings or ContinuationSettings(
        step=0.01, step_max=0.2, step_min=1e-9, max_points=600,
        residual_tol=1e-9)
    lo = np.array([-np.inf, -np.inf, 1e-3, -np.inf])
    hi = np.array([np.inf, np.inf, tau_max, np.inf])
    if settings.bounds is not None:
        lo = np.maximum(lo, settings.bounds[0])
        hi = np.minimum(hi, settings.bounds[1])
    settings = replace(settings, bounds=(lo, hi))
    br = continue_branch(zp, start, settings, direction=direction,
                         fold_index=3)
    if len(br) and br.points[-1][2] >= tau_max * 0.999:
        br.termination = "global-bifurcation-proximity"
    return br


def branch_orbit(problem: PeriodicOrbitProblem, u, free: str
                 ) -> PeriodicOrbit:
    """Re-solve a branch point into a fully populated PeriodicOrbit."""
    p = problem.params.replace(**{free: u[3]})
    return solve_periodic_orbit(problem, u[:2], u[2], p)


def refine_fold(problem: PeriodicOrbitProblem, orbit: PeriodicOrbit,
                free: str = "eps3", tol: float = 1e-10, max_iter: int = 30
                ) -> tuple[np.ndarray, np.ndarray, Params]:
    """Newton on the bordered fold system at fixed remaining parameters.

    Unknowns are (c1, c2, tau, free parameter, null vector phi); residuals
    are the closure, the closure Jacobian annihilating phi, and the
    normalization |phi|^2 = 1.  Returns (u, phi, params_at_fold) where u is
    (c1, c2, tau, free value).
    """
    base = problem.params
    ia, ib = problem.free_axes
    u = np.array([orbit.s0[ia], orbit.s0[ib],
                  0.5 * orbit.period if problem.symmetric else orbit.period,
                  getattr(orbit.params, free)])

    def closure_jac(u4):
        p = base.replace(**{free: u4[3]})
        res, Jc, f_end, _, _ = _shoot(problem, p, u4[:2], u4[2])
        return res, np.column_stack([Jc, f_end])

    _, G_u = closure_jac(u)
    _, _, vt = np.linalg.svd(G_u)
    phi = vt[-1]

    def full_residual(v):
        u4, ph = v[:4], v[4:]
        res, G = closure_jac(u4)
        return np.concatenate([res, G @ ph, [ph @ ph - 1.0]])

    v = np.concatenate([u, phi])
    from .continuation import _fd_jacobian
    for _ in range(max_iter):
        r = full_residual(v)
        if np.linalg.norm(r) < tol:
            u4, phi = v[:4], v[4:]
            return u4, phi, base.replace(**{free: u4[3]})
        J = _fd_jacobian(full_residual, v, r)
        try:
            dv = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as ex:
            raise ContinuationError(f"fold refinement singular: {ex}")
        v = v + dv
    raise ContinuationError(
        f"fold refinement stalled at |res| = {np.linalg.norm(r):.3e}")


def fold_curve(problem: PeriodicOrbitProblem, fold_u, fold_phi,
               free_pair: tuple[str, str] = ("eps1", "eps3"),
               settings: ContinuationSettings | None = None,
               direction=+1, cusp_on: str = "eps1") -> Branch:
    """Two-parameter continuation of a saddle-node of periodic orbits.

    Unknowns: (c1, c2, tau, eps1, eps3, phi1, phi2, phi3) with residuals
    {closure = 0, closure_u . phi = 0, |phi|^2 = 1}.  A cusp is exactly a
    reversal of the parameter tangent along the fold curve, so it is
    detected (and refined) as a "fold" special point on the ``cusp_on``
    parameter column.
    """
    base = problem.params
    f1, f2 = free_pair

    def closure_jac(c1, c2, tau, p1, p2):
        p = base.replace(**{f1: p1, f2: p2})
        res, Jc, f_end, _, _ = _shoot(problem, p, [c1, c2], tau)
        return res, np.column_stack([Jc, f_end])

    def residual(v):
        res, G = closure_jac(v[0], v[1], v[2], v[3], v[4])
        ph = v[5:]
        return np.concatenate([res, G @ ph, [ph @ ph - 1.0]])

    seed_p2 = getattr(problem.params, f2) if f2 != "eps3" else fold_u[3]
    if f2 == "eps3":
        start = np.concatenate([fold_u[:3],
                                [getattr(base, f1), fold_u[3]], fold_phi])
    else:
        start = np.concatenate([fold_u[:3],
                                [fold_u[3], seed_p2], fold_phi])
    names = (f"c{problem.free_axes[0]}", f"c{problem.free_axes[1]}", "tau",
             f1, f2, "phi1", "phi2", "phi3")
    zp = ZeroProblem(residual, names=names)
    settings = settings or ContinuationSettings(
        step=0.02, step_max=0.12, step_min=1e-9, max_points=800,
        residual_tol=1e-8)
    cusp_index = names.index(cusp_on)
    return continue_branch(zp, start, settings, direction=direction,
                           fold_index=cusp_index)


def cusp_of_fold_curve(branch: Branch, cusp_on: str = "eps1"
                       ) -> tuple[float, float]:
    """(eps1, eps3) of the first cusp flagged on a fold-curve branch."""
    for sp in branch.special_points:
        if sp.kind == "fold":
            i1 = branch.names.index("eps1")
            i3 = branch.names.index("eps3")
            return float(sp.point[i1]), float(sp.point[i3])
    raise ContinuationError("no cusp (parameter-tangent reversal) found")
