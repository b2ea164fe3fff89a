"""Pseudo-arclength continuation with test functions, plus Hopf machinery.

The engine traces zero curves of smooth maps R^{n+1} -> R^n by tangent
prediction and bordered Newton correction with adaptive arclength steps.
Test functions are evaluated at every accepted point; their sign changes are
refined by secant iteration along the branch.  On top of it sit the
two-parameter Hopf locus (:func:`hopf_curve`) and the first Lyapunov
coefficient of a Hopf point (:func:`first_lyapunov_coefficient`).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_sylvester  # noqa: F401  (used by connections)
from scipy.optimize import brentq

from .localbif import ClassificationError
from .model import (Params, char_poly_at_origin, equilibria, jacobian,
                    vector_field, EquilibriumKind)

__all__ = [
    "ZeroProblem", "ContinuationSettings", "SpecialPoint", "Branch",
    "ContinuationError", "continue_branch", "hopf_curve",
    "first_lyapunov_coefficient", "degenerate_hopf_E2",
    "quadratic_form", "hopf_condition_at",
]


class ContinuationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ZeroProblem:
    """residual: R^{n+1} -> R^n; jacobian optional (finite differences else)."""

    residual: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    names: tuple[str, ...] = ()


@dataclass(frozen=True)
class ContinuationSettings:
    step: float = 0.01
    step_min: float = 1e-7
    step_max: float = 0.1
    max_points: int = 2000
    residual_tol: float = 1e-9
    max_newton: int = 10
    grow: float = 1.4
    shrink: float = 0.45
    fast_newton: int = 3
    bounds: tuple | None = None       # (lo, hi) arrays over all unknowns
    refine_tol: float = 1e-10


@dataclass(frozen=True)
class SpecialPoint:
    index: int          # insertion index: between points[index] and [index+1]
    kind: str
    point: np.ndarray
    test_value: float = 0.0


@dataclass
class Branch:
    points: np.ndarray                 # (m, n+1)
    tangents: np.ndarray               # (m, n+1), unit norm
    special_points: list[SpecialPoint] = field(default_factory=list)
    termination: str = "max-points"
    test_values: dict[str, np.ndarray] = field(default_factory=dict)
    names: tuple[str, ...] = ()
    step_sizes: np.ndarray | None = None

    def __len__(self):
        return len(self.points)

    def column(self, name: str) -> np.ndarray:
        return self.points[:, self.names.index(name)]

    def to_csv(self, path) -> None:
        names = self.names or tuple(f"u{i}"
                                    for i in range(self.points.shape[1]))
        test_names = sorted(self.test_values)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(names) + [f"test:{t}" for t in test_names]
                       + ["special"])
            markers = {}
            for sp in self.special_points:
                markers.setdefault(sp.index, []).append(sp)
            for i, pt in enumerate(self.points):
                row = [f"{v:.17g}" for v in pt]
                row += [f"{self.test_values[t][i]:.17g}" for t in test_names]
                row.append("")
                w.writerow(row)
                for sp in markers.get(i, []):
                    w.writerow([f"{v:.17g}" for v in sp.point]
                               + [""] * len(test_names) + [sp.kind])

    def to_json(self, path=None) -> str:
        doc = {
            "names": list(self.names),
            "points": self.points.tolist(),
            "tangents": self.tangents.tolist(),
            "termination": self.termination,
            "test_values": {k: v.tolist() for k, v in
                            self.test_values.items()},
            "step_sizes": (self.step_sizes.tolist()
                           if self.step_sizes is not None else None),
            "special_points": [
                {"index": sp.index, "kind": sp.kind,
                 "point": sp.point.tolist(), "test_value": sp.test_value}
                for sp in self.special_points],
        }
        text = json.dumps(doc)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _fd_jacobian(residual, u, r0=None):
    """Central-difference Jacobian with step sqrt(eps)*(1 + |u_i|)."""
    n1 = len(u)
    if r0 is None:
        r0 = residual(u)
    m = len(r0)
    J = np.empty((m, n1))
    for j in range(n1):
        h = np.sqrt(np.finfo(float).eps) * (1.0 + abs(u[j]))
        up = u.copy()
        um = u.copy()
        up[j] += h
        um[j] -= h
        J[:, j] = (residual(up) - residual(um)) / (2.0 * h)
    return J


def _problem_jacobian(problem, u, r0=None):
    if problem.jacobian is not None:
        return np.asarray(problem.jacobian(u), dtype=float)
    return _fd_jacobian(problem.residual, u, r0)


def _first_tangent(J):
    # null vector of the n x (n+1) Jacobian via SVD
    _, _, vt = np.linalg.svd(J)
    return vt[-1]


def _bordered_tangent(J, t_prev):
    """Tangent from the bordered system, oriented along t_prev."""
    n1 = J.shape[1]
    M = np.vstack([J, t_prev])
    rhs = np.zeros(n1)
    rhs[-1] = 1.0
    try:
        t = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        t = _first_tangent(J)
    nt = np.linalg.norm(t)
    if nt == 0 or not np.all(np.isfinite(t)):
        t = _first_tangent(J)
        nt = 1.0
    t = t / np.linalg.norm(t)
    if t @ t_prev < 0:
        t = -t
    return t


def _corrector(problem, pred, tangent, settings):
    """Newton on {residual = 0, tangent . (u - pred) = 0}."""
    u = pred.copy()
    for it in range(settings.max_newton):
        r = np.asarray(problem.residual(u), dtype=float)
        g = tangent @ (u - pred)
        rn = np.linalg.norm(r)
        if not np.isfinite(rn):
            return None, it, None
        if rn <= settings.residual_tol and abs(g) <= settings.residual_tol:
            return u, it, _problem_jacobian(problem, u, r)
        J = _problem_jacobian(problem, u, r)
        M = np.vstack([J, tangent])
        try:
            du = np.linalg.solve(M, -np.concatenate([r, [g]]))
        except np.linalg.LinAlgError:
            return None, it, None
        u = u + du
        if not np.all(np.isfinite(u)):
            return None, it, None
    r = np.asarray(problem.residual(u), dtype=float)
    if np.linalg.norm(r) <= settings.residual_tol:
        return u, settings.max_newton, _problem_jacobian(problem, u, r)
    return None, settings.max_newton, None


def _correct_start(problem, start, settings):
    """Minimum-norm Newton onto the curve from an approximate start."""
    u = np.asarray(start, dtype=float).copy()
    for _ in range(settings.max_newton * 2):
        r = np.asarray(problem.residual(u), dtype=float)
        if np.linalg.norm(r) <= settings.residual_tol:
            return u
        J = _problem_jacobian(problem, u, r)
        du, *_ = np.linalg.lstsq(J, -r, rcond=None)
        u = u + du
        if not np.all(np.isfinite(u)):
            break
    raise ContinuationError(
        f"initial correction failed (residual {np.linalg.norm(r):.3e})")


def _in_bounds(u, bounds):
    if bounds is None:
        return True
    lo, hi = bounds
    return bool(np.all(u >= lo) and np.all(u <= hi))


def _refine_test_zero(problem, u_from, t_from, s_hi, test, settings):
    """Secant on arclength for a test-function zero in (0, s_hi]."""

    def point_at(s):
        pred = u_from + s * t_from
        u, _, _ = _corrector(problem, pred, t_from, settings)
        return u

    f_cache = {}

    def f(s):
        if s not in f_cache:
            u = point_at(s)
            f_cache[s] = (np.nan if u is None else test(u), u)
        return f_cache[s][0]

    a, b = 0.0, s_hi
    fa, fb = f(1e-12 * s_hi), f(s_hi)
    if not (np.isfinite(fa) and np.isfinite(fb)) or fa * fb > 0:
        return None
    for _ in range(80):
        # secant with bisection safeguard
        s_new = b - fb * (b - a) / (fb - fa) if fb != fa else 0.5 * (a + b)
        if not (a < s_new < b):
            s_new = 0.5 * (a + b)
        fn = f(s_new)
        if not np.isfinite(fn):
            s_new = 0.5 * (a + b)
            fn = f(s_new)
            if not np.isfinite(fn):
                return None
        if fn == 0.0 or (b - a) < settings.refine_tol:
            a = b = s_new
            break
        if (fn < 0) == (fa < 0):
            a, fa = s_new, fn
        else:
            b, fb = s_new, fn
    s_star = 0.5 * (a + b) if a != b else a
    val = f(s_star)
    return f_cache[s_star][1], val


def continue_branch(problem: ZeroProblem, start, settings=None,
                    tests: dict[str, Callable] | None = None,
                    direction=+1, fold_index: int | None = None,
                    detect_branch_points: bool = False) -> Branch:
    """Trace the zero curve of ``problem`` from ``start``.

    ``direction`` fixes the initial tangent orientation: an integer +-1
    selects the sign of the last unknown's tangent component, or pass a
    vector to orient along it.  ``fold_index`` enables fold detection on
    that unknown (tangent component sign change).  ``tests`` maps names to
    scalar functions of the full unknown vector; refined zeros become
    special points.
    """
    settings = settings or ContinuationSettings()
    tests = dict(tests or {})
    u = _correct_start(problem, start, settings)
    J = _problem_jacobian(problem, u)
    t = _first_tangent(J)
    if np.ndim(direction) > 0:
        d = np.asarray(direction, dtype=float)
        if t @ d < 0:
            t = -t
    else:
        k = fold_index if fold_index is not None else len(u) - 1
        if t[k] * np.sign(direction) < 0:
            t = -t

    points = [u]
    tangents = [t]
    steps = [0.0]
    test_vals = {name: [fn(u)] for name, fn in tests.items()}
    fold_vals = [t[fold_index]] if fold_index is not None else None
    det_vals = []
    if detect_branch_points:
        M = np.vstack([J, t])
        det_vals.append(np.linalg.slogdet(M)[0])
    special = []
    termination = "max-points"

    h = settings.step
    while len(points) < settings.max_points:
        u_prev, t_prev = points[-1], tangents[-1]
        accepted = False
        while h >= settings.step_min:
            pred = u_prev + h * t_prev
            u_new, n_it, J_new = _corrector(problem, pred, t_prev, settings)
            if u_new is not None:
                accepted = True
                break
            h *= settings.shrink
        if not accepted:
            termination = "step-underflow"
            break
        t_new = _bordered_tangent(J_new, t_prev)

        # test functions: sign changes refined on the segment just accepted
        for name, fn in tests.items():
            v_prev = test_vals[name][-1]
            v_new = fn(u_new)
            if (np.isfinite(v_prev) and np.isfinite(v_new)
                    and v_prev * v_new < 0):
                ref = _refine_test_zero(problem, u_prev, t_prev, h, fn,
                                        settings)
                if ref is not None:
                    special.append(SpecialPoint(len(points) - 1, name,
                                                ref[0], ref[1]))
            test_vals[name].append(v_new)
        if fold_index is not None:
            v_prev, v_new = fold_vals[-1], t_new[fold_index]
            if v_prev * v_new < 0:
                ref = _refine_test_zero(
                    problem, u_prev, t_prev, h,
                    lambda v: _bordered_tangent(
                        _problem_jacobian(problem, v), t_prev)[fold_index],
                    settings)
                if ref is not None:
                    special.append(SpecialPoint(len(points) - 1, "fold",
                                                ref[0], ref[1]))
            fold_vals.append(v_new)
        if detect_branch_points:
            M = np.vstack([J_new, t_new])
            s_new = np.linalg.slogdet(M)[0]
            if det_vals and s_new * det_vals[-1] < 0:
                special.append(SpecialPoint(len(points) - 1, "branch-point",
                                            u_new.copy(), 0.0))
            det_vals.append(s_new)

        points.append(u_new)
        tangents.append(t_new)
        steps.append(h)
        if n_it <= settings.fast_newton:
            h = min(h * settings.grow, settings.step_max)
        if not _in_bounds(u_new, settings.bounds):
            termination = "domain-bound"
            break

    branch = Branch(
        points=np.asarray(points),
        tangents=np.asarray(tangents),
        special_points=special,
        termination=termination,
        test_values={k: np.asarray(v) for k, v in test_vals.items()},
        names=problem.names,
        step_sizes=np.asarray(steps),
    )
    if fold_index is not None:
        branch.test_values["fold"] = np.asarray(fold_vals)
    return branch


# ---------------------------------------------------------------------------
# Hopf locus
# ---------------------------------------------------------------------------

def _char_coeffs(J):
    p1 = -np.trace(J)
    p2 = 0.5 * (np.trace(J) ** 2 - np.trace(J @ J))
    p3 = -np.linalg.det(J)
    return p1, p2, p3


def hopf_condition_at(params: Params, s) -> tuple[float, float]:
    """(p1*p2 - p3, p2) of the characteristic cubic at the state s."""
    p1, p2, p3 = _char_coeffs(jacobian(params, s))
    return p1 * p2 - p3, p2


def _closed_form_line_branch(points, names) -> Branch:
    pts = np.asarray(points)
    tans = np.zeros_like(pts)
    if len(pts) > 1:
        d = pts[1:] - pts[:-1]
        d = d / np.linalg.norm(d, axis=1, keepdims=True)
        tans[:-1] = d
        tans[-1] = d[-1]
    return Branch(points=pts, tangents=tans, termination="closed-form",
                  names=names)


def hopf_curve(subject: str, params: Params,
               free: tuple[str, str] = ("eps1", "eps3"),
               window=((-12.0, 0.0), (0.0, 0.12)),
               seed_eps1: float | None = None,
               settings: ContinuationSettings | None = None) -> Branch:
    """Two-parameter Hopf locus of E1, E2, or the nontrivial pair E34.

    For E1 and E2 the locus is a closed-form line (trace condition of the
    in-plane block with the paired positivity requirement); it is returned
    as a sampled Branch restricted to the requested window.  For E34 the
    locus is continued numerically with unknowns (x, y, z, eps1, eps3) and
    residuals {equilibrium equations, p1*p2 - p3 = 0}; the branch terminates
    where the positivity condition p2 > 0 or the equilibria themselves
    degenerate (approach of the pitchfork boundaries).
    """
    if free != ("eps1", "eps3"):
        raise NotImplementedError("free parameters are (eps1, eps3)")
    (e1_lo, e1_hi), (e3_lo, e3_hi) = window
    if subject == "E1":
        # eps2 = 0 required; inside the (eps1, eps3) slice the locus exists
        # only if params.eps2 == 0, as the line eps1 < 0 at each eps3
        if params.eps2 != 0.0:
            return Branch(points=np.empty((0, 2)),
                          tangents=np.empty((0, 2)),
                          termination="empty: requires eps2 = 0",
                          names=("eps1", "eps3"))
        e1s = np.linspace(min(e1_lo, -1e-12), min(e1_hi, 0.0), 200)
        pts = np.column_stack([e1s, np.full_like(e1s, params.eps3)])
        return _closed_form_line_branch(pts, ("eps1", "eps3"))
    if subject == "E2":
        # trace of the shifted in-plane block: eps2 - (B/D) eps3 = 0
        if params.b_coef == 0.0:
            raise ClassificationError("B = 0: no E2 Hopf line in this slice")
        e3_star = params.d_coef * params.eps2 / params.b_coef
        # pair purely imaginary requires eps1 + eps3/D < 0
        e1_max = -e3_star / params.d_coef
        lo = e1_lo
        hi = min(e1_hi, e1_max)
        if hi <= lo or not (e3_lo <= e3_star <= e3_hi):
            return Branch(points=np.empty((0, 2)),
                          tangents=np.empty((0, 2)),
                          termination="empty: line outside window",
                          names=("eps1", "eps3"))
        e1s = np.linspace(lo, hi, 400)
        pts = np.column_stack([e1s, np.full_like(e1s, e3_star)])
        return _closed_form_line_branch(pts, ("eps1", "eps3"))
    if subject != "E34":
        raise ValueError("subject must be 'E1', 'E2', or 'E34'")

    base = params

    def residual(u):
        s = u[:3]
        p = base.replace(eps1=u[3], eps3=u[4])
        f = vector_field(p, s)
        h, _ = hopf_condition_at(p, s)
        return np.array([f[0], f[1], f[2], h])

    # seed on the closed-form equilibrium at a mid-window eps1
    e1_seed = seed_eps1 if seed_eps1 is not None else 0.5 * (e1_lo + e1_hi)
    p_of = lambda e3: base.replace(eps1=e1_seed, eps3=e3)

    def hurwitz_of_e3(e3):
        p = p_of(e3)
        x0sq = -p.eps1 * (p.eps3 + p.d_coef * p.eps1)
        if x0sq <= 0:
            return np.nan
        s = np.array([np.sqrt(x0sq), 0.0, p.eps1])
        h, _ = hopf_condition_at(p, s)
        return h

    e3_grid = np.linspace(max(e3_lo, 1e-6), e3_hi, 240)
    vals = np.array([hurwitz_of_e3(e3) for e3 in e3_grid])
    ok = np.isfinite(vals)
    idx = np.flatnonzero(ok[:-1] & ok[1:] & (vals[:-1] * vals[1:] < 0))
    if len(idx) == 0:
        raise ContinuationError(
            f"no E34 Hopf seed found at eps1 = {e1_seed} in the window")
    e3_star = brentq(hurwitz_of_e3, e3_grid[idx[0]], e3_grid[idx[0] + 1],
                     xtol=1e-14)
    p_star = p_of(e3_star)
    x0 = np.sqrt(-p_star.eps1 * (p_star.eps3 + p_star.d_coef * p_star.eps1))
    start = np.array([x0, 0.0, p_star.eps1, e1_seed, e3_star])

    settings = settings or ContinuationSettings(
        step=0.02, step_max=0.08, max_points=4000, step_min=1e-9)
    lo = np.array([-np.inf, -np.inf, -np.inf, e1_lo - 0.5, e3_lo - 0.01])
    hi = np.array([np.inf, np.inf, np.inf, e1_hi + 0.5, e3_hi + 0.01])
    settings = ContinuationSettings(
        **{**settings.__dict__, "bounds": (lo, hi)})
    problem = ZeroProblem(residual, names=("x", "y", "z", "eps1", "eps3"))

    def p2_test(u):
        p = base.replace(eps1=u[3], eps3=u[4])
        _, p2 = hopf_condition_at(p, u[:3])
        return p2

    half1 = continue_branch(problem, start, settings,
                            tests={"p2": p2_test}, direction=+1)
    half2 = continue_branch(problem, start, settings,
                            tests={"p2": p2_test}, direction=-1)
    pts = np.vstack([half2.points[::-1], half1.points[1:]])
    tans = np.vstack([-half2.tangents[::-1], half1.tangents[1:]])
    off = len(half2.points) - 1
    spec = [SpecialPoint(off - sp.index - 1, sp.kind, sp.point,
                         sp.test_value) for sp in half2.special_points]
    spec += [SpecialPoint(off + sp.index, sp.kind, sp.point, sp.test_value)
             for sp in half1.special_points]
    tests_merged = {
        k: np.concatenate([half2.test_values[k][::-1],
                           half1.test_values[k][1:]])
        for k in half1.test_values}
    return Branch(points=pts, tangents=tans, special_points=spec,
                  termination=f"{half2.termination} | {half1.termination}",
                  test_values=tests_merged, names=problem.names)


# ---------------------------------------------------------------------------
# first Lyapunov coefficient
# ---------------------------------------------------------------------------

def quadratic_form(params: Params, u, v) -> np.ndarray:
    """Bilinear form of the (constant) second derivatives of the field."""
    b, d = params.b_coef, params.d_coef
    return np.array([
        0.0 * u[0],
        -(u[0] * v[2] + u[2] * v[0]) + b * (u[1] * v[2] + u[2] * v[1]),
        2.0 * u[0] * v[0] + 2.0 * d * u[2] * v[2],
    ])


def first_lyapunov_coefficient(params: Params, s, tol: float = 1e-9
                               ) -> float:
    """l1 at a Hopf point: negative = supercritical, positive = subcritical.

    Uses the standard center-manifold projection with the analytic second
    derivatives (third derivatives of this field vanish identically).  The
    equilibrium state s must carry a purely imaginary pair to within tol.
    """
    s = np.asarray(s, dtype=float)
    A = jacobian(params, s)
    w, V = np.linalg.eig(A)
    pair = [i for i in range(3)
            if abs(w[i].real) <= tol * (1.0 + abs(w[i]))
            and w[i].imag > tol]
    if not pair:
        raise ClassificationError(
            f"no purely imaginary pair at {s} (eigenvalues {w})")
    i = pair[0]
    om = w[i].imag
    q = V[:, i]
    wl, Vl = np.linalg.eig(A.T)
    j = int(np.argmin(np.abs(wl - np.conj(w[i]))))
    p = Vl[:, j]
    # enforce <p, q> = sum conj(p_i) q_i = 1 (vdot conjugates its first arg)
    p = p / np.conj(np.vdot(p, q))

    def B(u, v):
        return quadratic_form(params, u, v)

    qq = B(q, q)
    qqb = B(q, np.conj(q))
    h11 = np.linalg.solve(A, qqb)
    h20 = np.linalg.solve(2j * om * np.eye(3) - A, qq)
    val = (-2.0 * np.vdot(p, B(q, h11)) + np.vdot(p, B(np.conj(q), h20)))
    return float(val.real / (2.0 * om))


def degenerate_hopf_E2(params: Params,
                       eps1_bracket: tuple[float, float] = (-12.0, -10.05)
                       ) -> float:
    """eps1 where l1 of the E2 Hopf changes sign along its Hopf line.

    The E2 Hopf line in the (eps1, eps3) slice sits at
    eps3 = D*eps2/B (in-plane trace zero); along it the Hopf switches
    between sub- and supercritical at the returned eps1.
    """
    if params.b_coef == 0.0:
        raise ClassificationError("B = 0")
    e3_star = params.d_coef * params.eps2 / params.b_coef

    def l1_at(e1):
        p = params.replace(eps1=e1, eps3=e3_star)
        z2 = -p.eps3 / p.d_coef
        return first_lyapunov_coefficient(p, np.array([0.0, 0.0, z2]),
                                          tol=1e-7)

    a, b = eps1_bracket
    fa, fb = l1_at(a), l1_at(b)
    if fa * fb > 0:
        raise ContinuationError(
            f"no l1 sign change in {eps1_bracket}: l1({a})={fa}, "
            f"l1({b})={fb}")
    return float(brentq(l1_at, a, b, xtol=1e-12))
