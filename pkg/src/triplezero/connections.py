"""Global connections: heteroclinic cycles, homoclinic curves, T-points.

Shooting design.  A connection leg departs along a one-dimensional unstable
manifold (seeded at a small offset along the unit eigenvector) and is
matched near the target equilibrium.  The matching uses a local chart of
the target's two-dimensional stable manifold: the manifold is represented
to second order as a graph over its stable eigenspace (the quadratic
coefficients solve a small Sylvester equation built from the field's
constant second derivatives), and the miss distance is the deviation of
the arriving trajectory from that graph, measured along the unstable
direction on an arrival plane at distance ``r0`` from the target.  The
sign convention multiplies by the arrival side, which makes mirrored
(reflection-conjugate) shots produce misses of equal magnitude and
opposite sign.

This near-target chart replaces matching against a back-integrated
stable-manifold trace on a mid-plane: backward integration inside a 2D
stable manifold amplifies the strong-stable component exponentially and
cannot hold the trace near the relevant point, while the chart evaluation
is unconditionally stable.

T-points are codimension-two: the 1D unstable manifold of E2 must meet the
1D stable manifold of one of the off-axis equilibria.  Both in-section
mismatch components are driven to zero by a damped two-parameter Newton
iteration in (eps1, eps3), preceded by a coarse scan (the miss field
spirals near a T-point, so plain Newton needs a close seed).
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.linalg import solve_sylvester
from scipy.optimize import brentq

from .continuation import (Branch, ContinuationError, ContinuationSettings,
                           ZeroProblem, continue_branch)
from .integrate import (EventSpec, IntegratorSettings, Trajectory, advance,
                        integrate, local_manifold_seed, propagate_to_event)
from .localbif import ClassificationError, saddle_quantities
from .model import (Equilibrium, EquilibriumKind, Params, UndefinedEquilibriumError,
                    equilibria, jacobian, vector_field, z2_image)

__all__ = [
    "ConnectionType", "ConnectionProblem", "MissDistance", "GlobalCurve",
    "AxisConnection", "ConnectionLostError", "SaddleChart",
    "axis_connection", "shoot", "find_connection", "continue_connection",
    "find_tpoint", "he_cycle_problem", "homoclinic_E2_problem",
    "TPointResult",
]

_SHOOT_SETTINGS = IntegratorSettings(rel_tol=1e-11, abs_tol=1e-13,
                                     max_time=4000.0, escape_radius=1e4)


class ConnectionLostError(RuntimeError):
    """The shot never produced a qualifying arrival."""


class ConnectionType(enum.Enum):
    HETEROCLINIC_OFF_AXIS = "heteroclinic-off-axis"
    HETEROCLINIC_ON_AXIS = "heteroclinic-on-axis"
    HOMOCLINIC = "homoclinic"
    TPOINT_LOOP = "t-point-loop"


@dataclass(frozen=True)
class ConnectionProblem:
    """Shooting specification for one connection leg.

    ``side`` picks the branch of the source's 1D unstable manifold;
    ``arrival_radius`` sets the distance of the matching plane from the
    target; ``qualify_radius`` rejects far-field crossings of that plane
    (the loop restarts past them).
    """

    source: EquilibriumKind
    target: EquilibriumKind
    connection_type: ConnectionType
    side: int = +1
    shooting_offset: float = 1e-6      # relative to 1 + |source|
    arrival_radius: float = 1e-2
    qualify_factor: float = 2.5        # cap on the in-manifold coordinates
    miss_cap_factor: float = 30.0      # cap on the unstable coordinate
    settings: IntegratorSettings = _SHOOT_SETTINGS


@dataclass(frozen=True)
class MissDistance:
    """Signed shooting residual with flight diagnostics."""

    value: float
    flight_time: float
    closest_approach: float
    arrival_state: np.ndarray
    arrival_side: int


def _lead(v) -> int:
    """Index of the first significant component (for sign canonicalizing)."""
    return int(np.flatnonzero(np.abs(v) > 1e-8 * np.max(np.abs(v)))[0])


def _canonical(v) -> np.ndarray:
    """Unit vector with a deterministic sign (leading component positive)."""
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    return -v if v[_lead(v)] < 0 else v


class SaddleChart:
    """Local data of a hyperbolic equilibrium with a 2D stable manifold.

    Holds the real stable basis, the unstable right/left eigenvectors, the
    quadratic coefficients Q of the stable manifold as a graph over the
    stable eigenspace (from the Sylvester equation
    As^T Q + Q (As - lambda_u I) = P), and the weak-stable direction used
    to orient the arrival plane.
    """

    def __init__(self, params: Params, eq: Equilibrium):
        self.params = params
        self.eq = eq
        self.x0 = np.asarray(eq.state, dtype=float)
        J = jacobian(params, self.x0)
        w, V = np.linalg.eig(J)
        order = np.argsort(w.real)
        w, V = w[order], V[:, order]
        if not (w[0].real < 0 and w[1].real < 0 < w[2].real):
            raise ClassificationError(
                f"{eq.kind}: need two stable and one unstable eigenvalue, "
                f"got {np.round(w, 6)}")
        if abs(w[2].imag) > 1e-10 * (1 + abs(w[2])):
            raise ClassificationError("unstable eigenvalue must be real")
        self.lam_u = w[2].real
        self.stable_eigenvalues = (w[0], w[1])
        v_u = _canonical(np.real(V[:, 2]))
        axis_unstable = (abs(v_u[0]) < 1e-12 and abs(v_u[1]) < 1e-12
                         and np.hypot(self.x0[0], self.x0[1]) < 1e-12)
        if axis_unstable:
            # z-axis saddle whose stable space is exactly the (x, y) plane:
            # chart in coordinate basis, immune to the stable pair becoming
            # defective (the saddle <-> saddle-focus transition)
            self.v_u = np.array([0.0, 0.0, 1.0])
            self.S = np.eye(3)[:, :2]
            As = J[:2, :2]
            self.weak_dir = np.array([1.0, 0.0, 0.0])
            self.focus = bool(abs(w[0].imag) > 1e-10 * (1 + abs(w[0])))
        else:
            self.v_u = v_u
            pair = abs(w[0].imag) > 1e-10 * (1 + abs(w[0]))
            if pair:
                # canonical phase: largest component real positive
                q = V[:, 0]
                k = int(np.argmax(np.abs(q)))
                q = q * np.conj(q[k]) / abs(q[k])
                s1, s2 = np.real(q), np.imag(q)
                n1 = np.linalg.norm(s1)
                s1, s2 = s1 / n1, s2 / n1
                a, b = w[0].real, w[0].imag
                As = np.array([[a, b], [-b, a]])
                self.weak_dir = s1
                self.focus = True
            else:
                s1 = _canonical(np.real(V[:, 0]))
                s2 = _canonical(np.real(V[:, 1]))
                As = np.diag([w[0].real, w[1].real])
                self.weak_dir = s2   # larger Re = weaker
                self.focus = False
            self.S = np.column_stack([s1, s2])
        self.V_full = np.column_stack([self.S, self.v_u])
        self.V_inv = np.linalg.inv(self.V_full)
        lu = self.V_inv[2]           # row: unstable coordinate functional
        self.l_u = lu
        from .continuation import quadratic_form
        P = np.empty((2, 2))
        for i in range(2):
            for j in range(2):
                P[i, j] = lu @ quadratic_form(params, self.S[:, i],
                                              self.S[:, j])
        self.Q = solve_sylvester(As.T, As - self.lam_u * np.eye(2), P)

    def miss_of_point(self, s) -> float:
        """Unstable-direction deviation of s from the stable-manifold graph."""
        d = np.asarray(s, dtype=float) - self.x0
        c = self.V_inv[:2] @ d
        wq = self.V_inv[2] @ d
        return float(wq - 0.5 * c @ self.Q @ c)

    def arrival_events(self, r0: float) -> list[EventSpec]:
        n = self.weak_dir
        base = float(n @ self.x0)
        return [EventSpec.plane(n, base + r0, terminal=True, name="side+"),
                EventSpec.plane(n, base - r0, terminal=True, name="side-")]

    def arrival_side(self, s) -> int:
        return 1 if (self.weak_dir @ (np.asarray(s) - self.x0)) >= 0 else -1


def _equilibrium(params: Params, kind: EquilibriumKind) -> Equilibrium:
    for eq in equilibria(params):
        if eq.kind == kind:
            return eq
    raise UndefinedEquilibriumError(f"{kind} does not exist at {params}")


def shoot(params: Params, problem: ConnectionProblem) -> MissDistance:
    """Integrate from the source's unstable seed to the target chart.

    The arrival planes sit at +-arrival_radius along the target's weak
    stable direction; non-qualifying crossings (too far from the target)
    are skipped by restarting just past them.  Raises
    :class:`ConnectionLostError` if no qualifying arrival occurs within the
    settings' time budget.
    """
    src = _equilibrium(params, problem.source)
    tgt = _equilibrium(params, problem.target)
    chart = SaddleChart(params, tgt)
    seed = local_manifold_seed(
        params, src, "unstable",
        offset=problem.shooting_offset * (1 + np.linalg.norm(src.state)),
        side=problem.side)
    events = chart.arrival_events(problem.arrival_radius)
    y = seed.copy()
    t_total = 0.0
    closest = np.inf
    qual_c = problem.qualify_factor * problem.arrival_radius
    qual_w = problem.miss_cap_factor * problem.arrival_radius
    budget = problem.settings.max_time
    for _ in range(200):
        status, t, y = propagate_to_event(
            params, y, events,
            replace(problem.settings, max_time=budget - t_total))
        t_total += t
        if status != "terminal-event":
            raise ConnectionLostError(
                f"{problem.source.value} -> {problem.target.value}: "
                f"no qualifying arrival ({status} at t = {t_total:.1f}, "
                f"closest approach {closest:.3e})")
        d = y - tgt.state
        closest = min(closest, float(np.linalg.norm(d)))
        coords = chart.V_inv @ d
        if (np.hypot(coords[0], coords[1]) <= qual_c
                and abs(coords[2]) <= qual_w):
            side = chart.arrival_side(y)
            value = side * chart.miss_of_point(y)
            return MissDistance(value, t_total, closest, y.copy(), side)
        y = advance(params, y, 0.05, problem.settings)
        t_total += 0.05
    raise ConnectionLostError("restart budget exhausted before arrival")


@dataclass(frozen=True)
class AxisConnection:
    """The structurally stable leg on the invariant z-axis."""

    exists: bool
    direction: str            # "E1->E2", "E2->E1", or "none"
    z_e2: float
    eps3: float
    d_coef: float
    reason: str = ""

    def z_of_t(self, z0: float, t) -> np.ndarray:
        """Closed-form axis flow z' = eps3 z + D z^2 from z0 (logistic)."""
        t = np.asarray(t, dtype=float)
        if self.eps3 == 0.0:
            return z0 / (1.0 - self.d_coef * z0 * t)
        ez = np.exp(self.eps3 * t)
        return (self.eps3 * z0 * ez
                / (self.eps3 + self.d_coef * z0 * (1.0 - ez)))


def axis_connection(params: Params) -> AxisConnection:
    """Existence and direction of the E1-E2 arc on the invariant z-axis.

    On the axis the flow is the scalar Riccati equation
    z' = z (eps3 + D z) with fixed points 0 (E1) and -eps3/D (E2); between
    two adjacent fixed points a 1D flow always connects them, the direction
    given by the sign of z' at the midpoint.
    """
    if params.d_coef == 0.0:
        raise UndefinedEquilibriumError("D = 0: no E2, no axis arc")
    z2 = -params.eps3 / params.d_coef
    if params.eps3 == 0.0:
        return AxisConnection(False, "none", z2, params.eps3, params.d_coef,
                              "E2 merges with E1")
    zm = 0.5 * z2
    v = params.eps3 * zm + params.d_coef * zm * zm
    toward_e1 = v * np.sign(zm) < 0
    return AxisConnection(True, "E2->E1" if toward_e1 else "E1->E2", z2,
                          params.eps3, params.d_coef)


def he_cycle_problem(params: Params) -> ConnectionProblem:
    """Shooting problem for the off-axis leg of the E1-E2 cycle.

    The axis leg is structurally stable; the off-axis leg departs the
    z-axis equilibrium whose unstable manifold is one-dimensional and
    in-plane: E1 when its planar pair contains the positive eigenvalue
    (fourth-quadrant configuration), else E2.
    """
    e1 = _equilibrium(params, EquilibriumKind.E1)
    if e1.spectrum.n_unstable() == 1 and e1.spectrum.real_parts[2] > 0 \
            and abs(params.eps3 - e1.spectrum.real_parts[2]) > 1e-14:
        src, tgt = EquilibriumKind.E1, EquilibriumKind.E2
    elif params.eps3 > 0:
        src, tgt = EquilibriumKind.E2, EquilibriumKind.E1
    else:
        src, tgt = EquilibriumKind.E1, EquilibriumKind.E2
    return ConnectionProblem(src, tgt, ConnectionType.HETEROCLINIC_OFF_AXIS)


def homoclinic_E2_problem(params: Params) -> ConnectionProblem:
    return ConnectionProblem(EquilibriumKind.E2, EquilibriumKind.E2,
                             ConnectionType.HOMOCLINIC,
                             arrival_radius=5e-3)


def find_connection(params: Params, problem: ConnectionProblem, free: str,
                    bracket: tuple[float, float], tol: float = 1e-8,
                    richardson: bool = True, richardson_limit: float = 1e-7,
                    ) -> tuple[float, Trajectory]:
    """Brent refinement of one free parameter to |miss| <= tol.

    The bracket is first scanned; far from a connection the section miss is
    only piecewise continuous (the qualifying plane crossing can jump
    between loop passes), so Brent runs on the sign-change sub-interval
    with the smallest endpoint misses and the result is verified, deepening
    the scan on failure.  With ``richardson`` the refinement is repeated at
    half the shooting offset; a located-value shift above
    ``richardson_limit`` raises (the seed would be dominating the answer).
    Returns the refined parameter value and the connecting trajectory.
    """

    def miss_at(v, offset=None):
        p = params.replace(**{free: v})
        prob = problem if offset is None else replace(problem,
                                                      shooting_offset=offset)
        return shoot(p, prob).value

    def miss_or_nan(v):
        try:
            return miss_at(v)
        except (ConnectionLostError, ClassificationError,
                UndefinedEquilibriumError, ValueError):
            return np.nan

    def refine(lo, hi, depth=0):
        grid = np.linspace(lo, hi, 9)
        vals = np.array([miss_or_nan(v) for v in grid])
        pairs = [(max(abs(vals[i]), abs(vals[i + 1])), i)
                 for i in range(8)
                 if np.isfinite(vals[i]) and np.isfinite(vals[i + 1])
                 and vals[i] * vals[i + 1] < 0]
        if not pairs:
            raise ConnectionLostError(
                f"no sign change of miss over {free} in [{lo}, {hi}]")
        pairs.sort()
        for _, i in pairs:
            root = brentq(miss_at, grid[i], grid[i + 1], xtol=1e-14,
                          rtol=8.9e-16)
            if abs(miss_at(root)) <= tol:
                return root
            if depth < 3:
                try:
                    return refine(grid[i], grid[i + 1], depth + 1)
                except ConnectionLostError:
                    continue
        raise ConnectionLostError(
            f"refinement stagnated in [{lo}, {hi}] (discontinuous miss)")

    root = refine(*bracket)
    if richardson:
        # estimated root shift when halving the seed offset, via the local
        # slope of the miss in the free parameter
        dv = 1e-6 * (1.0 + abs(root))
        slope = (miss_at(root + dv) - miss_at(root - dv)) / (2.0 * dv)
        m_half = miss_at(root, problem.shooting_offset * 0.5)
        shift = abs(m_half) / max(abs(slope), 1e-300)
        if shift > richardson_limit:
            raise ConnectionLostError(
                f"offset sensitivity {shift:.2e} exceeds "
                f"{richardson_limit} (offset {problem.shooting_offset})")
    p_root = params.replace(**{free: root})
    src = _equilibrium(p_root, problem.source)
    seed = local_manifold_seed(
        p_root, src, "unstable",
        offset=problem.shooting_offset * (1 + np.linalg.norm(src.state)),
        side=problem.side)
    md = shoot(p_root, problem)
    traj = integrate(p_root, seed,
                     replace(problem.settings,
                             max_time=md.flight_time * 1.0000001))
    return float(root), traj


def miss_scan(params: Params, problem: ConnectionProblem, free: str,
              values) -> np.ndarray:
    """Miss values over a parameter scan (NaN where the shot fails)."""
    out = []
    for v in values:
        try:
            out.append(shoot(params.replace(**{free: v}), problem).value)
        except (ConnectionLostError, ClassificationError):
            out.append(np.nan)
    return np.array(out)


@dataclass
class GlobalCurve:
    """A continued connection curve in the (eps1, eps3) plane.

    Carries per-point saddle quantities and spectral discriminants of both
    z-axis equilibria, plus refined degeneracy markers: "DHe" where a
    discriminant crosses zero (real saddle <-> saddle focus transition of
    the flanking equilibrium) and "DH" where delta_E2 crosses 1.
    """

    points: np.ndarray                  # (m, 2): eps1, eps3
    delta_e1: np.ndarray
    delta_e2: np.ndarray
    disc_e1: np.ndarray
    disc_e2: np.ndarray
    markers: list[tuple[str, float, float]] = field(default_factory=list)
    termination: str = ""
    miss_values: np.ndarray | None = None
    trajectories: list[tuple[float, float, Trajectory]] = \
        field(default_factory=list)

    def __len__(self):
        return len(self.points)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps1", "eps3", "delta_E1", "delta_E2",
                        "disc_E1", "disc_E2", "marker"])
            marks = {}
            for kind, e1, e3 in self.markers:
                marks.setdefault(self._nearest(e1, e3), []).append(
                    (kind, e1, e3))
            for i, (e1, e3) in enumerate(self.points):
                w.writerow([f"{e1:.17g}", f"{e3:.17g}",
                            f"{self.delta_e1[i]:.17g}",
                            f"{self.delta_e2[i]:.17g}",
                            f"{self.disc_e1[i]:.17g}",
                            f"{self.disc_e2[i]:.17g}", ""])
                for kind, me1, me3 in marks.get(i, []):
                    w.writerow([f"{me1:.17g}", f"{me3:.17g}", "", "", "",
                                "", kind])

    def _nearest(self, e1, e3) -> int:
        d = np.hypot(self.points[:, 0] - e1, self.points[:, 1] - e3)
        return int(np.argmin(d))

    def to_json(self, path=None) -> str:
        doc = {
            "points": self.points.tolist(),
            "delta_E1": self.delta_e1.tolist(),
            "delta_E2": self.delta_e2.tolist(),
            "disc_E1": self.disc_e1.tolist(),
            "disc_E2": self.disc_e2.tolist(),
            "markers": [[k, a, b] for k, a, b in self.markers],
            "termination": self.termination,
            "trajectories": [
                {"eps1": a, "eps3": b, "trajectory": json.loads(t.to_json())}
                for a, b, t in self.trajectories],
        }
        text = json.dumps(doc)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _disc_e1(params: Params, u) -> float:
    return params.eps2 ** 2 + 4.0 * u[0]


def _disc_e2(params: Params, u) -> float:
    tr = params.eps2 - (params.b_coef / params.d_coef) * u[1]
    return tr ** 2 + 4.0 * (u[0] + u[1] / params.d_coef)


def continue_connection(params_seed: Params,
                        problem_of: Callable[[Params], ConnectionProblem],
                        settings: ContinuationSettings | None = None,
                        direction=+1,
                        bounds=((-12.0, 0.4), (-0.02, 0.12)),
                        with_trajectories: int = 0) -> GlobalCurve:
    """Pseudo-arclength continuation of the miss zero set in (eps1, eps3).

    ``params_seed`` must already lie on the connection (e.g. from
    :func:`find_connection`).  ``problem_of`` rebuilds the shooting problem
    at each parameter point (source/target roles can depend on the
    quadrant).  Markers: "DHe1"/"DHe2" at discriminant zeros of E1/E2 and
    "DH" where delta_E2 crosses 1.
    """
    base = params_seed

    def residual(u):
        p = base.replace(eps1=u[0], eps3=u[1])
        try:
            return np.array([shoot(p, problem_of(p)).value])
        except (ConnectionLostError, ClassificationError):
            return np.array([np.nan])

    def delta_e2_test(u):
        try:
            sq = saddle_quantities(base.replace(eps1=u[0], eps3=u[1]))
            return sq.delta_e2 - 1.0
        except ClassificationError:
            return np.nan

    tests = {
        "disc_E1": lambda u: _disc_e1(base, u),
        "disc_E2": lambda u: _disc_e2(base, u),
        "delta_E2_minus_1": delta_e2_test,
    }
    settings = settings or ContinuationSettings(
        step=0.002, step_max=0.05, step_min=1e-9, max_points=1200,
        residual_tol=5e-9)
    lo = np.array([bounds[0][0], bounds[1][0]])
    hi = np.array([bounds[0][1], bounds[1][1]])
    settings = replace(settings, bounds=(lo, hi))
    zp = ZeroProblem(residual, names=("eps1", "eps3"))
    start = np.array([params_seed.eps1, params_seed.eps3])
    br = continue_branch(zp, start, settings, tests=tests,
                         direction=direction)
    return _globalize(base, problem_of, br, with_trajectories)


def _globalize(base, problem_of, br: Branch, with_trajectories: int
               ) -> GlobalCurve:
    m = len(br)
    d1 = np.full(m, np.nan)
    d2 = np.full(m, np.nan)
    q1 = np.empty(m)
    q2 = np.empty(m)
    for i, u in enumerate(br.points):
        p = base.replace(eps1=u[0], eps3=u[1])
        q1[i] = _disc_e1(base, u)
        q2[i] = _disc_e2(base, u)
        try:
            sq = saddle_quantities(p)
            d1[i], d2[i] = sq.delta_e1, sq.delta_e2
        except (ClassificationError, UndefinedEquilibriumError):
            pass
    markers = []
    for sp in br.special_points:
        e1v, e3v = float(sp.point[0]), float(sp.point[1])
        if sp.kind == "disc_E1":
            markers.append(("DHe1", e1v, e3v))
        elif sp.kind == "disc_E2":
            markers.append(("DHe2", e1v, e3v))
        elif sp.kind == "delta_E2_minus_1":
            markers.append(("DH", e1v, e3v))
    curve = GlobalCurve(
        points=br.points.copy(), delta_e1=d1, delta_e2=d2,
        disc_e1=q1, disc_e2=q2, markers=markers,
        termination=br.termination)
    if with_trajectories > 0 and m > 0:
        idx = np.unique(np.linspace(0, m - 1, with_trajectories, dtype=int))
        for i in idx:
            p = base.replace(eps1=br.points[i][0], eps3=br.points[i][1])
            try:
                md = shoot(p, problem_of(p))
                src = _equilibrium(p, problem_of(p).source)
                seed = local_manifold_seed(
                    p, src, "unstable",
                    offset=problem_of(p).shooting_offset
                    * (1 + np.linalg.norm(src.state)),
                    side=problem_of(p).side)
                traj = integrate(p, seed,
                                 replace(problem_of(p).settings,
                                         max_time=md.flight_time))
                curve.trajectories.append(
                    (br.points[i][0], br.points[i][1], traj))
            except (ConnectionLostError, ClassificationError):
                pass
    return curve


# ---------------------------------------------------------------------------
# T-points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TPointResult:
    eps1: float
    eps3: float
    miss_norm: float
    target: EquilibriumKind
    connecting_leg: Trajectory           # E2 -> E3/E4 (codimension-two leg)
    return_leg: Trajectory | None        # E3/E4 -> E2 (transversal leg)
    winding: int                         # y = 0 (x > 0) crossings of the leg


def _tpoint_stable_data(params: Params, kind: EquilibriumKind):
    eq = _equilibrium(params, kind)
    J = jacobian(params, eq.state)
    w, V = np.linalg.eig(J)
    i = int(np.argmin(w.real))
    if abs(w[i].imag) > 1e-10:
        raise ClassificationError(
            f"{kind}: leading stable eigenvalue is not real ({w[i]})")
    vs = np.real(V[:, i])
    vs /= np.linalg.norm(vs)
    return eq, w[i].real, vs


def _tpoint_miss(params: Params, target: EquilibriumKind, r0: float,
                 settings: IntegratorSettings, t_ref: float | None = None):
    """2D in-section mismatch of W^u(E2,+) against W^s(target).

    Crossings of the two planes +-r0 along the target's stable direction
    are collected over the whole run; the one nearest the target is used
    (or, with ``t_ref``, the one nearest that flight time, which keeps the
    selection stable under finite-difference perturbations).
    """
    e2 = _equilibrium(params, EquilibriumKind.E2)
    tgt, lam_s, vs = _tpoint_stable_data(params, target)
    b1 = np.cross(vs, [0.0, 0.0, 1.0])
    b1 /= np.linalg.norm(b1)
    b2 = np.cross(vs, b1)
    seed = local_manifold_seed(params, e2, "unstable", side=+1)
    evs = [EventSpec.plane(vs, vs @ tgt.state + r0, name="p"),
           EventSpec.plane(vs, vs @ tgt.state - r0, name="m")]
    tr = integrate(params, seed, settings, evs)
    cands = []
    for t, name, s in tr.events:
        d = np.linalg.norm(s - tgt.state)
        cands.append((d, t, 1 if name == "p" else -1, s))
    if not cands:
        raise ConnectionLostError(f"no crossings near {target.value}")
    if t_ref is None:
        d, t, sigma, s = min(cands, key=lambda c: c[0])
    else:
        d, t, sigma, s = min(cands, key=lambda c: abs(c[1] - t_ref))
    # point of W^s(target) on the same plane, by a short backward run
    seed_s = tgt.state + sigma * 1e-7 * (1 + np.linalg.norm(tgt.state)) * vs
    ev = EventSpec.plane(vs, vs @ tgt.state + sigma * r0, terminal=True)
    status, tb, ys = propagate_to_event(params, seed_s, [ev], settings,
                                        fdir=-1.0)
    if status != "terminal-event":
        raise ConnectionLostError("stable-manifold trace left the region")
    delta = s - ys
    # winding: y = 0 crossings with x > 0 before the arrival time
    ys_tr = tr.states[:, 1]
    xs_tr = tr.states[:, 0]
    upto = tr.times[:-1] <= t
    sign_change = (ys_tr[:-1] * ys_tr[1:] < 0) & (xs_tr[1:] > 0) & upto
    crossings = int(np.sum(sign_change))
    return (np.array([b1 @ delta, b2 @ delta]), t, d, tr, crossings)


def find_tpoint(params_seed: Params, secondary: bool = False,
                r0: float = 5e-3,
                settings: IntegratorSettings | None = None,
                scan_radius: tuple[float, float] = (4e-3, 4e-5),
                scan_points: int = 5, max_newton: int = 25,
                tol: float = 1e-9, with_return_leg: bool = True
                ) -> TPointResult:
    """Locate a T-point heteroclinic loop near the seed parameters.

    The principal loop connects W^u(E2, +) to the stable manifold of the
    reflected off-axis equilibrium (E4); the secondary loop winds one extra
    revolution and closes on E3.  A coarse scan around the seed feeds a
    damped two-parameter Newton iteration on the in-section mismatch (the
    miss field spirals near a T-point, so the scan is not optional).
    The structurally stable return leg (target -> E2) is found by a
    one-parameter search over departure angles in the target's unstable
    focus plane.
    """
    settings = settings or replace(_SHOOT_SETTINGS, max_time=600.0,
                                   rel_tol=1e-11, abs_tol=1e-13)
    target = EquilibriumKind.E3 if secondary else EquilibriumKind.E4

    def miss(u, t_ref=None):
        p = params_seed.replace(eps1=u[0], eps3=u[1])
        return _tpoint_miss(p, target, r0, settings, t_ref)

    # coarse scan
    u0 = np.array([params_seed.eps1, params_seed.eps3])
    best = None
    g1 = np.linspace(-scan_radius[0], scan_radius[0], scan_points)
    g3 = np.linspace(-scan_radius[1], scan_radius[1], scan_points)
    for de1 in g1:
        for de3 in g3:
            u = u0 + [de1, de3]
            try:
                m, t, d, _, _ = miss(u)
            except (ConnectionLostError, ClassificationError):
                continue
            if best is None or np.linalg.norm(m) < best[0]:
                best = (np.linalg.norm(m), u, t)
    if best is None:
        raise ConnectionLostError("T-point scan found no valid shots")
    _, u, t_ref = best

    m, t_ref, d, tr, winding = miss(u)
    for _ in range(max_newton):
        mn = np.linalg.norm(m)
        if mn < tol:
            break
        J = np.empty((2, 2))
        h = np.array([3e-8 * (1 + abs(u[0])), 3e-9 * (1 + abs(u[1]))])
        for j in range(2):
            up = u.copy()
            up[j] += h[j]
            mp = miss(up, t_ref)[0]
            J[:, j] = (mp - m) / h[j]
        try:
            du = np.linalg.solve(J, -m)
        except np.linalg.LinAlgError:
            raise ConnectionLostError("singular T-point Jacobian")
        lam = 1.0
        for _ in range(8):
            try:
                m_new, t_new, d_new, tr_new, w_new = miss(u + lam * du,
                                                          t_ref)
            except (ConnectionLostError, ClassificationError):
                lam *= 0.5
                continue
            if np.linalg.norm(m_new) < mn:
                u = u + lam * du
                m, t_ref, d, tr, winding = m_new, t_new, d_new, tr_new, w_new
                break
            lam *= 0.5
        else:
            raise ConnectionLostError(
                f"T-point Newton stalled at |miss| = {mn:.3e}")
    else:
        raise ConnectionLostError(
            f"T-point Newton did not reach tol (|miss| = "
            f"{np.linalg.norm(m):.3e})")

    p_star = params_seed.replace(eps1=u[0], eps3=u[1])
    ret = _return_leg(p_star, target, settings) if with_return_leg else None
    return TPointResult(float(u[0]), float(u[1]), float(np.linalg.norm(m)),
                        target, tr, ret, winding)


def _return_leg(params: Params, source: EquilibriumKind,
                settings: IntegratorSettings) -> Trajectory | None:
    """Transversal leg from the off-axis focus back to E2.

    Seeds are placed on a small circle in the source's 2D unstable (focus)
    eigenplane; the scalar chart miss at E2 changes sign in the departure
    angle, and the angle is refined by bisection.
    """
    src = _equilibrium(params, source)
    e2 = _equilibrium(params, EquilibriumKind.E2)
    chart = SaddleChart(params, e2)
    J = jacobian(params, src.state)
    w, V = np.linalg.eig(J)
    iu = [i for i in range(3) if w[i].real > 0]
    if len(iu) != 2:
        return None
    q = V[:, iu[0]]
    u1 = np.real(q)
    u2 = np.imag(q)
    if np.linalg.norm(u2) < 1e-12:
        u2 = np.real(V[:, iu[1]])
    u1 /= np.linalg.norm(u1)
    u2 -= (u2 @ u1) * u1
    u2 /= np.linalg.norm(u2)
    r_seed = 1e-5 * (1 + np.linalg.norm(src.state))
    events = chart.arrival_events(5e-3)
    qual = 2.5 * 5e-3

    def miss_theta(theta):
        y = src.state + r_seed * (np.cos(theta) * u1 + np.sin(theta) * u2)
        t_total = 0.0
        for _ in range(120):
            status, t, y = propagate_to_event(
                params, y, events, replace(settings, max_time=600.0))
            t_total += t
            if status != "terminal-event":
                return np.nan, t_total
            if np.linalg.norm(y - e2.state) <= qual:
                return chart.arrival_side(y) * chart.miss_of_point(y), \
                    t_total
            y = advance(params, y, 0.05, settings)
        return np.nan, t_total

    thetas = np.linspace(0, 2 * np.pi, 25)
    vals = np.array([miss_theta(th)[0] for th in thetas])
    for i in range(len(thetas) - 1):
        a, b = vals[i], vals[i + 1]
        if np.isfinite(a) and np.isfinite(b) and a * b < 0:
            th = brentq(lambda x: miss_theta(x)[0], thetas[i],
                        thetas[i + 1], xtol=1e-12)
            _, t_fl = miss_theta(th)
            y0 = src.state + r_seed * (np.cos(th) * u1 + np.sin(th) * u2)
            return integrate(params, y0,
                             replace(settings, max_time=t_fl))
    return None
