"""Adaptive integration with event detection, Lyapunov estimation, seeds.

Wraps the Dormand-Prince kernels of :mod:`triplezero.kernels` in a friendly
API: :func:`integrate` records trajectories and locates events,
:func:`max_lyapunov` estimates the leading Lyapunov exponent by tangent
renormalization, and :func:`local_manifold_seed` builds shooting initial
conditions on one-dimensional invariant-manifold directions.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import kernels
from ._accel import NUMBA_ENABLED
from .model import Params, jacobian

__all__ = [
    "IntegratorSettings", "EventSpec", "Trajectory", "IntegrationError",
    "DivergenceError", "StepUnderflowError", "integrate", "max_lyapunov",
    "local_manifold_seed",
]


class IntegrationError(RuntimeError):
    pass


class DivergenceError(IntegrationError):
    """Trajectory escaped the working region or blew up."""


class StepUnderflowError(IntegrationError):
    """Step size collapsed (stiffness or approach to a singularity)."""


@dataclass(frozen=True)
class IntegratorSettings:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = np.inf
    max_time: float = 1e4
    dense_output: bool = False
    escape_radius: float = 1e6
    max_steps: int = 50_000_000
    first_step: float = -1.0  # <= 0 selects the automatic estimate

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_time <= 0:
            raise ValueError("max_time must be positive")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")


_DEFAULT = IntegratorSettings()


@dataclass(frozen=True)
class EventSpec:
    """A sign-change event.  The function must be affine in the state.

    Affinity is verified by probing: coefficients are extracted from values
    at the origin and the unit points, then cross-checked at random states.
    ``direction`` restricts to rising (+1) / falling (-1) crossings.
    """

    function: Callable[[np.ndarray], float]
    direction: int = 0
    terminal: bool = False
    name: str = ""

    def coefficients(self) -> tuple[np.ndarray, float]:
        g = self.function
        b = float(g(np.zeros(3)))
        a = np.array([float(g(e)) - b for e in np.eye(3)])
        rng = np.random.default_rng(1234)
        for _ in range(3):
            s = rng.normal(size=3) * 10.0
            expected = a @ s + b
            got = float(g(s))
            if abs(got - expected) > 1e-9 * (1.0 + abs(expected)):
                raise NotImplementedError(
                    f"event '{self.name}' is not affine in the state; only "
                    "plane-crossing events are supported")
        return a, b

    @classmethod
    def plane(cls, normal, offset: float, direction: int = 0,
              terminal: bool = False, name: str = "") -> "EventSpec":
        """Event g(s) = normal . s - offset."""
        n = np.asarray(normal, dtype=float).copy()

        def g(s):
            return n @ np.asarray(s)[:3] - offset

        return cls(g, direction, terminal, name or "plane")

    @classmethod
    def coordinate(cls, axis: int, value: float, direction: int = 0,
                   terminal: bool = False, name: str = "") -> "EventSpec":
        """Crossing of a single coordinate through a value."""
        n = np.zeros(3)
        n[axis] = 1.0
        return cls.plane(n, value, direction, terminal,
                         name or f"coord{axis}={value}")


_STATUS_NAMES = {
    kernels.OK: "reached-max-time",
    kernels.TERMINAL: "terminal-event",
    kernels.ESCAPE: "escape",
    kernels.UNDERFLOW: "step-underflow",
    kernels.NONFINITE: "non-finite",
    kernels.MAXSTEPS: "max-steps",
}


@dataclass
class Trajectory:
    """Recorded solution: strictly increasing times, states per step end.

    ``events`` holds (time, event name, state) triples.  With dense output
    enabled, :meth:`at` evaluates the order-4 interpolant anywhere inside
    the recorded span.
    """

    times: np.ndarray
    states: np.ndarray
    events: list[tuple[float, str, np.ndarray]] = field(default_factory=list)
    status: str = "reached-max-time"
    _hs: np.ndarray | None = None
    _conts: np.ndarray | None = None

    def __len__(self):
        return len(self.times)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def at(self, t: float) -> np.ndarray:
        if self._conts is None:
            raise ValueError("dense output was not recorded")
        if not (self.times[0] <= t <= self.times[-1]):
            raise ValueError(f"t = {t} outside [{self.times[0]}, "
                             f"{self.times[-1]}]")
        i = int(np.searchsorted(self.times, t, side="left"))
        if i == 0:
            return self.states[0].copy()
        h = self._hs[i]
        theta = (t - self.times[i - 1]) / h if h > 0 else 0.0
        c = self._conts[i]
        return c[0] + theta * (c[1] + (1.0 - theta)
                               * (c[2] + theta * (c[3] + (1.0 - theta)
                                                  * c[4])))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y", "z"])
            for t, s in zip(self.times, self.states):
                w.writerow([f"{t:.17g}", f"{s[0]:.17g}", f"{s[1]:.17g}",
                            f"{s[2]:.17g}"])

    def to_json(self, path=None) -> str:
        """JSON form; float round-trip is bit-exact (shortest-repr floats)."""
        doc = {
            "status": self.status,
            "times": self.times.tolist(),
            "states": self.states.tolist(),
            "events": [[t, name, s.tolist() if hasattr(s, "tolist") else s]
                       for t, name, s in self.events],
        }
        text = json.dumps(doc)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, text_or_path) -> "Trajectory":
        text = text_or_path
        if "\n" not in text and not text.lstrip().startswith("{"):
            with open(text_or_path) as fh:
                text = fh.read()
        doc = json.loads(text)
        return cls(
            times=np.array(doc["times"]),
            states=np.array(doc["states"]),
            events=[(t, name, np.array(s)) for t, name, s in doc["events"]],
            status=doc["status"],
        )


def _pvec(params: Params) -> np.ndarray:
    return params.as_array()


def _event_arrays(events: Sequence[EventSpec]):
    m = len(events)
    ev_a = np.zeros((m, 3))
    ev_b = np.zeros(m)
    ev_dir = np.zeros(m, dtype=np.int64)
    ev_term = np.zeros(m, dtype=np.int64)
    for j, ev in enumerate(events):
        a, b = ev.coefficients()
        ev_a[j] = a
        ev_b[j] = b
        ev_dir[j] = int(np.sign(ev.direction))
        ev_term[j] = 1 if ev.terminal else 0
    return ev_a, ev_b, ev_dir, ev_term


def _raise_for_status(status: int, t: float, context: str, final=None):
    if status == kernels.UNDERFLOW:
        raise StepUnderflowError(f"{context}: step size underflow at t={t}")
    if status == kernels.NONFINITE:
        raise DivergenceError(f"{context}: non-finite state at t={t}")
    if status == kernels.ESCAPE:
        raise DivergenceError(
            f"{context}: trajectory escaped the working region at t={t}"
            + (f" (|state| ~ {np.linalg.norm(final[:3]):.3g})"
               if final is not None else ""))
    if status == kernels.MAXSTEPS:
        raise IntegrationError(f"{context}: step budget exhausted at t={t}")


def _run_recorded(pvec, y0, fdir, tf, settings, events):
    """Drive the kernel with growing buffers; returns raw arrays."""
    ev_a, ev_b, ev_dir, ev_term = _event_arrays(events)
    n = len(y0)
    cap = 4096
    evcap = 1024
    y = np.array(y0, dtype=float)
    ts = np.empty(cap)
    ys = np.empty((cap, n))
    hs = np.empty(cap)
    conts = (np.empty((cap, 5, n)) if settings.dense_output
             else np.empty((0, 5, n)))
    ev_t = np.empty(evcap)
    ev_id = np.empty(evcap, dtype=np.int64)
    ev_y = np.empty((evcap, 3))

    all_ts, all_ys, all_hs, all_conts = [], [], [], []
    all_ev = []
    t_base = 0.0
    h_start = settings.first_step
    first = True
    while True:
        status, t_reached, h_next, nrec, nev = kernels.integrate_core(
            y, pvec, fdir, tf - t_base, settings.rel_tol, settings.abs_tol,
            settings.max_step, h_start, settings.escape_radius ** 2,
            settings.max_steps, ev_a, ev_b, ev_dir, ev_term,
            True, first, ts, ys, hs, conts, settings.dense_output,
            ev_t, ev_id, ev_y)
        keep_ev = nev
        if status == kernels.BUF_FULL:
            # events found inside the uncommitted step would be re-found on
            # resume; keep only those at or before the resume time
            keep_ev = int(np.sum(ev_t[:nev] <= t_reached + 1e-300))
        all_ts.append(t_base + ts[:nrec].copy())
        all_ys.append(ys[:nrec].copy())
        all_hs.append(hs[:nrec].copy())
        if settings.dense_output:
            all_conts.append(conts[:nrec].copy())
        all_ev.extend(
            (t_base + ev_t[j], int(ev_id[j]), ev_y[j].copy())
            for j in range(keep_ev))
        if status != kernels.BUF_FULL:
            break
        # resume from the last recorded point
        t_base += t_reached
        y = all_ys[-1][-1].copy() if nrec else y
        cap *= 2
        evcap *= 2
        ts = np.empty(cap)
        ys = np.empty((cap, n))
        hs = np.empty(cap)
        conts = (np.empty((cap, 5, n)) if settings.dense_output
                 else np.empty((0, 5, n)))
        ev_t = np.empty(evcap)
        ev_id = np.empty(evcap, dtype=np.int64)
        ev_y = np.empty((evcap, 3))
        h_start = h_next
        first = False

    times = np.concatenate(all_ts) if all_ts else np.empty(0)
    states = np.vstack(all_ys) if all_ys else np.empty((0, n))
    hsteps = np.concatenate(all_hs)
    dense = np.vstack(all_conts) if settings.dense_output else None
    return status, times, states, hsteps, dense, all_ev, y


def integrate(params: Params, s0, settings: IntegratorSettings | None = None,
              events: Sequence[EventSpec] = ()) -> Trajectory:
    """Integrate the flow from s0 for up to ``settings.max_time``.

    Stops early at a terminal event.  Raises on blow-up, step underflow, or
    escape beyond ``settings.escape_radius``.
    """
    settings = settings or _DEFAULT
    s0 = np.asarray(s0, dtype=float)
    if s0.shape != (3,) or not np.all(np.isfinite(s0)):
        raise ValueError("s0 must be a finite 3-vector")
    status, times, states, hs, dense, raw_ev, _ = _run_recorded(
        _pvec(params), s0, 1.0, settings.max_time, settings, events)
    _raise_for_status(status, times[-1] if len(times) else 0.0, "integrate",
                      states[-1] if len(states) else None)
    names = [ev.name or f"event{j}" for j, ev in enumerate(events)]
    ev_list = [(t, names[j], s) for t, j, s in raw_ev]
    return Trajectory(times, states, ev_list, _STATUS_NAMES[status],
                      hs, dense)


def advance(params: Params, y0, elapsed: float,
            settings: IntegratorSettings | None = None,
            fdir: float = 1.0) -> np.ndarray:
    """End state after integrating for ``elapsed`` time (no recording).

    Accepts layouts of length 3, 6 (one tangent), or 12 (full variational
    matrix, columns appended).  ``fdir = -1`` integrates backward.
    """
    settings = settings or _DEFAULT
    y = np.array(y0, dtype=float)
    noev = _event_arrays(())
    status, t, _, _, _ = kernels.advance(
        y, _pvec(params), fdir, elapsed, settings.rel_tol, settings.abs_tol,
        settings.max_step, settings.first_step, settings.escape_radius ** 2,
        settings.max_steps, *noev,
        kernels._NO_TS, kernels._NO_YS, kernels._NO_HS, kernels._NO_CONTS,
        kernels._NO_ET, kernels._NO_EID, kernels._NO_EY)
    _raise_for_status(status, t, "advance", y)
    return y


def propagate_to_event(params: Params, y0, events: Sequence[EventSpec],
                       settings: IntegratorSettings | None = None,
                       fdir: float = 1.0):
    """Cheap shooting primitive: integrate until a terminal event fires.

    Returns (status_name, t_end, y_end).  No trajectory is recorded;
    ``status_name`` is "terminal-event" when the section was reached and
    "reached-max-time" / "escape" otherwise (escape does not raise here --
    shooting sweeps treat it as an outcome).
    """
    settings = settings or _DEFAULT
    y = np.array(y0, dtype=float)
    ev = _event_arrays(events)
    evcap = 16
    ev_t = np.empty(evcap)
    ev_id = np.empty(evcap, dtype=np.int64)
    ev_y = np.empty((evcap, 3))
    status, t, _, _, nev = kernels.advance(
        y, _pvec(params), fdir, settings.max_time, settings.rel_tol,
        settings.abs_tol, settings.max_step, settings.first_step,
        settings.escape_radius ** 2, settings.max_steps, *ev,
        kernels._NO_TS, kernels._NO_YS, kernels._NO_HS, kernels._NO_CONTS,
        ev_t, ev_id, ev_y)
    if status in (kernels.UNDERFLOW, kernels.NONFINITE, kernels.MAXSTEPS):
        _raise_for_status(status, t, "propagate_to_event", y)
    return _STATUS_NAMES[status], t, y


def variational_matrix(params: Params, s0, total_time: float,
                       settings: IntegratorSettings | None = None
                       ) -> tuple[np.ndarray, np.ndarray]:
    """(end state, fundamental matrix) over [0, total_time] from s0."""
    y = np.zeros(12)
    y[:3] = np.asarray(s0, dtype=float)
    y[3::4] = 1.0  # identity columns at slots 3,7,11
    y = advance(params, y, total_time, settings)
    m = y[3:].reshape(3, 3, order="F")
    return y[:3], m


def max_lyapunov(params: Params, s0, transient: float = 500.0,
                 horizon: float = 5000.0, renorm_interval: float = 1.0,
                 settings: IntegratorSettings | None = None,
                 tangent0=None, n_blocks: int = 20
                 ) -> tuple[float, float]:
    """Leading Lyapunov exponent by tangent-vector renormalization.

    The tangent is propagated with the analytic variational equations and
    renormalized every ``renorm_interval``; the exponent is the mean log
    growth rate and the standard error comes from ``n_blocks`` block means.
    The defaults (transient 500, horizon 5000) suit the chaotic regimes of
    this unfolding; override for faster exploratory runs.
    """
    if horizon < 10.0 * renorm_interval:
        raise ValueError("horizon must be >> renorm_interval")
    settings = settings or _DEFAULT
    y = advance(params, np.asarray(s0, dtype=float), transient, settings)
    v0 = (np.array([1.0, 0.0, 0.0]) if tangent0 is None
          else np.asarray(tangent0, dtype=float))
    v0 = v0 / np.linalg.norm(v0)
    n_int = max(int(round(horizon / renorm_interval)), n_blocks)
    y6 = np.concatenate([y, v0])
    logs = np.empty(n_int)
    status, done = kernels.benettin(
        y6, _pvec(params), renorm_interval, n_int, settings.rel_tol,
        settings.abs_tol, settings.max_step, settings.escape_radius ** 2,
        settings.max_steps, logs)
    if status != kernels.OK:
        _raise_for_status(status, done * renorm_interval, "max_lyapunov", y6)
    lam = float(np.sum(logs) / (n_int * renorm_interval))
    blocks = np.array_split(logs, n_blocks)
    rates = np.array([b.sum() / (len(b) * renorm_interval) for b in blocks])
    stderr = float(np.std(rates, ddof=1) / np.sqrt(n_blocks))
    return lam, stderr


def local_manifold_seed(params: Params, eq, which: str = "unstable",
                        offset: float | None = None, side: int = 1
                        ) -> np.ndarray:
    """Equilibrium position offset along its 1D stable/unstable direction.

    The selected eigenspace must be one-dimensional; the unit eigenvector's
    sign is fixed (first significant component positive) so that ``side``
    selects the manifold branch deterministically.  ``offset`` must lie in
    [1e-8, 1e-4] * (1 + |equilibrium|).
    """
    if which not in ("unstable", "stable"):
        raise ValueError("which must be 'unstable' or 'stable'")
    x = np.asarray(eq.state, dtype=float)
    scale = 1.0 + np.linalg.norm(x)
    if offset is None:
        offset = 1e-6 * scale
    if not (1e-8 * scale <= offset <= 1e-4 * scale):
        raise ValueError(f"offset {offset} outside [1e-8, 1e-4] * {scale}")
    j = jacobian(params, x)
    w, v = np.linalg.eig(j)
    tol = 1e-12 * (1.0 + np.max(np.abs(w)))
    sel = np.real(w) > tol if which == "unstable" else np.real(w) < -tol
    idx = np.flatnonzero(sel)
    if len(idx) != 1 or abs(w[idx[0]].imag) > tol:
        raise ValueError(
            f"{which} eigenspace of {getattr(eq, 'kind', '?')} is not "
            f"one-dimensional (eigenvalues {np.round(w, 6)})")
    vec = np.real(v[:, idx[0]])
    vec = vec / np.linalg.norm(vec)
    lead = np.flatnonzero(np.abs(vec) > 1e-8)[0]
    if vec[lead] < 0:
        vec = -vec
    return x + float(side) * offset * vec


def linear_settings(**kw) -> IntegratorSettings:
    """Convenience: settings with overrides applied to the defaults."""
    return replace(_DEFAULT, **kw)


def accel_mode() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
