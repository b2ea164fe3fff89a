"""Vector field, equilibria, symmetries, and closed-form spectra.

The system under study is the three-parameter unfolding

    x' = y
    y' = eps1*x + eps2*y - x*z + B*y*z
    z' = eps3*z + x**2 + D*z**2

It is equivariant under the reflection (x, y, z) -> (-x, -y, z) and leaves
the z-axis invariant.  Up to four equilibria exist: E1 at the origin, E2 on
the z-axis (for D != 0), and a symmetric off-axis pair E3/E4.

States are plain float64 arrays of shape (3,); parameters travel as the
frozen :class:`Params` record.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Params", "Spectrum", "Equilibrium", "EquilibriumKind", "CharPoly",
    "UndefinedEquilibriumError",
    "vector_field", "jacobian", "equilibria", "char_poly_at_origin",
    "eigenvalues_E1", "eigenvalues_E2", "z2_image", "conjugate_params",
    "conjugate_state", "state",
]

# |Im| above this (relative) threshold counts as a genuine complex pair;
# needed so that classification is stable where a discriminant crosses zero
IMAG_TOL = 1e-9
# relative threshold deciding when a degenerate equilibrium coincidence is
# reported with the boundary flag instead of being dropped
BOUNDARY_TOL = 1e-12


class UndefinedEquilibriumError(ValueError):
    """Raised when an operation needs E2 but D = 0 leaves it undefined."""


class EquilibriumKind(enum.Enum):
    E1 = "E1"
    E2 = "E2"
    E3 = "E3"
    E4 = "E4"


@dataclass(frozen=True)
class Params:
    """The five real parameters (eps1, eps2, eps3, B, D) of the unfolding."""

    eps1: float
    eps2: float
    eps3: float
    b_coef: float
    d_coef: float

    def __post_init__(self):
        vals = (self.eps1, self.eps2, self.eps3, self.b_coef, self.d_coef)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"non-finite parameter in {vals}")

    def as_array(self) -> np.ndarray:
        return np.array([self.eps1, self.eps2, self.eps3,
                         self.b_coef, self.d_coef])

    @classmethod
    def from_array(cls, arr) -> "Params":
        e1, e2, e3, b, d = (float(v) for v in arr)
        return cls(e1, e2, e3, b, d)

    def replace(self, **kw) -> "Params":
        fields = dict(eps1=self.eps1, eps2=self.eps2, eps3=self.eps3,
                      b_coef=self.b_coef, d_coef=self.d_coef)
        fields.update(kw)
        return Params(**fields)


def state(x: float, y: float, z: float) -> np.ndarray:
    """Build a phase-space point, rejecting non-finite components."""
    s = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError(f"non-finite state ({x}, {y}, {z})")
    return s


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of an equilibrium, sorted by (Re, Im) ascending.

    ``discriminant`` is the radicand of the in-plane eigenvalue pair where a
    closed form exists (E1, E2), else the discriminant of the characteristic
    cubic.  A pair counts as complex when |Im| > IMAG_TOL * (1 + |Re|).
    """

    eigenvalues: tuple[complex, complex, complex]
    discriminant: float
    is_real_saddle: bool
    is_saddle_focus: bool

    @property
    def real_parts(self) -> np.ndarray:
        return np.array([ev.real for ev in self.eigenvalues])

    def n_unstable(self) -> int:
        return int(np.sum(self.real_parts > 0.0))


def _is_complex(ev: complex) -> bool:
    return abs(ev.imag) > IMAG_TOL * (1.0 + abs(ev.real))


def _sorted_eigenvalues(evs) -> tuple[complex, complex, complex]:
    evs = sorted((complex(e) for e in evs), key=lambda e: (e.real, e.imag))
    return tuple(evs)


def spectrum_from_eigenvalues(evs, discriminant: float) -> Spectrum:
    evs = _sorted_eigenvalues(evs)
    flags = [_is_complex(e) for e in evs]
    n_complex = sum(flags)
    re = [e.real for e in evs]
    hyperbolic = all(abs(r) > IMAG_TOL * (1.0 + abs(r)) for r in re)
    saddle = hyperbolic and (min(re) < 0.0 < max(re))
    is_real_saddle = saddle and n_complex == 0
    # saddle focus: one genuine complex pair whose real part has the opposite
    # sign of the remaining real eigenvalue
    is_saddle_focus = saddle and n_complex == 2
    return Spectrum(evs, float(discriminant), is_real_saddle, is_saddle_focus)


@dataclass(frozen=True)
class Equilibrium:
    kind: EquilibriumKind
    state: np.ndarray
    spectrum: Spectrum
    boundary: bool = False  # set when the equilibrium sits on a coincidence


@dataclass(frozen=True)
class CharPoly:
    """Coefficients of lambda^3 + p1*lambda^2 + p2*lambda + p3."""

    p1: float
    p2: float
    p3: float

    def roots(self) -> np.ndarray:
        return np.roots([1.0, self.p1, self.p2, self.p3])

    def eval(self, lam: complex) -> complex:
        return ((lam + self.p1) * lam + self.p2) * lam + self.p3


def vector_field(params: Params, s) -> np.ndarray:
    """Right-hand side (x', y', z') at the phase point s."""
    x, y, z = float(s[0]), float(s[1]), float(s[2])
    return np.array([
        y,
        params.eps1 * x + params.eps2 * y - x * z + params.b_coef * y * z,
        params.eps3 * z + x * x + params.d_coef * z * z,
    ])


def jacobian(params: Params, s) -> np.ndarray:
    """Jacobian d(vector_field)/d(x,y,z); rows index output components."""
    x, y, z = float(s[0]), float(s[1]), float(s[2])
    return np.array([
        [0.0, 1.0, 0.0],
        [params.eps1 - z, params.eps2 + params.b_coef * z,
         -x + params.b_coef * y],
        [2.0 * x, 0.0, params.eps3 + 2.0 * params.d_coef * z],
    ])


def z2_image(s) -> np.ndarray:
    """The reflection (x, y, z) -> (-x, -y, z); an involution."""
    return np.array([-float(s[0]), -float(s[1]), float(s[2])])


def char_poly_at_origin(params: Params) -> CharPoly:
    """p1 = -(eps2+eps3), p2 = eps2*eps3 - eps1, p3 = eps1*eps3."""
    return CharPoly(
        p1=-(params.eps2 + params.eps3),
        p2=params.eps2 * params.eps3 - params.eps1,
        p3=params.eps1 * params.eps3,
    )


def eigenvalues_E1(params: Params) -> Spectrum:
    """Closed-form spectrum at the origin.

    The z-direction decouples (eigenvalue eps3); the (x, y) block gives the
    pair [eps2 +- sqrt(eps2^2 + 4*eps1)] / 2.  The discriminant field holds
    the radicand eps2^2 + 4*eps1.
    """
    disc = params.eps2 ** 2 + 4.0 * params.eps1
    root = np.sqrt(complex(disc))
    lam_a = (params.eps2 + root) / 2.0
    lam_b = (params.eps2 - root) / 2.0
    return spectrum_from_eigenvalues([lam_a, lam_b, params.eps3], disc)


def eigenvalues_E2(params: Params) -> Spectrum:
    """Closed-form spectrum at E2 = (0, 0, -eps3/D); requires D != 0."""
    if params.d_coef == 0.0:
        raise UndefinedEquilibriumError("E2 undefined for D = 0")
    tr = params.eps2 - (params.b_coef / params.d_coef) * params.eps3
    det_part = params.eps1 + params.eps3 / params.d_coef
    disc = tr ** 2 + 4.0 * det_part
    root = np.sqrt(complex(disc))
    lam_a = (tr + root) / 2.0
    lam_b = (tr - root) / 2.0
    return spectrum_from_eigenvalues([lam_a, lam_b, -params.eps3], disc)


def _spectrum_from_jacobian(params: Params, s) -> Spectrum:
    j = jacobian(params, s)
    evs = np.linalg.eigvals(j)
    # characteristic-cubic discriminant, for the record
    p1 = -np.trace(j)
    p2 = 0.5 * (np.trace(j) ** 2 - np.trace(j @ j))
    p3 = -np.linalg.det(j)
    disc = (18.0 * p1 * p2 * p3 - 4.0 * p1 ** 3 * p3 + p1 ** 2 * p2 ** 2
            - 4.0 * p2 ** 3 - 27.0 * p3 ** 2)
    return spectrum_from_eigenvalues(evs, disc)


def equilibria(params: Params) -> list[Equilibrium]:
    """All equilibria with populated spectra.

    E1 always; E2 when D != 0; E3/E4 when eps1*(eps3 + D*eps1) < 0.
    Coincidences (E2 meeting E1 at eps3 = 0, E3/E4 collapsing onto the
    z-axis) are reported with ``boundary=True`` instead of being dropped.
    """
    out = [Equilibrium(EquilibriumKind.E1, state(0.0, 0.0, 0.0),
                       eigenvalues_E1(params))]
    scale = 1.0 + abs(params.eps1) + abs(params.eps3)
    if params.d_coef != 0.0:
        z2 = -params.eps3 / params.d_coef
        out.append(Equilibrium(
            EquilibriumKind.E2, state(0.0, 0.0, z2), eigenvalues_E2(params),
            boundary=abs(params.eps3) <= BOUNDARY_TOL * scale))
    prod = params.eps1 * (params.eps3 + params.d_coef * params.eps1)
    on_axis = abs(prod) <= BOUNDARY_TOL * scale ** 2
    if prod < 0.0 or (on_axis and params.eps1 != 0.0):
        x0 = np.sqrt(max(-prod, 0.0))
        for kind, sign in ((EquilibriumKind.E3, 1.0),
                           (EquilibriumKind.E4, -1.0)):
            s = state(sign * x0, 0.0, params.eps1)
            out.append(Equilibrium(kind, s, _spectrum_from_jacobian(params, s),
                                   boundary=on_axis))
    return out


def conjugate_params(params: Params) -> tuple[Params, float]:
    """Parameters of the flow conjugate under the E1 <-> E2 exchange.

    Returns ``(new_params, shift)`` with ``shift = -eps3/D`` (the z-coordinate
    of E2).  Subtracting the shift from the z-component carries trajectories
    of the original flow to trajectories of the conjugate flow:

        vector_field(new_params, s - (0, 0, shift)) == vector_field(params, s)

    Applying the map twice returns the original parameters.
    """
    if params.d_coef == 0.0:
        raise UndefinedEquilibriumError(
            "conjugacy undefined for D = 0 (no E2)")
    ratio = params.eps3 / params.d_coef
    new = Params(
        eps1=params.eps1 + ratio,
        eps2=params.eps2 - params.b_coef * ratio,
        eps3=-params.eps3,
        b_coef=params.b_coef,
        d_coef=params.d_coef,
    )
    return new, -ratio


def conjugate_state(params: Params, s) -> np.ndarray:
    """Map a state of the original flow into the conjugate flow's frame."""
    _, shift = conjugate_params(params)
    return np.array([float(s[0]), float(s[1]), float(s[2]) - shift])
