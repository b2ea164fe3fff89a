"""Closed-form local bifurcation predicates and predicted curve formulas.

Covers the bifurcation catalogue of the origin (pitchfork, transcritical,
Hopf, Takens-Bogdanov, Hopf-zero, diagonalizable double-zero, triple-zero),
the cubic normal form on the center manifold at a Takens-Bogdanov point and
the curves its unfolding predicts, the codimension-three degeneracy where the
cubic damping coefficient vanishes, and the heteroclinic-connection curve
predicted near the diagonalizable double-zero point.

All curve formulas are leading-order truncations; each prediction carries a
truncation tag so downstream comparisons pick tolerances accordingly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import Params, conjugate_params, eigenvalues_E1, eigenvalues_E2

__all__ = [
    "BifKind", "Subject", "SubType", "BifurcationLabel", "NormalFormCoeffs",
    "MuTilde", "CurveCase", "CurvePrediction", "DzPrediction",
    "SaddleQuantities", "DegenerateCoefficientError", "DomainError",
    "ClassificationError", "ConvergenceError",
    "classify_origin", "classify_E2", "tb_normal_form",
    "tb_unfolding_curves", "codim3_curves", "mu_tilde",
    "dz_heteroclinic_prediction", "saddle_quantities",
    "tb_rescaling", "tb_rescaled_coefficients", "tb_cubic_rhs",
    "tb_canonical_rhs", "codim3_rescaling", "codim3_rescaled_coefficients",
    "codim3_quintic_rhs", "codim3_canonical_rhs",
]

DEFAULT_TOL = 1e-9

# cited numeric constants for the saddle-node / cusp curves; quarantined
# here and exposed through CurvePrediction metadata
SNPO_CONSTANT = 0.752
CUSP_C3 = 1.5713
CUSP_C4 = -3.3484


class DegenerateCoefficientError(ValueError):
    """A normal-form coefficient needed by the formula vanishes."""


class DomainError(ValueError):
    """A curve was evaluated outside its validity region."""


class ClassificationError(ValueError):
    """An eigenvalue signature does not match the required pattern."""


class ConvergenceError(RuntimeError):
    """An iterative solve failed to reach its tolerance."""


class BifKind(enum.Enum):
    PITCHFORK = "pitchfork"
    TRANSCRITICAL = "transcritical"
    HOPF = "hopf"
    TAKENS_BOGDANOV = "takens-bogdanov"
    HOPF_ZERO = "hopf-zero"
    DIAGONAL_DOUBLE_ZERO = "diagonal-double-zero"
    TRIPLE_ZERO = "triple-zero"


class Subject(enum.Enum):
    E1 = "E1"
    E2 = "E2"
    E34 = "E34"


class SubType(enum.Enum):
    NONE = "none"
    HOMOCLINIC_CASE = "homoclinic"
    HETEROCLINIC_CASE = "heteroclinic"
    DEGENERATE_TB = "degenerate"


@dataclass(frozen=True)
class BifurcationLabel:
    kind: BifKind
    subject: Subject
    sub_type: SubType
    residuals: dict[str, float]


def classify_origin(params: Params, tol: float = DEFAULT_TOL
                    ) -> list[BifurcationLabel]:
    """Emit every local-bifurcation label of E1 holding within tol.

    Equality conditions are tested with absolute tolerance ``tol``; strict
    inequalities must clear the same margin.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    e1, e2, e3 = params.eps1, params.eps2, params.eps3
    b, d = params.b_coef, params.d_coef

    def near0(v):
        return abs(v) <= tol

    labels = []

    def emit(kind, sub=SubType.NONE, **residuals):
        labels.append(BifurcationLabel(kind, Subject.E1, sub, residuals))

    if near0(e1) and not near0(e2) and not near0(e3):
        emit(BifKind.PITCHFORK, eps1=abs(e1))
    if near0(e3) and not near0(e1) and not near0(e2) and not near0(d):
        emit(BifKind.TRANSCRITICAL, eps3=abs(e3))
    if near0(e2) and e1 < -tol and not near0(e3):
        emit(BifKind.HOPF, eps2=abs(e2))
    if near0(e1) and near0(e2) and not near0(e3):
        if b != 0.0 and abs(e3 - 2.0 / b) <= tol:
            sub = SubType.DEGENERATE_TB
        elif e3 > 0.0:
            sub = SubType.HETEROCLINIC_CASE
        else:
            sub = SubType.HOMOCLINIC_CASE
        emit(BifKind.TAKENS_BOGDANOV, sub, eps1=abs(e1), eps2=abs(e2))
    if near0(e2) and near0(e3) and e1 < -tol:
        emit(BifKind.HOPF_ZERO, eps2=abs(e2), eps3=abs(e3))
    if near0(e1) and near0(e3) and not near0(e2):
        emit(BifKind.DIAGONAL_DOUBLE_ZERO, eps1=abs(e1), eps3=abs(e3))
    if near0(e1) and near0(e2) and near0(e3):
        emit(BifKind.TRIPLE_ZERO, eps1=abs(e1), eps2=abs(e2), eps3=abs(e3))
    return labels


def classify_E2(params: Params, tol: float = DEFAULT_TOL
                ) -> list[BifurcationLabel]:
    """Bifurcations of E2, obtained by classifying the conjugate flow.

    The conjugacy negates eps3, so a Takens-Bogdanov point of E2 comes out
    homoclinic-type when the original eps3 > 0 and heteroclinic-type when
    eps3 < 0 (the opposite of the origin's convention).
    """
    conj, _ = conjugate_params(params)
    out = []
    for lab in classify_origin(conj, tol):
        out.append(BifurcationLabel(lab.kind, Subject.E2, lab.sub_type,
                                    lab.residuals))
    return out


@dataclass(frozen=True)
class NormalFormCoeffs:
    """Cubic (and, at the degeneracy, quintic) reduced-system coefficients.

    a3 = 1/eps3 and b3 = (2 - eps3*B)/eps3**2 always;  b5 and the x**2*y
    elimination factor are populated only when b3 is below the degeneracy
    threshold (|2 - B*eps3| small).
    """

    a3: float
    b3: float
    a5_over_a3: float | None = None
    b5: float | None = None


# dimension-consistent smallness test on the numerator 2 - B*eps3
B3_DEGENERACY_THRESHOLD = 1e-6


def _b3_degenerate(params: Params) -> bool:
    num = abs(2.0 - params.b_coef * params.eps3)
    return num <= B3_DEGENERACY_THRESHOLD * (
        2.0 + abs(params.b_coef * params.eps3))


def tb_normal_form(params: Params) -> NormalFormCoeffs:
    """Center-manifold reduced cubic coefficients at a TB point of E1."""
    e3, b, d = params.eps3, params.b_coef, params.d_coef
    if e3 == 0.0:
        raise DegenerateCoefficientError(
            "eps3 = 0: triple-zero point, no TB reduction")
    a3 = 1.0 / e3
    b3 = (2.0 - e3 * b) / e3 ** 2
    if _b3_degenerate(params):
        b5 = -(b ** 4 / 8.0) * (5.0 * b + 3.0 * d)
        # the x**5-elimination multiplier does not enter any downstream
        # formula at this truncation order
        return NormalFormCoeffs(a3, b3, a5_over_a3=0.0, b5=b5)
    return NormalFormCoeffs(a3, b3)


class CurveCase(enum.Enum):
    TB_HOMOCLINIC = "tb-homoclinic"
    TB_HETEROCLINIC = "tb-heteroclinic"
    CODIM3_HOMOCLINIC = "codim3-homoclinic"
    CODIM3_HETEROCLINIC = "codim3-heteroclinic"
    DZ_HETEROCLINIC = "dz-heteroclinic"


@dataclass(frozen=True)
class CurvePrediction:
    """A predicted bifurcation curve as a map from one free parameter.

    ``map(t)`` returns the full (eps1, eps2, eps3) triple and raises
    :class:`DomainError` outside the validity region.  ``constants`` holds
    any cited numerical constants entering the formula.
    """

    name: str
    case: CurveCase
    map: Callable[[float], tuple[float, float, float]]
    validity: Callable[[float], bool]
    constants: dict[str, float] = field(default_factory=dict)
    truncation_order: int = 1
    notes: str = ""

    def __call__(self, t: float) -> tuple[float, float, float]:
        if not self.validity(t):
            raise DomainError(f"{self.name}: parameter {t} outside validity")
        return self.map(t)


def _curve(name, case, fmap, valid, constants=None, order=1, notes=""):
    return CurvePrediction(name, case, fmap, valid,
                           dict(constants or {}), order, notes)


def tb_unfolding_curves(eps3: float, b: float, d: float
                        ) -> list[CurvePrediction]:
    """Curves emerging from the TB point (0, 0, eps3), parameterized by eps1.

    Homoclinic case (eps3 < 0): pitchfork, Hopf of the origin, Hopf of the
    nontrivial pair, the attractive homoclinic curve, and the saddle-node of
    symmetric periodic orbits.  Heteroclinic case (eps3 > 0): pitchfork,
    Hopf of the origin, and the repulsive heteroclinic curve.
    """
    if eps3 == 0.0:
        raise DegenerateCoefficientError("eps3 = 0: not a TB point")
    if b != 0.0 and eps3 == 2.0 / b:
        raise DegenerateCoefficientError(
            "eps3 = 2/B: degenerate TB, use codim3_curves")
    q = (2.0 - b * eps3) / eps3  # common slope factor
    case = (CurveCase.TB_HOMOCLINIC if eps3 < 0.0
            else CurveCase.TB_HETEROCLINIC)
    curves = [
        _curve("pitchfork", case, lambda t: (0.0, t, eps3), lambda t: True),
        _curve("hopf_origin", case, lambda t: (t, 0.0, eps3),
               lambda t: t < 0.0),
    ]
    if eps3 < 0.0:
        curves += [
            _curve("hopf_nontrivial", case,
                   lambda t: (t, q * t, eps3), lambda t: t > 0.0),
            _curve("homoclinic", case,
                   lambda t: (t, 0.8 * q * t, eps3), lambda t: t > 0.0,
                   constants={"slope_factor": 4.0 / 5.0},
                   notes="attractive (third eigenvalue negative)"),
            _curve("snpo_symmetric", case,
                   lambda t: (t, SNPO_CONSTANT * q * t, eps3),
                   lambda t: t > 0.0, constants={"c": SNPO_CONSTANT}),
        ]
    else:
        curves.append(
            _curve("heteroclinic", case,
                   lambda t: (t, 0.2 * q * t, eps3), lambda t: t < 0.0,
                   constants={"slope_factor": 1.0 / 5.0},
                   notes="repulsive (third eigenvalue positive)"))
    return curves


def codim3_curves(b: float, d: float, case: int) -> list[CurvePrediction]:
    """Codimension-two curves near the degenerate TB point eps3 = 2/B.

    ``case`` selects the sign of eps3 (negative: homoclinic catalogue,
    positive: heteroclinic catalogue).  Free parameter is eps3 for curves
    transversal to the degeneracy and eps1 for curves pinned at eps3 = 2/B.
    """
    if b == 0.0:
        raise DegenerateCoefficientError("B = 0")
    q5 = 5.0 * b + 3.0 * d
    if q5 == 0.0:
        raise DegenerateCoefficientError("5B + 3D = 0")
    e3c = 2.0 / b
    sgn = 1 if case > 0 else -1
    ccase = (CurveCase.CODIM3_HETEROCLINIC if sgn > 0
             else CurveCase.CODIM3_HOMOCLINIC)

    def e3_ok(t):
        return (t > 0.0) == (sgn > 0) and t != e3c

    curves = [
        _curve("tb_line", ccase, lambda t: (0.0, 0.0, t), e3_ok),
        _curve("degenerate_hopf_origin", ccase,
               lambda t: (t, 0.0, e3c), lambda t: t < 0.0),
    ]
    if sgn < 0:
        curves += [
            _curve("degenerate_hopf_nontrivial", ccase,
                   lambda t: (t, -0.5 * t * t * b * b * q5, e3c),
                   lambda t: t > 0.0),
            _curve(
                "zero_trace_homoclinic", ccase,
                lambda t: (7.0 * (2.0 - b * t) / (b ** 4 * t * q5), 0.0, t),
                lambda t: e3_ok(t)
                and 7.0 * (2.0 - b * t) / (b ** 4 * t * q5) > 0.0,
                notes="exactly consistent with the scaled-space relation "
                      "mu3 = -8*mu1/7"),
            _curve(
                "cusp_snpo", ccase,
                lambda t: (
                    -8.0 * (2.0 - b * t) / (CUSP_C4 * t * b ** 4 * q5),
                    2.0 * CUSP_C3 * (2.0 - b * t) ** 2
                    / (CUSP_C4 ** 2 * b * b * q5),
                    t),
                lambda t: e3_ok(t)
                and -8.0 * (2.0 - b * t) / (CUSP_C4 * t * b ** 4 * q5) > 0.0,
                constants={"c3": CUSP_C3, "c4": CUSP_C4},
                notes="scaled-space form: mu2 = c3*mu1**2, mu3 = c4*mu1"),
        ]
    else:
        curves.append(_curve(
            "zero_trace_heteroclinic", ccase,
            lambda t: (-(7.0 / 3.0) * (2.0 - b * t) ** 3, 0.0, t),
            e3_ok,
            notes="as stated; the scaled-space relation mu3 = (3/7)*mu1 "
                  "instead gives eps1 = -(56/3)*(2-B*eps3)/(B**4*eps3*"
                  "(5B+3D)) -- flagged for verification"))
    return curves


@dataclass(frozen=True)
class MuTilde:
    """Rescaled unfolding parameters of the codimension-three normal form."""

    mu1: float
    mu2: float
    mu3: float


def mu_tilde(params: Params) -> MuTilde:
    """The three rescaled unfolding coordinates (real cube roots throughout).

    mu1 = eps1/4 * cbrt(eps3^4 B^8 (5B+3D)^2)
    mu2 = -eps2/2 * cbrt(-B^4 eps3^2 (5B+3D))
    mu3 = -2 (2-B eps3) cbrt(eps3) / cbrt(B^4 (5B+3D))
    """
    e1, e2, e3 = params.eps1, params.eps2, params.eps3
    b, d = params.b_coef, params.d_coef
    if b == 0.0 or e3 == 0.0:
        raise DegenerateCoefficientError("needs B != 0 and eps3 != 0")
    q5 = 5.0 * b + 3.0 * d
    if q5 == 0.0:
        raise DegenerateCoefficientError("5B + 3D = 0")
    mu1 = 0.25 * e1 * np.cbrt(e3 ** 4 * b ** 8 * q5 ** 2)
    mu2 = -0.5 * e2 * np.cbrt(-(b ** 4) * e3 ** 2 * q5)
    mu3 = -2.0 * (2.0 - b * e3) * np.cbrt(e3) / np.cbrt(b ** 4 * q5)
    return MuTilde(float(mu1), float(mu2), float(mu3))


@dataclass(frozen=True)
class DzPrediction:
    eps1: float
    a_value: float
    iterations: int
    converged: bool


def dz_heteroclinic_prediction(eps2: float, b: float, d: float, eps3: float,
                               tol: float = 1e-12, max_iter: int = 100
                               ) -> DzPrediction:
    """eps1 on the E1-E2 heteroclinic curve near the double-zero point.

    Solves the implicit second-order relation

        eps1 = -eps3/(2D)
               + a^2 (B - 2*Delta) / (4D (3a+2) (1 - Delta^2 eps1)) * eps3^2

    with Delta = 1/eps2 and a = (Delta^3 eps1 - Delta)/D, by fixed-point
    iteration seeded at the leading term (eps1 appears on both sides through
    a and the last denominator factor, so no closed form exists).  The
    truncation is only trustworthy for small |eps3|; |eps3| <= 0.05 is a
    sensible bound for parameter sets with D of order 0.01.

    Raises :class:`ConvergenceError` if the iteration stalls and
    :class:`DomainError` when the validity requirement a > 0 fails.
    """
    if eps2 == 0.0 or d == 0.0:
        raise DegenerateCoefficientError("needs eps2 != 0 and D != 0")
    delta = 1.0 / eps2
    e1 = -eps3 / (2.0 * d)
    its = 0
    converged = False
    for its in range(1, max_iter + 1):
        a = (delta ** 3 * e1 - delta) / d
        denom = 4.0 * d * (3.0 * a + 2.0) * (1.0 - delta ** 2 * e1)
        if denom == 0.0 or not np.isfinite(denom):
            raise ConvergenceError("degenerate denominator in the iteration")
        e1_new = -eps3 / (2.0 * d) + a * a * (b - 2.0 * delta) / denom * eps3 ** 2
        if not np.isfinite(e1_new):
            raise ConvergenceError("iteration diverged")
        if abs(e1_new - e1) <= tol:
            e1 = e1_new
            converged = True
            break
        e1 = e1_new
    if not converged:
        raise ConvergenceError(
            f"no convergence in {max_iter} iterations (last eps1 = {e1})")
    a = (delta ** 3 * e1 - delta) / d
    if a <= 0.0:
        raise DomainError(f"validity requires a > 0, got a = {a}")
    return DzPrediction(float(e1), float(a), its, True)


@dataclass(frozen=True)
class SaddleQuantities:
    delta_e1: float
    delta_e2: float
    product: float
    attractive: bool


def _leading_ratio(spec, name: str) -> float:
    re = spec.real_parts  # sorted ascending
    if not (re[0] < 0.0 and re[1] < 0.0 < re[2]):
        raise ClassificationError(
            f"{name}: expected Re(l1) <= Re(l2) < 0 < Re(l3), "
            f"got real parts {re.tolist()}")
    return abs(re[1] / re[2])


def saddle_quantities(params: Params) -> SaddleQuantities:
    """Saddle quantities delta_E1, delta_E2 and their product.

    Each delta is |Re(leading stable)/Re(unstable)| for the saddle pattern
    (two stable, one unstable); real parts are used for complex pairs.  A
    product above 1 makes a heteroclinic cycle through both points
    attracting.
    """
    d1 = _leading_ratio(eigenvalues_E1(params), "E1")
    d2 = _leading_ratio(eigenvalues_E2(params), "E2")
    prod = d1 * d2
    return SaddleQuantities(d1, d2, prod, prod > 1.0)


# ---------------------------------------------------------------------------
# rescaling transforms backing the normal-form property tests
# ---------------------------------------------------------------------------

def tb_cubic_rhs(eps1: float, eps2: float, a3: float, b3: float, xy
                 ) -> np.ndarray:
    """Planar cubic TB unfolding: (y, eps1*x + eps2*y + a3*x^3 + b3*x^2*y)."""
    x, y = float(xy[0]), float(xy[1])
    return np.array([y, eps1 * x + eps2 * y + a3 * x ** 3 + b3 * x * x * y])


def tb_canonical_rhs(mu1: float, mu2: float, cubic_sign: float, xy
                     ) -> np.ndarray:
    """Canonical form (y, mu1*x + mu2*y + cubic_sign*x^3 - x^2*y)."""
    x, y = float(xy[0]), float(xy[1])
    return np.array([y, mu1 * x + mu2 * y + cubic_sign * x ** 3 - x * x * y])


def tb_rescaling(eps3: float, b: float) -> tuple[float, float, float]:
    """Scales (x, y, t) -> (sx*X, sy*Y, st*T) canonicalizing the TB cubic.

    The consistent y-scale is eps3^2 sqrt|eps3| / (2 - B*eps3)**2 -- note the
    squared denominator; a printed form of this transform circulates with an
    inconsistent denominator (2 + B*eps3^2), which fails the x' = y identity.
    Reaching the canonical -x^2*y sign additionally requires the orientation
    flip (Y, T) -> (-Y, -T), folded into the returned signs; it also negates
    the Y-coefficient, giving mu2 = -eps2*(2-B*eps3)/|eps3| (see
    :func:`tb_rescaled_coefficients`).
    """
    if eps3 == 0.0:
        raise DegenerateCoefficientError("eps3 = 0")
    w = 2.0 - b * eps3
    if w == 0.0:
        raise DegenerateCoefficientError("eps3 = 2/B: degenerate TB")
    ae = abs(eps3)
    sx = ae * np.sqrt(ae) / w
    gamma = w / ae
    return float(sx), float(-sx / gamma), float(-gamma)


def tb_rescaled_coefficients(eps1: float, eps2: float, eps3: float, b: float
                             ) -> tuple[float, float]:
    """(mu1, mu2) of the canonical TB form under :func:`tb_rescaling`."""
    w = 2.0 - b * eps3
    gamma = w / abs(eps3)
    return float(eps1 * gamma * gamma), float(-eps2 * gamma)


def codim3_quintic_rhs(mu1: float, mu2: float, mu3: float, a3: float,
                       b5: float, xy) -> np.ndarray:
    """Quintic unfolding (y, mu1*x + mu2*y + a3*x^3 + mu3*x^2*y + b5*x^4*y)."""
    x, y = float(xy[0]), float(xy[1])
    return np.array([y, mu1 * x + mu2 * y + a3 * x ** 3 + mu3 * x * x * y
                     + b5 * x ** 4 * y])


def codim3_canonical_rhs(m1: float, m2: float, m3: float, cubic_sign: float,
                         xy) -> np.ndarray:
    """Canonical quintic (v, m1*u + m2*v + sign*u^3 + m3*u^2*v + u^4*v)."""
    u, v = float(xy[0]), float(xy[1])
    return np.array([v, m1 * u + m2 * v + cubic_sign * u ** 3
                     + m3 * u * u * v + u ** 4 * v])


def codim3_rescaling(a3: float, b5: float) -> tuple[float, float, float]:
    """Scales canonicalizing the quintic unfolding (u^3 -> sgn(a3), u^4*v -> 1).

    Valid for either sign of b5 through real cube roots.
    """
    if a3 == 0.0 or b5 == 0.0:
        raise DegenerateCoefficientError("needs a3 != 0 and b5 != 0")
    sx = (abs(a3) / b5 ** 2) ** (1.0 / 6.0)
    sy = b5 * (abs(a3) ** 5 / b5 ** 10) ** (1.0 / 6.0)
    st = np.cbrt(b5 / a3 ** 2)
    return float(sx), float(sy), float(st)


def codim3_rescaled_coefficients(mu1: float, mu2: float, mu3: float,
                                 a3: float, b5: float
                                 ) -> tuple[float, float, float]:
    """Chain-rule images of (mu1, mu2, mu3) under :func:`codim3_rescaling`."""
    sx, _, st = codim3_rescaling(a3, b5)
    return (float(mu1 * st * st), float(mu2 * st),
            float(mu3 * sx * sx * st))
