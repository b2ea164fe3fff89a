"""Bifurcation toolkit for a Lorenz normal-form unfolding near triple zero.

Submodules
----------
model         vector field, equilibria, symmetries, closed-form spectra
localbif      local-bifurcation classification and predicted curve formulas
integrate     adaptive integration, events, Lyapunov exponents
continuation  pseudo-arclength continuation, Hopf curves, periodic orbits
connections   heteroclinic/homoclinic shooting, global curves, T-points
cli           batch command-line front end
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    Params, Spectrum, Equilibrium, EquilibriumKind, CharPoly,
    vector_field, jacobian, equilibria, char_poly_at_origin,
    eigenvalues_E1, eigenvalues_E2, z2_image, conjugate_params,
    conjugate_state, state,
)
from .localbif import (  # noqa: F401
    BifKind, Subject, SubType, BifurcationLabel, NormalFormCoeffs,
    MuTilde, CurvePrediction, classify_origin, classify_E2,
    tb_normal_form, tb_unfolding_curves, codim3_curves, mu_tilde,
    dz_heteroclinic_prediction, saddle_quantities,
)
from .integrate import (  # noqa: F401
    IntegratorSettings, EventSpec, Trajectory, integrate, max_lyapunov,
    local_manifold_seed,
)
