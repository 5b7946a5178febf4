"""Numerical checks of moment-map Poincare-type inequalities."""

__version__ = "0.1.0"

from . import errors  # noqa: E402,F401
from .potentials import (Potential, custom_potential, evaluate_bundle, exponential_potential,  # noqa: E402,F401
                         simplex_potential, symmetrize_third)
