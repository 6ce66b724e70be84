"""Units, metric and normalisation shared by every module.

Natural units (hbar = c = 1), lengths in units of the Compton length 1/m of
the default mass, metric signature (+, -, -, -).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

__all__ = ["Conventions", "default_conventions", "CLOSED_FORM_CALIBRATION"]

# Printed closed form / mass-shell quadrature, measured at (t, |x|) = (0, 1)
# by propagator.measure_calibration and asserted constant in the test suite.
CLOSED_FORM_CALIBRATION = -1.0


@dataclass(frozen=True)
class Conventions:
    """One immutable bundle of physical conventions per run.

    contraction_norm is the constant C in
    contraction(x_c, x_a) = C * int d^Dk/(2k0) exp(i[k.(x_c - x_a) - k0 (t_c - t_a)]).
    """

    spatial_dims: int = 3
    mass: float = 1.0
    contraction_norm: float | None = None
    closed_form_calibration: float = CLOSED_FORM_CALIBRATION
    metric_sign: str = "+---"

    def __post_init__(self):
        if self.spatial_dims not in (1, 3):
            raise ValueError(f"spatial_dims must be 1 or 3, got {self.spatial_dims}")
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ValueError(f"mass must be positive and finite, got {self.mass}")
        if self.metric_sign != "+---":
            raise ValueError("only the (+,-,-,-) signature is supported")
        if self.contraction_norm is None:
            object.__setattr__(self, "contraction_norm", (2 * math.pi) ** (-self.spatial_dims))
        elif not self.contraction_norm > 0:
            raise ValueError("contraction_norm must be positive")

    def energy(self, k):
        """Mass-shell energy k0 = sqrt(|k|^2 + m^2) for momenta of shape (..., D) or (...)."""
        import numpy as np

        k = np.asarray(k, dtype=float)
        if self.spatial_dims == 1 and (k.ndim == 0 or k.shape[-1] != 1):
            return np.sqrt(k * k + self.mass**2)
        return np.sqrt(np.sum(k * k, axis=-1) + self.mass**2)

    def to_dict(self) -> dict:
        return asdict(self)


def default_conventions(**overrides) -> Conventions:
    """Canonical defaults (m = 1, D = 3, C = (2 pi)^-D), with optional overrides.

    Overriding ``spatial_dims`` without ``contraction_norm`` rescales C to the
    new dimension.
    """
    base = Conventions()
    if not overrides:
        return base
    if "spatial_dims" in overrides and "contraction_norm" not in overrides:
        overrides["contraction_norm"] = None
    return replace(base, **overrides)
