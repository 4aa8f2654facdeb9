"""Antoine vapor-pressure correlation and its inversion.

ln(p/kPa) = A - B / (C + T/K), with the parameters box-bounded so that B > 0
always gives a physically increasing curve. Pressures cross the module
boundary in Pa; the correlation itself works in kPa.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Bounds enforced by the prediction head's sigmoid scaling.
PARAM_RANGES = {
    "A": (5.0, 20.0),
    "B": (1500.0, 6000.0),
    "C": (-300.0, 0.0),
}

PA_PER_KPA = 1000.0


class AntoineDomainError(ValueError):
    """Temperature or pressure outside the curve's valid branch."""


@dataclass(frozen=True)
class AntoineParams:
    A: float
    B: float
    C: float

    def in_ranges(self, ranges=None) -> bool:
        ranges = ranges or PARAM_RANGES
        return (
            ranges["A"][0] <= self.A <= ranges["A"][1]
            and ranges["B"][0] <= self.B <= ranges["B"][1]
            and ranges["C"][0] <= self.C <= ranges["C"][1]
        )

    def as_tuple(self):
        return (self.A, self.B, self.C)


def ln_vapor_pressure(params: AntoineParams, temperature_k):
    """ln(p/kPa) at the given temperature(s); requires C + T > 0."""
    t = np.asarray(temperature_k, dtype=np.float64)
    denom = params.C + t
    if np.any(denom <= 0.0):
        raise AntoineDomainError(
            f"C + T must be positive (C={params.C}, T={temperature_k})"
        )
    out = params.A - params.B / denom
    return float(out) if np.isscalar(temperature_k) else out


def vapor_pressure(params: AntoineParams, temperature_k):
    """Vapor pressure in Pa."""
    return np.exp(ln_vapor_pressure(params, temperature_k)) * PA_PER_KPA


def boiling_temperature(params: AntoineParams, pressure_pa) -> float:
    """Temperature at which the curve reaches the given pressure.

    Exact algebraic inverse of :func:`ln_vapor_pressure`; no solution exists
    once ln(p/kPa) reaches A.
    """
    p = np.asarray(pressure_pa, dtype=np.float64)
    if np.any(p <= 0.0):
        raise AntoineDomainError("pressure must be positive")
    ln_p = np.log(p / PA_PER_KPA)
    if np.any(ln_p >= params.A):
        raise AntoineDomainError(
            f"no boiling point: ln(p/kPa)={ln_p} reaches A={params.A}"
        )
    t = params.B / (params.A - ln_p) - params.C
    return float(t) if np.isscalar(pressure_pa) else t
