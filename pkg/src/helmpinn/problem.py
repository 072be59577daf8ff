"""Helmholtz problem parameters."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HelmholtzProblem:
    """``-laplace(u) - k^2 u = g`` on the square of half-width ``L``.

    Only ``k`` and ``c`` are stored; wavelength and frequency are derived.
    """
    k: float
    L: float = 5.0
    c: float = 1.0

    def __post_init__(self):
        if not self.k > 0 or not self.L > 0 or not self.c > 0:
            raise ValueError("k, L and c must be positive")

    @property
    def wavelength(self) -> float:
        return 2.0 * np.pi / self.k

    @property
    def frequency(self) -> float:
        return self.c / self.wavelength


def pml_width_from_lambda(problem: HelmholtzProblem, multiplier: float) -> float:
    if not multiplier > 0:
        raise ValueError("multiplier must be positive")
    return multiplier * 2.0 * np.pi / problem.k
