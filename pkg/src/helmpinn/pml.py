"""Perfectly matched layer: absorption profile, stretching and residual.

Complex quantities that depend only on geometry (stretch factors, operator
coefficients) are numpy complex arrays.  Network fields and residuals stay
real with an explicit (re, im) trailing axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffnet import DX, DXX, DY, DYY, N_COMP, VAL, Jet


@dataclass(frozen=True)
class PmlConfig:
    L: float
    L_pml: float
    sigma0: float
    k: float

    def __post_init__(self):
        if not (self.L > 0 and self.L_pml > 0 and self.sigma0 >= 0 and self.k > 0):
            raise ValueError(f"invalid PML configuration {self}")

    @property
    def half_width(self) -> float:
        """Half-width of the computational square, physical domain plus layer."""
        return self.L + self.L_pml

    @property
    def extent(self) -> tuple[float, float]:
        return (-self.half_width, self.half_width)


def sigma(t, cfg: PmlConfig):
    """Quadratic absorption profile, zero on ``[-L, L]``."""
    t = np.asarray(t, dtype=np.float64)
    depth = np.maximum(np.abs(t) - cfg.L, 0.0) / cfg.L_pml
    return cfg.sigma0 * cfg.k * depth ** 2


def sigma_prime(t, cfg: PmlConfig):
    t = np.asarray(t, dtype=np.float64)
    depth = np.maximum(np.abs(t) - cfg.L, 0.0) / cfg.L_pml
    return 2.0 * cfg.sigma0 * cfg.k * depth * np.sign(t) / cfg.L_pml


def stretch(t, cfg: PmlConfig):
    """Stretch factor ``D = 1 / (1 - i sigma/k)`` and its derivative ``dD/dt``."""
    q = 1.0 - 1j * sigma(t, cfg) / cfg.k
    d = 1.0 / q
    # dD/dt = -q'/q^2 with q' = -i sigma'/k
    dd = 1j * sigma_prime(t, cfg) / cfg.k * d * d
    return d, dd


def operator_coefficients(points, cfg: PmlConfig) -> np.ndarray:
    """Complex coefficients of the stretched operator on the jet components.

    Returns shape (5, N): the operator applied to ``u`` equals
    ``sum_c coef[c] * u_c`` with ``u_c`` the jet components
    (value, dx, dy, dxx, dyy).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    dx, dxp = stretch(pts[:, 0], cfg)
    dy, dyp = stretch(pts[:, 1], cfg)
    coef = np.empty((N_COMP, pts.shape[0]), dtype=np.complex128)
    coef[VAL] = -cfg.k ** 2
    coef[DX] = -dx * dxp
    coef[DY] = -dy * dyp
    coef[DXX] = -dx * dx
    coef[DYY] = -dy * dy
    return coef


def residual_sensitivity(coef: np.ndarray) -> np.ndarray:
    """Real (N, 2, 5, 2) derivative of (re, im) residual w.r.t. jet entries.

    For ``C = a + ib`` acting on ``u = ur + i ui``:
    ``re = a ur - b ui`` and ``im = b ur + a ui``.
    """
    a = coef.real.T
    b = coef.imag.T
    sens = np.empty((coef.shape[1], 2, N_COMP, 2))
    sens[:, 0, :, 0] = a
    sens[:, 0, :, 1] = -b
    sens[:, 1, :, 0] = b
    sens[:, 1, :, 1] = a
    return sens


def apply_coefficients(coef: np.ndarray, jet_data: np.ndarray) -> np.ndarray:
    """Operator applied to a jet, as a complex array of shape (N,)."""
    u = jet_data[..., 0] + 1j * jet_data[..., 1]
    return np.sum(coef * u, axis=0)


def pml_residual(jet: Jet, points, source, cfg: PmlConfig) -> np.ndarray:
    """Stretched Helmholtz residual ``D_pml[u] - g`` at each point.

    Expanded by the product rule as
    ``-Dx (Dx' u_x + Dx u_xx) - Dy (Dy' u_y + Dy u_yy) - k^2 u - g``.
    ``source`` is complex with shape (N,) (or a scalar); returns (N, 2).
    """
    coef = operator_coefficients(points, cfg)
    r = apply_coefficients(coef, jet.data) - source
    return np.stack([r.real, r.imag], axis=-1)


def helmholtz_residual(jet: Jet, source, k: float) -> np.ndarray:
    """Unstretched residual ``-laplace(u) - k^2 u - g``, shape (N, 2)."""
    d = jet.data
    u = d[VAL, :, 0] + 1j * d[VAL, :, 1]
    lap = (d[DXX, :, 0] + d[DYY, :, 0]) + 1j * (d[DXX, :, 1] + d[DYY, :, 1])
    r = -lap - k ** 2 * u - source
    return np.stack([r.real, r.imag], axis=-1)
