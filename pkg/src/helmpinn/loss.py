"""Sources, collocation sets and the PML physics loss.

The loss is the mean squared modulus of the complex residual,
``L = (1/N) sum_i |D_pml[u](x_i) - g(x_i)|^2``; no boundary term.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .pml import (PmlConfig, apply_coefficients, operator_coefficients,
                  residual_sensitivity)

SOURCE_KINDS = ("gaussian_point", "curriculum_imag")
SAMPLERS = ("uniform_random", "latin_hypercube", "grid")


@dataclass(frozen=True)
class SourceSpec:
    """Gaussian point source ``exp(-k (x^2 + y^2))``.

    ``curriculum_imag`` adds a temporary imaginary part
    ``A sin(kx) sin(ky) exp(-k r^2)`` for epochs before ``switch_epoch``.
    """
    k: float
    kind: str = "gaussian_point"
    switch_epoch: int = 0
    oscillation_amplitude: float = 0.1

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.switch_epoch < 0:
            raise ValueError("switch_epoch must be >= 0")

    def active_curriculum(self, epoch: int) -> bool:
        return self.kind == "curriculum_imag" and epoch < self.switch_epoch


def source(points, spec: SourceSpec, epoch: int = 0) -> np.ndarray:
    """Complex source values at ``points``, shape (N,)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    x, y = pts[:, 0], pts[:, 1]
    envelope = np.exp(-spec.k * (x * x + y * y))
    if spec.active_curriculum(epoch):
        imag = spec.oscillation_amplitude * np.sin(spec.k * x) * np.sin(spec.k * y) * envelope
        return envelope + 1j * imag
    return envelope + 0j


@dataclass(frozen=True)
class CollocationSet:
    points: np.ndarray
    sampler: str
    seed: int

    def __len__(self) -> int:
        return self.points.shape[0]


def sample_collocation(n: int, half_width: float, sampler: str = "uniform_random",
                       seed: int = 0) -> CollocationSet:
    """Fixed training points in ``[-half_width, half_width]^2``.

    ``grid`` uses ``round(sqrt(n))`` nodes per axis, so it yields a square
    number of points.
    """
    if sampler == "uniform_random":
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-half_width, half_width, size=(n, 2))
    elif sampler == "latin_hypercube":
        unit = qmc.LatinHypercube(d=2, seed=seed).random(n)
        pts = (2.0 * unit - 1.0) * half_width
    elif sampler == "grid":
        m = max(int(round(np.sqrt(n))), 2)
        t = np.linspace(-half_width, half_width, m)
        xx, yy = np.meshgrid(t, t, indexing="xy")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
    else:
        raise ValueError(f"unknown sampler {sampler!r}")
    return CollocationSet(pts, sampler, seed)


class PmlLoss:
    """Physics loss of a model on a fixed collocation set.

    Operator coefficients depend only on the points, so they are computed
    once.  Models must provide ``jet``, ``jet_and_vjp``, ``residual_jacobian``
    and ``values``/``with_values`` (``PinnModel`` and ``FbpinnModel`` do).
    """

    def __init__(self, colloc: CollocationSet, spec: SourceSpec, cfg: PmlConfig):
        self.colloc = colloc
        self.spec = spec
        self.cfg = cfg
        self.points = colloc.points
        self.coef = operator_coefficients(self.points, cfg)
        self.sens = residual_sensitivity(self.coef)
        self._sources = {}

    def __len__(self) -> int:
        return len(self.colloc)

    def source_values(self, epoch: int) -> np.ndarray:
        key = self.spec.active_curriculum(epoch)
        if key not in self._sources:
            self._sources[key] = source(self.points, self.spec, epoch)
        return self._sources[key]

    def residuals(self, model, epoch: int = 0) -> np.ndarray:
        r = apply_coefficients(self.coef, model.jet(self.points).data) - self.source_values(epoch)
        return np.stack([r.real, r.imag], axis=-1)

    def value(self, model, epoch: int = 0) -> float:
        r = self.residuals(model, epoch)
        return float(np.sum(r * r) / len(self))

    def value_and_grad(self, model, epoch: int = 0):
        g = self.source_values(epoch)
        n = len(self)
        box = {}

        def seed_fn(jet_data):
            r = apply_coefficients(self.coef, jet_data) - g
            res = np.stack([r.real, r.imag], axis=-1)
            box["res"] = res
            return np.einsum("nr,nrcq->cnq", res, self.sens) * (2.0 / n)

        _, grad = model.jet_and_vjp(self.points, seed_fn)
        res = box["res"]
        return float(np.sum(res * res) / n), grad

    def residual_fn(self, epoch: int = 0):
        g = self.source_values(epoch)

        def fn(jet, points):
            r = apply_coefficients(self.coef, jet.data) - g
            return np.stack([r.real, r.imag], axis=-1), self.sens

        return fn

    def residuals_and_jacobian(self, model, epoch: int = 0):
        """Stacked residual vector (2N,) and Jacobian (2N, P).

        ``grad(loss) == (2/N) J^T r``.
        """
        res, jac = model.residual_jacobian(self.points, self.residual_fn(epoch))
        return res.ravel(), jac


def loss_value(model, colloc: CollocationSet, spec: SourceSpec, cfg: PmlConfig,
               epoch: int = 0) -> float:
    return PmlLoss(colloc, spec, cfg).value(model, epoch)


def loss_residuals_and_jacobian(model, colloc: CollocationSet, spec: SourceSpec,
                                cfg: PmlConfig, epoch: int = 0):
    return PmlLoss(colloc, spec, cfg).residuals_and_jacobian(model, epoch)
