"""Single global network model with the same interface as ``FbpinnModel``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffnet import (Architecture, Jet, NetworkParams, _as_points, _backward,
                      _forward, init_params)


@dataclass(frozen=True)
class PinnModel:
    """One sine network over the whole computational square ``[-H, H]^2``.

    With ``normalize_inputs`` the network sees ``x / H``.
    """
    net: NetworkParams
    half_width: float
    normalize_inputs: bool = True

    @property
    def arch(self) -> Architecture:
        return self.net.arch

    @property
    def n_params(self) -> int:
        return self.net.arch.n_params

    @property
    def values(self) -> np.ndarray:
        return self.net.values

    def with_values(self, values) -> "PinnModel":
        return PinnModel(self.net.with_values(values), self.half_width, self.normalize_inputs)

    @property
    def _scale(self) -> float:
        return self.half_width if self.normalize_inputs else 1.0

    def jet(self, points) -> Jet:
        y, _ = _forward(self.net, points, 0.0, self._scale)
        return Jet(y)

    def jet_and_vjp(self, points, seed_fn):
        y, cache = _forward(self.net, points, 0.0, self._scale)
        return y, _backward(self.net, cache, seed_fn(y), per_point=False)

    def residual_jacobian(self, points, residual_fn):
        pts = _as_points(points)
        y, cache = _forward(self.net, pts, 0.0, self._scale)
        res, sens = residual_fn(Jet(y), pts)
        n = pts.shape[0]
        jac = np.empty((n, 2, self.n_params))
        for r in range(2):
            jac[:, r] = _backward(self.net, cache, np.transpose(sens[:, r], (1, 0, 2)),
                                  per_point=True)
        return res, jac.reshape(2 * n, -1)


def init_pinn(arch: Architecture, half_width: float, seed: int, omega0: float = 1.0,
              normalize_inputs: bool = True) -> PinnModel:
    return PinnModel(init_params(arch, seed, omega0), half_width, normalize_inputs)
