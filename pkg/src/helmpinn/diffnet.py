"""Sine-activated MLPs with forward-propagated derivative jets.

A jet bundles, for every point, the network output together with its first
derivatives and its pure second derivatives (``d2/dx2``, ``d2/dy2``) with
respect to the two spatial inputs.  Mixed derivatives are never needed by the
stretched Helmholtz operator, so they are not carried.

Parameter layout of the flat vector, layer by layer (input layer first,
output layer last)::

    W_1 (width x 2, row-major), b_1 (width),
    W_2 (width x width),        b_2 (width),
    ...
    W_out (2 x width),          b_out (2)

Hidden layers apply ``sin``; the output layer is affine.  Channel 0 of the
output is the real part of the field and channel 1 the imaginary part.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# jet component order: value, d/dx, d/dy, d2/dx2, d2/dy2
VAL, DX, DY, DXX, DYY = range(5)
N_COMP = 5


@dataclass(frozen=True)
class Architecture:
    hidden_layers: int
    hidden_width: int
    input_dim: int = 2
    output_dim: int = 2
    activation: str = "sine"

    def __post_init__(self):
        if self.input_dim != 2 or self.output_dim != 2:
            raise ValueError("only 2 inputs and 2 outputs are supported")
        if self.hidden_layers < 1 or self.hidden_width < 1:
            raise ValueError("need at least one hidden layer of width >= 1")
        if self.activation != "sine":
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [self.hidden_width] * self.hidden_layers + [self.output_dim]

    @property
    def shapes(self) -> list[tuple[int, int]]:
        """(fan_out, fan_in) of every weight matrix."""
        s = self.layer_sizes
        return [(s[i + 1], s[i]) for i in range(len(s) - 1)]

    @property
    def n_params(self) -> int:
        return sum(o * i + o for o, i in self.shapes)


@dataclass(frozen=True)
class NetworkParams:
    arch: Architecture
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.arch.n_params,):
            raise ValueError(
                f"expected {self.arch.n_params} parameters, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray) -> "NetworkParams":
        return NetworkParams(self.arch, values)

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return unflatten(self.arch, self.values)


@dataclass(frozen=True)
class Jet:
    """Output jet at N points.

    ``data`` has shape (5, N, 2): component (value, dx, dy, dxx, dyy) by
    point by channel (re, im).
    """
    data: np.ndarray

    @property
    def value(self) -> np.ndarray:
        return self.data[VAL]

    @property
    def grad(self) -> np.ndarray:
        """Shape (N, channel, axis)."""
        return np.stack([self.data[DX], self.data[DY]], axis=-1)

    @property
    def hess_diag(self) -> np.ndarray:
        """Shape (N, channel, axis) holding d2/dx2 and d2/dy2."""
        return np.stack([self.data[DXX], self.data[DYY]], axis=-1)

    def __len__(self) -> int:
        return self.data.shape[1]

    @classmethod
    def zeros(cls, n: int) -> "Jet":
        return cls(np.zeros((N_COMP, n, 2)))


def unflatten(arch: Architecture, values: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    layers = []
    pos = 0
    for fan_out, fan_in in arch.shapes:
        w = values[pos:pos + fan_out * fan_in].reshape(fan_out, fan_in)
        pos += fan_out * fan_in
        b = values[pos:pos + fan_out]
        pos += fan_out
        layers.append((w, b))
    return layers


def flatten(layers) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b.ravel()]) for w, b in layers])


def init_params(arch: Architecture, seed: int, omega0: float = 1.0) -> NetworkParams:
    """Sine-network initialisation with zero biases.

    First layer weights are ``omega0 * U(-1/d, 1/d)`` with ``d`` the input
    dimension; later layers use ``U(-sqrt(6/fan_in), sqrt(6/fan_in))``.
    """
    rng = np.random.default_rng(seed)
    layers = []
    for i, (fan_out, fan_in) in enumerate(arch.shapes):
        if i == 0:
            bound = omega0 / fan_in
        else:
            bound = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        layers.append((w, np.zeros(fan_out)))
    return NetworkParams(arch, flatten(layers))


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[-1] != 2:
        raise ValueError("points must have shape (N, 2)")
    return pts


def _forward(params: NetworkParams, points, center=0.0, scale=1.0):
    """Propagate jets; returns the output jet and the per-layer cache."""
    pts = _as_points(points)
    center = np.broadcast_to(np.asarray(center, dtype=np.float64), (2,))
    scale = np.broadcast_to(np.asarray(scale, dtype=np.float64), (2,))
    n = pts.shape[0]
    h = np.zeros((N_COMP, n, 2))
    h[VAL] = (pts - center) / scale
    h[DX, :, 0] = 1.0 / scale[0]
    h[DY, :, 1] = 1.0 / scale[1]

    layers = params.layers()
    cache = []
    for w, b in layers[:-1]:
        a = h @ w.T
        a[VAL] += b
        s, c = np.sin(a[VAL]), np.cos(a[VAL])
        out = np.empty_like(a)
        out[VAL] = s
        out[DX] = c * a[DX]
        out[DY] = c * a[DY]
        out[DXX] = c * a[DXX] - s * a[DX] ** 2
        out[DYY] = c * a[DYY] - s * a[DY] ** 2
        cache.append((h, a, s, c))
        h = out
    w, b = layers[-1]
    y = h @ w.T
    y[VAL] += b
    cache.append((h, None, None, None))
    return y, cache


def forward_jet(params: NetworkParams, points, center=0.0, scale=1.0) -> Jet:
    """Exact value, gradient and diagonal Hessian of the network at ``points``.

    Inputs are mapped to ``(x - center) / scale`` before the first layer;
    derivatives are taken with respect to the unscaled coordinates.
    """
    y, _ = _forward(params, points, center, scale)
    return Jet(y)


def _backward(params: NetworkParams, cache, seed: np.ndarray, per_point: bool):
    """Reverse accumulation through the jet propagation.

    ``seed`` has shape (5, N, 2): adjoint of every output jet entry.  With
    ``per_point`` the result is the (N, P) matrix of per-point parameter
    gradients; otherwise their sum over points, shape (P,).
    """
    layers = params.layers()
    grads = []
    hbar = seed
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        h, a, s, c = cache[li] if li < len(layers) - 1 else cache[-1]
        if li < len(layers) - 1:
            # hbar is the adjoint of this layer's sine output; turn it into abar
            abar = np.empty_like(hbar)
            abar[VAL] = (c * hbar[VAL] - s * (a[DX] * hbar[DX] + a[DY] * hbar[DY])
                         - c * (a[DX] ** 2 * hbar[DXX] + a[DY] ** 2 * hbar[DYY])
                         - s * (a[DXX] * hbar[DXX] + a[DYY] * hbar[DYY]))
            abar[DX] = c * hbar[DX] - 2.0 * s * a[DX] * hbar[DXX]
            abar[DY] = c * hbar[DY] - 2.0 * s * a[DY] * hbar[DYY]
            abar[DXX] = c * hbar[DXX]
            abar[DYY] = c * hbar[DYY]
        else:
            abar = hbar
        if per_point:
            gw = np.zeros((abar.shape[1], abar.shape[2], h.shape[2]))
            for c in range(N_COMP):
                if np.any(abar[c]) and np.any(h[c]):
                    gw += abar[c][:, :, None] * h[c][:, None, :]
            gw = gw.reshape(abar.shape[1], -1)
            gb = abar[VAL]
            grads.append(np.concatenate([gw, gb], axis=1))
        else:
            gw = (abar.reshape(-1, abar.shape[-1]).T @ h.reshape(-1, h.shape[-1])).ravel()
            gb = abar[VAL].sum(axis=0)
            grads.append(np.concatenate([gw, gb]))
        if li > 0:
            hbar = abar @ w
    grads.reverse()
    return np.concatenate(grads, axis=-1)


def residual_param_gradient(params: NetworkParams, residual_fn, points,
                            center=0.0, scale=1.0):
    """Per-point residuals and their exact Jacobian with respect to parameters.

    ``residual_fn(jet, points)`` must return ``(res, sens)`` where ``res`` has
    shape (N, 2) (real and imaginary residual) and ``sens`` has shape
    (N, 2, 5, 2): derivative of residual row ``r`` at point ``n`` with respect
    to jet entry ``(component, channel)``.

    Returns ``res`` (N, 2) and ``jac`` of shape (2N, P) whose rows are ordered
    as ``res.ravel()``, i.e. point-major with real then imaginary.
    """
    pts = _as_points(points)
    y, cache = _forward(params, pts, center, scale)
    res, sens = residual_fn(Jet(y), pts)
    n = pts.shape[0]
    jac = np.empty((n, 2, params.arch.n_params))
    for r in range(2):
        seed = np.transpose(sens[:, r], (1, 0, 2))
        jac[:, r] = _backward(params, cache, seed, per_point=True)
    return res, jac.reshape(2 * n, -1)


def jet_vjp(params: NetworkParams, points, seed: np.ndarray, center=0.0, scale=1.0):
    """Gradient of ``sum(seed * jet.data)`` with respect to the parameters."""
    _, cache = _forward(params, points, center, scale)
    return _backward(params, cache, np.asarray(seed, dtype=np.float64), per_point=False)


def jet_jacobian_seeded(params: NetworkParams, points, seeds: np.ndarray,
                        center=0.0, scale=1.0) -> np.ndarray:
    """Per-point parameter gradients for several seeds in one forward pass.

    ``seeds`` has shape (R, 5, N, 2); the result has shape (R, N, P).
    """
    _, cache = _forward(params, points, center, scale)
    return np.stack([_backward(params, cache, s, per_point=True) for s in seeds])


def jet_and_vjp(params: NetworkParams, points, seed_fn, center=0.0, scale=1.0):
    """Forward jet plus the vector-Jacobian product for a seed built from it.

    ``seed_fn(jet_data)`` returns the (5, N, 2) adjoint; used for losses whose
    adjoint depends on the forward result.
    """
    y, cache = _forward(params, points, center, scale)
    seed = seed_fn(y)
    return y, _backward(params, cache, seed, per_point=False)
