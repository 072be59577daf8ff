"""Overlapping subdomains, cosine partition of unity and the FBPINN ansatz."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffnet import (DX, DXX, DY, DYY, N_COMP, VAL, Architecture, Jet,
                      NetworkParams, _as_points, _backward, _forward, init_params)


@dataclass(frozen=True)
class Decomposition:
    """Rectangular subdomains on a regular ``grid`` of the square ``[-H, H]^2``.

    ``half_widths[j] = overlap * deltas / 2``; subdomain ``j`` lives in the box
    ``|x_n - centers[j, n]| <= half_widths[j, n]``.
    """
    grid: tuple[int, int]
    centers: np.ndarray
    deltas: np.ndarray
    overlap: float
    half_widths: np.ndarray

    def __len__(self) -> int:
        return self.centers.shape[0]

    def support_mask(self, points) -> np.ndarray:
        """Boolean (J, N): point strictly inside the open support of window j."""
        pts = _as_points(points)
        d = np.abs(pts[None, :, :] - self.centers[:, None, :])
        return np.all(d < self.half_widths[:, None, :], axis=-1)


def grid_decomposition(half_width: float, grid=(2, 2), overlap: float = 1.5) -> Decomposition:
    """Uniform ``grid`` of subdomains covering ``[-half_width, half_width]^2``."""
    if not overlap > 1:
        raise ValueError("overlap ratio must exceed 1 for subdomains to overlap")
    nx, ny = grid
    deltas = np.array([2.0 * half_width / nx, 2.0 * half_width / ny])
    cx = -half_width + deltas[0] * (np.arange(nx) + 0.5)
    cy = -half_width + deltas[1] * (np.arange(ny) + 0.5)
    centers = np.array([(x, y) for y in cy for x in cx], dtype=np.float64)
    half = np.tile(overlap * deltas / 2.0, (len(centers), 1))
    return Decomposition((nx, ny), centers, deltas, float(overlap), half)


def _axis_factor(t, mu, psi):
    """``(1 + cos(pi (t - mu)/psi))^2`` with its first two derivatives, clamped."""
    theta = np.pi * (t - mu) / psi
    inside = np.abs(t - mu) < psi
    c, s = np.cos(theta), np.sin(theta)
    w = np.pi / psi
    f = (1.0 + c) ** 2
    fp = -2.0 * (1.0 + c) * s * w
    fpp = 2.0 * w * w * (s * s - (1.0 + c) * c)
    return (np.where(inside, f, 0.0), np.where(inside, fp, 0.0),
            np.where(inside, fpp, 0.0))


def raw_window_jets(points, dec: Decomposition) -> np.ndarray:
    """Unnormalised windows and derivatives, shape (J, 5, N)."""
    pts = _as_points(points)
    out = np.empty((len(dec), N_COMP, pts.shape[0]))
    for j in range(len(dec)):
        fx, fxp, fxpp = _axis_factor(pts[:, 0], dec.centers[j, 0], dec.half_widths[j, 0])
        fy, fyp, fypp = _axis_factor(pts[:, 1], dec.centers[j, 1], dec.half_widths[j, 1])
        out[j, VAL] = fx * fy
        out[j, DX] = fxp * fy
        out[j, DY] = fx * fyp
        out[j, DXX] = fxpp * fy
        out[j, DYY] = fx * fypp
    return out


def window_raw(points, j: int, dec: Decomposition) -> np.ndarray:
    return raw_window_jets(points, dec)[j, VAL]


def window_jets(points, dec: Decomposition) -> np.ndarray:
    """Normalised windows ``phi_j = raw_j / sum_m raw_m`` with derivatives, (J, 5, N)."""
    raw = raw_window_jets(points, dec)
    total = raw.sum(axis=0)
    s, sx, sy, sxx, syy = total
    if np.any(s <= 0.0):
        bad = _as_points(points)[s <= 0.0][0]
        raise ValueError(f"no subdomain window covers point {tuple(bad)}")
    out = np.empty_like(raw)
    p = raw[:, VAL]
    out[:, VAL] = p / s
    for d, dd, sd, sdd in ((DX, DXX, sx, sxx), (DY, DYY, sy, syy)):
        pd, pdd = raw[:, d], raw[:, dd]
        out[:, d] = (pd * s - p * sd) / s ** 2
        out[:, dd] = (pdd / s - 2.0 * pd * sd / s ** 2 - p * sdd / s ** 2
                      + 2.0 * p * sd ** 2 / s ** 3)
    return out


def window(points, j: int, dec: Decomposition) -> np.ndarray:
    return window_jets(points, dec)[j, VAL]


def _product_jet(phi: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Jet of ``phi * v`` for a scalar window jet (5, n) and net jet (5, n, 2)."""
    out = np.empty_like(v)
    ph = phi[:, :, None]
    out[VAL] = ph[VAL] * v[VAL]
    for d, dd in ((DX, DXX), (DY, DYY)):
        out[d] = ph[d] * v[VAL] + ph[VAL] * v[d]
        out[dd] = ph[dd] * v[VAL] + 2.0 * ph[d] * v[d] + ph[VAL] * v[dd]
    return out


def _product_seed(phi: np.ndarray, ubar: np.ndarray) -> np.ndarray:
    """Adjoint of ``_product_jet`` with respect to the net jet."""
    ph = phi[:, :, None]
    vbar = np.empty_like(ubar)
    vbar[VAL] = (ph[VAL] * ubar[VAL] + ph[DX] * ubar[DX] + ph[DY] * ubar[DY]
                 + ph[DXX] * ubar[DXX] + ph[DYY] * ubar[DYY])
    vbar[DX] = ph[VAL] * ubar[DX] + 2.0 * ph[DX] * ubar[DXX]
    vbar[DY] = ph[VAL] * ubar[DY] + 2.0 * ph[DY] * ubar[DYY]
    vbar[DXX] = ph[VAL] * ubar[DXX]
    vbar[DYY] = ph[VAL] * ubar[DYY]
    return vbar


@dataclass(frozen=True)
class FbpinnModel:
    """Window-weighted sum of one sine network per subdomain.

    With ``normalize_inputs`` each network sees its support box mapped onto
    ``[-1, 1]^2``.
    """
    decomposition: Decomposition
    nets: tuple[NetworkParams, ...]
    normalize_inputs: bool = True

    def __post_init__(self):
        if len(self.nets) != len(self.decomposition):
            raise ValueError("need exactly one network per subdomain")
        object.__setattr__(self, "nets", tuple(self.nets))

    @property
    def arch(self) -> Architecture:
        return self.nets[0].arch

    @property
    def n_params(self) -> int:
        return sum(n.arch.n_params for n in self.nets)

    @property
    def values(self) -> np.ndarray:
        return np.concatenate([n.values for n in self.nets])

    def with_values(self, values) -> "FbpinnModel":
        values = np.asarray(values, dtype=np.float64)
        nets, pos = [], 0
        for n in self.nets:
            nets.append(n.with_values(values[pos:pos + n.arch.n_params]))
            pos += n.arch.n_params
        return FbpinnModel(self.decomposition, tuple(nets), self.normalize_inputs)

    def _affine(self, j):
        if self.normalize_inputs:
            return self.decomposition.centers[j], self.decomposition.half_widths[j]
        return 0.0, 1.0

    def _offsets(self):
        return np.cumsum([0] + [n.arch.n_params for n in self.nets])

    def _local(self, points):
        pts = _as_points(points)
        phi = window_jets(pts, self.decomposition)
        mask = self.decomposition.support_mask(pts)
        return pts, phi, mask

    def jet(self, points) -> Jet:
        pts, phi, mask = self._local(points)
        out = np.zeros((N_COMP, pts.shape[0], 2))
        for j, net in enumerate(self.nets):
            idx = np.flatnonzero(mask[j])
            if idx.size == 0:
                continue
            c, s = self._affine(j)
            v, _ = _forward(net, pts[idx], c, s)
            out[:, idx] += _product_jet(phi[j][:, idx], v)
        return Jet(out)

    def jet_and_vjp(self, points, seed_fn):
        """Ansatz jet and parameter gradient of ``sum(seed_fn(jet) * jet)``."""
        pts, phi, mask = self._local(points)
        out = np.zeros((N_COMP, pts.shape[0], 2))
        caches = []
        for j, net in enumerate(self.nets):
            idx = np.flatnonzero(mask[j])
            c, s = self._affine(j)
            v, cache = _forward(net, pts[idx], c, s)
            out[:, idx] += _product_jet(phi[j][:, idx], v)
            caches.append((idx, cache))
        ubar = seed_fn(out)
        grads = []
        for j, net in enumerate(self.nets):
            idx, cache = caches[j]
            if idx.size == 0:
                grads.append(np.zeros(net.arch.n_params))
                continue
            vbar = _product_seed(phi[j][:, idx], ubar[:, idx])
            grads.append(_backward(net, cache, vbar, per_point=False))
        return out, np.concatenate(grads)

    def residual_jacobian(self, points, residual_fn):
        """Residuals (N, 2) and their (2N, P) parameter Jacobian."""
        pts, phi, mask = self._local(points)
        n = pts.shape[0]
        out = np.zeros((N_COMP, n, 2))
        caches = []
        for j, net in enumerate(self.nets):
            idx = np.flatnonzero(mask[j])
            c, s = self._affine(j)
            v, cache = _forward(net, pts[idx], c, s)
            out[:, idx] += _product_jet(phi[j][:, idx], v)
            caches.append((idx, cache))
        res, sens = residual_fn(Jet(out), pts)
        offsets = self._offsets()
        jac = np.zeros((n, 2, self.n_params))
        for j, net in enumerate(self.nets):
            idx, cache = caches[j]
            if idx.size == 0:
                continue
            for r in range(2):
                ubar = np.transpose(sens[idx, r], (1, 0, 2))
                vbar = _product_seed(phi[j][:, idx], ubar)
                jac[idx, r, offsets[j]:offsets[j + 1]] = _backward(net, cache, vbar, per_point=True)
        return res, jac.reshape(2 * n, -1)


def init_fbpinn(decomposition: Decomposition, arch: Architecture, seed: int,
                omega0: float = 1.0, normalize_inputs: bool = True) -> FbpinnModel:
    seeds = np.random.SeedSequence(seed).generate_state(len(decomposition))
    nets = tuple(init_params(arch, int(s), omega0) for s in seeds)
    return FbpinnModel(decomposition, nets, normalize_inputs)


def fbpinn_jet(model: FbpinnModel, points) -> Jet:
    return model.jet(points)
