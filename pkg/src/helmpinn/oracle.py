"""Finite-difference reference solver for the stretched Helmholtz problem.

Five-point conservative stencil on a uniform grid over the computational
square, ``d/dx(Dx du/dx)`` discretised with stretch factors at half nodes and
multiplied by the nodal ``Dx``.  The outer boundary is homogeneous Dirichlet.

Grid fields are stored as arrays of shape (ny, nx), indexed ``[iy, ix]``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import splu
from scipy.special import hankel1, j0

from .pml import PmlConfig, stretch


class SingularSystemError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("grid needs at least 3 nodes per axis")
        if not np.isclose(self.hx, self.hy, rtol=1e-12):
            raise ValueError("grid spacing must be equal along both axes")

    @classmethod
    def square(cls, n: int, half_width: float) -> "Grid":
        return cls(n, n, -half_width, half_width, -half_width, half_width)

    @property
    def hx(self) -> float:
        return (self.x1 - self.x0) / (self.nx - 1)

    @property
    def hy(self) -> float:
        return (self.y1 - self.y0) / (self.ny - 1)

    @property
    def h(self) -> float:
        return self.hx

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x0, self.x1, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y0, self.y1, self.ny)

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="xy")


def default_grid_points(cfg: PmlConfig, points_per_wavelength: float = 60.0,
                        minimum: int = 256) -> int:
    width = 2.0 * cfg.half_width
    wavelength = 2.0 * np.pi / cfg.k
    return max(minimum, int(np.ceil(points_per_wavelength * width / wavelength)))


@dataclass(frozen=True)
class ComplexGridField:
    grid: Grid
    re: np.ndarray
    im: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return self.re + 1j * self.im

    @classmethod
    def from_complex(cls, grid: Grid, u: np.ndarray) -> "ComplexGridField":
        u = np.asarray(u)
        return cls(grid, np.ascontiguousarray(u.real), np.ascontiguousarray(u.imag))


@dataclass(frozen=True)
class LinearSystem:
    """Interior unknowns ordered x-fastest (row-major by y then x)."""
    grid: Grid
    matrix: sp.csc_matrix
    rhs: np.ndarray


def _second_difference(n: int, t: np.ndarray, h: float, cfg: PmlConfig) -> sp.csr_matrix:
    """1D ``-D d/dt (D d/dt)`` on the n-2 interior nodes of ``t``."""
    d_node, _ = stretch(t[1:-1], cfg)
    d_half, _ = stretch(0.5 * (t[:-1] + t[1:]), cfg)
    left = d_half[:-1]
    right = d_half[1:]
    main = d_node * (left + right) / h ** 2
    lower = -d_node[1:] * left[1:] / h ** 2
    upper = -d_node[:-1] * right[:-1] / h ** 2
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr")


def assemble(cfg: PmlConfig, grid: Grid, source) -> LinearSystem:
    """Sparse complex system for the interior nodes.

    ``source`` is either a callable mapping an (M, 2) point array to complex
    values or a complex array of shape (ny, nx) on the grid nodes.
    """
    ax = _second_difference(grid.nx, grid.x, grid.hx, cfg)
    ay = _second_difference(grid.ny, grid.y, grid.hy, cfg)
    ix = sp.identity(grid.nx - 2, format="csr")
    iy = sp.identity(grid.ny - 2, format="csr")
    n = (grid.nx - 2) * (grid.ny - 2)
    a = sp.kron(iy, ax) + sp.kron(ay, ix) - cfg.k ** 2 * sp.identity(n)
    if callable(source):
        xx, yy = grid.mesh()
        inner = np.column_stack([xx[1:-1, 1:-1].ravel(), yy[1:-1, 1:-1].ravel()])
        b = np.asarray(source(inner), dtype=np.complex128)
    else:
        b = np.asarray(source, dtype=np.complex128)[1:-1, 1:-1].ravel()
    return LinearSystem(grid, a.tocsc().astype(np.complex128), b)


def solve(system: LinearSystem, tol: float = 1e-10) -> ComplexGridField:
    """Sparse LU solve; boundary nodes are zero."""
    grid = system.grid
    try:
        lu = splu(system.matrix)
        u = lu.solve(system.rhs)
    except RuntimeError as exc:
        raise SingularSystemError(
            "Helmholtz matrix is singular; the wavenumber probably coincides "
            "with an eigenfrequency of the truncated domain") from exc
    if not np.all(np.isfinite(u)):
        raise SingularSystemError("non-finite solution; check for an eigenfrequency")
    bnorm = np.linalg.norm(system.rhs)
    if bnorm > 0:
        rel = np.linalg.norm(system.matrix @ u - system.rhs) / bnorm
        if rel > tol:
            raise SingularSystemError(
                f"solve residual {rel:.2e} exceeds {tol:.0e}; the system is nearly "
                "singular, is k close to an eigenfrequency of the truncated domain?")
    full = np.zeros((grid.ny, grid.nx), dtype=np.complex128)
    full[1:-1, 1:-1] = u.reshape(grid.ny - 2, grid.nx - 2)
    return ComplexGridField.from_complex(grid, full)


def relative_residual(system: LinearSystem, field: ComplexGridField) -> float:
    u = field.values[1:-1, 1:-1].ravel()
    return float(np.linalg.norm(system.matrix @ u - system.rhs) / np.linalg.norm(system.rhs))


def reference_solution(cfg: PmlConfig, source, n: int | None = None) -> ComplexGridField:
    """Assemble and solve on the default (or given) square grid."""
    grid = Grid.square(n or default_grid_points(cfg), cfg.half_width)
    return solve(assemble(cfg, grid, source))


def interpolate(field: ComplexGridField, points) -> np.ndarray:
    """Bilinear interpolation; raises ``ValueError`` outside the grid."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    g = field.grid
    interp = RegularGridInterpolator((g.y, g.x), field.values, method="linear",
                                     bounds_error=True)
    return interp(pts[:, ::-1])


def write_field_csv(path, x, y, values) -> None:
    """CSV with header ``x,y,re,im``; one row per point."""
    values = np.asarray(values)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "re", "im"])
        for row in zip(np.ravel(x), np.ravel(y), np.ravel(values.real), np.ravel(values.imag)):
            w.writerow([repr(float(v)) for v in row])


def export_field(field: ComplexGridField, path) -> None:
    xx, yy = field.grid.mesh()
    write_field_csv(path, xx, yy, field.values)


def read_field_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2] + 1j * data[:, 3]


def load_field(path) -> ComplexGridField:
    """Inverse of ``export_field`` for fields on a uniform square grid."""
    x, y, u = read_field_csv(path)
    xs, ys = np.unique(x), np.unique(y)
    grid = Grid(len(xs), len(ys), xs[0], xs[-1], ys[0], ys[-1])
    return ComplexGridField.from_complex(grid, u.reshape(len(ys), len(xs)))


class SplineFieldModel:
    """Bicubic spline of a grid field exposing the model ``jet`` interface.

    Lets a reference solution be pushed through the network loss.
    """

    def __init__(self, field: ComplexGridField):
        from scipy.interpolate import RectBivariateSpline

        g = field.grid
        self.field = field
        self._re = RectBivariateSpline(g.x, g.y, field.re.T, kx=3, ky=3)
        self._im = RectBivariateSpline(g.x, g.y, field.im.T, kx=3, ky=3)

    def jet(self, points):
        from .diffnet import Jet

        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        x, y = pts[:, 0], pts[:, 1]
        orders = [(0, 0), (1, 0), (0, 1), (2, 0), (0, 2)]
        data = np.empty((5, len(pts), 2))
        for c, (ox, oy) in enumerate(orders):
            data[c, :, 0] = self._re.ev(x, y, dx=ox, dy=oy)
            data[c, :, 1] = self._im.ev(x, y, dx=ox, dy=oy)
        return Jet(data)


def free_space_gaussian(points, k: float, n_quad: int = 40001) -> np.ndarray:
    """Unbounded-domain solution for the source ``exp(-k r^2)``.

    The source is radial, so Graf's addition theorem reduces the Green's
    function convolution to one radial integral::

        u(r) = (i pi / 2) [H0(kr) int_0^r g J0(ks) s ds + J0(kr) int_r^inf g H0(ks) s ds]

    with ``H0`` the Hankel function of the first kind.  The result is
    conjugated to match the wave that the stretching in ``pml`` absorbs.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    r = np.hypot(pts[:, 0], pts[:, 1])
    s = np.linspace(0.0, max(12.0 / np.sqrt(k), r.max()), n_quad)
    g = np.exp(-k * s * s)
    inner_f = g * s * j0(k * s)
    outer_f = np.zeros(s.shape, dtype=np.complex128)
    outer_f[1:] = g[1:] * s[1:] * hankel1(0, k * s[1:])  # s log s -> 0 at the origin
    inner = cumulative_trapezoid(inner_f, s, initial=0.0)
    outer_cum = cumulative_trapezoid(outer_f, s, initial=0.0)
    outer = outer_cum[-1] - outer_cum
    a = np.interp(r, s, inner)
    b = np.interp(r, s, outer.real) + 1j * np.interp(r, s, outer.imag)
    h = np.zeros(r.shape, dtype=np.complex128)
    pos = r > 0
    h[pos] = hankel1(0, k * r[pos])
    u = 0.5j * np.pi * (a * h + b * j0(k * r))
    return np.conj(u)
