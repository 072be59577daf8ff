"""Property checks used by the acceptance suite and ``helmpinn check``.

Each check returns a :class:`CheckResult` holding the measured quantity and
the threshold it is compared against.  Oracles here are independent of the
code they test: finite differences of plain function values, closed-form
manufactured solutions, dense least-squares solves.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .decomposition import grid_decomposition, raw_window_jets, window_jets
from .diffnet import DX, DXX, DY, DYY, VAL, Architecture, Jet, forward_jet, init_params
from .models import PinnModel
from .optimizers import engd_step
from .oracle import Grid, assemble, relative_residual, solve
from .pml import PmlConfig, helmholtz_residual, pml_residual


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    seconds: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.name}: {self.value:.3e} (threshold {self.threshold:.1e}, "
                f"{self.seconds:.1f}s) {self.detail}").rstrip()


def _rel(a, b) -> float:
    scale = np.max(np.abs(b))
    return float(np.max(np.abs(a - b)) / scale) if scale > 0 else float(np.max(np.abs(a)))


def fd_jet(value_fn, points, h: float = 1e-4, order: int = 2) -> np.ndarray:
    """Central-difference estimates of (dx, dy, dxx, dyy) of ``value_fn``.

    ``order=4`` uses the five-point stencils, which tolerate a larger ``h``
    and so lose fewer digits to cancellation in the second derivative.
    """
    out = []
    for e in (np.array([h, 0.0]), np.array([0.0, h])):
        u0 = value_fn(points)
        up, um = value_fn(points + e), value_fn(points - e)
        if order == 2:
            out.append(((up - um) / (2 * h), (up - 2 * u0 + um) / h ** 2))
        else:
            up2, um2 = value_fn(points + 2 * e), value_fn(points - 2 * e)
            d1 = (-up2 + 8 * up - 8 * um + um2) / (12 * h)
            d2 = (-up2 + 16 * up - 30 * u0 + 16 * um - um2) / (12 * h ** 2)
            out.append((d1, d2))
    (dx, dxx), (dy, dyy) = out
    return np.stack([dx, dy, dxx, dyy])


def check_derivatives(n_nets: int = 20, n_points: int = 50, seed: int = 0,
                      jet_tol: float = 1e-6, jac_tol: float = 1e-5) -> list[CheckResult]:
    """Jets and parameter Jacobians of random networks against finite differences.

    Jacobians are those of the stretched Helmholtz residual at points spread
    over the physical domain and the layer.
    """
    from .loss import CollocationSet, PmlLoss, SourceSpec

    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst_jet = 0.0
    worst_jac = 0.0
    cfg = PmlConfig(L=1.0, L_pml=0.5, sigma0=2.0, k=2.0)
    for i in range(n_nets):
        arch = Architecture(int(rng.integers(1, 4)), int(rng.integers(4, 33)))
        net = init_params(arch, int(rng.integers(2 ** 31)), omega0=float(rng.uniform(1, 3)))
        # nonzero biases so the check does not rely on the zero-bias layout
        net = net.with_values(net.values + 0.1 * rng.standard_normal(arch.n_params))
        pts = rng.uniform(-1.5, 1.5, size=(n_points, 2))
        jet = forward_jet(net, pts)
        fd = fd_jet(lambda q: forward_jet(net, q).value, pts)
        for comp, idx in zip((DX, DY, DXX, DYY), range(4)):
            worst_jet = max(worst_jet, _rel(jet.data[comp], fd[idx]))

        model = PinnModel(net, 1.0, normalize_inputs=False)
        loss = PmlLoss(CollocationSet(pts, "given", 0), SourceSpec(cfg.k), cfg)
        r, jac = loss.residuals_and_jacobian(model)
        x0 = net.values
        eps = 1e-6
        cols = np.arange(arch.n_params)
        if cols.size > 400:
            cols = np.sort(rng.choice(cols, 400, replace=False))
        fdj = np.empty((r.size, cols.size))
        for c, p in enumerate(cols):
            d = np.zeros_like(x0)
            d[p] = eps
            rp = loss.residuals(model.with_values(x0 + d)).ravel()
            rm = loss.residuals(model.with_values(x0 - d)).ravel()
            fdj[:, c] = (rp - rm) / (2 * eps)
        worst_jac = max(worst_jac, _rel(jac[:, cols], fdj))
    dt = time.perf_counter() - t0
    return [
        CheckResult("jet derivatives vs finite differences", worst_jet < jet_tol, worst_jet,
                    jet_tol, dt, f"{n_nets} nets x {n_points} points"),
        CheckResult("parameter Jacobian vs finite differences", worst_jac < jac_tol, worst_jac,
                    jac_tol, dt),
    ]


def check_partition_of_unity(n_points: int = 10_000, seed: int = 0,
                             tol: float = 1e-12) -> list[CheckResult]:
    t0 = time.perf_counter()
    half = 5.0 + 2.0
    dec = grid_decomposition(half, (2, 2), 1.5)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-half, half, size=(n_points, 2))
    phi = window_jets(pts, dec)
    pou = float(np.max(np.abs(phi[:, VAL].sum(axis=0) - 1.0)))

    # pairs straddling each support edge: raw window and slope vanish on both sides
    delta = 1e-6
    worst_edge = 0.0
    outside_nonzero = 0
    for j in range(len(dec)):
        mu, psi = dec.centers[j], dec.half_widths[j]
        for axis in range(2):
            for sgn in (-1.0, 1.0):
                other = rng.uniform(mu[1 - axis] - 0.5 * psi[1 - axis],
                                    mu[1 - axis] + 0.5 * psi[1 - axis], 16)
                edge = mu[axis] + sgn * psi[axis]
                inner = np.empty((16, 2))
                outer = np.empty((16, 2))
                inner[:, axis] = edge - sgn * delta
                outer[:, axis] = edge + sgn * delta
                inner[:, 1 - axis] = other
                outer[:, 1 - axis] = other
                raw_in = raw_window_jets(inner, dec)[j]
                raw_out = raw_window_jets(outer, dec)[j]
                outside_nonzero += int(np.count_nonzero(raw_out))
                worst_edge = max(worst_edge, float(np.max(np.abs(raw_in[VAL]))),
                                 float(np.max(np.abs(raw_in[[DX, DY]]))))
    # raw value ~ delta^4 and slope ~ delta^3 next to the edge
    edge_tol = 1e-12
    dt = time.perf_counter() - t0
    return [
        CheckResult("partition of unity", pou < tol, pou, tol, dt, f"{n_points} points"),
        CheckResult("window continuity at support edges", worst_edge < edge_tol and
                    outside_nonzero == 0, worst_edge, edge_tol, dt,
                    f"{outside_nonzero} nonzero values outside supports"),
    ]


def _manufactured_jets(pts):
    """Analytic jets of three complex test fields, each (5, N, 2)."""
    x, y = pts[:, 0], pts[:, 1]
    out = []
    # u = sin(x) sin(y)
    s, c = np.sin, np.cos
    re = np.stack([s(x) * s(y), c(x) * s(y), s(x) * c(y), -s(x) * s(y), -s(x) * s(y)])
    out.append(np.stack([re, np.zeros_like(re)], axis=-1))
    # u = x^2 + i y^2
    z = np.zeros_like(x)
    re = np.stack([x * x, 2 * x, z, 2 + z, z])
    im = np.stack([y * y, z, 2 * y, z, 2 + z])
    out.append(np.stack([re, im], axis=-1))
    # u = cos(ax) sin(by) + i sin(ax) cos(by)
    a, b = 1.7, 0.6
    re = np.stack([c(a * x) * s(b * y), -a * s(a * x) * s(b * y), b * c(a * x) * c(b * y),
                   -a * a * c(a * x) * s(b * y), -b * b * c(a * x) * s(b * y)])
    im = np.stack([s(a * x) * c(b * y), a * c(a * x) * c(b * y), -b * s(a * x) * s(b * y),
                   -a * a * s(a * x) * c(b * y), -b * b * s(a * x) * c(b * y)])
    out.append(np.stack([re, im], axis=-1))
    return out


def check_pml_reduction(n_points: int = 2000, seed: int = 0, tol: float = 1e-12) -> list[CheckResult]:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    cfg = PmlConfig(L=2.0, L_pml=1.0, sigma0=0.0, k=1.3)
    pts = rng.uniform(-3.0, 3.0, size=(n_points, 2))
    g = rng.standard_normal(n_points) + 1j * rng.standard_normal(n_points)
    worst = 0.0
    jets = _manufactured_jets(pts)
    net = init_params(Architecture(2, 8), 3, omega0=2.0)
    jets.append(forward_jet(net, pts).data)
    for data in jets:
        jet = Jet(data)
        a = pml_residual(jet, pts, g, cfg)
        b = helmholtz_residual(jet, g, cfg.k)
        worst = max(worst, float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1.0)))
    dt = time.perf_counter() - t0
    return [CheckResult("PML operator reduces to Helmholtz at sigma0=0", worst < tol, worst,
                        tol, dt)]


def manufactured_convergence(n_coarse: int = 41, k: float = 1.0, half_width: float = 3.0,
                             sigma0: float = 0.0):
    """Errors and observed orders for ``u = sin(pi x/H) sin(pi y/H)``.

    Returns (spacings, errors, orders, worst solve residual).
    """
    cfg = PmlConfig(L=0.5 * half_width, L_pml=0.5 * half_width, sigma0=sigma0, k=k)
    w = np.pi / half_width

    def exact(p):
        return np.sin(w * p[:, 0]) * np.sin(w * p[:, 1])

    def forcing(p):
        return (2 * w * w - k * k) * exact(p)

    hs, errs, worst_res = [], [], 0.0
    for level in range(3):
        n = (n_coarse - 1) * 2 ** level + 1
        grid = Grid.square(n, half_width)
        system = assemble(cfg, grid, forcing)
        field = solve(system)
        worst_res = max(worst_res, relative_residual(system, field))
        xx, yy = grid.mesh()
        ue = exact(np.column_stack([xx.ravel(), yy.ravel()])).reshape(xx.shape)
        errs.append(float(np.sqrt(np.mean(np.abs(field.values - ue) ** 2))))
        hs.append(grid.h)
    orders = [float(np.log(errs[i] / errs[i + 1]) / np.log(hs[i] / hs[i + 1]))
              for i in range(2)]
    return hs, errs, orders, worst_res


def check_oracle_convergence() -> list[CheckResult]:
    t0 = time.perf_counter()
    _, errs, orders, res = manufactured_convergence()
    dt = time.perf_counter() - t0
    lo = min(orders)
    hi = max(orders)
    return [
        CheckResult("FD observed convergence order", 1.8 <= lo and hi <= 2.2, lo, 1.8, dt,
                    "orders " + ", ".join(f"{o:.3f}" for o in orders)),
        CheckResult("FD solve relative residual", res < 1e-10, res, 1e-10, dt),
    ]


def check_engd_exactness(seed: int = 0, tol: float = 1e-8) -> list[CheckResult]:
    """One damped step on ``r = A theta - b`` lands on the least-squares solution."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((60, 12))
    b = rng.standard_normal(60)
    theta0 = rng.standard_normal(12)
    theta = engd_step(theta0, a @ theta0 - b, a, damping=1e-12, lr=1.0)
    exact = np.linalg.lstsq(a, b, rcond=None)[0]
    err = float(np.linalg.norm(theta - exact) / np.linalg.norm(exact))
    dt = time.perf_counter() - t0
    return [CheckResult("ENGD Gauss-Newton exactness", err < tol, err, tol, dt)]


ALL_CHECKS = {
    "derivatives": check_derivatives,
    "partition": check_partition_of_unity,
    "pml": check_pml_reduction,
    "oracle": check_oracle_convergence,
    "engd": check_engd_exactness,
}


def run_all() -> list[CheckResult]:
    results = []
    for fn in ALL_CHECKS.values():
        results.extend(fn())
    return results
