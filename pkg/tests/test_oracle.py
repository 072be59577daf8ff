import numpy as np
import pytest

from helmpinn.checks import manufactured_convergence
from helmpinn.loss import PmlLoss, SourceSpec, sample_collocation, source
from helmpinn.oracle import (ComplexGridField, Grid, SingularSystemError, SplineFieldModel,
                             assemble, default_grid_points, export_field, interpolate,
                             load_field, reference_solution, relative_residual, solve)
from helmpinn.pml import PmlConfig

CFG0 = PmlConfig(L=1.0, L_pml=1.0, sigma0=0.0, k=1.0)
CFG = PmlConfig(L=1.0, L_pml=1.0, sigma0=2.0, k=1.5)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(2, 5, 0, 1, 0, 1)
    with pytest.raises(ValueError):
        Grid(5, 9, 0, 1, 0, 1)
    g = Grid.square(11, 2.0)
    assert g.h == pytest.approx(0.4)


def test_default_grid_points():
    assert default_grid_points(CFG) == 256
    cfg = PmlConfig(L=5.0, L_pml=1.0, sigma0=2.0, k=2 * np.pi)
    assert default_grid_points(cfg, points_per_wavelength=60, minimum=10) == 720


def test_sigma0_zero_is_laplacian_minus_k2():
    grid = Grid.square(6, 2.0)
    a = assemble(CFG0, grid, lambda p: np.zeros(len(p))).matrix.toarray()
    h2 = grid.h ** 2
    m = 4
    lap = np.zeros((m * m, m * m))
    for iy in range(m):
        for ix in range(m):
            r = iy * m + ix
            lap[r, r] = 4 / h2 - 1.0
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                jx, jy = ix + dx, iy + dy
                if 0 <= jx < m and 0 <= jy < m:
                    lap[r, jy * m + jx] = -1 / h2
    np.testing.assert_allclose(a, lap, rtol=1e-14)
    np.testing.assert_allclose(a, a.T)


def test_three_by_three_hand_assembly():
    # one interior node at the origin of [-3, 3]^2 (h = 3); sigma vanishes at the
    # node and the four half nodes at distance 1.5 sit inside the layer
    cfg = PmlConfig(L=1.0, L_pml=2.0, sigma0=1.0, k=2.0)
    grid = Grid.square(3, 3.0)
    system = assemble(cfg, grid, lambda p: np.full(len(p), 0.5 + 0j))
    depth = (1.5 - 1.0) / 2.0
    s = cfg.sigma0 * cfg.k * depth ** 2
    d_half = 1.0 / (1.0 - 1j * s / cfg.k)
    expected = 2 * (2 * d_half) / 9.0 - cfg.k ** 2
    assert system.matrix.shape == (1, 1)
    assert system.matrix[0, 0] == pytest.approx(expected)
    assert system.rhs[0] == 0.5


def test_interior_row_sums_vanish():
    grid = Grid.square(9, 2.0)
    a = assemble(CFG0, grid, lambda p: np.zeros(len(p))).matrix.toarray()
    a = a + CFG0.k ** 2 * np.eye(a.shape[0])
    m = 7
    for iy in range(1, m - 1):
        for ix in range(1, m - 1):
            assert abs(a[iy * m + ix].sum()) < 1e-12


def test_zero_source_zero_field():
    field = solve(assemble(CFG, Grid.square(21, 2.0), lambda p: np.zeros(len(p))))
    assert not field.re.any() and not field.im.any()


def test_linearity(rng):
    grid = Grid.square(31, 2.0)
    g1 = rng.standard_normal((31, 31)) + 1j * rng.standard_normal((31, 31))
    g2 = rng.standard_normal((31, 31))
    alpha = 0.7 - 1.3j
    u1 = solve(assemble(CFG, grid, g1)).values
    u2 = solve(assemble(CFG, grid, g2)).values
    u = solve(assemble(CFG, grid, alpha * g1 + g2)).values
    np.testing.assert_allclose(u, alpha * u1 + u2, atol=1e-10 * np.abs(u).max())


def test_solve_residual():
    system = assemble(CFG, Grid.square(41, 2.0), lambda p: source(p, SourceSpec(1.5)))
    field = solve(system)
    assert relative_residual(system, field) < 1e-10


def test_manufactured_second_order():
    hs, errs, orders, res = manufactured_convergence(n_coarse=21)
    assert all(1.8 <= o <= 2.2 for o in orders)
    assert errs[0] > errs[1] > errs[2]
    assert res < 1e-10


def test_singular_system_is_reported():
    # on [-H, H]^2 with Dirichlet walls the first eigenvalue is 2 (pi / 2H)^2
    half = 2.0
    grid = Grid.square(5, half)
    h = grid.h
    m = grid.nx - 2
    lam_1d = 4 / h ** 2 * np.sin(np.pi / (2 * (m + 1))) ** 2
    k = np.sqrt(2 * lam_1d)
    cfg = PmlConfig(L=1.0, L_pml=1.0, sigma0=0.0, k=k)
    with pytest.raises(SingularSystemError, match="eigenfrequency"):
        solve(assemble(cfg, grid, lambda p: np.ones(len(p))))


def test_interpolate_nodes_constants_and_linears(rng):
    grid = Grid.square(11, 2.0)
    xx, yy = grid.mesh()
    lin = ComplexGridField.from_complex(grid, 2 * xx - 3 * yy + 1j * (xx + yy))
    pts = rng.uniform(-2, 2, (50, 2))
    np.testing.assert_allclose(interpolate(lin, pts),
                               2 * pts[:, 0] - 3 * pts[:, 1] + 1j * pts.sum(axis=1), atol=1e-12)
    nodes = np.column_stack([xx.ravel(), yy.ravel()])
    np.testing.assert_allclose(interpolate(lin, nodes), lin.values.ravel(), atol=1e-13)
    const = ComplexGridField.from_complex(grid, np.full(xx.shape, 3 - 2j))
    np.testing.assert_allclose(interpolate(const, pts), 3 - 2j)
    with pytest.raises(ValueError):
        interpolate(const, [[2.5, 0.0]])


def test_field_csv_roundtrip(tmp_path):
    field = reference_solution(CFG, lambda p: source(p, SourceSpec(1.5)), n=21)
    path = tmp_path / "field.csv"
    export_field(field, path)
    header = path.read_text().splitlines()[0]
    assert header == "x,y,re,im"
    back = load_field(path)
    np.testing.assert_array_equal(back.values, field.values)
    lines = path.read_text().splitlines()
    # row-major by y then x
    assert lines[1].split(",")[1] == lines[2].split(",")[1]


def test_reference_residual_is_small_through_network_loss():
    # spline interpolant of the reference pushed through the continuous loss;
    # the residual is the discretisation error and must shrink about 4x per halving
    cfg = PmlConfig(L=2.0, L_pml=2.0, sigma0=2.0, k=1.5)
    spec = SourceSpec(1.5)
    colloc = sample_collocation(2000, 3.5, seed=0)
    loss = PmlLoss(colloc, spec, cfg)
    values = []
    for n in (81, 161):
        field = reference_solution(cfg, lambda p: source(p, spec), n=n)
        values.append(loss.value(SplineFieldModel(field)))
    zero = float(np.mean(np.abs(source(colloc.points, spec)) ** 2))
    assert values[1] < 1e-3 * zero
    ratio = values[0] / values[1]
    assert 8.0 < ratio < 24.0


def test_free_space_solution_satisfies_helmholtz(rng):
    from helmpinn.oracle import free_space_gaussian

    k, h = 1.59, 1e-3
    pts = rng.uniform(-3, 3, size=(20, 2))
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) > 0.3]
    u = lambda q: free_space_gaussian(q, k, n_quad=200001)
    lap = sum(u(pts + d) for d in ([h, 0], [-h, 0], [0, h], [0, -h])) - 4 * u(pts)
    lap /= h ** 2
    res = -lap - k ** 2 * u(pts) - source(pts, SourceSpec(k))
    # linear interpolation of the radial integrals limits this to ~1e-4
    assert np.max(np.abs(res)) < 1e-3 * np.max(np.abs(k ** 2 * u(pts)))


def test_reference_with_wide_pml_matches_free_space():
    from helmpinn.metrics import eval_grid, relative_l2
    from helmpinn.oracle import free_space_gaussian

    k = 1.59
    cfg = PmlConfig(L=5.0, L_pml=2 * np.pi / k, sigma0=2.0, k=k)
    ref = reference_solution(cfg, lambda q: source(q, SourceSpec(k)))
    pts = eval_grid(5.0, 41)
    exact = free_space_gaussian(pts, k)
    approx = interpolate(ref, pts)
    assert relative_l2(approx.real, exact.real) < 1e-2
    assert relative_l2(approx.imag, exact.imag) < 1e-2
