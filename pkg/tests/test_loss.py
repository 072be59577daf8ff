import numpy as np
import pytest

from helmpinn.decomposition import grid_decomposition, init_fbpinn
from helmpinn.diffnet import Architecture, NetworkParams, flatten
from helmpinn.loss import (CollocationSet, PmlLoss, SourceSpec, loss_residuals_and_jacobian,
                           loss_value, sample_collocation, source)
from helmpinn.models import PinnModel, init_pinn
from helmpinn.pml import PmlConfig

CFG = PmlConfig(L=2.0, L_pml=1.0, sigma0=2.0, k=1.0)


def test_source_values():
    assert source([[0.0, 0.0]], SourceSpec(1.0))[0] == 1.0 + 0j
    v = source([[1.0, 0.0]], SourceSpec(0.57))[0]
    assert v.real == pytest.approx(0.5655, abs=5e-5)
    assert v.imag == 0.0


def test_curriculum_switch(rng):
    pts = rng.uniform(-3, 3, (50, 2))
    cur = SourceSpec(1.3, "curriculum_imag", switch_epoch=5, oscillation_amplitude=0.1)
    plain = SourceSpec(1.3)
    assert np.any(source(pts, cur, 4).imag != 0)
    np.testing.assert_array_equal(source(pts, cur, 4).real, source(pts, plain).real)
    for epoch in (5, 6, 100):
        assert source(pts, cur, epoch).tobytes() == source(pts, plain).tobytes()


def test_source_spec_validation():
    with pytest.raises(ValueError):
        SourceSpec(1.0, "dipole")
    with pytest.raises(ValueError):
        SourceSpec(1.0, "curriculum_imag", switch_epoch=-1)


@pytest.mark.parametrize("sampler", ["uniform_random", "latin_hypercube", "grid"])
def test_collocation_inside_domain(sampler):
    c = sample_collocation(400, 3.0, sampler, seed=1)
    assert np.all(np.abs(c.points) <= 3.0)
    assert len(c) == 400


def test_collocation_deterministic():
    a = sample_collocation(100, 3.0, seed=9)
    b = sample_collocation(100, 3.0, seed=9)
    assert a.points.tobytes() == b.points.tobytes()
    with pytest.raises(ValueError):
        sample_collocation(10, 1.0, "sobol")


def zero_pinn(arch=Architecture(2, 4)):
    return PinnModel(NetworkParams(arch, np.zeros(arch.n_params)), 3.0)


def test_zero_model_loss_is_mean_source_squared():
    colloc = sample_collocation(300, 3.0, seed=2)
    spec = SourceSpec(1.0)
    g = source(colloc.points, spec)
    expected = np.sum(np.abs(g) ** 2) / len(g)
    assert loss_value(zero_pinn(), colloc, spec, CFG) == pytest.approx(expected, rel=1e-14)


def test_source_scaling_scales_loss_quadratically():
    colloc = sample_collocation(200, 3.0, seed=2)
    loss = PmlLoss(colloc, SourceSpec(1.0), CFG)
    base = loss.value(zero_pinn())
    loss._sources[False] = 3.0 * loss.source_values(0)
    assert loss.value(zero_pinn()) == pytest.approx(9.0 * base, rel=1e-13)


def test_gradient_matches_jacobian_and_finite_differences():
    colloc = sample_collocation(40, 3.0, seed=3)
    loss = PmlLoss(colloc, SourceSpec(1.0, "curriculum_imag", 3), CFG)
    model = init_pinn(Architecture(2, 5), 3.0, seed=1, omega0=3.0)
    for epoch in (0, 5):
        f, g = loss.value_and_grad(model, epoch)
        r, jac = loss.residuals_and_jacobian(model, epoch)
        assert f == pytest.approx(loss.value(model, epoch), rel=1e-14)
        np.testing.assert_allclose(g, (2.0 / len(colloc)) * jac.T @ r, rtol=1e-10, atol=1e-14)
        x0 = model.values
        fd = np.empty_like(x0)
        for i in range(x0.size):
            d = np.zeros_like(x0)
            d[i] = 1e-6
            fd[i] = (loss.value(model.with_values(x0 + d), epoch)
                     - loss.value(model.with_values(x0 - d), epoch)) / 2e-6
        assert np.max(np.abs(g - fd)) / np.max(np.abs(fd)) < 1e-5


def test_fbpinn_gradient_matches_jacobian():
    colloc = sample_collocation(60, 3.0, seed=3)
    loss = PmlLoss(colloc, SourceSpec(1.0), CFG)
    model = init_fbpinn(grid_decomposition(3.0), Architecture(1, 6), seed=0, omega0=2.0)
    f, g = loss.value_and_grad(model)
    r, jac = loss.residuals_and_jacobian(model)
    np.testing.assert_allclose(g, (2.0 / 60) * jac.T @ r, rtol=1e-10, atol=1e-14)


def test_zero_model_jacobian_is_network_jacobian():
    # with a zero network the residual is -g plus a linear map of the jet, so the
    # Jacobian does not depend on the source
    colloc = sample_collocation(20, 3.0, seed=4)
    model = zero_pinn()
    r1, j1 = loss_residuals_and_jacobian(model, colloc, SourceSpec(1.0), CFG)
    r2, j2 = loss_residuals_and_jacobian(model, colloc, SourceSpec(2.5), CFG)
    np.testing.assert_array_equal(j1, j2)
    g = source(colloc.points, SourceSpec(1.0))
    np.testing.assert_allclose(r1.reshape(-1, 2)[:, 0], -g.real)


def test_one_point_one_parameter_hand_check():
    # width-1 net with all weights zero except the output bias of channel 0 (= b):
    # u = b, residual = -k^2 b - g; d residual / d b = (-k^2, 0)
    arch = Architecture(1, 1)
    layers = [(np.zeros((1, 2)), np.zeros(1)), (np.zeros((2, 1)), np.array([0.7, 0.0]))]
    model = PinnModel(NetworkParams(arch, flatten(layers)), 3.0)
    pt = np.array([[0.5, -0.5]])
    loss = PmlLoss(CollocationSet(pt, "given", 0), SourceSpec(CFG.k), CFG)
    r, jac = loss.residuals_and_jacobian(model)
    g = np.exp(-CFG.k * 0.5)
    np.testing.assert_allclose(r, [-CFG.k ** 2 * 0.7 - g, 0.0], rtol=1e-14)
    np.testing.assert_allclose(jac[:, -2], [-CFG.k ** 2, 0.0])


def test_loss_nonnegative_and_permutation_invariant(rng):
    colloc = sample_collocation(100, 3.0, seed=5)
    model = init_pinn(Architecture(2, 6), 3.0, seed=2, omega0=2.0)
    spec = SourceSpec(1.0)
    a = loss_value(model, colloc, spec, CFG)
    perm = CollocationSet(colloc.points[rng.permutation(100)], "given", 0)
    b = loss_value(model, perm, spec, CFG)
    assert a >= 0
    assert a == pytest.approx(b, rel=1e-13)


def test_curriculum_loss_identical_after_switch():
    colloc = sample_collocation(100, 3.0, seed=5)
    model = init_pinn(Architecture(2, 6), 3.0, seed=2)
    cur = PmlLoss(colloc, SourceSpec(1.0, "curriculum_imag", 10), CFG)
    plain = PmlLoss(colloc, SourceSpec(1.0), CFG)
    assert cur.value(model, 10) == plain.value(model, 0)
    assert cur.value(model, 0) != plain.value(model, 0)
