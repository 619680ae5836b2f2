import numpy as np
import pytest

from sigmahomog.coeff import (CoefficientField, anisotropic_coefficients, constant_coefficients,
                              diagonal_trig_coefficients, fluid_connected, identity_coefficients,
                              layered_coefficients, make_coefficients, make_disk_geometry, make_forcing,
                              make_layered, validate)
from sigmahomog.errors import EmptyObstacle, NonSymmetric, NotCoercive, RadiusTooLarge
from sigmahomog.grid import PeriodicGrid

GENERATORS = [identity_coefficients(), constant_coefficients(2.0, 0.3, 1.5), layered_coefficients(1.0, 3.0),
              diagonal_trig_coefficients(2.0, 2.0), anisotropic_coefficients(3.0, 0.5)]


def test_validate_identity():
    r = validate(identity_coefficients().sample(PeriodicGrid(16)))
    assert r.alpha == 1.0 and r.c0 == 1.0


def test_validate_diagonal_trig():
    r = validate(diagonal_trig_coefficients(2.0, 2.0).sample(PeriodicGrid(64)))
    assert abs(r.alpha - 1.0) < 1e-12
    assert r.alpha <= r.c0


def test_validate_off_diagonal():
    r = validate(constant_coefficients(1.0, 0.5, 1.0).sample(PeriodicGrid(16)))
    assert abs(r.alpha - min(np.linalg.eigvalsh([[1.0, 0.5], [0.5, 1.0]]))) < 1e-14
    assert abs(r.alpha - 0.5) < 1e-14


def test_validate_errors():
    g = PeriodicGrid(16)
    one, zero = np.ones(g.shape), np.zeros(g.shape)
    with pytest.raises(NonSymmetric):
        validate(CoefficientField(g, one, 0.1 * one, zero, one))
    with pytest.raises(NotCoercive):
        validate(CoefficientField(g, one, 2.0 * one, 2.0 * one, one))


@pytest.mark.parametrize("gen", GENERATORS, ids=lambda g: g.kind)
def test_generators_match_analytic_alpha(gen):
    # n=64 puts a node on the extremum of every generator in the family
    r = validate(gen.sample(PeriodicGrid(64)))
    if gen.alpha_exact is None:
        # no closed form: Gershgorin gives base - 1 - shear from below
        assert r.alpha >= gen.params[0] - 1 - gen.params[1]
    else:
        assert abs(r.alpha - gen.alpha_exact) < 1e-12


def test_make_layered_examples():
    A = make_layered(32, 1.0, 1.0)
    assert np.all(A.a11 == 1.0) and np.all(A.a22 == 1.0) and np.all(A.a12 == 0.0)
    assert validate(make_layered(64, 1.0, 3.0)).alpha == pytest.approx(1.0, abs=1e-12)
    a, b = make_layered(256, 1.0, 3.0), make_layered(256, 1.0, 3.0)
    assert all(np.array_equal(x, y) for x, y in zip(a.matrix(), b.matrix()))
    with pytest.raises(NotCoercive):
        make_layered(32, 0.0, 1.0)


def test_make_coefficients_unknown_kind():
    with pytest.raises(ValueError):
        make_coefficients("random")


def test_disk_geometry_examples():
    G = make_disk_geometry(64, 0.25)
    assert abs(G.solid_fraction - np.pi / 16) / (np.pi / 16) <= 2 * G.grid.h
    with pytest.raises(RadiusTooLarge):
        make_disk_geometry(64, 0.49)
    with pytest.raises(EmptyObstacle):
        make_disk_geometry(64, 0.01)


def test_disk_mask_symmetries():
    m = make_disk_geometry(64, 0.25).solid_mask
    # node m sits at -1/2 + m h, so y -> -y maps index m to (n - m) % n
    n = m.shape[0]
    neg = (n - np.arange(n)) % n
    images = [m[neg, :], m[:, neg], m.T, m[neg][:, neg], m.T[neg, :], m.T[:, neg], m.T[neg][:, neg]]
    assert all(np.array_equal(m, im) for im in images)


def test_collar_and_connectivity_over_radii():
    n = 64
    h = 1.0 / n
    for r in np.linspace(2 * h + 1e-9, 0.5 - 2 * h - 1e-9, 25):
        G = make_disk_geometry(n, r)
        assert fluid_connected(G.solid_mask)
        # two-cell collar: no solid node within 2h of the cell boundary
        assert not G.solid_mask[:2].any() and not G.solid_mask[:, :2].any()
        assert not G.solid_mask[-1].any() and not G.solid_mask[:, -1].any()


def test_fluid_connectivity_detects_split():
    mask = np.zeros((16, 16), dtype=bool)
    mask[:, 7] = True  # a solid wall across the torus still leaves a connected fluid through the wrap
    assert fluid_connected(mask)
    mask[:, 0] = True
    assert not fluid_connected(mask)


def test_forcing_families():
    x, y = np.meshgrid(np.linspace(0, 1, 9), np.linspace(0, 1, 9), indexing="ij")
    assert all(np.all(c == 0) for c in make_forcing("zero")(x, y))
    f1, f2 = make_forcing("constant", vector=(1.0, -2.0))(x, y)
    assert np.all(f1 == 1.0) and np.all(f2 == -2.0)
    # rotational forcing has zero normal trace on the walls
    f1, f2 = make_forcing("rotational", amplitude=2.0)(x, y)
    assert np.max(np.abs(f1[0])) < 1e-12 and np.max(np.abs(f1[-1])) < 1e-12
    assert np.max(np.abs(f2[:, 0])) < 1e-12 and np.max(np.abs(f2[:, -1])) < 1e-12
    with pytest.raises(ValueError):
        make_forcing("vortex")
