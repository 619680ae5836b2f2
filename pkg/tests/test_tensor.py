import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from sigmahomog.cell import SolverParams, solve_all_correctors, solve_permeability_correctors
from sigmahomog.coeff import (anisotropic_coefficients, constant_coefficients, diagonal_trig_coefficients,
                              identity_coefficients, layered_coefficients, make_disk_geometry)
from sigmahomog.errors import GridMismatch, NotElliptic
from sigmahomog.grid import PeriodicGrid
from sigmahomog.io import read_keyvalue
from sigmahomog.tensor import (HomogenizedTensor, assemble_K, assemble_q_direct, assemble_q_energy, certify,
                               homogenized_tensor, identity_tensor, pair_symmetry_defect, richardson,
                               write_tensor_csv, write_tensor_keyvalue)

DELTA = np.einsum("ij,kh->ijkh", np.eye(2), np.eye(2))
FAMILIES = [identity_coefficients(), constant_coefficients(2.0, 0.4, 1.5), layered_coefficients(1.0, 3.0),
            diagonal_trig_coefficients(2.0, 2.5), anisotropic_coefficients(3.0, 0.5)]


def means():
    a = lambda y: 2.0 + np.sin(2 * np.pi * y)
    harm = 1.0 / quad(lambda y: 1.0 / a(y), 0, 1, epsabs=1e-14, epsrel=1e-14)[0]
    arith = quad(a, 0, 1, epsabs=1e-14)[0]
    return harm, arith


def test_identity_and_scaled_identity():
    for c in (1.0, 2.5):
        A = constant_coefficients(c, 0.0, c).sample(PeriodicGrid(16))
        C = solve_all_correctors(A)
        for qt in (assemble_q_direct(A, C), assemble_q_energy(A, C)):
            assert np.max(np.abs(qt.q - c * DELTA)) < 1e-12


def test_layered_tensor_entries(layered_256):
    _, _, qd, qe = layered_256
    harm, arith = means()
    # the divergence constraint removes the compression mode, so the harmonic mean sits in the shear slot
    assert abs(qd.value(1, 1, 2, 2) - harm) / harm < 1e-6
    assert abs(qd.value(2, 2, 2, 2) - arith) / arith < 1e-6
    assert abs(qd.value(1, 1, 1, 1) - arith) / arith < 1e-6
    assert abs(qd.value(2, 2, 1, 1) - arith) / arith < 1e-6
    off = [qd.q[i, j, k, h] for i in range(2) for j in range(2) for k in range(2) for h in range(2)
           if not (i == j and k == h)]
    assert max(abs(x) for x in off) < 1e-9
    assert np.max(np.abs(qd.q - qe.q)) < 1e-9 * np.max(np.abs(qe.q))
    assert abs(certify(qd) - harm) / harm < 1e-6


@pytest.mark.parametrize("gen", FAMILIES, ids=lambda g: g.kind)
def test_cross_formula_and_symmetry(gen):
    A = gen.sample(PeriodicGrid(64))
    C = solve_all_correctors(A, SolverParams(cg_tol=1e-10))
    qd, qe = assemble_q_direct(A, C), assemble_q_energy(A, C)
    scale = np.max(np.abs(qe.q))
    assert np.max(np.abs(qd.q - qe.q)) <= 1e-9 * scale
    assert pair_symmetry_defect(qe) < 1e-10 * scale
    M = qe.matrix()
    assert np.max(np.abs(M - M.T)) < 1e-10 * scale
    assert np.linalg.eigvalsh(M).min() > 0
    qt = homogenized_tensor(A, C)
    assert qt.alpha0 > 0 and qt.meta["cross_gap"] <= 1e-9 * scale


def test_certify_examples():
    assert certify(identity_tensor()) == pytest.approx(1.0, abs=1e-14)
    assert certify(identity_tensor().scaled(3.0)) == pytest.approx(3.0, abs=1e-13)
    with pytest.raises(NotElliptic):
        certify(HomogenizedTensor(-DELTA))


def test_grid_mismatch():
    A = identity_coefficients().sample(PeriodicGrid(16))
    C = solve_all_correctors(identity_coefficients().sample(PeriodicGrid(32)))
    with pytest.raises(GridMismatch):
        assemble_q_direct(A, C)
    with pytest.raises(GridMismatch):
        assemble_q_energy(A, C)


def test_permeability_certificates(disk_128):
    _, P, K = disk_128
    assert abs(K.K[0, 1] - K.K[1, 0]) <= 1e-12
    assert K.min_eig > 0
    assert abs(K.K[0, 0] - K.K[1, 1]) <= 1e-6 * K.K[0, 0]
    assert abs(K.K[0, 1]) <= 1e-6 * K.K[0, 0]
    assert K.cross_gap <= 10 * P.params.cg_tol


def test_permeability_grows_as_obstacle_shrinks():
    Ks = [assemble_K(solve_permeability_correctors(make_disk_geometry(64, r))).K[0, 0] for r in (0.3, 0.2, 0.1)]
    if not Ks[0] < Ks[1] < Ks[2]:
        warnings.warn(f"permeability not monotone in the radius: {Ks}")
    assert all(k > 0 for k in Ks)


def test_richardson():
    # exact for a quantity with a pure h^2 error
    assert richardson(1.0 + 4 * 0.01, 1.0 + 0.01, 2.0) == pytest.approx(1.0, abs=1e-14)


def test_tensor_export(tmp_path):
    qt = identity_tensor()
    write_tensor_keyvalue(tmp_path / "t.txt", qt)
    kv = read_keyvalue(tmp_path / "t.txt")
    assert float(kv["q_1111"]) == 1.0 and float(kv["q_1212"]) == 0.0 and float(kv["alpha0"]) == 1.0
    write_tensor_csv(tmp_path / "t.csv", qt, "abc")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "entry,value,manifest" and len(lines) == 17
