"""Effective tensors assembled from cell correctors.

The homogenized tensor ``q[i, j, k, h]`` (0-based arrays, 1-based names
``q_ijkh``) is available from two independent formulas:

* direct:  ``q_ijkh = delta_kh int a_ij - sum_l int a_il d_l chi_jh^k``
* energy:  ``q_ijkh = a_hat(chi_ik - pi_ik, chi_jh - pi_jh)`` with the affine
  fields ``pi_ik^r(y) = y_i delta_kr``.

Its 4x4 representation is ``M[(i,k), (j,h)] = q_ijkh`` with pairs ordered
lexicographically ``11, 12, 21, 22``; ``alpha0`` is the smallest eigenvalue of
the symmetric part of ``M``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cell import CorrectorSet, PermCorrectorSet, _Spectral, perm_form
from .coeff import CoefficientField
from .errors import CrossCheckFailed, GridMismatch, NotElliptic, NotSPD
from .io import write_csv, write_keyvalue
from .staggered import pair_tensor_from_q

PAIRS = ((1, 1), (1, 2), (2, 1), (2, 2))


@dataclass
class HomogenizedTensor:
    q: np.ndarray  # (2, 2, 2, 2)
    alpha0: float | None = None
    method: str = ""
    meta: dict = field(default_factory=dict)

    def value(self, i, j, k, h) -> float:
        """1-based entry ``q_ijkh``."""
        return float(self.q[i - 1, j - 1, k - 1, h - 1])

    def matrix(self) -> np.ndarray:
        return pair_tensor_from_q(self.q)

    def entries(self) -> dict:
        return {f"q_{i}{j}{k}{h}": self.value(i, j, k, h)
                for i in (1, 2) for j in (1, 2) for k in (1, 2) for h in (1, 2)}

    def scaled(self, c: float) -> "HomogenizedTensor":
        return HomogenizedTensor(c * self.q, None, self.method, dict(self.meta))


def identity_tensor() -> HomogenizedTensor:
    d = np.eye(2)
    return HomogenizedTensor(np.einsum("ij,kh->ijkh", d, d), 1.0, "identity")


def _check(A: CoefficientField, C: CorrectorSet):
    if A.grid != C.grid:
        raise GridMismatch(f"coefficient grid n={A.grid.n} and corrector grid n={C.grid.n} differ")


def assemble_q_direct(A: CoefficientField, C: CorrectorSet) -> HomogenizedTensor:
    _check(A, C)
    sp = _Spectral(A.grid)
    a = A.matrix()
    abar = a.mean(axis=(2, 3))
    # dchi[j][h][k][l] = d_l chi_jh^k
    dchi = [[[sp.grad(C.chi[j][h][k]) for k in range(2)] for h in range(2)] for j in range(2)]
    q = np.zeros((2, 2, 2, 2))
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for h in range(2):
                    corr = sum(np.mean(a[i, l] * dchi[j][h][k][l]) for l in range(2))
                    q[i, j, k, h] = (abar[i, j] if k == h else 0.0) - corr
    return HomogenizedTensor(q, None, "direct", {"n": A.grid.n})


def assemble_q_energy(A: CoefficientField, C: CorrectorSet) -> HomogenizedTensor:
    _check(A, C)
    sp = _Spectral(A.grid)
    a = A.matrix()
    # gradient of chi_ik - pi_ik: G[(i,k)][r][m] = d_m chi_ik^r - delta_mi delta_kr
    G = {}
    for i in range(2):
        for k in range(2):
            G[i, k] = [[sp.grad(C.chi[i][k][r])[m] - (1.0 if (m == i and r == k) else 0.0)
                        for m in range(2)] for r in range(2)]
    q = np.zeros((2, 2, 2, 2))
    for i in range(2):
        for k in range(2):
            for j in range(2):
                for h in range(2):
                    gu, gw = G[i, k], G[j, h]
                    tot = 0.0
                    for r in range(2):
                        for l in range(2):
                            for m in range(2):
                                tot += np.mean(a[l, m] * gu[r][m] * gw[r][l])
                    q[i, j, k, h] = tot
    return HomogenizedTensor(q, None, "energy", {"n": A.grid.n})


def certify(qt: HomogenizedTensor) -> float:
    """Smallest eigenvalue of the symmetric pair representation; must be positive."""
    M = qt.matrix()
    lam = float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())
    if not lam > 0:
        raise NotElliptic(f"smallest eigenvalue of the pair matrix is {lam:.3e}")
    qt.alpha0 = lam
    return lam


def pair_symmetry_defect(qt: HomogenizedTensor) -> float:
    """``max |q_ijkh - q_jihk|``."""
    return float(np.max(np.abs(qt.q - qt.q.transpose(1, 0, 3, 2))))


def homogenized_tensor(A: CoefficientField, C: CorrectorSet, cross_tol: float = 1e-9) -> HomogenizedTensor:
    """Direct assembly, verified against the energy form and certified elliptic."""
    qd = assemble_q_direct(A, C)
    qe = assemble_q_energy(A, C)
    scale = max(1.0, float(np.max(np.abs(qe.q))))
    gap = float(np.max(np.abs(qd.q - qe.q)))
    if gap > cross_tol * scale:
        raise CrossCheckFailed(f"direct and energy tensors differ by {gap:.3e}")
    certify(qd)
    qd.meta.update({"cross_gap": gap, "cg_tol": C.params.cg_tol})
    return qd


# ----------------------------------------------------------------- permeability

@dataclass
class PermeabilityMatrix:
    K: np.ndarray
    K_average: np.ndarray
    cross_gap: float
    meta: dict = field(default_factory=dict)

    @property
    def min_eig(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.K + self.K.T)).min())

    def entries(self) -> dict:
        return {f"K_{i}{j}": float(self.K[i - 1, j - 1]) for i in (1, 2) for j in (1, 2)}


def assemble_K(P: PermCorrectorSet, check_factor: float = 10.0) -> PermeabilityMatrix:
    """``K_ij`` from the penalized energy Gram matrix, checked against ``int chi_i^j``.

    The two agree exactly for an exact discrete solve; a disagreement beyond
    ``check_factor * cg_tol`` (relative to ``|K|``) signals a broken solve.
    """
    K_avg = np.array([[float(np.mean(P.chi[i][j])) for j in range(2)] for i in range(2)])
    K_en = np.empty((2, 2))
    for i in range(2):
        for j in range(i, 2):
            K_en[i, j] = K_en[j, i] = perm_form(P, P.chi[j], P.chi[i])
    scale = float(np.max(np.abs(K_en)))
    gap = float(np.max(np.abs(K_avg - K_en)))
    if gap > check_factor * P.params.cg_tol * scale:
        raise CrossCheckFailed(f"average and energy forms of K differ by {gap:.3e} (|K| = {scale:.3e})")
    pm = PermeabilityMatrix(K_en, K_avg, gap, {"n": P.grid.n, "eta": P.eta, "cg_tol": P.params.cg_tol})
    if not pm.min_eig > 0:
        raise NotSPD(f"K has eigenvalue {pm.min_eig:.3e}")
    return pm


def richardson(coarse: float, fine: float, order: float) -> float:
    """Two-grid extrapolation for a quantity converging at rate ``h**order``."""
    r = 2.0 ** order
    return (r * fine - coarse) / (r - 1.0)


def write_tensor_keyvalue(path, qt: HomogenizedTensor, extra: dict | None = None) -> None:
    vals = qt.entries()
    vals["alpha0"] = qt.alpha0 if qt.alpha0 is not None else certify(qt)
    if extra:
        vals.update(extra)
    write_keyvalue(path, vals)


def write_tensor_csv(path, qt: HomogenizedTensor, manifest: str) -> None:
    rows = [(name, val, manifest) for name, val in qt.entries().items()]
    write_csv(path, ("entry", "value", "manifest"), rows)
