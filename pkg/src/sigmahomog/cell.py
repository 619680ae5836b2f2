"""Periodic cell problems on Y.

Two families are solved with conjugate gradients restricted to the space of
discretely divergence-free, Y-periodic fields:

* the elliptic correctors ``chi_ik``: find ``chi`` in the divergence-free
  zero-mean space with ``a_hat(chi, w) = sum_l int a_li d_l w^k`` for all such
  ``w``, where ``a_hat(u, w) = sum int a_lm d_m u^r d_l w^r``;
* the permeability correctors ``chi_j``: the Brinkman-penalized Stokes problem
  ``int grad chi . grad w + (1/eta) int_{Y_s} chi . w = int w^j``.

All derivatives are spectral; the midpoint rule makes the discrete bilinear
forms exactly symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coeff import CellGeometry, CoefficientField, validate
from .errors import EmptyObstacle, NoConvergence
from .grid import PeriodicGrid, _fft, _ifft
from .linalg import pcg


@dataclass(frozen=True)
class SolverParams:
    cg_tol: float = 1e-10
    max_iter: int = 5000
    eta: float | None = None  # penalization; None means h^2

    def __post_init__(self):
        if not 0.0 < self.cg_tol < 1.0:
            raise ValueError("cg_tol must lie in (0, 1)")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")

    def eta_for(self, grid: PeriodicGrid) -> float:
        return grid.h ** 2 if self.eta is None else float(self.eta)


# ------------------------------------------------------------------ helpers

class _Spectral:
    """Cached spectral pieces for one grid."""

    def __init__(self, grid: PeriodicGrid):
        self.grid = grid
        k1, k2 = grid.wavenumbers
        self.k1, self.k2 = k1, k2
        ksq = k1 * k1 + k2 * k2
        self.ksq = ksq
        self.resolved = ksq > 0
        self.inv_ksq = np.where(self.resolved, 1.0 / np.where(self.resolved, ksq, 1.0), 0.0)

    def grad(self, f):
        F = _fft(f)
        return _ifft(1j * self.k1 * F), _ifft(1j * self.k2 * F)

    def grad_hat(self, F):
        return _ifft(1j * self.k1 * F), _ifft(1j * self.k2 * F)

    def div(self, g1, g2):
        return _ifft(1j * self.k1 * _fft(g1) + 1j * self.k2 * _fft(g2))

    def project(self, v, keep_mean=False):
        """Leray projection; optionally also drop every mode of zero symbol.

        Dropping those modes (the mean and the unresolved Nyquist corners)
        is the zero-mean gauge of the elliptic problem.
        """
        V1, V2 = _fft(v[0]), _fft(v[1])
        kv = (self.k1 * V1 + self.k2 * V2) * self.inv_ksq
        V1 = V1 - self.k1 * kv
        V2 = V2 - self.k2 * kv
        if not keep_mean:
            V1 = V1 * self.resolved
            V2 = V2 * self.resolved
        return np.stack([_ifft(V1), _ifft(V2)])


def _elliptic_apply(sp: _Spectral, a, u):
    """Componentwise ``-div(a grad u^r)``."""
    out = np.empty_like(u)
    for r in range(2):
        g1, g2 = sp.grad(u[r])
        f1 = a[0][0] * g1 + a[0][1] * g2
        f2 = a[1][0] * g1 + a[1][1] * g2
        out[r] = -sp.div(f1, f2)
    return out


def _elliptic_form(sp: _Spectral, a, u, w):
    """``a_hat(u, w)`` by midpoint quadrature."""
    total = 0.0
    for r in range(2):
        gu = sp.grad(u[r])
        gw = sp.grad(w[r])
        for l in range(2):
            for m in range(2):
                total += np.sum(a[l][m] * gu[m] * gw[l])
    return float(total * sp.grid.cell_measure)


def _elliptic_rhs(sp: _Spectral, a, i, k):
    """Strong form of ``w -> sum_l int a_li d_l w^k``: ``-sum_l d_l a_li`` in slot k."""
    F = np.zeros((2,) + sp.grid.shape)
    F[k] = -sp.div(a[0][i], a[1][i])
    return F


# -------------------------------------------------------- elliptic correctors

@dataclass
class CorrectorSet:
    grid: PeriodicGrid
    chi: list  # chi[i][k] -> array (2, n, n), 0-based indices
    residuals: dict = field(default_factory=dict)
    iterations: dict = field(default_factory=dict)
    params: SolverParams = field(default_factory=SolverParams)

    def field(self, i: int, k: int) -> np.ndarray:
        """1-based access to ``chi_ik``."""
        return self.chi[i - 1][k - 1]


def solve_elliptic_corrector(A: CoefficientField, i: int, k: int,
                             params: SolverParams | None = None, x0=None, return_info=False):
    """Corrector ``chi_ik`` (1-based ``i, k``) as an array of shape ``(2, n, n)``."""
    params = params or SolverParams()
    if i not in (1, 2) or k not in (1, 2):
        raise ValueError("indices must be 1 or 2")
    validate(A)
    sp = _Spectral(A.grid)
    a = [[A.a11, A.a12], [A.a21, A.a22]]
    proj = lambda v: sp.project(v)
    abar = A.mean_matrix()
    symbol = abar[0, 0] * sp.k1 ** 2 + (abar[0, 1] + abar[1, 0]) * sp.k1 * sp.k2 + abar[1, 1] * sp.k2 ** 2
    inv_symbol = np.where(sp.resolved, 1.0 / np.where(sp.resolved, symbol, 1.0), 0.0)
    precond = lambda r: np.stack([_ifft(_fft(r[0]) * inv_symbol), _ifft(_fft(r[1]) * inv_symbol)])
    b = _elliptic_rhs(sp, a, i - 1, k - 1)
    # a right-hand side that is a pure gradient projects to roundoff; treat that as zero
    atol = 64 * np.finfo(float).eps * (np.linalg.norm(b) + np.linalg.norm(abar) * A.grid.n)
    res = pcg(lambda u: _elliptic_apply(sp, a, u), b, x0=x0, precond=precond, project=proj,
              tol=params.cg_tol, max_iter=params.max_iter, what=f"corrector chi_{i}{k}", atol=atol)
    chi = proj(res.x)
    return (chi, res) if return_info else chi


def solve_all_correctors(A: CoefficientField, params: SolverParams | None = None, order=None) -> CorrectorSet:
    params = params or SolverParams()
    pairs = order or [(1, 1), (1, 2), (2, 1), (2, 2)]
    chi = [[None, None], [None, None]]
    residuals, iters, failures = {}, {}, []
    for i, k in pairs:
        try:
            c, info = solve_elliptic_corrector(A, i, k, params, return_info=True)
        except NoConvergence as exc:
            failures.append(f"chi_{i}{k}: {exc}")
            continue
        chi[i - 1][k - 1] = c
        residuals[(i, k)] = info.residual
        iters[(i, k)] = info.iterations
    if failures:
        raise NoConvergence("; ".join(failures))
    return CorrectorSet(A.grid, chi, residuals, iters, params)


def galerkin_residual(A: CoefficientField, chi: np.ndarray, i: int, k: int, w: np.ndarray) -> tuple[float, float]:
    """``(a_hat(chi, w) - rhs(w), scale)`` for a divergence-free test field ``w``."""
    sp = _Spectral(A.grid)
    a = [[A.a11, A.a12], [A.a21, A.a22]]
    lhs = _elliptic_form(sp, a, chi, w)
    g = sp.grad(w[k - 1])
    rhs = float(np.sum(a[0][i - 1] * g[0] + a[1][i - 1] * g[1]) * A.grid.cell_measure)
    return lhs - rhs, max(abs(lhs), abs(rhs))


def elliptic_form(A: CoefficientField, u: np.ndarray, w: np.ndarray) -> float:
    sp = _Spectral(A.grid)
    return _elliptic_form(sp, [[A.a11, A.a12], [A.a21, A.a22]], u, w)


def random_solenoidal(grid: PeriodicGrid, rng, modes: int = 6, zero_mean=True) -> np.ndarray:
    """Random band-limited divergence-free periodic field."""
    n = grid.n
    coef = np.zeros((2, n, n), dtype=complex)
    idx = np.r_[0:modes + 1, n - modes:n]
    for c in range(2):
        sub = rng.standard_normal((idx.size, idx.size)) + 1j * rng.standard_normal((idx.size, idx.size))
        coef[c][np.ix_(idx, idx)] = sub
    v = np.stack([_ifft(coef[0]), _ifft(coef[1])]) * n
    return _Spectral(grid).project(v, keep_mean=not zero_mean)


# ---------------------------------------------------- permeability correctors

@dataclass
class PermCorrectorSet:
    grid: PeriodicGrid
    geometry: CellGeometry
    chi: list  # chi[j] -> (2, n, n), 0-based
    eta: float
    residuals: dict = field(default_factory=dict)
    iterations: dict = field(default_factory=dict)
    params: SolverParams = field(default_factory=SolverParams)

    def field(self, j: int) -> np.ndarray:
        return self.chi[j - 1]

    def max_solid(self, j: int) -> float:
        return float(np.max(np.abs(self.chi[j - 1][:, self.geometry.solid_mask])))


def _perm_apply(sp: _Spectral, pen, u):
    out = np.empty_like(u)
    for r in range(2):
        out[r] = _ifft(sp.ksq * _fft(u[r])) + pen * u[r]
    return out


def perm_form(P: PermCorrectorSet, u, w) -> float:
    """Penalized bilinear form ``int grad u . grad w + (1/eta) int_{Y_s} u . w``."""
    sp = _Spectral(P.grid)
    pen = P.geometry.solid_mask / P.eta
    total = 0.0
    for r in range(2):
        gu = sp.grad(u[r])
        gw = sp.grad(w[r])
        total += np.sum(gu[0] * gw[0] + gu[1] * gw[1]) + np.sum(pen * u[r] * w[r])
    return float(total * P.grid.cell_measure)


def _perm_shift(eta: float, solid_fraction: float) -> float:
    # spectral shift matching the average penalty seen by a smooth field
    return solid_fraction / eta


def solve_permeability_corrector(G: CellGeometry, j: int, params: SolverParams | None = None,
                                 x0=None, return_info=False):
    params = params or SolverParams()
    if j not in (1, 2):
        raise ValueError("j must be 1 or 2")
    if not G.solid_mask.any():
        raise EmptyObstacle("the permeability problem needs a nonempty solid part")
    grid = G.grid
    eta = params.eta_for(grid)
    sp = _Spectral(grid)
    pen = G.solid_mask / eta
    sigma = _perm_shift(eta, G.solid_fraction)
    inv = 1.0 / (sp.ksq + sigma)
    precond = lambda r: np.stack([_ifft(_fft(r[0]) * inv), _ifft(_fft(r[1]) * inv)])
    proj = lambda v: sp.project(v, keep_mean=True)
    b = np.zeros((2,) + grid.shape)
    b[j - 1] = 1.0
    res = pcg(lambda u: _perm_apply(sp, pen, u), b, x0=x0, precond=precond, project=proj,
              tol=params.cg_tol, max_iter=params.max_iter, what=f"permeability corrector chi_{j}")
    chi = proj(res.x)
    return (chi, res, eta) if return_info else chi


def solve_permeability_correctors(G: CellGeometry, params: SolverParams | None = None) -> PermCorrectorSet:
    params = params or SolverParams()
    chis, residuals, iters = [], {}, {}
    eta = params.eta_for(G.grid)
    for j in (1, 2):
        c, info, eta = solve_permeability_corrector(G, j, params, return_info=True)
        chis.append(c)
        residuals[j] = info.residual
        iters[j] = info.iterations
    return PermCorrectorSet(G.grid, G, chis, eta, residuals, iters, params)


def rotate_quarter(v: np.ndarray) -> np.ndarray:
    """Rotate a node-grid vector field by +90 degrees: ``(R v)(y) = R v(R^{-1} y)``.

    ``R(y1, y2) = (-y2, y1)``.  Node ``m`` sits at ``-1/2 + m/n``, so the
    reflection ``y -> -y`` maps index ``m`` to ``(n - m) % n``.
    """
    n = v.shape[-1]
    neg = (n - np.arange(n)) % n
    # w[c][a, b] = v[c] at R^{-1}(y_a, y_b) = (y_b, -y_a)
    w = [v[c][:, neg].T for c in range(2)]
    return np.stack([-w[1], w[0]])
