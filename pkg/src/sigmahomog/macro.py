"""Macroscopic limit problems.

* :func:`solve_homogenized_ns`: unsteady Navier-Stokes with the anisotropic
  constant-coefficient operator ``(Q u)^k = -sum q_ijkh d_i d_j u^h`` on the
  MAC grid, no-slip walls, zero initial data.
* :func:`solve_darcy`: the Neumann problem
  ``-div(Kt grad p) = -div(Kt f)``, ``(Kt (f - grad p)) . n = 0`` with
  ``Kt = K / nu``, followed by the Darcy velocity ``Kt (f - grad p)``; time
  is only a parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import CompatibilityViolated, GridMismatch, NotSPD, PoissonNoConvergence
from .grid import DomainGrid, fft_workers
from .linalg import pcg
from .staggered import MACOperators, _Builder, pair_tensor_from_q
from .stepping import LinearSolve, Trajectory, run_projection
from .tensor import HomogenizedTensor, certify


@dataclass
class MacroState:
    traj: Trajectory
    tensor: HomogenizedTensor
    meta: dict = field(default_factory=dict)

    @property
    def grid(self) -> DomainGrid:
        return self.traj.grid

    @property
    def u0(self) -> np.ndarray:
        return self.traj.u

    @property
    def p0(self) -> np.ndarray:
        return self.traj.p


def solve_homogenized_ns(qt: HomogenizedTensor, forcing, g: DomainGrid, tol: float = 1e-10,
                         method: str = "direct", convection: bool = True, u_init=None,
                         ops: MACOperators | None = None) -> MacroState:
    """March the homogenized system over ``g.nt`` backward-Euler steps.

    ``method="reference"`` replaces the assembled operator by an exact
    sine-transform inverse of ``-Laplacian``; it is only meaningful for
    ``q = delta_ij delta_kh`` and exists to cross-check the general path.
    """
    alpha0 = certify(qt)
    ops = ops or MACOperators(g)
    M = pair_tensor_from_q(qt.q)
    M = 0.5 * (M + M.T)
    L = ops.diffusion_matrix(M)
    solver = LinearSolve(g, L, method=method, tol=tol)
    traj = run_projection(g, L, forcing, solver, ops=ops, convection=convection, u_init=u_init,
                          steady_forcing=getattr(forcing, "steady", False))
    return MacroState(traj, qt, {"alpha0": alpha0, "method": method, "tol": tol})


# -------------------------------------------------------------------- darcy

class DarcyOperator:
    """Cell-centred anisotropic Neumann operator and its flux map.

    Normal fluxes use two-point differences on interior faces; the
    off-diagonal part of ``Kt`` is carried by corner gradients at interior
    corners, each corner handing half of its contribution to the two faces
    that meet there.  The flux through the walls is zero, and the discrete
    divergence of the flux field equals the residual of the pressure system.
    """

    def __init__(self, g: DomainGrid, Kt: np.ndarray):
        self.g = g
        self.Kt = np.asarray(Kt, dtype=float)
        nx, ny, h = g.nx, g.ny, g.h
        self.ops = MACOperators(g)
        self.Gx = self.ops.grad_p[: g.n_u]
        self.Gy = self.ops.grad_p[g.n_u:]
        # average of x-face (resp. y-face) values to interior corners (i, j), 1<=i<nx, 1<=j<ny
        I, J = np.meshgrid(np.arange(1, nx), np.arange(1, ny), indexing="ij")
        r = ((I - 1) * (ny - 1) + (J - 1)).ravel()
        nc = (nx - 1) * (ny - 1)
        Ax, Ay = _Builder(), _Builder()
        # x-faces at x = i h with y-centres j-1 and j: u index (i-1, j-1), (i-1, j)
        Ax.add(r, ((I - 1) * ny + (J - 1)).ravel(), 0.5)
        Ax.add(r, ((I - 1) * ny + J).ravel(), 0.5)
        Ay.add(r, ((I - 1) * (ny - 1) + (J - 1)).ravel(), 0.5)
        Ay.add(r, (I * (ny - 1) + (J - 1)).ravel(), 0.5)
        self.Ax = Ax.matrix((nc, g.n_u))
        self.Ay = Ay.matrix((nc, g.n_v))
        self.Cx = (self.Ax @ self.Gx).tocsr()
        self.Cy = (self.Ay @ self.Gy).tocsr()
        self.corners = (I * h, J * h)
        k11, k12, k22 = self.Kt[0, 0], 0.5 * (self.Kt[0, 1] + self.Kt[1, 0]), self.Kt[1, 1]
        self.k = (k11, k12, k22)
        S = (k11 * self.Gx.T @ self.Gx + k22 * self.Gy.T @ self.Gy
             + k12 * (self.Cx.T @ self.Cy + self.Cy.T @ self.Cx))
        self.S = S.tocsr()
        lx = (2.0 - 2.0 * np.cos(np.pi * np.arange(nx) / nx)) / h ** 2
        ly = (2.0 - 2.0 * np.cos(np.pi * np.arange(ny) / ny)) / h ** 2
        lam = k11 * lx[:, None] + k22 * ly[None, :]
        lam[0, 0] = 1.0
        inv = 1.0 / lam
        inv[0, 0] = 0.0
        self._inv = inv

    def precond(self, r):
        g = self.g
        R = sfft.dctn(r.reshape(g.nx, g.ny), type=2, norm="ortho", workers=fft_workers())
        return sfft.idctn(R * self._inv, type=2, norm="ortho", workers=fft_workers()).ravel()

    def sample(self, forcing, t):
        g = self.g
        xu, yu = g.u_faces()
        xv, yv = g.v_faces()
        f1x = forcing(xu, yu, t)[0].ravel()
        f2y = forcing(xv, yv, t)[1].ravel()
        fc = forcing(self.corners[0], self.corners[1], t)
        return f1x, f2y, fc[0].ravel(), fc[1].ravel()

    def rhs(self, fs):
        f1x, f2y, f1c, f2c = fs
        k11, k12, k22 = self.k
        # weak-form data: sum over links of Kt f . grad w ; sign matches S = G^T K G
        return (k11 * self.Gx.T @ f1x + k22 * self.Gy.T @ f2y
                + k12 * (self.Cx.T @ f2c + self.Cy.T @ f1c))

    def flux(self, p, fs):
        """Darcy velocity on interior faces, packed like a MAC velocity."""
        f1x, f2y, f1c, f2c = fs
        k11, k12, k22 = self.k
        Fx = k11 * (f1x - self.Gx @ p) + k12 * (self.Ax.T @ (f2c - self.Cy @ p))
        Fy = k22 * (f2y - self.Gy @ p) + k12 * (self.Ay.T @ (f1c - self.Cx @ p))
        return np.concatenate([Fx, Fy])


@dataclass
class DarcyState:
    grid: DomainGrid
    times: np.ndarray
    p0: np.ndarray        # (n_times, nx*ny)
    u_tilde: np.ndarray   # (n_times, n_vel)
    K: np.ndarray
    nu: float
    compatibility: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def velocity(self, n):
        return self.grid.unpack(self.u_tilde[n])


def solve_darcy(K, nu: float, forcing, g: DomainGrid, tol: float = 1e-10, max_iter: int = 5000,
                steady: bool | None = None) -> DarcyState:
    """Pressure and Darcy velocity at every time node of ``g``.

    Time-independent forcing is solved once and reused for every node.
    """
    K = np.asarray(getattr(K, "K", K), dtype=float)
    if K.shape != (2, 2) or abs(K[0, 1] - K[1, 0]) > 1e-12 * max(1.0, np.abs(K).max()):
        raise NotSPD("K must be a symmetric 2x2 matrix")
    if np.linalg.eigvalsh(K).min() <= 0:
        raise NotSPD(f"K is not positive definite: eigenvalues {np.linalg.eigvalsh(K)}")
    if not nu > 0:
        raise ValueError("nu must be positive")
    op = DarcyOperator(g, K / nu)
    steady = getattr(forcing, "steady", False) if steady is None else steady
    proj = lambda v: v - v.mean()
    P, U, compat, iters = [], [], [], []
    cache = None
    for t in g.times:
        if steady and cache is not None:
            p, u, c, it = cache
        else:
            fs = op.sample(forcing, t)
            b = op.rhs(fs)
            c = abs(float(np.sum(b))) / max(float(np.sum(np.abs(b))), 1e-300)
            if c > 1e-10:
                raise CompatibilityViolated(f"Neumann data fail solvability by {c:.3e}")
            res = pcg(lambda v: op.S @ v, b, precond=op.precond, project=proj, tol=tol,
                      max_iter=max_iter, error=PoissonNoConvergence, what="Darcy pressure")
            p = proj(res.x)
            u = op.flux(p, fs)
            it = res.iterations
            cache = (p, u, c, it)
        P.append(p)
        U.append(u)
        compat.append(c)
        iters.append(it)
    return DarcyState(g, g.times.copy(), np.array(P), np.array(U), K, nu, compat, iters,
                      {"tol": tol})


# ---------------------------------------------------------------- correctors

@dataclass
class CorrectorExpansion:
    """First-order corrector ``u1(x, t, y) = sum_ik coef[i][k](x, t) chi_ik(y)``.

    ``coef`` has shape ``(n_times, 2, 2, nx, ny)`` and holds ``-d_i u0^k`` at
    cell centres.
    """

    coef: np.ndarray
    correctors: object
    grid: DomainGrid

    def active_pairs(self, tol=0.0):
        out = []
        for i in range(2):
            for k in range(2):
                c = self.correctors.chi[i][k]
                if np.max(np.abs(c)) > tol and np.max(np.abs(self.coef[:, i, k])) > 0:
                    out.append((i + 1, k + 1))
        return out


def velocity_gradients(ops: MACOperators, w: np.ndarray, at: str = "center") -> np.ndarray:
    """All four ``d_i u^k`` as an array ``(2, 2, ...)`` indexed ``[i, k]``.

    ``at="center"`` gives cell-centre values (corner quantities averaged to
    the centre); ``at="corner"`` gives corner values (centre quantities
    averaged over the adjacent cells).
    """
    g = ops.g
    nx, ny = g.nx, g.ny
    gc = (ops.grad_center @ w).reshape(2, nx, ny)
    gn = (ops.grad_corner @ w).reshape(2, nx + 1, ny + 1)
    out_shape = (nx, ny) if at == "center" else (nx + 1, ny + 1)
    G = np.empty((2, 2) + out_shape)
    if at == "center":
        S = ops.corner_to_cell
        G[0, 0], G[1, 1] = gc[0], gc[1]
        G[1, 0] = (S @ gn[0].ravel()).reshape(nx, ny)
        G[0, 1] = (S @ gn[1].ravel()).reshape(nx, ny)
    elif at == "corner":
        S = ops.corner_to_cell
        cnt = np.asarray(S.sum(axis=0)).ravel() * 4.0
        avg = lambda c: ((S.T @ c.ravel()) * 4.0 / cnt).reshape(nx + 1, ny + 1)
        G[0, 0], G[1, 1] = avg(gc[0]), avg(gc[1])
        G[1, 0], G[0, 1] = gn[0], gn[1]
    else:
        raise ValueError("at must be 'center' or 'corner'")
    return G


def reconstruct_corrector(ms: MacroState, C) -> CorrectorExpansion:
    g = ms.grid
    ops = MACOperators(g)
    coef = np.empty((ms.u0.shape[0], 2, 2, g.nx, g.ny))
    for n in range(ms.u0.shape[0]):
        coef[n] = -velocity_gradients(ops, ms.u0[n], "center")
    if getattr(C, "chi", None) is None:
        raise GridMismatch("corrector set is missing fields")
    return CorrectorExpansion(coef, C, g)
