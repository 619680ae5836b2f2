"""Incremental pressure-correction time stepping on the MAC grid.

One backward-Euler step from ``(u^n, p^n)``:

    (I/dt + L) u* = u^n/dt + f^{n+1} - N(u^n) u^n - G p^n
    -D G phi = -D u* / dt          (zero-flux walls, zero-mean phi)
    u^{n+1} = u* - dt G phi,   p^{n+1} = p^n + phi

``L`` is any symmetric positive diffusion(-plus-penalty) operator and
``N(w)`` the skew-symmetric convection operator, applied explicitly.

``scheme="coupled"`` instead solves the saddle-point system

    (I/dt + L) u^{n+1} + G p^{n+1} = u^n/dt + f^{n+1} - N(u^n) u^n,   D u^{n+1} = 0

with one sparse factorization.  With a stiff penalty in ``L`` the
incremental correction relaxes the pressure at a rate close to
``1 - dt^{-1} / max(L)`` per step, so a stiff obstacle term needs this form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CFLViolation
from .grid import DomainGrid
from .linalg import pcg
from .staggered import DirichletHelmholtz, MACOperators, NeumannPoisson

CFL_LIMIT = 0.5


@dataclass
class Trajectory:
    grid: DomainGrid
    times: np.ndarray
    u: np.ndarray       # (nt+1, n_vel) packed face velocities
    p: np.ndarray       # (nt+1, nx*ny) zero-mean pressure
    diagnostics: list = field(default_factory=list)

    def velocity(self, n: int):
        return self.grid.unpack(self.u[n])

    def pressure(self, n: int) -> np.ndarray:
        return self.p[n].reshape(self.grid.nx, self.grid.ny)

    def energies(self) -> np.ndarray:
        h2 = self.grid.h ** 2
        return 0.5 * h2 * np.sum(self.u * self.u, axis=1)


def sample_forcing(g: DomainGrid, forcing, t: float) -> np.ndarray:
    return g.sample_vector(lambda x, y, tt: forcing(x, y, tt), t)


class LinearSolve:
    """Solver for ``(I/dt + L) x = b`` chosen at construction."""

    def __init__(self, g: DomainGrid, L: sp.spmatrix, method: str = "direct", tol: float = 1e-10,
                 max_iter: int = 2000, precond_nu: float = 1.0, reference_nu: float | None = None):
        self.g = g
        self.method = method
        self.tol = tol
        self.max_iter = max_iter
        sigma = 1.0 / g.dt
        if method == "direct":
            A = (sigma * sp.identity(g.n_vel, format="csr") + L).tocsc()
            self._lu = spla.splu(A)
        elif method == "pcg":
            self._A = (sigma * sp.identity(g.n_vel, format="csr") + L).tocsr()
            self._M = DirichletHelmholtz(g, sigma, precond_nu)
        elif method == "reference":
            # exact sine-transform solve for nu * (-Laplacian); L is not used
            self._H = DirichletHelmholtz(g, sigma, 1.0 if reference_nu is None else reference_nu)
        else:
            raise ValueError(f"unknown linear solver {method!r}")
        self.L = L

    def __call__(self, b, x0=None):
        if self.method == "direct":
            return self._lu.solve(b), 0
        if self.method == "reference":
            return self._H(b), 0
        res = pcg(lambda v: self._A @ v, b, x0=x0, precond=self._M, tol=self.tol,
                  max_iter=self.max_iter, what="implicit diffusion")
        return res.x, res.iterations


class CoupledStep:
    """Direct solve of the velocity-pressure system of one backward-Euler step.

    The pressure is pinned in the first cell (replacing one redundant
    continuity row) and shifted to zero mean afterwards.
    """

    def __init__(self, g: DomainGrid, L: sp.spmatrix, ops: MACOperators):
        self.g = g
        self.L = L
        nv, npr = g.n_vel, ops.n_p
        A = sp.identity(nv, format="csr") / g.dt + L
        D = ops.div.tolil()
        D[0, :] = 0.0
        pin = sp.csr_matrix(([1.0], ([0], [0])), shape=(npr, npr))
        K = sp.bmat([[A, ops.grad_p], [D.tocsr(), pin]], format="csc")
        self._lu = spla.splu(K)
        self.nv = nv

    def __call__(self, b):
        z = np.concatenate([b, np.zeros(self.g.nx * self.g.ny)])
        x = self._lu.solve(z)
        p = x[self.nv:]
        return x[: self.nv], p - p.mean()


def run_projection(g: DomainGrid, L: sp.spmatrix, forcing, solver: LinearSolve | None,
                   ops: MACOperators | None = None, convection: bool = True, u_init=None,
                   check_cfl: bool = True, steady_forcing: bool = False,
                   scheme: str = "projection") -> Trajectory:
    ops = ops or MACOperators(g)
    if scheme not in ("projection", "coupled"):
        raise ValueError(f"unknown time-stepping scheme {scheme!r}")
    coupled = CoupledStep(g, L, ops) if scheme == "coupled" else None
    dt, h = g.dt, g.h
    poisson = NeumannPoisson(g)
    D, G = ops.div, ops.grad_p
    h2 = h * h
    u = np.zeros(g.n_vel) if u_init is None else np.array(u_init, dtype=float)
    p = np.zeros(ops.n_p)
    U = np.empty((g.nt + 1, g.n_vel))
    Pr = np.empty((g.nt + 1, ops.n_p))
    U[0], Pr[0] = u, p
    diags = [{"step": 0, "t": 0.0, "energy": 0.5 * h2 * float(u @ u),
              "div_norm": float(np.max(np.abs(D @ u))) if u.size else 0.0,
              "pressure_mean": 0.0, "energy_residual": 0.0, "iterations": 0}]
    f_cached = None
    for n in range(g.nt):
        t1 = g.times[n + 1]
        umax = float(np.max(np.abs(u))) if u.size else 0.0
        cfl = dt * umax / h
        if check_cfl and cfl > CFL_LIMIT:
            raise CFLViolation(f"step {n + 1}: dt*max|u|/h = {cfl:.3f} exceeds {CFL_LIMIT}")
        if steady_forcing and f_cached is not None:
            f = f_cached
        else:
            f = sample_forcing(g, forcing, t1)
            f_cached = f
        Nu = ops.convect(u) if convection else np.zeros_like(u)
        if coupled is not None:
            unew, pnew = coupled(u / dt + f - Nu)
            ustar, Gp, iters = unew, G @ pnew, 0
        else:
            Gp = G @ p
            rhs = u / dt + f - Nu - Gp
            ustar, iters = solver(rhs, x0=u)
            phi = poisson.solve(-(D @ ustar) / dt)
            unew = ustar - dt * (G @ phi)
            pnew = p + phi
            pnew -= pnew.mean()
        # discrete energy balance of the momentum step tested with u*
        Lu = L @ ustar
        terms = ((ustar @ ustar - u @ u + (ustar - u) @ (ustar - u)) / (2 * dt),
                 ustar @ Lu, ustar @ Nu, ustar @ Gp, -(ustar @ f))
        eres = abs(sum(terms)) / max(sum(abs(x) for x in terms), 1e-300)
        u, p = unew, pnew
        U[n + 1], Pr[n + 1] = u, p
        diags.append({"step": n + 1, "t": float(t1), "energy": 0.5 * h2 * float(u @ u),
                      "div_norm": float(np.max(np.abs(D @ u))),
                      "pressure_mean": float(np.mean(p)), "energy_residual": float(eres),
                      "iterations": int(iters), "cfl": cfl})
    return Trajectory(g, g.times.copy(), U, Pr, diags)
