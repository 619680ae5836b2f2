"""Staggered (MAC) calculus on a rectangle with homogeneous no-slip walls.

Layout on a :class:`~sigmahomog.grid.DomainGrid` with ``nx x ny`` square cells:

* pressure at cell centres, shape ``(nx, ny)``;
* first velocity component on interior x-faces, shape ``(nx-1, ny)``;
* second component on interior y-faces, shape ``(nx, ny-1)``.

Velocity gradients are formed where they are naturally centred: the normal
derivatives ``d1 u1`` and ``d2 u2`` at cell centres, the shear derivatives
``d2 u1`` and ``d1 u2`` at cell corners.  Tangential no-slip enters through
the antisymmetric ghost value, so a wall corner carries ``2 u / h``.

A fourth-order diffusion tensor is stored as a 4x4 matrix ``M[p, q]`` over
gradient pairs ``p = (i, k)`` meaning ``d_i u^k``, ordered
``(1,1), (1,2), (2,1), (2,2)``.  The discrete energy is

    sum_cells  g_c^T M_cc g_c  +  sum_corners  w  g_n^T M_nn g_n
    + 2 sum_cells  g_c^T M_cn (S g_n)

with centre gradients ``g_c = (d1u1, d2u2)``, corner gradients
``g_n = (d2u1, d1u2)``, ``w`` the fraction of the dual cell inside the domain
and ``S`` the cell average of the four corner values.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp

from .errors import PoissonNoConvergence
from .grid import DomainGrid, fft_workers

# gradient-pair indices (0-based) stored at centres and at corners
CENTER_PAIRS = (0, 3)   # d1 u1, d2 u2
CORNER_PAIRS = (2, 1)   # d2 u1, d1 u2


def _diag(x):
    return sp.diags(np.ravel(x), 0, format="csr")


class _Builder:
    """Accumulate COO triplets from index arrays."""

    def __init__(self):
        self.r, self.c, self.v = [], [], []

    def add(self, rows, cols, vals):
        rows = np.ravel(rows)
        self.r.append(rows)
        self.c.append(np.ravel(cols))
        self.v.append(np.broadcast_to(vals, np.shape(rows)).ravel() if np.ndim(vals) == 0
                      else np.ravel(vals))

    def matrix(self, shape):
        if not self.r:
            return sp.csr_matrix(shape)
        return sp.csr_matrix((np.concatenate(self.v).astype(float),
                              (np.concatenate(self.r), np.concatenate(self.c))), shape=shape)


class MACOperators:
    """Sparse difference operators for one :class:`DomainGrid`."""

    def __init__(self, g: DomainGrid):
        self.g = g
        self.h = g.h
        nx, ny = g.nx, g.ny
        self.nx, self.ny = nx, ny
        self.n_u, self.n_v, self.n_vel = g.n_u, g.n_v, g.n_vel
        self.n_p = nx * ny
        self.n_corner = (nx + 1) * (ny + 1)

    # index helpers -------------------------------------------------------
    def iu(self, i, j):
        return i * self.ny + j

    def iv(self, i, j):
        return self.n_u + i * (self.ny - 1) + j

    def ip(self, i, j):
        return i * self.ny + j

    def ic(self, i, j):
        return i * (self.ny + 1) + j

    # operators -----------------------------------------------------------
    @cached_property
    def grad_center(self) -> sp.csr_matrix:
        """Rows ``[d1u1 ; d2u2]`` at cell centres, shape ``(2 n_p, n_vel)``."""
        nx, ny, h = self.nx, self.ny, self.h
        I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        r = self.ip(I, J)
        B = _Builder()
        m = I < nx - 1
        B.add(r[m], self.iu(I[m], J[m]), 1 / h)
        m = I > 0
        B.add(r[m], self.iu(I[m] - 1, J[m]), -1 / h)
        m = J < ny - 1
        B.add(self.n_p + r[m], self.iv(I[m], J[m]), 1 / h)
        m = J > 0
        B.add(self.n_p + r[m], self.iv(I[m], J[m] - 1), -1 / h)
        return B.matrix((2 * self.n_p, self.n_vel))

    @cached_property
    def grad_corner(self) -> sp.csr_matrix:
        """Rows ``[d2u1 ; d1u2]`` at all corners, shape ``(2 n_corner, n_vel)``.

        Corners where the derivative vanishes identically (tangential
        derivative of a zero wall value) have empty rows.
        """
        nx, ny, h = self.nx, self.ny, self.h
        B = _Builder()
        # d2 u1: u at (i-1, j) above the corner and (i-1, j-1) below; ghost = -interior
        I, J = np.meshgrid(np.arange(1, nx), np.arange(ny + 1), indexing="ij")
        r = self.ic(I, J)
        up = np.minimum(J, ny - 1)
        B.add(r, self.iu(I - 1, up), np.where(J < ny, 1 / h, -1 / h))
        dn = np.maximum(J - 1, 0)
        B.add(r, self.iu(I - 1, dn), np.where(J > 0, -1 / h, 1 / h))
        # d1 u2
        I, J = np.meshgrid(np.arange(nx + 1), np.arange(1, ny), indexing="ij")
        r = self.n_corner + self.ic(I, J)
        rt = np.minimum(I, nx - 1)
        B.add(r, self.iv(rt, J - 1), np.where(I < nx, 1 / h, -1 / h))
        lf = np.maximum(I - 1, 0)
        B.add(r, self.iv(lf, J - 1), np.where(I > 0, -1 / h, 1 / h))
        return B.matrix((2 * self.n_corner, self.n_vel))

    @cached_property
    def corner_weight(self) -> np.ndarray:
        """Fraction of each corner's dual cell lying inside the domain."""
        wx = np.ones(self.nx + 1)
        wx[[0, -1]] = 0.5
        wy = np.ones(self.ny + 1)
        wy[[0, -1]] = 0.5
        return np.outer(wx, wy)

    @cached_property
    def corner_to_cell(self) -> sp.csr_matrix:
        I, J = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")
        r = self.ip(I, J)
        B = _Builder()
        for a in (0, 1):
            for b in (0, 1):
                B.add(r, self.ic(I + a, J + b), 0.25)
        return B.matrix((self.n_p, self.n_corner))

    @cached_property
    def div(self) -> sp.csr_matrix:
        """Discrete divergence, faces -> cell centres."""
        gc = self.grad_center
        return (gc[: self.n_p] + gc[self.n_p:]).tocsr()

    @cached_property
    def grad_p(self) -> sp.csr_matrix:
        """Pressure gradient, cell centres -> interior faces; equals ``-div^T``."""
        return (-self.div.T).tocsr()

    # central differences and interpolation used by the convection term -----
    @cached_property
    def _convection_parts(self):
        nx, ny, h = self.nx, self.ny, self.h
        N = self.n_vel
        c = 0.5 / h
        D1, D2, X = _Builder(), _Builder(), _Builder()

        # u block: nodal along x (zero beyond the walls), ghost-reflected along y
        I, J = np.meshgrid(np.arange(nx - 1), np.arange(ny), indexing="ij")
        r = self.iu(I, J)
        m = I + 1 < nx - 1
        D1.add(r[m], self.iu(I[m] + 1, J[m]), c)
        m = I > 0
        D1.add(r[m], self.iu(I[m] - 1, J[m]), -c)
        D2.add(r, self.iu(I, np.minimum(J + 1, ny - 1)), np.where(J + 1 < ny, c, -c))
        D2.add(r, self.iu(I, np.maximum(J - 1, 0)), np.where(J > 0, -c, c))
        for a in (0, 1):
            for b in (-1, 0):
                m = (J + b >= 0) & (J + b < ny - 1)
                X.add(r[m], self.iv(I[m] + a, J[m] + b), 0.25)

        # v block: ghost-reflected along x, nodal along y
        I, J = np.meshgrid(np.arange(nx), np.arange(ny - 1), indexing="ij")
        r = self.iv(I, J)
        D1.add(r, self.iv(np.minimum(I + 1, nx - 1), J), np.where(I + 1 < nx, c, -c))
        D1.add(r, self.iv(np.maximum(I - 1, 0), J), np.where(I > 0, -c, c))
        m = J + 1 < ny - 1
        D2.add(r[m], self.iv(I[m], J[m] + 1), c)
        m = J > 0
        D2.add(r[m], self.iv(I[m], J[m] - 1), -c)
        for a in (-1, 0):
            for b in (0, 1):
                m = (I + a >= 0) & (I + a < nx - 1)
                X.add(r[m], self.iu(I[m] + a, J[m] + b), 0.25)

        own1 = np.concatenate([np.ones(self.n_u), np.zeros(self.n_v)])
        return D1.matrix((N, N)), D2.matrix((N, N)), X.matrix((N, N)), own1, 1.0 - own1

    def advecting_velocity(self, w):
        D1, D2, cross, own1, own2 = self._convection_parts
        cw = cross @ w
        c1 = own1 * w + own2 * cw
        c2 = own2 * w + own1 * cw
        return c1, c2

    def convection_matrix(self, w) -> sp.csr_matrix:
        """Skew-symmetric convection operator ``N(w)`` so that ``v . N(w) v = 0``."""
        D1, D2, *_ = self._convection_parts
        c1, c2 = self.advecting_velocity(w)
        C = _diag(c1) @ D1 + _diag(c2) @ D2
        return (0.5 * (C - C.T)).tocsr()

    def convect(self, w, v=None) -> np.ndarray:
        v = w if v is None else v
        return self.convection_matrix(w) @ v

    def trilinear(self, u, v, w) -> float:
        """``b(u, v, w) = integral of w . (u . grad) v`` in skew form."""
        return float(self.h ** 2 * np.dot(w, self.convect(u, v)))

    # diffusion -----------------------------------------------------------
    def diffusion_matrix(self, M_center, M_corner=None) -> sp.csr_matrix:
        """Strong-form diffusion operator for a pair tensor ``M``.

        ``M_center`` has shape ``(4, 4)`` or ``(4, 4, nx, ny)``; ``M_corner``
        has shape ``(4, 4)`` or ``(4, 4, nx+1, ny+1)`` and defaults to
        ``M_center`` when that is constant.  The result is the Hessian of the
        discrete energy divided by ``h^2``, symmetric whenever ``M`` is.
        """
        nx, ny = self.nx, self.ny
        Mc = np.asarray(M_center, dtype=float)
        if Mc.shape == (4, 4):
            Mc = np.broadcast_to(Mc[:, :, None, None], (4, 4, nx, ny))
        if M_corner is None:
            if np.ptp(Mc.reshape(16, -1), axis=1).max() > 0:
                raise ValueError("corner coefficients are required for a variable tensor")
            Mn = np.broadcast_to(Mc[:, :, :1, :1], (4, 4, nx + 1, ny + 1))
        else:
            Mn = np.asarray(M_corner, dtype=float)
            if Mn.shape == (4, 4):
                Mn = np.broadcast_to(Mn[:, :, None, None], (4, 4, nx + 1, ny + 1))
        Gc, Gn, S = self.grad_center, self.grad_corner, self.corner_to_cell
        w = self.corner_weight.ravel()

        def block(M, a, b):
            return M[a, b].ravel()

        Mcc = sp.bmat([[_diag(block(Mc, p, q)) for q in CENTER_PAIRS] for p in CENTER_PAIRS], format="csr")
        Mnn = sp.bmat([[_diag(w * block(Mn, p, q)) for q in CORNER_PAIRS] for p in CORNER_PAIRS], format="csr")
        SS = sp.block_diag([S, S], format="csr")
        Mcn = sp.bmat([[_diag(block(Mc, p, q)) for q in CORNER_PAIRS] for p in CENTER_PAIRS], format="csr")
        cross = Gc.T @ Mcn @ SS @ Gn
        L = Gc.T @ Mcc @ Gc + Gn.T @ Mnn @ Gn + cross + cross.T
        return L.tocsr()

    def energy(self, M_center, u, M_corner=None) -> float:
        L = self.diffusion_matrix(M_center, M_corner)
        return float(self.h ** 2 * u @ (L @ u))


def pair_tensor_from_q(q: np.ndarray) -> np.ndarray:
    """4x4 matrix ``M[(i,k), (j,h)] = q[i, j, k, h]`` (0-based, lexicographic pairs)."""
    q = np.asarray(q, dtype=float)
    M = np.empty((4, 4))
    for i in range(2):
        for k in range(2):
            for j in range(2):
                for hh in range(2):
                    M[2 * i + k, 2 * j + hh] = q[i, j, k, hh]
    return M


def pair_tensor_from_matrix(a11, a12, a21, a22):
    """Pair tensor of the diagonal-acting operator ``-div(a grad)``: ``a_ij delta_kh``."""
    a = [[a11, a12], [a21, a22]]
    shape = np.broadcast(a11, a12, a21, a22).shape
    M = np.zeros((4, 4) + shape)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                M[2 * i + k, 2 * j + k] = a[i][j]
    return M


# --------------------------------------------------------------- fast solvers

class NeumannPoisson:
    """Exact solver for ``div grad phi = r`` with zero-flux walls (DCT-II)."""

    def __init__(self, g: DomainGrid):
        self.g = g
        h = g.h
        lx = (2.0 - 2.0 * np.cos(np.pi * np.arange(g.nx) / g.nx)) / h ** 2
        ly = (2.0 - 2.0 * np.cos(np.pi * np.arange(g.ny) / g.ny)) / h ** 2
        lam = lx[:, None] + ly[None, :]
        lam[0, 0] = 1.0
        self._inv = 1.0 / lam
        self._inv[0, 0] = 0.0

    def solve(self, rhs: np.ndarray, check=None, tol=1e-10) -> np.ndarray:
        """Zero-mean ``phi`` with ``-div grad phi = rhs - mean(rhs)``."""
        r = np.asarray(rhs, dtype=float).reshape(self.g.nx, self.g.ny)
        R = sfft.dctn(r, type=2, norm="ortho", workers=fft_workers())
        phi = sfft.idctn(R * self._inv, type=2, norm="ortho", workers=fft_workers())
        phi = phi - phi.mean()
        if check is not None:
            res = check(phi.ravel()) - (r - r.mean()).ravel()
            scale = max(np.linalg.norm(r), 1e-300)
            if np.linalg.norm(res) > tol * scale * 1e3:
                raise PoissonNoConvergence(
                    f"pressure Poisson residual {np.linalg.norm(res) / scale:.3e} too large")
        return phi.ravel()


class DirichletHelmholtz:
    """Exact inverse of ``sigma I + nu (-Laplacian)`` on the MAC velocity spaces.

    Each velocity block is diagonalized by sine transforms: DST-I along the
    axis where unknowns sit on nodes, DST-II along the axis where they sit at
    cell-centred positions with antisymmetric ghosts.
    """

    def __init__(self, g: DomainGrid, sigma: float, nu: float = 1.0):
        self.g = g
        h = g.h
        nx, ny = g.nx, g.ny
        node = lambda n: (2.0 - 2.0 * np.cos(np.pi * np.arange(1, n) / n)) / h ** 2
        cent = lambda n: (2.0 - 2.0 * np.cos(np.pi * np.arange(1, n + 1) / n)) / h ** 2
        self._inv_u = 1.0 / (sigma + nu * (node(nx)[:, None] + cent(ny)[None, :]))
        self._inv_v = 1.0 / (sigma + nu * (cent(nx)[:, None] + node(ny)[None, :]))

    def __call__(self, w: np.ndarray) -> np.ndarray:
        g = self.g
        u, v = g.unpack(w)
        wk = fft_workers()
        U = sfft.dst(sfft.dst(u, type=1, axis=0, norm="ortho", workers=wk), type=2, axis=1, norm="ortho", workers=wk)
        u = sfft.idst(sfft.idst(U * self._inv_u, type=2, axis=1, norm="ortho", workers=wk),
                      type=1, axis=0, norm="ortho", workers=wk)
        V = sfft.dst(sfft.dst(v, type=2, axis=0, norm="ortho", workers=wk), type=1, axis=1, norm="ortho", workers=wk)
        v = sfft.idst(sfft.idst(V * self._inv_v, type=1, axis=1, norm="ortho", workers=wk),
                      type=2, axis=0, norm="ortho", workers=wk)
        return g.pack(u, v)
