"""Direct simulation of the fine-scale problems and estimate audits.

* oscillating coefficients: ``du/dt - div(a(x/eps) grad u) + (u.grad)u + grad p = f``;
* perforated domain: ``du/dt - nu Lap u + (u.grad)u + grad p = f`` in the
  fluid part, with the obstacles ``eps (k + Y_s)`` lying inside the domain
  realized by the volume penalty ``(nu/eta) 1_solid u``.

Both share the projection stepper of :mod:`sigmahomog.stepping`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import UnresolvedScale
from .grid import DomainGrid
from .staggered import DirichletHelmholtz, MACOperators, pair_tensor_from_matrix
from .stepping import LinearSolve, Trajectory, run_projection

MIN_CELLS_PER_PERIOD = 16
MIN_CELLS_PER_INCLUSION = 8


@dataclass
class EpsState:
    epsilon: float
    kind: str  # "oscillating" or "porous"
    traj: Trajectory
    meta: dict = field(default_factory=dict)

    @property
    def grid(self) -> DomainGrid:
        return self.traj.grid

    @property
    def u(self) -> np.ndarray:
        return self.traj.u

    @property
    def p(self) -> np.ndarray:
        return self.traj.p


def _coefficient_tensors(gen, eps, g: DomainGrid):
    xc, yc = g.centers()
    xn, yn = g.corners()
    c11, c12, c22 = gen(xc / eps, yc / eps)
    n11, n12, n22 = gen(xn / eps, yn / eps)
    return pair_tensor_from_matrix(c11, c12, c12, c22), pair_tensor_from_matrix(n11, n12, n12, n22)


def oscillating_operator(gen, eps: float, g: DomainGrid, ops: MACOperators | None = None):
    """Diffusion matrix of ``-div(a(x/eps) grad)`` acting on each component."""
    ops = ops or MACOperators(g)
    Mc, Mn = _coefficient_tensors(gen, eps, g)
    return ops.diffusion_matrix(Mc, Mn), Mc


def solve_eps_oscillating(gen, epsilon: float, forcing, g: DomainGrid, tol: float = 1e-10,
                          method: str = "pcg", u_init=None, ops: MACOperators | None = None,
                          max_iter: int = 2000) -> EpsState:
    """Fine-scale trajectory with coefficients sampled at centres and corners."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    need = MIN_CELLS_PER_PERIOD / epsilon
    if min(g.nx / g.lx, g.ny / g.ly) < need - 1e-9:
        raise UnresolvedScale(f"{g.nx} cells per unit length, need >= {need:g} for eps = {epsilon:g}")
    ops = ops or MACOperators(g)
    L, Mc = oscillating_operator(gen, epsilon, g, ops)
    abar = float(np.mean(0.5 * (Mc[0, 0] + Mc[3, 3])))
    solver = LinearSolve(g, L, method=method, tol=tol, max_iter=max_iter, precond_nu=abar)
    traj = run_projection(g, L, forcing, solver, ops=ops, u_init=u_init,
                          steady_forcing=getattr(forcing, "steady", False))
    its = [d["iterations"] for d in traj.diagnostics[1:]]
    return EpsState(epsilon, "oscillating", traj,
                    {"method": method, "tol": tol, "max_iterations": max(its) if its else 0})


# ------------------------------------------------------------------ porous

def obstacle_copies(desc, eps: float, g: DomainGrid) -> list:
    """Lattice indices ``k`` whose obstacle ``eps (k + Y_s)`` lies inside the domain."""
    if desc.empty:
        return []
    y1a, y1b, y2a, y2b = desc.bounding_box()
    out = []
    kx = range(int(math.floor(-1 / eps)) - 1, int(math.ceil(g.lx / eps)) + 2)
    ky = range(int(math.floor(-1 / eps)) - 1, int(math.ceil(g.ly / eps)) + 2)
    for a in kx:
        if not (eps * (a + y1a) > 0 and eps * (a + y1b) < g.lx):
            continue
        for b in ky:
            if eps * (b + y2a) > 0 and eps * (b + y2b) < g.ly:
                out.append((a, b))
    return out


def solid_indicator(desc, eps: float, g: DomainGrid, x, y) -> np.ndarray:
    """Points of the domain inside one of the interior obstacle copies."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if desc.empty:
        return np.zeros(np.broadcast(x, y).shape, dtype=bool)
    copies = set(obstacle_copies(desc, eps, g))
    k1 = np.rint(x / eps).astype(int)
    k2 = np.rint(y / eps).astype(int)
    inside = desc.solid(x / eps - k1, y / eps - k2)
    keep = np.zeros_like(inside)
    for idx in zip(*np.nonzero(inside)):
        keep[idx] = (int(k1[idx]), int(k2[idx])) in copies
    return keep


def face_solid_mask(desc, eps: float, g: DomainGrid) -> np.ndarray:
    (xu, yu), (xv, yv) = g.u_faces(), g.v_faces()
    return np.concatenate([solid_indicator(desc, eps, g, xu, yu).ravel(),
                           solid_indicator(desc, eps, g, xv, yv).ravel()])


def solve_eps_porous(desc, epsilon: float, nu: float, forcing, g: DomainGrid, tol: float = 1e-10,
                     eta: float | None = None, method: str = "direct", u_init=None,
                     ops: MACOperators | None = None, scheme: str = "coupled") -> EpsState:
    """Penalized trajectory in the perforated domain (``eta`` defaults to ``h^2``).

    The stiff obstacle term makes the incremental pressure correction relax
    far too slowly, so the default steps the coupled velocity-pressure system.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if not nu > 0:
        raise ValueError("nu must be positive")
    h = g.h
    if not desc.empty and desc.diameter * epsilon / h < MIN_CELLS_PER_INCLUSION - 1e-9:
        raise UnresolvedScale(
            f"inclusion spans {desc.diameter * epsilon / h:.2f} cells, need >= {MIN_CELLS_PER_INCLUSION}")
    eta = h * h if eta is None else float(eta)
    ops = ops or MACOperators(g)
    L = nu * ops.diffusion_matrix(np.eye(4))
    mask = face_solid_mask(desc, epsilon, g)
    if mask.any():
        L = (L + sp.diags(mask * (nu / eta), 0, format="csr")).tocsr()
    solver = None if scheme == "coupled" else LinearSolve(g, L, method=method, tol=tol, precond_nu=nu)
    traj = run_projection(g, L, forcing, solver, ops=ops, u_init=u_init,
                          steady_forcing=getattr(forcing, "steady", False), scheme=scheme)
    solid_max = float(np.max(np.abs(traj.u[:, mask]))) if mask.any() else 0.0
    return EpsState(epsilon, "porous", traj,
                    {"method": method if scheme != "coupled" else "coupled", "tol": tol, "eta": eta, "nu": nu, "mask": mask,
                     "copies": len(obstacle_copies(desc, epsilon, g)), "solid_max": solid_max})


# ------------------------------------------------------------------ audits

@dataclass
class EstimateAudit:
    u_L2Q: float
    grad_L2Q: float
    p_L2Q: float
    dudt_Hm1: float
    W_proxy: float
    friedrichs_ratio: float | None = None
    C_u: float | None = None
    C_grad: float | None = None

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def time_l2(values: np.ndarray, dt: float) -> float:
    """``sqrt(dt * sum_{n>=1} values_n)`` for squared per-step norms (right-endpoint rule)."""
    return float(math.sqrt(dt * float(np.sum(values[1:]))))


def audit_estimates(s: EpsState, forcing=None) -> EstimateAudit:
    g = s.grid
    ops = MACOperators(g)
    h2 = g.h ** 2
    U, P = s.u, s.p
    L = ops.diffusion_matrix(np.eye(4))
    u2 = h2 * np.sum(U * U, axis=1)
    g2 = h2 * np.einsum("ij,ij->i", U, (L @ U.T).T)
    p2 = h2 * np.sum(P * P, axis=1)
    inv_lap = DirichletHelmholtz(g, 0.0, 1.0)
    dU = np.diff(U, axis=0) / g.dt
    d2 = np.concatenate([[0.0], [h2 * float(w @ inv_lap(w)) for w in dU]])
    u_n, g_n, p_n, d_n = (time_l2(x, g.dt) for x in (u2, np.maximum(g2, 0.0), p2, d2))
    audit = EstimateAudit(u_n, g_n, p_n, d_n, math.sqrt(g_n ** 2 + d_n ** 2))
    if s.kind == "porous":
        eps = s.epsilon
        audit.friedrichs_ratio = u_n / (eps * g_n) if g_n > 0 else 0.0
        audit.C_u = u_n / eps ** 2
        audit.C_grad = g_n / eps
    return audit


# --------------------------------------------------------- Ladyzhenskaya

def _node_norms(v, h):
    """Discrete L2, L4 and gradient norms of a node field with zero boundary."""
    full = np.pad(v, 1)
    l2 = math.sqrt(h * h * float(np.sum(full ** 2)))
    l4 = (h * h * float(np.sum(full ** 4))) ** 0.25
    gx = np.diff(full, axis=0) / h
    gy = np.diff(full, axis=1) / h
    gr = math.sqrt(h * h * (float(np.sum(gx ** 2)) + float(np.sum(gy ** 2))))
    return l2, l4, gr


def ladyzhenskaya_ratio(v: np.ndarray, h: float) -> float:
    """``||v||_4 / (2^{1/4} ||v||^{1/2} ||grad v||^{1/2})``; zero field gives 0."""
    l2, l4, gr = _node_norms(np.asarray(v, float), h)
    den = 2 ** 0.25 * math.sqrt(l2) * math.sqrt(gr)
    return 0.0 if den == 0.0 else l4 / den


def random_smooth_node_field(g: DomainGrid, rng, modes: int = 4) -> np.ndarray:
    x = g.x_nodes()[1:-1] / g.lx
    y = g.y_nodes()[1:-1] / g.ly
    c = rng.standard_normal((modes, modes)) / (1.0 + np.add.outer(np.arange(modes), np.arange(modes)))
    Sx = np.sin(np.pi * np.outer(np.arange(1, modes + 1), x))
    Sy = np.sin(np.pi * np.outer(np.arange(1, modes + 1), y))
    return Sx.T @ c @ Sy


def random_solenoidal_faces(g: DomainGrid, rng, modes: int = 3) -> np.ndarray:
    """Discretely divergence-free MAC field: the discrete curl of a random stream function."""
    xn, yn = g.x_nodes() / g.lx, g.y_nodes() / g.ly
    c = rng.standard_normal((modes, modes))
    Sx = np.sin(np.pi * np.outer(np.arange(1, modes + 1), xn))
    Sy = np.sin(np.pi * np.outer(np.arange(1, modes + 1), yn))
    psi = Sx.T @ c @ Sy  # on corners, zero on the boundary
    u = (psi[1:-1, 1:] - psi[1:-1, :-1]) / g.h
    v = -(psi[1:, 1:-1] - psi[:-1, 1:-1]) / g.h
    return g.pack(u, v)


def ladyzhenskaya_audit(g: DomainGrid, trials: int = 100, seed: int = 0) -> dict:
    """Largest ratios seen for the L4 interpolation inequality and the trilinear bound.

    The trilinear bound is ``|b(u,v,w)| <= sqrt(2) |u|^{1/2} ||u||^{1/2} ||v|| |w|^{1/2} ||w||^{1/2}``
    with ``|.|`` the L2 norm and ``||.||`` the gradient norm.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    ratios = [ladyzhenskaya_ratio(random_smooth_node_field(g, rng), g.h) for _ in range(trials)]
    ops = MACOperators(g)
    L = ops.diffusion_matrix(np.eye(4))
    h2 = g.h ** 2
    l2 = lambda w: math.sqrt(h2 * float(w @ w))
    h1 = lambda w: math.sqrt(max(h2 * float(w @ (L @ w)), 0.0))
    tri = []
    for _ in range(max(1, trials // 10)):
        u, v, w = (random_solenoidal_faces(g, rng) for _ in range(3))
        rhs = math.sqrt(2.0) * math.sqrt(l2(u) * h1(u)) * h1(v) * math.sqrt(l2(w) * h1(w))
        tri.append(abs(ops.trilinear(u, v, w)) / rhs if rhs > 0 else 0.0)
    return {"trials": trials, "seed": seed, "max_ratio": max(ratios), "ratios": ratios,
            "max_trilinear_ratio": max(tri), "slack": 1.0 + 5.0 * g.h}
