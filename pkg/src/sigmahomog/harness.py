"""Convergence studies for the two limit regimes.

Test functions are ``psi(x, y) = phi_m(x) w(y)`` with smooth compactly
supported bumps ``phi_m`` and trigonometric ``w(y) = cos/sin(2 pi k.y)``.
Space-time pairings use the face (or centre, or corner) quadrature of the
MAC grid in space and the right-endpoint rule in time, matching the audits.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .cell import SolverParams, _Spectral, solve_all_correctors, solve_permeability_correctors
from .coeff import make_disk_geometry
from .dns import audit_estimates, solve_eps_oscillating, solve_eps_porous
from .errors import GridMismatch, SolverFailure
from .grid import DomainGrid, PeriodicGrid, fourier_eval
from .io import manifest_hash, write_csv
from .macro import solve_darcy, solve_homogenized_ns, velocity_gradients
from .staggered import MACOperators
from .tensor import assemble_K, homogenized_tensor

DEFAULT_EPS = (0.25, 0.125, 0.0625)
TWO_PI = 2.0 * math.pi


# --------------------------------------------------------------- test functions

def default_modes():
    """One representative of each ``+-k`` pair in ``{0, +-1}^2``."""
    return ((0, 0), (1, 0), (0, 1), (1, 1), (1, -1))


@dataclass(frozen=True)
class TestFunctionFamily:
    """Products of bumps and Y-periodic trigonometric factors.

    ``members`` enumerates ``(m, k, part)`` with ``part`` in ``{"cos", "sin"}``;
    the sine partner of ``k = 0`` vanishes and is left out.
    """

    __test__ = False  # keep pytest from collecting this class

    centers: tuple = ((0.5, 0.5), (0.3, 0.35), (0.65, 0.7))
    radius: float = 0.3
    modes: tuple = default_modes()

    @property
    def members(self) -> list:
        out = []
        for m in range(len(self.centers)):
            for k in self.modes:
                out.append((m, tuple(k), "cos"))
                if tuple(k) != (0, 0):
                    out.append((m, tuple(k), "sin"))
        return out

    def bump(self, m: int, x, y) -> np.ndarray:
        """``(1 - r^2/R^2)^3`` inside the disk of radius R, zero outside."""
        cx, cy = self.centers[m]
        r2 = ((np.asarray(x) - cx) ** 2 + (np.asarray(y) - cy) ** 2) / self.radius ** 2
        return np.where(r2 < 1.0, (1.0 - np.minimum(r2, 1.0)) ** 3, 0.0)

    @staticmethod
    def micro(k, part, y1, y2) -> np.ndarray:
        arg = TWO_PI * (k[0] * np.asarray(y1) + k[1] * np.asarray(y2))
        return np.cos(arg) if part == "cos" else np.sin(arg)

    def __call__(self, member, x, y, eps) -> np.ndarray:
        m, k, part = member
        return self.bump(m, x, y) * self.micro(k, part, np.asarray(x) / eps, np.asarray(y) / eps)


# ------------------------------------------------------------------ quadrature

def _time_sum(series: np.ndarray, dt: float) -> np.ndarray:
    """Right-endpoint time integral of a stacked series ``(n_times, ...)``."""
    return dt * np.sum(series[1:], axis=0)


def _faces(g: DomainGrid):
    return g.u_faces(), g.v_faces()


def _pair_physical(values_t, xs, ys, weight, F: TestFunctionFamily, member, eps, dt):
    """Space-time sum with ``psi`` evaluated pointwise at every sample."""
    psi = F(member, xs, ys, eps)
    return float(dt * sum(np.sum(weight * psi * v) for v in values_t[1:]))


def _pair_modewise(values_t, x1, y1, weight, F: TestFunctionFamily, member, eps, dt):
    """The same sum built from the time-integrated field and separable 1D factors.

    ``cos(a + b) = cos a cos b - sin a sin b`` (and the sine analogue) splits
    ``w(x/eps)`` into products of one-dimensional vectors along each axis.
    """
    m, k, part = member
    X, Y = np.meshgrid(x1, y1, indexing="ij")
    W = weight * F.bump(m, X, Y) * _time_sum(np.asarray(values_t), 1.0) * dt
    ax, ay = TWO_PI * k[0] * x1 / eps, TWO_PI * k[1] * y1 / eps
    cx, sx, cy, sy = np.cos(ax), np.sin(ax), np.cos(ay), np.sin(ay)
    if part == "cos":
        return float(cx @ W @ cy - sx @ W @ sy)
    return float(sx @ W @ cy + cx @ W @ sy)


def _velocity_series(g: DomainGrid, U: np.ndarray):
    """Per-component stacks ``(n_times, nx-1, ny)`` and ``(n_times, nx, ny-1)``."""
    nu = g.n_u
    return (U[:, :nu].reshape(-1, g.nx - 1, g.ny), U[:, nu:].reshape(-1, g.nx, g.ny - 1))


def _face_axes(g: DomainGrid):
    return ((g.x_nodes()[1:-1], g.y_centers()), (g.x_centers(), g.y_nodes()[1:-1]))


def pairing_table(g: DomainGrid, U: np.ndarray, F: TestFunctionFamily, eps: float,
                  route: str = "physical", scale: float = 1.0) -> dict:
    """``S(psi e_c)`` for every member and component ``c`` of a face field series."""
    h2 = g.h ** 2
    series = _velocity_series(g, np.asarray(U) * scale)
    axes = _face_axes(g)
    out = {}
    for member in F.members:
        for c in range(2):
            x1, y1 = axes[c]
            if route == "physical":
                X, Y = np.meshgrid(x1, y1, indexing="ij")
                out[member, c] = _pair_physical(series[c], X, Y, h2, F, member, eps, g.dt)
            elif route == "modewise":
                out[member, c] = _pair_modewise(series[c], x1, y1, h2, F, member, eps, g.dt)
            else:
                raise ValueError("route must be 'physical' or 'modewise'")
    return out


def pairing_consistency(g: DomainGrid, U: np.ndarray, F: TestFunctionFamily, eps: float) -> float:
    """Largest difference between the two quadrature routes."""
    a = pairing_table(g, U, F, eps, "physical")
    b = pairing_table(g, U, F, eps, "modewise")
    return max(abs(a[k] - b[k]) for k in a)


# ------------------------------------------------------------- two-scale gaps

def _check_domain(a: DomainGrid, b: DomainGrid):
    if (a.nx, a.ny, a.lx, a.ly, a.nt, a.T) != (b.nx, b.ny, b.lx, b.ly, b.nt, b.T):
        raise GridMismatch("fine-scale and limit states live on different space-time grids")


def _centre_to_faces(g: DomainGrid, C: np.ndarray):
    """Average a centre field ``(..., nx, ny)`` to x-faces and y-faces."""
    return 0.5 * (C[..., 1:, :] + C[..., :-1, :]), 0.5 * (C[..., :, 1:] + C[..., :, :-1])


def macro_limit_series(ms, eps: float, correctors=None) -> np.ndarray:
    """``u0(x) + eps u1(x, x/eps)`` on the faces, packed, for every time node.

    ``u1^r(x, y) = -sum_ik d_i u0^k(x) chi_ik^r(y)``; without correctors only
    ``u0`` is returned.
    """
    U = np.array(ms.u0, dtype=float)
    if correctors is None:
        return U
    g = ms.grid
    ops = MACOperators(g)
    cell = correctors.grid
    axes = _face_axes(g)
    grads = np.array([velocity_gradients(ops, w, "center") for w in U])  # (n, i, k, nx, ny)
    out = U.copy()
    nu = g.n_u
    for i in range(2):
        for k in range(2):
            chi = correctors.chi[i][k]
            if not np.max(np.abs(chi)) > 0.0:
                continue
            gu, gv = _centre_to_faces(g, grads[:, i, k])
            cu = fourier_eval(chi[0], cell, axes[0][0] / eps, axes[0][1] / eps)
            cv = fourier_eval(chi[1], cell, axes[1][0] / eps, axes[1][1] / eps)
            out[:, :nu] -= eps * (gu * cu).reshape(len(U), -1)
            out[:, nu:] -= eps * (gv * cv).reshape(len(U), -1)
    return out


def darcy_limit_series(ds, eps: float, correctors, forcing) -> np.ndarray:
    """``u0(x, x/eps) = sum_j chi_j(x/eps) (f - grad p0)_j / nu`` on the faces, packed."""
    g = ds.grid
    cell = correctors.grid
    axes = _face_axes(g)
    drive = darcy_drive(ds, forcing)
    parts = []
    for c in range(2):
        x1, y1 = axes[c]
        tot = 0.0
        for j in range(2):
            tot = tot + fourier_eval(correctors.chi[j][c], cell, x1 / eps, y1 / eps) * drive[c][j]
        parts.append(tot.reshape(len(ds.times), -1))
    return np.concatenate(parts, axis=1)


def two_scale_gap(es, limit, F: TestFunctionFamily | None = None, correctors=None,
                  forcing=None, route: str = "physical") -> dict:
    """``|S_eps(psi) - S_0(psi)|`` for every member and velocity component.

    ``S_0`` pairs the limit field with the same oscillating test function.
    For a :class:`MacroState` the limit field is ``u0 + eps u1(x, x/eps)``
    (just ``u0`` without correctors); as ``eps -> 0`` this tends to
    ``int u0 phi`` on ``k = 0`` members and to zero on the others.  For a
    :class:`DarcyState` the fine field is scaled by ``eps^-2`` and paired
    against ``u0(x, x/eps)`` built from the permeability correctors.
    """
    F = F or TestFunctionFamily()
    g = es.grid
    _check_domain(g, limit.grid)
    eps = es.epsilon
    if hasattr(limit, "u_tilde"):
        if correctors is None or forcing is None:
            raise ValueError("Darcy pairings need the permeability correctors and the forcing")
        S_eps = pairing_table(g, es.u, F, eps, route, scale=eps ** -2)
        S0 = pairing_table(g, darcy_limit_series(limit, eps, correctors, forcing), F, eps, route)
    else:
        S_eps = pairing_table(g, es.u, F, eps, route)
        S0 = pairing_table(g, macro_limit_series(limit, eps, correctors), F, eps, route)
    return {key: abs(S_eps[key] - S0[key]) for key in S_eps}


def _gradient_series(ops: MACOperators, U: np.ndarray):
    """Stacks of ``d_j u^r`` keyed ``(j, r)`` at native points.

    Centres hold ``d1u1, d2u2``; corners hold ``d2u1, d1u2``.
    """
    g = ops.g
    C = np.array([(ops.grad_center @ w).reshape(2, g.nx, g.ny) for w in U])
    N = np.array([(ops.grad_corner @ w).reshape(2, g.nx + 1, g.ny + 1) for w in U])
    return {(0, 0): C[:, 0], (1, 1): C[:, 1], (1, 0): N[:, 0], (0, 1): N[:, 1]}


def _native_points(g: DomainGrid, ops: MACOperators, pair):
    if pair in ((0, 0), (1, 1)):
        return g.x_centers(), g.y_centers(), np.ones((g.nx, g.ny))
    return g.x_nodes(), g.y_nodes(), ops.corner_weight


def limit_gradient_series(ms, eps: float, correctors, ops: MACOperators | None = None) -> dict:
    """``d_j u0^r + (d_{y_j} u1^r)(x, x/eps)`` keyed ``(j, r)`` at native points."""
    g = ms.grid
    ops = ops or MACOperators(g)
    out = _gradient_series(ops, ms.u0)
    if correctors is None:
        return out
    sp = _Spectral(correctors.grid)
    cell = correctors.grid
    full = {at: np.array([velocity_gradients(ops, w, at) for w in ms.u0]) for at in ("center", "corner")}
    for (j, r) in out:
        at = "center" if j == r else "corner"
        x1, y1, _ = _native_points(g, ops, (j, r))
        for i in range(2):
            for k in range(2):
                d = sp.grad(correctors.chi[i][k][r])[j]
                if np.max(np.abs(d)) > 0.0:
                    out[j, r] = out[j, r] - full[at][:, i, k] * fourier_eval(d, cell, x1 / eps, y1 / eps)
    return out


def gradient_pairing_gap(es, ms, correctors, F: TestFunctionFamily | None = None) -> dict:
    """Gaps for ``d_j u^r`` against the limit gradient ``d_j u0^r + d_{y_j} u1^r``."""
    F = F or TestFunctionFamily()
    g = es.grid
    _check_domain(g, ms.grid)
    ops = MACOperators(g)
    eps = es.epsilon
    Ge = _gradient_series(ops, es.u)
    G0 = limit_gradient_series(ms, eps, correctors, ops)
    out = {}
    for pair in Ge:
        x1, y1, w = _native_points(g, ops, pair)
        X, Y = np.meshgrid(x1, y1, indexing="ij")
        wt = g.h ** 2 * w
        for member in F.members:
            a = _pair_physical(Ge[pair], X, Y, wt, F, member, eps, g.dt)
            b = _pair_physical(G0[pair], X, Y, wt, F, member, eps, g.dt)
            out[member, (pair[0] + 1, pair[1] + 1)] = abs(a - b)
    return out


def pressure_pairing_gap(es, ms, F: TestFunctionFamily | None = None) -> dict:
    """``|int int (p_eps - p0) phi_m|`` for each bump (pressure is paired weakly only)."""
    F = F or TestFunctionFamily()
    g = es.grid
    _check_domain(g, ms.grid)
    X, Y = g.centers()
    h2 = g.h ** 2
    dP = (es.p - ms.p0).reshape(-1, g.nx, g.ny)
    return {m: abs(float(g.dt * sum(np.sum(h2 * F.bump(m, X, Y) * d) for d in dP[1:])))
            for m in range(len(F.centers))}


# ---------------------------------------------------------------- error norms

def l2q(g: DomainGrid, D: np.ndarray) -> float:
    """``L2(Q)`` norm of a stacked face (or centre) series with unit-weight samples."""
    return math.sqrt(g.dt * g.h ** 2 * float(np.sum(D[1:] ** 2)))


def gradient_errors(es, ms, correctors) -> tuple[float, float]:
    """``||grad(u_eps - u0)||`` and ``||grad u_eps - grad u0 - (grad_y u1)(x, x/eps)||`` in ``L2(Q)``.

    Every pair is compared at its native MAC location.
    """
    g = es.grid
    _check_domain(g, ms.grid)
    ops = MACOperators(g)
    Ge = _gradient_series(ops, es.u)
    G0 = _gradient_series(ops, ms.u0)
    G1 = limit_gradient_series(ms, es.epsilon, correctors, ops)
    plain = corr = 0.0
    for pair in Ge:
        w = _native_points(g, ops, pair)[2]
        plain += float(np.sum(w * (Ge[pair][1:] - G0[pair][1:]) ** 2))
        corr += float(np.sum(w * (Ge[pair][1:] - G1[pair][1:]) ** 2))
    s = g.dt * g.h ** 2
    return math.sqrt(s * plain), math.sqrt(s * corr)


# ------------------------------------------------------------------ Darcy tools

def darcy_drive(ds, forcing) -> list:
    """``(f - grad p0)_j / nu`` at the faces of each velocity component.

    Returns ``drive[c][j]``: a stack over the time nodes of component ``j``
    sampled on the faces carrying velocity component ``c``.  Normal
    derivatives on own faces are two-point differences; transverse ones are
    second-order differences of the centred pressure averaged to the face.
    """
    g = ds.grid
    h = g.h
    (xu, yu), (xv, yv) = _faces(g)
    out = [[[], []], [[], []]]
    for n, t in enumerate(ds.times):
        P = ds.p0[n].reshape(g.nx, g.ny)
        fu, fv = forcing(xu, yu, t), forcing(xv, yv, t)
        px_u = np.diff(P, axis=0) / h
        py_c = np.gradient(P, h, axis=1)
        py_u = 0.5 * (py_c[1:] + py_c[:-1])
        py_v = np.diff(P, axis=1) / h
        px_c = np.gradient(P, h, axis=0)
        px_v = 0.5 * (px_c[:, 1:] + px_c[:, :-1])
        out[0][0].append((fu[0] - px_u) / ds.nu)
        out[0][1].append((fu[1] - py_u) / ds.nu)
        out[1][0].append((fv[0] - px_v) / ds.nu)
        out[1][1].append((fv[1] - py_v) / ds.nu)
    return [[np.array(out[c][j]) for j in range(2)] for c in range(2)]


def cube_averages(g: DomainGrid, u_faces: np.ndarray, v_faces: np.ndarray, eps: float) -> np.ndarray:
    """Mean of each component over the full cubes ``eps (k + Y)`` inside the domain.

    ``Y = [-1/2, 1/2)^2`` so the cubes are centred on the lattice points
    ``eps k``, ``k = 1 .. 1/eps - 1``; partial boundary cubes are dropped.
    Face values on a cube's boundary count with weight one half.  Returns
    an array ``(n_cubes, 2)``.
    """
    m = int(round(1.0 / eps))
    c = g.nx // m
    if abs(m * eps - 1.0) > 1e-12 or c * m != g.nx or c % 2 or g.nx != g.ny:
        raise GridMismatch("cube averaging needs a square grid with an even number of cells per period")
    n = g.nx
    U = np.zeros((n + 1, n))
    U[1:-1] = u_faces
    V = np.zeros((n, n + 1))
    V[:, 1:-1] = v_faces
    w = np.ones(c + 1)
    w[[0, -1]] = 0.5
    out = []
    for a in range(1, m):
        for b in range(1, m):
            x0, y0 = a * c - c // 2, b * c - c // 2
            out.append((float(np.sum(w[:, None] * U[x0:x0 + c + 1, y0:y0 + c])) / (c * c),
                        float(np.sum(V[x0:x0 + c, y0:y0 + c + 1] * w[None, :])) / (c * c)))
    return np.array(out).reshape(-1, 2)


def _cube_series(g: DomainGrid, U: np.ndarray, eps: float) -> np.ndarray:
    return np.array([cube_averages(g, *g.unpack(w), eps) for w in U])


def _drive_cubes(g: DomainGrid, drive, eps: float) -> np.ndarray:
    """Cube averages of the drive: ``(n_times, n_cubes, 2)``."""
    out = []
    for n in range(drive[0][0].shape[0]):
        # component j on x-faces is drive[0][j]; on y-faces drive[1][j]; a cube
        # average of a scalar is the mean of its face averages on both lattices
        vals = []
        for j in range(2):
            ax = cube_averages(g, drive[0][j][n], drive[1][j][n], eps)
            vals.append(0.5 * (ax[:, 0] + ax[:, 1]))
        out.append(np.stack(vals, axis=1))
    return np.array(out)


def fit_permeability(avg_u: np.ndarray, avg_drive: np.ndarray) -> np.ndarray:
    """Least-squares ``K`` with ``<u> ~ K <F>`` over all cubes and time nodes ``n >= 1``; ``None`` if rank deficient."""
    A = avg_drive[1:].reshape(-1, 2)
    B = avg_u[1:].reshape(-1, 2)
    X, _, rank, _ = np.linalg.lstsq(A, B, rcond=None)
    # an (almost) unidirectional or vanishing drive does not determine K
    return X.T if rank == 2 else None


# ------------------------------------------------------------------ reports

@dataclass
class StudyReport:
    """Rows of ``(epsilon, metric, value, manifest)``; ``manifests`` maps hash -> parameters."""

    kind: str
    rows: list = field(default_factory=list)
    manifests: dict = field(default_factory=dict)
    complete: bool = True
    failures: list = field(default_factory=list)

    def add(self, eps, metric, value, manifest):
        self.rows.append((float(eps), str(metric), float(value), str(manifest)))

    def sorted_rows(self) -> list:
        return sorted(self.rows, key=lambda r: (-r[0], r[1]))

    def metric(self, name) -> list:
        """``[(epsilon, value)]`` for one metric, coarse scales first."""
        return [(r[0], r[2]) for r in self.sorted_rows() if r[1] == name]

    def values(self, name) -> list:
        return [v for _, v in self.metric(name)]


def export_report(r: StudyReport, path) -> None:
    rows = list(r.sorted_rows())
    if not r.complete:
        rows += [(eps, "run_failed", 1.0, msg) for eps, msg in r.failures]
    write_csv(path, ("epsilon", "metric", "value", "manifest"), rows)


def monotone_trend(values, max_ratio: float | None = None):
    """``True``/``False`` for a strictly decreasing sequence; ``None`` below three values."""
    v = [float(x) for x in values]
    if len(v) < 3:
        return None
    ok = all(b < a for a, b in zip(v, v[1:]))
    if max_ratio is not None:
        ok = ok and all(b <= max_ratio * a for a, b in zip(v, v[1:]))
    return ok


def bounded_spread(values, factor: float = 2.0):
    """``max/min <= factor`` over at least three values; ``None`` otherwise."""
    v = [float(x) for x in values]
    if len(v) < 3:
        return None
    return bool(min(v) > 0 and max(v) / min(v) <= factor)


def _record(report: StudyReport, params: dict) -> str:
    h = manifest_hash(params)
    report.manifests[h] = dict(params)
    return h


def _grid_params(g: DomainGrid) -> dict:
    return {"nx": g.nx, "ny": g.ny, "lx": g.lx, "ly": g.ly, "T": g.T, "nt": g.nt}


def _check_eps(eps_list):
    eps = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    return eps


# ------------------------------------------------------ oscillating-media study

def homogenization_study(gen, forcing, eps_list=DEFAULT_EPS, n: int | None = None, T: float = 0.25,
                         nt: int = 64, tol: float = 1e-10, n_cell: int = 128,
                         family: TestFunctionFamily | None = None) -> StudyReport:
    """Fine-scale runs on one common grid against one homogenized solve.

    ``n`` defaults to 16 cells per period of the finest scale.
    """
    eps_list = _check_eps(eps_list)
    n = n or int(round(16 / eps_list[-1]))
    g = DomainGrid.square(n, T=T, nt=nt)
    F = family or TestFunctionFamily()
    report = StudyReport("homogenization")
    cell = PeriodicGrid(n_cell)
    A = gen.sample(cell)
    params = SolverParams(cg_tol=min(tol, 1e-10))
    C = solve_all_correctors(A, params)
    qt = homogenized_tensor(A, C)
    base = {"study": "homogenization", "coefficients": manifest_hash(gen.descriptor()),
            "forcing": manifest_hash(forcing.descriptor()), "tol": tol, **_grid_params(g)}
    h_cell = _record(report, {**base, "run": "cell", "n_cell": n_cell, "cg_tol": params.cg_tol})
    ops = MACOperators(g)
    ms = solve_homogenized_ns(qt, forcing, g, tol=tol, ops=ops)
    h_macro = _record(report, {**base, "run": "macro", "cell": h_cell})
    for eps in eps_list:
        h_dns = _record(report, {**base, "run": "dns", "epsilon": eps})
        tag = f"{h_dns}+{h_macro}"
        try:
            es = solve_eps_oscillating(gen, eps, forcing, g, tol=tol, ops=ops)
        except SolverFailure as exc:
            report.complete = False
            report.failures.append((eps, f"{type(exc).__name__}: {exc}"))
            continue
        err = l2q(g, es.u - ms.u0)
        report.add(eps, "velocity_l2q_error", err, tag)
        ref = l2q(g, ms.u0)
        report.add(eps, "velocity_rel_error", err / ref if ref > 0 else 0.0, tag)
        plain, corr = gradient_errors(es, ms, C)
        report.add(eps, "gradient_error_plain", plain, tag)
        report.add(eps, "gradient_error_corrected", corr, tag)
        gaps = two_scale_gap(es, ms, F, correctors=C)
        report.add(eps, "pairing_gap_velocity_mean",
                   max(v for key, v in gaps.items() if key[0][1] == (0, 0)), tag)
        report.add(eps, "pairing_gap_velocity_osc",
                   max(v for key, v in gaps.items() if key[0][1] != (0, 0)), tag)
        ggaps = gradient_pairing_gap(es, ms, C, F)
        report.add(eps, "pairing_gap_gradient", max(ggaps.values()), tag)
        report.add(eps, "pressure_pairing_gap", max(pressure_pairing_gap(es, ms, F).values()), tag)
        report.add(eps, "pressure_l2q_error", l2q(g, es.p - ms.p0), tag)
        for name, val in audit_estimates(es, forcing).as_dict().items():
            report.add(eps, f"audit_{name}", val, h_dns)
    return report


def homogenization_checks(report: StudyReport) -> dict:
    """Trend assertions; ``None`` entries mean too few scales to judge."""
    plain = report.values("gradient_error_plain")
    corr = report.values("gradient_error_corrected")
    return {
        "velocity_error_decreasing": monotone_trend(report.values("velocity_l2q_error"), 0.75),
        "corrector_improves_gradient": (all(c < p for c, p in zip(corr, plain)) if plain else None),
        "pressure_pairing_decreasing": monotone_trend(report.values("pressure_pairing_gap")),
        "W_proxy_bounded": bounded_spread(report.values("audit_W_proxy")),
    }


# ---------------------------------------------------------------- Darcy study

def darcy_study(desc, nu: float, forcing, eps_list=DEFAULT_EPS, cells_per_period=16,
                T: float = 0.25, nt: int = 8, tol: float = 1e-10, n_cell: int = 128,
                eta_power: float = 2.0, family: TestFunctionFamily | None = None) -> StudyReport:
    """Perforated-domain runs against the Darcy limit with the cell-problem ``K``.

    Each scale gets its own grid with ``cells_per_period`` cells per period
    (one number, or one per scale).  The DNS penalty is ``eta = h**eta_power``.
    """
    eps_list = _check_eps(eps_list)
    cpp = list(cells_per_period) if np.ndim(cells_per_period) else [cells_per_period] * len(eps_list)
    if len(cpp) != len(eps_list):
        raise ValueError("cells_per_period needs one entry per scale")
    F = family or TestFunctionFamily()
    report = StudyReport("darcy")
    G = make_disk_geometry(n_cell, desc.radius)
    params = SolverParams(cg_tol=min(tol, 1e-10), max_iter=20000)
    P = solve_permeability_correctors(G, params)
    Kc = assemble_K(P)
    base = {"study": "darcy", "geometry": manifest_hash(desc.descriptor()),
            "forcing": manifest_hash(forcing.descriptor()), "nu": nu, "tol": tol}
    h_cell = _record(report, {**base, "run": "cell", "n_cell": n_cell, "cg_tol": params.cg_tol,
                              "eta_cell": P.eta})
    for name, val in Kc.entries().items():
        report.add(0.0, f"cell_{name}", val, h_cell)
    for eps, c in zip(eps_list, cpp):
        n = int(round(c / eps))
        g = DomainGrid.square(n, T=T, nt=nt)
        gp = _grid_params(g)
        h_dar = _record(report, {**base, "run": "darcy", "cell": h_cell, **gp})
        h_dns = _record(report, {**base, "run": "dns", "epsilon": eps, "eta_power": eta_power, **gp})
        tag = f"{h_dns}+{h_dar}"
        try:
            es = solve_eps_porous(desc, eps, nu, forcing, g, tol=tol, eta=g.h ** eta_power)
            ds = solve_darcy(Kc, nu, forcing, g, tol=tol)
        except SolverFailure as exc:
            report.complete = False
            report.failures.append((eps, f"{type(exc).__name__}: {exc}"))
            continue
        avg_e = _cube_series(g, es.u, eps) / eps ** 2
        avg_0 = _cube_series(g, ds.u_tilde, eps)
        w = g.dt * eps ** 2
        num = math.sqrt(w * float(np.sum((avg_e[1:] - avg_0[1:]) ** 2)))
        den = math.sqrt(w * float(np.sum(avg_0[1:] ** 2)))
        report.add(eps, "darcy_velocity_l2_error", num, tag)
        # a vanishing Darcy velocity (gradient forcing) leaves only the absolute error
        report.add(eps, "darcy_velocity_rel_error", num / den if den > 1e-12 else num, tag)
        drive = darcy_drive(ds, forcing)
        Kfit = fit_permeability(avg_e, _drive_cubes(g, drive, eps))
        if Kfit is not None:
            for i, j in itertools.product((1, 2), (1, 2)):
                report.add(eps, f"fit_K_{i}{j}", Kfit[i - 1, j - 1], tag)
            report.add(eps, "K_rel_discrepancy",
                       float(np.linalg.norm(Kfit - Kc.K) / np.linalg.norm(Kc.K)), f"{tag}+{h_cell}")
        gaps = two_scale_gap(es, ds, F, correctors=P, forcing=forcing)
        osc = [v for key, v in gaps.items() if key[0][1] != (0, 0)]
        report.add(eps, "pairing_gap_osc", max(osc), f"{tag}+{h_cell}")
        dp = l2q(g, es.p - ds.p0)
        p_ref = l2q(g, ds.p0)
        report.add(eps, "pressure_l2q_error", dp, tag)
        report.add(eps, "pressure_rel_error", dp / p_ref if p_ref > 0 else dp, tag)
        for name, val in audit_estimates(es, forcing).as_dict().items():
            report.add(eps, f"audit_{name}", val, h_dns)
        report.add(eps, "solid_max_velocity", es.meta["solid_max"], h_dns)
    return report


def darcy_checks(report: StudyReport, k_tol: float = 0.15) -> dict:
    disc = report.values("K_rel_discrepancy")
    fr = report.values("audit_friedrichs_ratio")
    return {
        "darcy_error_decreasing": monotone_trend(report.values("darcy_velocity_rel_error")),
        "K_within_tolerance": (disc[-1] <= k_tol) if disc else None,
        "C_u_stable": bounded_spread(report.values("audit_C_u")),
        "C_grad_stable": bounded_spread(report.values("audit_C_grad")),
        "friedrichs_bounded": bounded_spread(fr) if len(fr) >= 3 else None,
    }
