"""Preconditioned conjugate gradients on array-valued unknowns."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoConvergence


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float  # relative: ||b - A x|| / ||b||
    history: list = field(default_factory=list)


def _dot(a, b):
    return float(np.dot(a.ravel(), b.ravel()))


def pcg(apply_a, b, x0=None, precond=None, project=None, tol=1e-10, max_iter=2000,
        error=NoConvergence, what="cg", atol=0.0):
    """Solve ``A x = b`` for symmetric positive (semi)definite ``A``.

    ``project`` (optional) is an orthogonal projector onto the subspace on
    which ``A`` is definite; it is applied to the data, to every residual and
    to every preconditioned residual, so iterates never leave the subspace.
    Convergence is declared once ``||r|| <= max(tol ||b||, atol)``; data
    whose projection is below ``atol`` give the zero solution.
    """
    proj = project if project is not None else (lambda v: v)
    M = precond if precond is not None else (lambda v: v)
    b = proj(np.asarray(b, dtype=float))
    bnorm = np.sqrt(_dot(b, b))
    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = proj(np.array(x0, dtype=float))
        r = proj(b - apply_a(x))
    if bnorm <= atol:
        return CGResult(np.zeros_like(b), 0, 0.0, [0.0])
    tol = max(tol, atol / bnorm)
    rel = np.sqrt(_dot(r, r)) / bnorm
    hist = [rel]
    if rel <= tol:
        return CGResult(x, 0, rel, hist)
    z = proj(M(r))
    p = z.copy()
    rz = _dot(r, z)
    for it in range(1, max_iter + 1):
        Ap = proj(apply_a(p))
        pAp = _dot(p, Ap)
        if pAp <= 0.0:
            raise error(f"{what}: operator not positive definite (p.Ap = {pAp:.3e})",
                        residual=rel, iterations=it)
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        rel = np.sqrt(_dot(r, r)) / bnorm
        hist.append(rel)
        if rel <= tol:
            # confirm against the true residual; recurrence drift triggers a restart
            r_true = proj(b - apply_a(x))
            rel_true = np.sqrt(_dot(r_true, r_true)) / bnorm
            if rel_true <= tol:
                hist[-1] = rel_true
                return CGResult(x, it, rel_true, hist)
            r = r_true
            rel = rel_true
            z = proj(M(r))
            p = z.copy()
            rz = _dot(r, z)
            continue
        z = proj(M(r))
        rz_new = _dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise error(f"{what}: no convergence after {max_iter} iterations (relative residual {rel:.3e})",
                residual=rel, iterations=max_iter)
