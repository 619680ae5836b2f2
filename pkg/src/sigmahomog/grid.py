"""Discretizations of the unit cell Y and of the macroscopic domain.

The unit cell ``Y = (-1/2, 1/2)^2`` is treated as a torus sampled on a uniform
node grid; derivatives there are spectral.  Scalar fields are arrays of shape
``(n, n)`` and vector fields arrays of shape ``(2, n, n)``; axis 0 runs along
``y1`` and axis 1 along ``y2``.

The bounded domain is described by :class:`DomainGrid`; its staggered
calculus lives in :mod:`sigmahomog.staggered`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import GridMismatch, NonFiniteField

_WORKERS: int | None = None


def set_threads(k: int | None) -> None:
    """Cap the number of FFT workers (``None`` = library default)."""
    global _WORKERS
    _WORKERS = None if k is None else max(1, int(k))


def fft_workers() -> int | None:
    return _WORKERS


def check_finite(a: np.ndarray, what: str = "field") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise NonFiniteField(f"{what} contains non-finite samples")
    return a


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform node grid on the torus Y.  Nodes sit at ``-1/2 + m h``."""

    n: int
    dim: int = 2

    def __post_init__(self):
        if self.dim != 2:
            raise ValueError("only dim=2 is supported")
        n = int(self.n)
        if n < 8 or n & (n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def cell_measure(self) -> float:
        return self.h * self.h

    def coords(self) -> np.ndarray:
        return -0.5 + self.h * np.arange(self.n)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        y = self.coords()
        return np.meshgrid(y, y, indexing="ij")

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        """Angular wavenumbers used for differentiation, Nyquist mode zeroed.

        Zeroing the Nyquist mode keeps the derivative real and skew-adjoint.
        """
        k = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)
        k[self.n // 2] = 0.0
        k1, k2 = np.meshgrid(k, k, indexing="ij")
        return k1, k2

    @cached_property
    def _leray_factors(self):
        k1, k2 = self.wavenumbers
        k2sum = k1 * k1 + k2 * k2
        safe = np.where(k2sum > 0, k2sum, 1.0)
        inv = np.where(k2sum > 0, 1.0 / safe, 0.0)
        return k1, k2, inv

    def check_scalar(self, f, what="scalar field") -> np.ndarray:
        f = check_finite(f, what)
        if f.shape != self.shape:
            raise GridMismatch(f"{what} has shape {f.shape}, grid expects {self.shape}")
        return f

    def check_vector(self, v, what="vector field") -> np.ndarray:
        v = check_finite(v, what)
        if v.shape != (2,) + self.shape:
            raise GridMismatch(f"{what} has shape {v.shape}, grid expects {(2,) + self.shape}")
        return v


def _fft(f):
    return sfft.fft2(f, workers=_WORKERS)


def _ifft(F):
    return sfft.ifft2(F, workers=_WORKERS).real


def gradient(f: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """Spectral gradient of a periodic scalar field."""
    f = grid.check_scalar(f)
    k1, k2 = grid.wavenumbers
    F = _fft(f)
    return np.stack([_ifft(1j * k1 * F), _ifft(1j * k2 * F)])


def divergence(v: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    v = grid.check_vector(v)
    k1, k2 = grid.wavenumbers
    return _ifft(1j * k1 * _fft(v[0]) + 1j * k2 * _fft(v[1]))


def laplacian(f: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """Laplacian consistent with ``divergence(gradient(f))``."""
    f = grid.check_scalar(f)
    k1, k2 = grid.wavenumbers
    return _ifft(-(k1 * k1 + k2 * k2) * _fft(f))


def leray_project(v: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """Orthogonal projection onto discretely divergence-free fields.

    The mean of each component is preserved (constants are divergence-free).
    """
    v = grid.check_vector(v)
    return _leray_unchecked(v, grid)


def _leray_unchecked(v, grid):
    k1, k2, inv = grid._leray_factors
    V1, V2 = _fft(v[0]), _fft(v[1])
    kdotv = (k1 * V1 + k2 * V2) * inv
    return np.stack([_ifft(V1 - k1 * kdotv), _ifft(V2 - k2 * kdotv)])


def mean(f: np.ndarray, grid: PeriodicGrid) -> float | np.ndarray:
    """Cell average; for vector fields one value per component."""
    return np.mean(f, axis=(-2, -1))


def inner_l2(a: np.ndarray, b: np.ndarray, grid: PeriodicGrid) -> float:
    """Midpoint-rule L2(Y) inner product of two fields of equal shape."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.shape[-2:] != grid.shape:
        raise GridMismatch(f"cannot pair fields of shapes {a.shape} and {b.shape}")
    return float(np.sum(a * b) * grid.cell_measure)


def norm_l2(a: np.ndarray, grid: PeriodicGrid) -> float:
    return math.sqrt(max(inner_l2(a, a, grid), 0.0))


def norm_h1_semi(a: np.ndarray, grid: PeriodicGrid) -> float:
    """Seminorm ``||grad a||_{L2}``; vector fields are differentiated per component."""
    a = np.asarray(a, dtype=float)
    parts = [a] if a.ndim == 2 else list(a)
    total = sum(inner_l2(g, g, grid) for p in parts for g in gradient(p, grid))
    return math.sqrt(total)


def norm_l2_spectral(a: np.ndarray, grid: PeriodicGrid) -> float:
    """L2 norm evaluated from Fourier coefficients (Parseval)."""
    a = np.asarray(a, dtype=float)
    parts = [a] if a.ndim == 2 else list(a)
    n2 = grid.n * grid.n
    total = sum(np.sum(np.abs(_fft(p)) ** 2) for p in parts) / n2 * grid.cell_measure
    return math.sqrt(float(total))


def fourier_eval(f: np.ndarray, grid: PeriodicGrid, y1: np.ndarray, y2: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``f`` on the tensor set ``y1 x y2``.

    Points may lie anywhere in R^2; periodicity is implicit.  Returns an array
    of shape ``(len(y1), len(y2))``.
    """
    f = grid.check_scalar(f)
    n = grid.n
    F = _fft(f) / (n * n)
    m = np.fft.fftfreq(n, d=1.0 / n)
    y0 = grid.coords()[0]
    nyq = n // 2

    def basis(y):
        s = np.asarray(y, dtype=float).ravel() - y0
        e = np.exp(2j * np.pi * np.outer(s, m))
        # Nyquist coefficient split evenly between +-n/2 keeps the interpolant real
        e[:, nyq] = np.cos(np.pi * n * s)
        return e

    return (basis(y1) @ F @ basis(y2).T).real


@dataclass(frozen=True)
class DomainGrid:
    """Uniform staggered (MAC) grid on the rectangle ``(0, lx) x (0, ly)``.

    ``nx`` and ``ny`` count pressure cells per axis; cells are square.
    Velocity unknowns live on interior faces, boundary faces carry the
    no-slip value zero, and tangential no-slip is imposed with antisymmetric
    ghost values.  The time axis is ``nt`` uniform backward-Euler steps.
    """

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0
    T: float = 0.25
    nt: int = 32

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError("need at least 4 cells per axis")
        if self.nt < 1 or self.T <= 0:
            raise ValueError("need nt >= 1 and T > 0")
        if not math.isclose(self.lx / self.nx, self.ly / self.ny, rel_tol=1e-12):
            raise ValueError("cells must be square (lx/nx == ly/ny)")

    @classmethod
    def square(cls, n: int, T: float = 0.25, nt: int = 32, length: float = 1.0) -> "DomainGrid":
        return cls(n, n, length, length, T, nt)

    @property
    def h(self) -> float:
        return self.lx / self.nx

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.nt + 1)

    @property
    def n_u(self) -> int:
        return (self.nx - 1) * self.ny

    @property
    def n_v(self) -> int:
        return self.nx * (self.ny - 1)

    @property
    def n_vel(self) -> int:
        return self.n_u + self.n_v

    def x_nodes(self) -> np.ndarray:
        return self.h * np.arange(self.nx + 1)

    def y_nodes(self) -> np.ndarray:
        return self.h * np.arange(self.ny + 1)

    def x_centers(self) -> np.ndarray:
        return self.h * (np.arange(self.nx) + 0.5)

    def y_centers(self) -> np.ndarray:
        return self.h * (np.arange(self.ny) + 0.5)

    def centers(self):
        return np.meshgrid(self.x_centers(), self.y_centers(), indexing="ij")

    def corners(self):
        return np.meshgrid(self.x_nodes(), self.y_nodes(), indexing="ij")

    def u_faces(self):
        """Interior x-faces, where the first velocity component lives."""
        return np.meshgrid(self.x_nodes()[1:-1], self.y_centers(), indexing="ij")

    def v_faces(self):
        return np.meshgrid(self.x_centers(), self.y_nodes()[1:-1], indexing="ij")

    def pack(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.concatenate([np.ravel(u), np.ravel(v)])

    def unpack(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w = np.asarray(w)
        return (w[: self.n_u].reshape(self.nx - 1, self.ny),
                w[self.n_u:].reshape(self.nx, self.ny - 1))

    def sample_vector(self, func, t: float | None = None) -> np.ndarray:
        """Sample ``func(x, y[, t]) -> (f1, f2)`` at the velocity faces."""
        xu, yu = self.u_faces()
        xv, yv = self.v_faces()
        if t is None:
            f1 = func(xu, yu)[0]
            f2 = func(xv, yv)[1]
        else:
            f1 = func(xu, yu, t)[0]
            f2 = func(xv, yv, t)[1]
        return self.pack(np.broadcast_to(f1, xu.shape), np.broadcast_to(f2, xv.shape))
