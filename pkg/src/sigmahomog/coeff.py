"""Coefficient, geometry and forcing generators with their validators.

Coefficients and obstacles are described by closed-form generators so that the
fine-scale solvers can sample ``a(x / eps)`` or the solid indicator exactly at
any point.  The sampled arrays on a :class:`PeriodicGrid` are what the cell
solvers consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from .errors import EmptyObstacle, NonSymmetric, NotCoercive, RadiusTooLarge
from .grid import PeriodicGrid, check_finite

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------- coefficients

@dataclass(frozen=True)
class CoefficientGenerator:
    """Closed-form symmetric matrix field ``y -> [[a11, a12], [a12, a22]]``.

    ``func(y1, y2)`` returns the triple ``(a11, a12, a22)`` and must be
    1-periodic in both arguments.  ``alpha_exact`` is the analytic minimum of
    the smaller eigenvalue when known.
    """

    kind: str
    params: tuple
    func: Callable = field(compare=False, repr=False)
    alpha_exact: float | None = None
    isotropic: bool = False

    def __call__(self, y1, y2):
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        a11, a12, a22 = self.func(y1, y2)
        shape = np.broadcast(y1, y2).shape
        return (np.broadcast_to(a11, shape).astype(float),
                np.broadcast_to(a12, shape).astype(float),
                np.broadcast_to(a22, shape).astype(float))

    def descriptor(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}

    def sample(self, grid: PeriodicGrid) -> "CoefficientField":
        y1, y2 = grid.mesh()
        a11, a12, a22 = self(y1, y2)
        return CoefficientField(grid, a11, a12, a12.copy(), a22, generator=self)


def constant_coefficients(a11=1.0, a12=0.0, a22=1.0) -> CoefficientGenerator:
    lam = 0.5 * (a11 + a22) - math.hypot(0.5 * (a11 - a22), a12)
    return CoefficientGenerator("constant", (float(a11), float(a12), float(a22)),
                                lambda y1, y2: (a11, a12, a22), alpha_exact=lam,
                                isotropic=(a12 == 0.0 and a11 == a22))


def identity_coefficients() -> CoefficientGenerator:
    return constant_coefficients(1.0, 0.0, 1.0)


def layered_coefficients(a_min: float, a_max: float) -> CoefficientGenerator:
    """Scalar ``a(y1) I`` with ``a = a_min + (a_max - a_min)(1 + sin 2 pi y1) / 2``."""
    if not a_min > 0:
        raise NotCoercive(f"a_min must be positive, got {a_min}")
    if a_max < a_min:
        raise ValueError("a_max must be >= a_min")
    amp = 0.5 * (a_max - a_min)

    def f(y1, y2):
        a = a_min + amp * (1.0 + np.sin(TWO_PI * y1))
        return a, 0.0, a

    return CoefficientGenerator("layered", (float(a_min), float(a_max)), f,
                                alpha_exact=float(a_min), isotropic=True)


def diagonal_trig_coefficients(mean1=2.0, mean2=2.0) -> CoefficientGenerator:
    """``diag(mean1 + sin 2 pi y1, mean2 + cos 2 pi y2)``."""
    if min(mean1, mean2) <= 1.0:
        raise NotCoercive("diagonal means must exceed 1")
    return CoefficientGenerator(
        "diagonal", (float(mean1), float(mean2)),
        lambda y1, y2: (mean1 + np.sin(TWO_PI * y1), 0.0, mean2 + np.cos(TWO_PI * y2)),
        alpha_exact=min(mean1, mean2) - 1.0)


def anisotropic_coefficients(base=3.0, shear=0.5) -> CoefficientGenerator:
    """Smooth fully anisotropic field with a genuine off-diagonal part.

    ``a11 = base + sin 2pi y1 cos 2pi y2``, ``a22 = base + cos 2pi (y1 + y2)``,
    ``a12 = shear sin 2pi (y1 - y2)``.  Coercive whenever ``base > 1 + shear``.
    """
    if base <= 1.0 + abs(shear):
        raise NotCoercive("need base > 1 + |shear|")

    def f(y1, y2):
        return (base + np.sin(TWO_PI * y1) * np.cos(TWO_PI * y2),
                shear * np.sin(TWO_PI * (y1 - y2)),
                base + np.cos(TWO_PI * (y1 + y2)))

    return CoefficientGenerator("anisotropic", (float(base), float(shear)), f)


def make_coefficients(kind: str, **kw) -> CoefficientGenerator:
    makers = {
        "identity": lambda: identity_coefficients(),
        "constant": lambda: constant_coefficients(kw.get("a11", 1.0), kw.get("a12", 0.0), kw.get("a22", 1.0)),
        "layered": lambda: layered_coefficients(kw.get("a_min", 1.0), kw.get("a_max", 3.0)),
        "diagonal": lambda: diagonal_trig_coefficients(kw.get("mean1", 2.0), kw.get("mean2", 2.0)),
        "anisotropic": lambda: anisotropic_coefficients(kw.get("base", 3.0), kw.get("shear", 0.5)),
    }
    if kind not in makers:
        raise ValueError(f"unknown coefficient kind {kind!r}; choose from {sorted(makers)}")
    return makers[kind]()


@dataclass
class CoefficientField:
    grid: PeriodicGrid
    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: np.ndarray
    generator: CoefficientGenerator | None = None

    def __post_init__(self):
        for name in ("a11", "a12", "a21", "a22"):
            setattr(self, name, self.grid.check_scalar(getattr(self, name), name))

    def entry(self, i: int, j: int) -> np.ndarray:
        """0-based access ``a[i][j]``."""
        return (self.a11, self.a12, self.a21, self.a22)[2 * i + j]

    def matrix(self) -> np.ndarray:
        """Array of shape ``(2, 2, n, n)``."""
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    def mean_matrix(self) -> np.ndarray:
        return self.matrix().mean(axis=(2, 3))


def make_layered(n: int, a_min: float, a_max: float) -> CoefficientField:
    return layered_coefficients(a_min, a_max).sample(PeriodicGrid(n))


@dataclass(frozen=True)
class CoercivityReport:
    alpha: float
    c0: float
    argmin: tuple  # (y1, y2) of the node realizing alpha


def validate(A: CoefficientField, sym_tol: float = 1e-12) -> CoercivityReport:
    """Check symmetry and coercivity of a sampled coefficient field."""
    asym = float(np.max(np.abs(A.a12 - A.a21)))
    if asym > sym_tol:
        raise NonSymmetric(f"a12 - a21 reaches {asym:.3e}")
    off = 0.5 * (A.a12 + A.a21)
    half_tr = 0.5 * (A.a11 + A.a22)
    lam_min = half_tr - np.hypot(0.5 * (A.a11 - A.a22), off)
    idx = np.unravel_index(int(np.argmin(lam_min)), lam_min.shape)
    alpha = float(lam_min[idx])
    if not alpha > 0:
        raise NotCoercive(f"smallest eigenvalue {alpha:.3e} at node {idx}")
    c0 = float(max(np.max(np.abs(e)) for e in (A.a11, A.a12, A.a22)))
    # the largest eigenvalue is the tighter continuity bound; c0 must dominate alpha
    c0 = max(c0, float(np.max(half_tr + np.hypot(0.5 * (A.a11 - A.a22), off))))
    y = A.grid.coords()
    return CoercivityReport(alpha, c0, (float(y[idx[0]]), float(y[idx[1]])))


# -------------------------------------------------------------------- geometry

@dataclass(frozen=True)
class DiskDescriptor:
    """Solid disk of radius ``radius`` centred at ``center`` inside Y.

    ``radius == 0`` denotes the empty obstacle.
    """

    radius: float
    center: tuple = (0.0, 0.0)

    @property
    def kind(self) -> str:
        return "disk"

    @property
    def empty(self) -> bool:
        return self.radius <= 0.0

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def solid(self, y1, y2) -> np.ndarray:
        """Indicator of the solid part for points of Y (no periodic wrap)."""
        if self.empty:
            return np.zeros(np.broadcast(y1, y2).shape, dtype=bool)
        d1 = np.asarray(y1) - self.center[0]
        d2 = np.asarray(y2) - self.center[1]
        return d1 * d1 + d2 * d2 < self.radius * self.radius

    def bounding_box(self):
        c1, c2 = self.center
        r = self.radius
        return (c1 - r, c1 + r, c2 - r, c2 + r)

    def descriptor(self) -> dict:
        return {"kind": "disk", "radius": self.radius, "center": list(self.center)}


@dataclass
class CellGeometry:
    grid: PeriodicGrid
    solid_mask: np.ndarray
    descriptor: DiskDescriptor

    @property
    def solid_fraction(self) -> float:
        return float(np.mean(self.solid_mask))


def fluid_connected(mask_solid: np.ndarray) -> bool:
    """Connectivity of the complement of ``mask_solid`` on the torus (4-neighbour)."""
    fluid = ~np.asarray(mask_solid, dtype=bool)
    if not fluid.any():
        return False
    lab, nlab = ndimage.label(fluid)
    if nlab <= 1:
        return True
    parent = list(range(nlab + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a_edge, b_edge in ((lab[0, :], lab[-1, :]), (lab[:, 0], lab[:, -1])):
        for a, b in zip(a_edge, b_edge):
            if a and b:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[ra] = rb
    return len({find(k) for k in range(1, nlab + 1)}) == 1


def make_disk_geometry(n: int, radius: float, allow_empty: bool = False) -> CellGeometry:
    grid = PeriodicGrid(n)
    h = grid.h
    if radius >= 0.5 - 2.0 * h:
        raise RadiusTooLarge(f"radius {radius} leaves less than a 2-cell collar (limit {0.5 - 2 * h})")
    if radius < h and not (allow_empty and radius == 0.0):
        raise EmptyObstacle(f"radius {radius} is below one cell (h = {h})")
    desc = DiskDescriptor(float(radius))
    y1, y2 = grid.mesh()
    mask = desc.solid(y1, y2)
    if not desc.empty and not mask.any():
        raise EmptyObstacle("obstacle covers no grid node")
    if not fluid_connected(mask):
        raise RadiusTooLarge("fluid region is not connected")
    return CellGeometry(grid, mask, desc)


# --------------------------------------------------------------------- forcing

@dataclass(frozen=True)
class Forcing:
    """Body force ``f(x, y, t) -> (f1, f2)`` on the macroscopic domain."""

    kind: str
    params: tuple
    func: Callable = field(compare=False, repr=False)
    steady: bool = True

    def __call__(self, x, y, t=0.0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        f1, f2 = self.func(x, y, t)
        shape = np.broadcast(x, y).shape
        f1 = np.broadcast_to(f1, shape).astype(float)
        f2 = np.broadcast_to(f2, shape).astype(float)
        check_finite(f1, "forcing")
        check_finite(f2, "forcing")
        return f1, f2

    def descriptor(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}


def _rot(amp, L):
    # curl of psi = sin^2(pi x / L) sin^2(pi y / L): divergence free, zero normal trace
    k = math.pi / L

    def f(x, y, t):
        sx, sy = np.sin(k * x), np.sin(k * y)
        return (amp * 2 * k * sx * sx * sy * np.cos(k * y),
                -amp * 2 * k * sy * sy * sx * np.cos(k * x))

    return f


def _pot(amp, L):
    # gradient of phi = cos(pi x / L) cos(pi y / L)
    k = math.pi / L

    def f(x, y, t):
        return (-amp * k * np.sin(k * x) * np.cos(k * y), -amp * k * np.cos(k * x) * np.sin(k * y))

    return f


def make_forcing(kind: str, amplitude: float = 1.0, vector=(1.0, 0.0), potential: float = 0.0,
                 length: float = 1.0) -> Forcing:
    """Forcing families: ``zero``, ``constant``, ``rotational``, ``potential``, ``mixed``.

    ``mixed`` is ``amplitude * rotational + potential * potential``.
    """
    if kind == "zero":
        return Forcing("zero", (), lambda x, y, t: (0.0, 0.0))
    if kind == "constant":
        c1, c2 = (float(v) for v in vector)
        return Forcing("constant", (c1, c2), lambda x, y, t: (c1, c2))
    if kind == "rotational":
        return Forcing("rotational", (float(amplitude), float(length)), _rot(amplitude, length))
    if kind == "potential":
        return Forcing("potential", (float(amplitude), float(length)), _pot(amplitude, length))
    if kind == "mixed":
        r, p = _rot(amplitude, length), _pot(potential, length)

        def f(x, y, t):
            a, b = r(x, y, t), p(x, y, t)
            return a[0] + b[0], a[1] + b[1]

        return Forcing("mixed", (float(amplitude), float(potential), float(length)), f)
    raise ValueError(f"unknown forcing kind {kind!r}")


def custom_forcing(func: Callable, name: str = "custom", steady: bool = False) -> Forcing:
    """Wrap ``func(x, y, t) -> (f1, f2)``; declare ``steady`` to reuse one sample."""
    return Forcing(name, (), func, steady)
