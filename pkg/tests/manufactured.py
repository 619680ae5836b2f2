"""Symbolic manufactured solutions shared by the solver tests."""

import numpy as np
import sympy as sy

X, Y, T = sy.symbols("x y t", real=True)


def ns_solution(g_t=None):
    """Divergence-free velocity vanishing on the unit square, plus a pressure."""
    g_t = T if g_t is None else g_t
    pi = sy.pi
    u1 = g_t * pi * sy.sin(pi * X) ** 2 * sy.sin(2 * pi * Y)
    u2 = -g_t * pi * sy.sin(2 * pi * X) * sy.sin(pi * Y) ** 2
    p = g_t * sy.cos(pi * X) * sy.cos(pi * Y)
    return (u1, u2), p


def ns_forcing(q, velocity, pressure, convection=True):
    """``f^k = du^k/dt - sum q_ijkh d_i d_j u^h + (u . grad) u^k + d_k p``."""
    u = velocity
    xs = (X, Y)
    f = []
    for k in range(2):
        e = sy.diff(u[k], T) + sy.diff(pressure, xs[k])
        for i in range(2):
            for j in range(2):
                for h in range(2):
                    if q[i][j][k][h] != 0:
                        e -= sy.nsimplify(float(q[i][j][k][h])) * sy.diff(u[h], xs[i], xs[j])
        if convection:
            e += sum(u[j] * sy.diff(u[k], xs[j]) for j in range(2))
        f.append(e)
    return f


def lambdify_vector(exprs):
    fs = [sy.lambdify((X, Y, T), e, "numpy") for e in exprs]

    def func(x, y, t):
        return tuple(np.broadcast_to(fn(x, y, t), np.broadcast(x, y).shape).astype(float) for fn in fs)

    return func


def lambdify_scalar(expr):
    fn = sy.lambdify((X, Y, T), expr, "numpy")
    return lambda x, y, t: np.broadcast_to(fn(x, y, t), np.broadcast(x, y).shape).astype(float)


def darcy_forcing(K, nu, pressure, stream):
    """``f = grad p + (K/nu)^{-1} curl psi`` so that ``u = curl psi`` and ``p`` solve Darcy."""
    Kt_inv = np.linalg.inv(np.asarray(K, float) / nu)
    c = (sy.diff(stream, Y), -sy.diff(stream, X))
    f = []
    for a in range(2):
        e = sy.diff(pressure, (X, Y)[a])
        for b in range(2):
            e += sy.nsimplify(float(Kt_inv[a, b])) * c[b]
        f.append(e)
    return f, c
