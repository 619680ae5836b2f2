import math

import numpy as np
import pytest

from sigmahomog.coeff import DiskDescriptor, identity_coefficients, layered_coefficients, make_forcing
from sigmahomog.dns import (audit_estimates, ladyzhenskaya_audit, ladyzhenskaya_ratio, obstacle_copies,
                            random_solenoidal_faces, solve_eps_oscillating, solve_eps_porous)
from sigmahomog.errors import UnresolvedScale
from sigmahomog.grid import DomainGrid
from sigmahomog.macro import solve_homogenized_ns
from sigmahomog.staggered import MACOperators
from sigmahomog.tensor import identity_tensor

DISK = DiskDescriptor(0.25)


def l2q(g, U):
    return math.sqrt(g.dt * g.h ** 2 * float(np.sum(U[1:] ** 2)))


def test_identity_coefficients_reduce_to_constant_viscosity():
    g = DomainGrid.square(128, nt=8)
    f = make_forcing("rotational", amplitude=2.0)
    ref = solve_homogenized_ns(identity_tensor(), f, g, tol=1e-13)
    for eps in (0.25, 0.125):
        es = solve_eps_oscillating(identity_coefficients(), eps, f, g, tol=1e-13)
        assert np.max(np.abs(es.u - ref.u0)) <= 1e-12 * max(1.0, np.max(np.abs(ref.u0)))


def test_zero_forcing_gives_zero_trajectories():
    g = DomainGrid.square(64, nt=4)
    es = solve_eps_oscillating(layered_coefficients(1.0, 3.0), 0.25, make_forcing("zero"), g)
    assert np.all(es.u == 0)
    ep = solve_eps_porous(DISK, 0.25, 1.0, make_forcing("zero"), g)
    assert np.all(ep.u == 0)
    a = audit_estimates(ep)
    assert all(v == 0 for v in a.as_dict().values())


def test_scale_resolution_enforced():
    g = DomainGrid.square(32, nt=2)
    with pytest.raises(UnresolvedScale):
        solve_eps_oscillating(layered_coefficients(1.0, 3.0), 0.25, make_forcing("zero"), g)
    with pytest.raises(UnresolvedScale):
        solve_eps_porous(DISK, 0.125, 1.0, make_forcing("zero"), g)
    with pytest.raises(ValueError):
        solve_eps_oscillating(layered_coefficients(1.0, 3.0), 1.5, make_forcing("zero"), g)


def test_oscillating_self_convergence():
    gen, f = layered_coefficients(1.0, 3.0), make_forcing("rotational", amplitude=2.0)
    N = [l2q(DomainGrid.square(n, nt=16), solve_eps_oscillating(gen, 0.25, f, DomainGrid.square(n, nt=16)).u)
         for n in (64, 128, 256)]
    d1, d2 = abs(N[1] - N[0]), abs(N[2] - N[1])
    # second order in space: each halving should cut the change by about four
    assert d2 <= 0.5 * d1


def test_oscillating_invariants():
    g = DomainGrid.square(64, nt=8)
    es = solve_eps_oscillating(layered_coefficients(1.0, 3.0), 0.25, make_forcing("mixed", amplitude=5.0, potential=2.0), g)
    ops = MACOperators(g)
    assert np.all(es.u[0] == 0)
    for n in range(g.nt + 1):
        assert np.max(np.abs(ops.div @ es.u[n])) < 1e-9
        assert abs(np.mean(es.p[n])) < 1e-12
    assert max(d["energy_residual"] for d in es.traj.diagnostics) <= 10 * 1e-10


def test_obstacle_copies_inside_domain_only():
    g = DomainGrid.square(64)
    # centred disks at k eps: the copies on the walls are clipped and dropped
    assert sorted(obstacle_copies(DISK, 0.25, g)) == [(a, b) for a in (1, 2, 3) for b in (1, 2, 3)]
    assert obstacle_copies(DiskDescriptor(0.0), 0.25, g) == []


def test_porous_defaults_and_no_slip():
    g = DomainGrid.square(64, nt=4)
    es = solve_eps_porous(DISK, 0.25, 1.0, make_forcing("mixed", amplitude=1.0, potential=0.5), g)
    assert es.meta["eta"] == g.h ** 2
    assert es.meta["copies"] == 9
    assert es.meta["solid_max"] <= math.sqrt(es.meta["eta"])
    stiffer = solve_eps_porous(DISK, 0.25, 1.0, make_forcing("mixed", amplitude=1.0, potential=0.5), g,
                               eta=g.h ** 3)
    assert stiffer.meta["solid_max"] < es.meta["solid_max"]
    ops = MACOperators(g)
    for n in range(g.nt + 1):
        assert np.max(np.abs(ops.div @ es.u[n])) < 1e-9
        assert abs(np.mean(es.p[n])) < 1e-12


def test_empty_obstacle_is_plain_navier_stokes():
    g = DomainGrid.square(32, nt=8)
    f, nu = make_forcing("rotational", amplitude=3.0), 0.5
    ep = solve_eps_porous(DiskDescriptor(0.0), 0.25, nu, f, g, scheme="projection", tol=1e-13)
    ref = solve_homogenized_ns(identity_tensor().scaled(nu), f, g, tol=1e-13)
    assert not ep.meta["mask"].any()
    assert np.max(np.abs(ep.u - ref.u0)) <= 1e-12 * max(1.0, np.max(np.abs(ref.u0)))


def test_porous_eps_squared_scaling():
    f = make_forcing("mixed", amplitude=1.0, potential=0.5)
    C = []
    for eps in (0.25, 0.125):
        g = DomainGrid.square(int(16 / eps), nt=4)
        C.append(audit_estimates(solve_eps_porous(DISK, eps, 1.0, f, g)).C_u)
    assert max(C) / min(C) <= 2.0


def test_ladyzhenskaya_examples():
    g = DomainGrid.square(128)
    assert ladyzhenskaya_ratio(np.zeros((127, 127)), g.h) == 0.0
    x = g.x_nodes()[1:-1]
    v = np.outer(np.sin(np.pi * x), np.sin(np.pi * x))
    exact = math.sqrt(3.0 / (4.0 * math.pi))  # (9/64)^(1/4) / (2 * (1/4) * pi^2/2)^(1/4)
    r = ladyzhenskaya_ratio(v, g.h)
    assert r <= 1.0 and abs(r - exact) < 1e-3
    rep = ladyzhenskaya_audit(DomainGrid.square(64), trials=100, seed=0)
    assert len(rep["ratios"]) == 100 and rep["max_ratio"] <= rep["slack"]
    assert rep["max_trilinear_ratio"] <= rep["slack"]
    with pytest.raises(ValueError):
        ladyzhenskaya_audit(g, trials=0)


def test_trilinear_skew_identities(rng):
    g = DomainGrid.square(32)
    ops = MACOperators(g)
    for _ in range(10):
        u = random_solenoidal_faces(g, rng)
        v, w = rng.standard_normal(g.n_vel), rng.standard_normal(g.n_vel)
        scale = math.sqrt(g.h ** 2 * (u @ u)) * math.sqrt(g.h ** 2 * (v @ v)) * math.sqrt(g.h ** 2 * (w @ w)) / g.h
        assert abs(ops.trilinear(u, v, v)) <= 1e-12 * scale
        assert abs(ops.trilinear(u, v, w) + ops.trilinear(u, w, v)) <= 1e-12 * scale


def test_determinism():
    g = DomainGrid.square(64, nt=4)
    f = make_forcing("rotational", amplitude=3.0)
    a = solve_eps_oscillating(layered_coefficients(1.0, 3.0), 0.25, f, g)
    b = solve_eps_oscillating(layered_coefficients(1.0, 3.0), 0.25, f, g)
    assert np.array_equal(a.u, b.u) and np.array_equal(a.p, b.p)
    r1, r2 = ladyzhenskaya_audit(g, 10, seed=7), ladyzhenskaya_audit(g, 10, seed=7)
    assert r1["ratios"] == r2["ratios"]
