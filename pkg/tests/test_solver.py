"""Eigensolver and propagator checks against dense linear-algebra oracles."""

import numpy as np
import pytest
from scipy.linalg import expm

from jjring.lattice import Basis, LinearMap, PhaseGrid
from jjring.ring import RingParams, build_hamiltonian
from jjring.solver import (
    DENSE_DIM_CAP,
    ConvergenceError,
    DenseOperator,
    EigenResult,
    PropagatorConfig,
    dense_matrix,
    lowest_eigenpairs,
    operator_norm_estimate,
    propagate,
    step_doubling_check,
)

rng = np.random.default_rng(11)


def random_hermitian_map(dim, spread=1.0, seed=None):
    r = np.random.default_rng(seed if seed is not None else 0)
    A = r.standard_normal((dim, dim)) + 1j * r.standard_normal((dim, dim))
    H = (A + A.conj().T) / 2.0 * spread
    return H, LinearMap(dim=dim, apply=lambda v: H @ v, hermitian=True, basis=Basis.CHARGE)


def test_lowest_eigenpairs_against_dense():
    H, op = random_hermitian_map(200, seed=5)
    want = np.linalg.eigvalsh(H)[:4]
    res = lowest_eigenpairs(op, k=4, tol=1e-10, seed=3)
    assert isinstance(res, EigenResult)
    scale = operator_norm_estimate(op)
    assert np.max(np.abs(res.eigenvalues - want)) < 1e-8 * scale
    for i in range(4):
        r = np.linalg.norm(H @ res.vectors[i] - res.eigenvalues[i] * res.vectors[i])
        assert r <= 1e-10 * scale  # the advertised post-condition


def test_lowest_eigenpairs_deterministic():
    _, op = random_hermitian_map(80, seed=6)
    a = lowest_eigenpairs(op, k=2, tol=1e-11, seed=9)
    b = lowest_eigenpairs(op, k=2, tol=1e-11, seed=9)
    assert np.array_equal(a.vectors, b.vectors)


def test_degenerate_lowest_value_still_correct():
    # doubly degenerate bottom level: value must be right (single Krylov
    # vector cannot see the multiplicity, and does not need to)
    d = np.concatenate([[-2.0, -2.0], np.linspace(-1.0, 1.0, 62)])
    op = LinearMap(dim=64, apply=lambda v: d * v, hermitian=True, basis=Basis.CHARGE)
    res = lowest_eigenpairs(op, k=1, tol=1e-12, seed=1)
    assert res.eigenvalues[0] == pytest.approx(-2.0, abs=1e-10)


def test_convergence_error_reports_best_residual():
    H, op = random_hermitian_map(300, seed=7)
    with pytest.raises(ConvergenceError) as err:
        lowest_eigenpairs(op, k=2, tol=1e-14, max_basis=10)
    assert err.value.best_residual > 0.0


def test_norm_estimate_close_to_true():
    H, op = random_hermitian_map(120, seed=8)
    true = np.max(np.abs(np.linalg.eigvalsh(H)))
    est = operator_norm_estimate(op)
    assert 0.5 * true <= est <= 1.1 * true


@pytest.mark.parametrize("method", ["krylov", "chebyshev", "dense"])
def test_propagate_matches_expm(method):
    dim = 48
    H, op = random_hermitian_map(dim, spread=3.0, seed=12)
    v0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v0 /= np.linalg.norm(v0)
    t = 0.7
    want = expm(-1j * t * H) @ v0
    ew = np.linalg.eigvalsh(H)
    cfg = PropagatorConfig(
        method=method,
        dt=0.1,
        tol=1e-12,
        bounds=(float(ew[0]) - 0.1, float(ew[-1]) + 0.1) if method == "chebyshev" else None,
    )
    times, states = propagate(op, v0, t, cfg)
    assert times[0] == 0.0
    assert times[-1] == pytest.approx(t)
    assert np.allclose(np.diff(times), 0.1, atol=1e-9)
    assert np.linalg.norm(states[-1] - want) < 1e-8
    assert abs(np.linalg.norm(states[-1]) - 1.0) < 1e-10


def test_propagate_callback_mode():
    dim = 32
    _, op = random_hermitian_map(dim, seed=13)
    v0 = np.zeros(dim, dtype=complex)
    v0[0] = 1.0
    seen = []
    final = propagate(op, v0, 0.5, PropagatorConfig(dt=0.1), callback=lambda t, v: seen.append(t))
    assert seen == pytest.approx([0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    assert final.shape == (dim,)


def test_chebyshev_requires_bounds():
    _, op = random_hermitian_map(16, seed=14)
    with pytest.raises(ValueError):
        propagate(op, np.ones(16, dtype=complex), 0.1,
                  PropagatorConfig(method="chebyshev", dt=0.1))


def test_energy_conserved_along_trajectory():
    grid = PhaseGrid(12)
    H = build_hamiltonian(RingParams(e_j=10.0, e_c=0.4, phi_e=2.0 * np.pi), grid)
    v0 = rng.standard_normal(grid.dim) + 1j * rng.standard_normal(grid.dim)
    v0 /= np.linalg.norm(v0)
    _, states = propagate(H, v0, 1.0, PropagatorConfig(dt=0.05, tol=1e-11))
    e = [np.vdot(s, H(s)).real for s in states]
    assert np.max(np.abs(np.diff(e))) < 1e-8 * max(1.0, abs(e[0]))


def test_dense_operator_and_cap():
    grid = PhaseGrid(12)
    H = build_hamiltonian(RingParams(e_j=10.0, e_c=1.0), grid)
    dense = DenseOperator.from_map(H)
    vals, vecs = dense.lowest(3)
    res = lowest_eigenpairs(H, k=3, tol=1e-11)
    assert np.max(np.abs(vals - res.eigenvalues)) < 1e-8
    assert vecs.shape == (3, grid.dim)

    big = LinearMap(dim=DENSE_DIM_CAP + 1, apply=lambda v: v, hermitian=True)
    with pytest.raises(ValueError):
        dense_matrix(big)


def test_step_doubling_error_small_when_converged():
    _, op = random_hermitian_map(40, spread=4.0, seed=15)
    v0 = np.zeros(40, dtype=complex)
    v0[0] = 1.0
    err = step_doubling_check(op, v0, 0.4, PropagatorConfig(dt=0.05, tol=1e-11))
    assert err < 1e-9
