"""Matrix-free eigensolver and time propagation.

Eigenpairs come from Lanczos with full reorthogonalization (desk-scale
problems, no restarting); propagation uses short-iterate Krylov expansion
of exp(-i H t) with adaptive step rejection, or a Chebyshev expansion when
spectral bounds are supplied.  Dense LAPACK paths double as independent
oracles for dimensions small enough to afford them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import jv

from .lattice import Basis, LinearMap, PhaseGrid, WaveFunction


class ConvergenceError(RuntimeError):
    """Iteration budget exhausted; carries the best residual reached."""

    def __init__(self, message: str, best_residual: float | None = None):
        super().__init__(message)
        self.best_residual = best_residual


def operator_norm_estimate(op: LinearMap, seed: int = 0, iters: int = 20) -> float:
    """Power-method estimate of ||op|| for a Hermitian map (20 iterations)."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = op(v)
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return 0.0
        v = w / est
    return est


@dataclass
class EigenResult:
    eigenvalues: np.ndarray   # ascending
    vectors: np.ndarray       # shape (k, dim), rows normalized
    residuals: np.ndarray     # ||H v - w v|| per pair
    iterations: int
    basis: Basis | None = None

    def as_wavefunctions(self, grid: PhaseGrid) -> list[WaveFunction]:
        basis = self.basis if self.basis is not None else Basis.CHARGE
        return [WaveFunction(grid, basis, v.copy()) for v in self.vectors]


def _fix_phase(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    ph = v[i] / abs(v[i]) if v[i] != 0 else 1.0
    return v / ph


def _reorthogonalize(w: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Project w onto the complement of the rows of V (classical GS, twice)."""
    for _ in range(2):
        w = w - (V.conj() @ w) @ V
    return w


def lowest_eigenpairs(
    H: LinearMap,
    k: int = 1,
    tol: float = 1e-10,
    seed: int = 7,
    max_basis: int | None = None,
) -> EigenResult:
    """k lowest eigenpairs of a Hermitian map by Lanczos.

    Full reorthogonalization against the whole basis every step keeps the
    tridiagonal honest at desk scale.  Convergence requires the residual of
    each requested Ritz pair to fall below tol * ||H||_est; the start vector
    is drawn from a seeded generator so repeated calls are bit-identical.
    """
    if not H.hermitian:
        raise ValueError("lowest_eigenpairs requires a Hermitian map")
    dim = H.dim
    k = int(k)
    if k < 1 or k > dim:
        raise ValueError(f"k={k} out of range for dimension {dim}")
    if max_basis is None:
        max_basis = 160 + 48 * k
    max_basis = min(max_basis, dim)

    scale = operator_norm_estimate(H, seed=seed)
    if scale == 0.0:
        scale = 1.0
    tol_abs = tol * scale

    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)

    V = np.empty((max_basis, dim), dtype=complex)
    V[0] = v
    alphas: list[float] = []
    betas: list[float] = []
    best_res = np.inf

    for m in range(max_basis):
        w = H(V[m])
        alphas.append(float(np.vdot(V[m], w).real))
        w = _reorthogonalize(w, V[: m + 1])
        b = float(np.linalg.norm(w))
        ncur = m + 1
        breakdown = b < 1e-13 * scale
        terminal = breakdown or ncur == max_basis

        if ncur >= k and (ncur % 8 == 0 or terminal):
            theta, S = eigh_tridiagonal(np.array(alphas), np.array(betas))
            est = float(np.abs(b * S[-1, :k]).max())
            best_res = min(best_res, est)
            if est <= tol_abs or terminal:
                X = (S[:, :k].T @ V[:ncur]).astype(complex)
                vals = theta[:k].copy()
                true_res = np.empty(k)
                for i in range(k):
                    X[i] /= np.linalg.norm(X[i])
                    true_res[i] = float(np.linalg.norm(H(X[i]) - vals[i] * X[i]))
                    X[i] = _fix_phase(X[i])
                best_res = min(best_res, float(true_res.max()))
                if np.all(true_res <= tol_abs):
                    return EigenResult(
                        eigenvalues=vals,
                        vectors=X,
                        residuals=true_res,
                        iterations=ncur,
                        basis=H.basis,
                    )
        if terminal:
            reason = "invariant subspace reached" if breakdown else "basis budget exhausted"
            raise ConvergenceError(
                f"Lanczos did not reach tol={tol:g} after {ncur} iterations ({reason}); "
                f"best residual {best_res:.3e} vs threshold {tol_abs:.3e}",
                best_residual=best_res,
            )
        betas.append(b)
        V[ncur] = w / b

    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# Time propagation.


@dataclass
class PropagatorConfig:
    """Settings for exp(-i H t) application.

    dt is the emission cadence; internal steps subdivide it adaptively
    (Krylov) or follow it directly (Chebyshev, dense).  bounds = (emin,
    emax) must enclose the spectrum for the Chebyshev method.
    """

    method: str = "krylov"
    dt: float = 0.01
    krylov_dim: int = 24
    tol: float = 1e-10
    norm_tol: float = 1e-10
    chebyshev_order: int | None = None
    bounds: tuple[float, float] | None = None

    def __post_init__(self):
        if self.method not in ("krylov", "chebyshev", "dense"):
            raise ValueError(f"unknown propagation method {self.method!r}")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")


def _lanczos_basis(H: LinearMap, v0: np.ndarray, m: int):
    """Orthonormal Krylov basis and tridiagonal coefficients from v0."""
    dim = v0.shape[0]
    m = min(m, dim)
    V = np.empty((m, dim), dtype=complex)
    alphas = np.empty(m)
    betas = np.empty(max(m - 1, 0))
    V[0] = v0
    for j in range(m):
        w = H(V[j])
        alphas[j] = float(np.vdot(V[j], w).real)
        w = _reorthogonalize(w, V[: j + 1])
        b = float(np.linalg.norm(w))
        if j == m - 1:
            return V, alphas, betas, b
        if b < 1e-14:
            used = j + 1
            return V[:used], alphas[:used], betas[: used - 1], 0.0
        betas[j] = b
        V[j + 1] = w / b
    return V, alphas, betas, 0.0


def _krylov_step(H, psi, h, cfg):
    """One accepted Krylov substep of size <= h; returns (new_psi, taken)."""
    V, alphas, betas, b_last = _lanczos_basis(H, psi, cfg.krylov_dim)
    theta, S = eigh_tridiagonal(alphas, betas)
    e1 = S[0, :]
    taken = h
    for _ in range(40):
        y = S @ (np.exp(-1j * taken * theta) * e1)
        err = abs(b_last) * abs(y[-1]) if len(y) == cfg.krylov_dim else 0.0
        if err <= cfg.tol:
            new = (y @ V).astype(complex)
            drift = abs(np.linalg.norm(new) - 1.0)
            if drift <= cfg.norm_tol:
                return new, taken
        taken *= 0.5
    raise ConvergenceError(
        f"Krylov step rejected below dt={taken:g}; raise krylov_dim or tol"
    )


def propagate(
    H: LinearMap,
    psi0: np.ndarray,
    t_final: float,
    cfg: PropagatorConfig,
    callback=None,
):
    """Evolve psi0 under exp(-i H t), emitting at multiples of cfg.dt.

    The state is renormalized never; each emitted state must carry unit norm
    within cfg.norm_tol or the step is rejected.  With a callback the states
    are not stored: callback(t, psi) runs per emission (including t=0) and
    the return value is the final state.  Without one, returns (times,
    states) arrays.
    """
    psi = np.asarray(psi0, dtype=complex).copy()
    n0 = np.linalg.norm(psi)
    if abs(n0 - 1.0) > 1e-8:
        raise ValueError("propagate expects a normalized initial state")
    psi /= n0

    n_steps = int(round(t_final / cfg.dt))
    if abs(n_steps * cfg.dt - t_final) > 1e-9 * max(1.0, t_final):
        n_steps = int(np.ceil(t_final / cfg.dt - 1e-12))
    times = np.arange(n_steps + 1) * cfg.dt
    if n_steps > 0:
        times[-1] = min(times[-1], t_final)

    stepper = _make_stepper(H, cfg)

    out = None if callback is not None else np.empty((n_steps + 1, psi.shape[0]), dtype=complex)
    for i, t in enumerate(times):
        if i > 0:
            remaining = times[i] - times[i - 1]
            while remaining > 1e-12 * cfg.dt:
                psi, taken = stepper(psi, remaining)
                remaining -= taken
            drift = abs(np.linalg.norm(psi) - 1.0)
            if drift > cfg.norm_tol:
                raise ConvergenceError(f"norm drift {drift:.3e} exceeds {cfg.norm_tol:g}")
        if callback is not None:
            callback(float(t), psi)
        else:
            out[i] = psi
    if callback is not None:
        return psi
    return times, out


def _make_stepper(H: LinearMap, cfg: PropagatorConfig):
    if cfg.method == "krylov":
        return lambda psi, h: _krylov_step(H, psi, h, cfg)
    if cfg.method == "chebyshev":
        if cfg.bounds is None:
            raise ValueError("chebyshev propagation requires spectral bounds")
        return _chebyshev_stepper(H, cfg)
    dense = DenseOperator.from_map(H)
    return lambda psi, h: (dense.evolve(psi, h), h)


def _chebyshev_stepper(H: LinearMap, cfg: PropagatorConfig):
    a, b = cfg.bounds
    if not b > a:
        raise ValueError("bounds must satisfy emax > emin")
    half_span = 0.5 * (b - a)
    center = 0.5 * (b + a)

    def step(psi, h):
        w = half_span * h
        order = cfg.chebyshev_order
        if order is None:
            order = int(w + 25.0 + 12.0 * w ** (1.0 / 3.0))
        ks = np.arange(order + 1)
        coeffs = 2.0 * (-1j) ** ks * jv(ks, w)
        coeffs[0] *= 0.5
        if abs(coeffs[-1]) > cfg.tol:
            raise ConvergenceError(
                f"Chebyshev order {order} leaves tail {abs(coeffs[-1]):.2e} > tol; "
                "increase chebyshev_order"
            )
        # Clenshaw-style forward recurrence on scaled H
        tk_prev = psi
        tk = (H(psi) - center * psi) / half_span
        acc = coeffs[0] * tk_prev + coeffs[1] * tk
        for k in range(2, order + 1):
            tk_next = 2.0 * (H(tk) - center * tk) / half_span - tk_prev
            acc = acc + coeffs[k] * tk_next
            tk_prev, tk = tk, tk_next
        return np.exp(-1j * center * h) * acc, h

    return step


# ---------------------------------------------------------------------------
# Dense oracles (small dimensions only).


DENSE_DIM_CAP = 4096


def dense_matrix(op: LinearMap, cap: int = DENSE_DIM_CAP) -> np.ndarray:
    """Materialize a map by applying it to coordinate vectors."""
    if op.dim > cap:
        raise ValueError(f"dimension {op.dim} exceeds dense cap {cap}")
    eye = np.eye(op.dim, dtype=complex)
    cols = [op(eye[i]) for i in range(op.dim)]
    return np.stack(cols, axis=1)


@dataclass
class DenseOperator:
    """Eigendecomposition-backed exact reference for a Hermitian map."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns

    @classmethod
    def from_map(cls, op: LinearMap, cap: int = DENSE_DIM_CAP) -> "DenseOperator":
        mat = dense_matrix(op, cap)
        herm_defect = np.abs(mat - mat.conj().T).max()
        if herm_defect > 1e-10 * max(1.0, np.abs(mat).max()):
            raise ValueError(f"map is not Hermitian (defect {herm_defect:.2e})")
        w, U = np.linalg.eigh(mat)
        return cls(w, U)

    def evolve(self, psi: np.ndarray, t: float) -> np.ndarray:
        c = self.eigenvectors.conj().T @ psi
        return self.eigenvectors @ (np.exp(-1j * t * self.eigenvalues) * c)

    def lowest(self, k: int):
        return self.eigenvalues[:k], self.eigenvectors[:, :k].T


def step_doubling_check(H: LinearMap, psi0: np.ndarray, t_final: float, cfg: PropagatorConfig) -> float:
    """|1 - |<psi_dt | psi_dt/2>|| after full evolution; small when converged."""
    _, states = propagate(H, psi0, t_final, cfg)
    half = PropagatorConfig(
        method=cfg.method,
        dt=0.5 * cfg.dt,
        krylov_dim=cfg.krylov_dim,
        tol=cfg.tol,
        norm_tol=cfg.norm_tol,
        chebyshev_order=cfg.chebyshev_order,
        bounds=cfg.bounds,
    )
    _, states_half = propagate(H, psi0, t_final, half)
    ov = abs(np.vdot(states[-1], states_half[-1]))
    return abs(1.0 - ov)
