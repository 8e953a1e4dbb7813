"""Flux loading, sudden quench, half-life extraction and the power-law fit.

Protocol: cool into the ground state at phi_e = 2 pi (a chiral state),
switch the flux off instantaneously, then record the chiral current
<I_ch>(t) under H(phi_e = 0).  The current decays; its half-life tau is
the first time the expectation falls to half the t = 0 value.  Repeating
over a set of E_J/E_C ratios and fitting log tau against log(E_J/E_C)
gives the power-law exponent alpha.

Grid sizing: the loaded packet has charge width sigma_n = (12 r)^(1/4)/2
with r = E_J/E_C.  Full-Hamiltonian runs are converged for L around
20 sigma_n.  Runs under the quadratic-well Hamiltonian swing the charge
coordinate with amplitude (2 pi/3) sqrt(3 r), so they need grids wide
enough to hold the whole swing; `grid_for_ratio` encodes both rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import (
    Basis,
    PhaseGrid,
    WaveFunction,
    expectation,
    fourier_to_phase,
    to_basis,
)
from .ring import (
    RingParams,
    HarmonicParams,
    build_hamiltonian,
    build_harmonic_hamiltonian,
    chiral_current_map,
    chirality_chi,
    cover_parity,
)
from .solver import PropagatorConfig, lowest_eigenpairs, propagate

SCAN_RATIOS = (25.0, 50.0, 100.0, 200.0, 400.0)
SAMPLES_PER_PERIOD = 40


class QuenchError(RuntimeError):
    pass


@dataclass
class SolverSettings:
    """Seeds and tolerances threaded through a quench run (recorded as metadata)."""

    seed: int = 7
    eig_tol: float = 1e-10
    prop_tol: float = 1e-10
    krylov_dim: int = 24

    def as_dict(self):
        return {
            "seed": self.seed,
            "eig_tol": self.eig_tol,
            "prop_tol": self.prop_tol,
            "krylov_dim": self.krylov_dim,
        }


DEFAULT_SETTINGS = SolverSettings()


def sample_interval(params: RingParams) -> float:
    """Emission cadence: 40 samples per harmonic period 2 pi/sqrt(12 EJ EC)."""
    omega = HarmonicParams.from_ring(params).omega
    return (2.0 * math.pi / omega) / SAMPLES_PER_PERIOD


def _round_up6(x: float) -> int:
    return 6 * math.ceil(x / 6.0)


def grid_for_ratio(ratio: float, hamiltonian: str = "full") -> int:
    """Heuristic converged grid size for a quench at E_J/E_C = ratio."""
    if ratio <= 0:
        raise QuenchError("ratio must be positive")
    sigma_n = (12.0 * ratio) ** 0.25 / 2.0
    if hamiltonian == "full":
        return max(24, _round_up6(20.0 * sigma_n))
    if hamiltonian == "harmonic":
        n_amp = (2.0 * math.pi / 3.0) * math.sqrt(3.0 * ratio)
        return max(24, _round_up6(2.0 * (n_amp + 4.0 * sigma_n)))
    raise QuenchError(f"unknown hamiltonian kind {hamiltonian!r}")


def _builder(hamiltonian: str):
    if hamiltonian == "full":
        return build_hamiltonian
    if hamiltonian == "harmonic":
        return build_harmonic_hamiltonian
    raise QuenchError(f"unknown hamiltonian kind {hamiltonian!r}")


def _polarize_ground(grid, params, vec):
    """Resolve the cover-parity ground doublet toward the physical packet.

    The full Hamiltonian commutes with `cover_parity`, so the loaded well
    comes with an exactly degenerate partner (same physical state, other
    copy of the torus) and an eigensolver returns an arbitrary mixture.
    Span {v, T v} is the doublet; within it, pick the chi eigenvector
    whose sign matches the loading flux (phi_e = +2 pi localizes at
    phi- = +2 pi/3 where chi = -sin(2 pi N / 3)).
    """
    parity = cover_parity(grid)
    twin = parity(vec)
    p = np.vdot(vec, twin)
    residual = twin - p * vec
    r_norm = float(np.linalg.norm(residual))
    if r_norm < 1e-6:
        # parity eigenstate and no independent partner: nothing to resolve
        return vec
    partner = residual / r_norm

    chi = chirality_chi(grid, params.n_total)

    def chi_apply(v):
        phase = fourier_to_phase(WaveFunction(grid, Basis.CHARGE, v))
        out = WaveFunction(grid, Basis.PHASE, chi(phase.amplitudes))
        return to_basis(out, Basis.CHARGE).amplitudes

    cv, cp = chi_apply(vec), chi_apply(partner)
    m = np.array(
        [
            [np.vdot(vec, cv), np.vdot(vec, cp)],
            [np.vdot(partner, cv), np.vdot(partner, cp)],
        ]
    )
    w, u = np.linalg.eigh(0.5 * (m + m.conj().T))
    target = -math.copysign(1.0, params.phi_e) * math.copysign(
        1.0, math.sin(2.0 * math.pi * params.n_total / 3.0)
    )
    pick = int(np.argmax(target * w))
    out = u[0, pick] * vec + u[1, pick] * partner
    out /= np.linalg.norm(out)
    anchor = out[int(np.argmax(np.abs(out)))]
    return out * (anchor.conjugate() / abs(anchor))


def load_chiral_state(
    params: RingParams,
    grid: PhaseGrid,
    settings: SolverSettings = DEFAULT_SETTINGS,
    hamiltonian: str = "full",
) -> WaveFunction:
    """Ground state of H at the loading flux (phi_e = +/- 2 pi).

    For the full Hamiltonian the ground level is a cover-parity doublet;
    the chi-polarized member is selected deterministically.  Verifies the
    loaded state is actually chiral: |<chi>| must exceed
    0.1 sin(2 pi N / 3) whenever N mod 3 != 0.
    """
    H = _builder(hamiltonian)(params, grid)
    res = lowest_eigenpairs(H, k=1, tol=settings.eig_tol, seed=settings.seed)
    vec = res.vectors[0]
    chiral_check = params.n_total % 3 != 0 and params.phi_e != 0.0
    if chiral_check and hamiltonian == "full":
        vec = _polarize_ground(grid, params, vec)
    state = WaveFunction(grid, res.basis, vec)
    if chiral_check:
        chi = expectation(chirality_chi(grid, params.n_total), state)
        floor = 0.1 * abs(math.sin(2.0 * math.pi * params.n_total / 3.0))
        if abs(chi) <= floor:
            raise QuenchError(
                f"loaded state is not chiral: <chi> = {chi:.3e}, "
                f"threshold {floor:.3e} (phi_e = {params.phi_e:g})"
            )
    return state


@dataclass
class QuenchRun:
    """Time series of a single quench.

    series rows are (t_ns, I_ch, norm, energy); tau is filled in by
    `half_life` (None when the current never crossed half its initial
    value within the window).
    """

    params: RingParams
    grid_size: int
    series: np.ndarray
    tau: float | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def times(self):
        return self.series[:, 0]

    @property
    def current(self):
        return self.series[:, 1]

    @property
    def norms(self):
        return self.series[:, 2]

    @property
    def energies(self):
        return self.series[:, 3]

    def initial_current(self) -> float:
        return float(self.series[0, 1])


def run_quench(
    params: RingParams,
    grid: PhaseGrid,
    t_final: float,
    settings: SolverSettings = DEFAULT_SETTINGS,
    hamiltonian: str = "full",
    state: WaveFunction | None = None,
) -> QuenchRun:
    """Load at params.phi_e, evolve under phi_e = 0, record <I_ch>(t).

    A pre-loaded `state` skips the eigensolve (it must live on `grid`).
    The t = 0 sample is the static expectation on the loaded state.
    """
    if state is None:
        state = load_chiral_state(params, grid, settings, hamiltonian)
    elif state.grid.size != grid.size:
        raise QuenchError("state grid does not match the requested grid")

    quenched = params.with_flux(0.0)
    H = _builder(hamiltonian)(quenched, grid)
    current = chiral_current_map(grid, 0.0)
    dt = sample_interval(params)

    rows = []

    def record(t, amps):
        psi = WaveFunction(grid, Basis.CHARGE, amps)
        rows.append((t, expectation(current, psi), psi.norm(), expectation(H, psi)))

    psi0 = to_basis(state, Basis.CHARGE).amplitudes
    cfg = PropagatorConfig(dt=dt, krylov_dim=settings.krylov_dim, tol=settings.prop_tol)
    propagate(H, psi0, t_final, cfg, callback=record)

    run = QuenchRun(
        params=params,
        grid_size=grid.size,
        series=np.array(rows, dtype=float),
        metadata={"hamiltonian": hamiltonian, "dt": dt, **settings.as_dict()},
    )
    run.tau = half_life(run)
    return run


def half_life(run: QuenchRun) -> float | None:
    """First downward crossing of I(0)/2, linearly interpolated.

    None when the series never crosses within its window; the caller is
    expected to extend t_final and retry.
    """
    t = run.times
    y = run.current
    if len(t) == 0:
        raise QuenchError("empty series")
    target = y[0] / 2.0
    if y[0] <= 0:
        raise QuenchError("initial current must be positive")
    below = np.nonzero(y[1:] < target)[0]
    if len(below) == 0:
        return None
    i = below[0]  # samples i, i+1 bracket the crossing
    t0, t1 = t[i], t[i + 1]
    y0, y1 = y[i], y[i + 1]
    return float(t0 + (target - y0) * (t1 - t0) / (y1 - y0))


def oscillation_period(run: QuenchRun) -> float | None:
    """Period from the first and third zero crossings of I_ch(t).

    Crossings are linearly interpolated; None with fewer than three.
    """
    t = run.times
    y = run.current
    crossings = []
    for i in range(len(y) - 1):
        if y[i] == 0.0:
            crossings.append(t[i])
        elif y[i] * y[i + 1] < 0.0:
            crossings.append(t[i] - y[i] * (t[i + 1] - t[i]) / (y[i + 1] - y[i]))
    if len(crossings) < 3:
        return None
    return float(crossings[2] - crossings[0])


def _auto_t_final(params: RingParams) -> float:
    omega = HarmonicParams.from_ring(params).omega
    return 0.8 * 2.0 * math.pi / omega


def halflife_point(
    ratio: float,
    e_j: float = 10.0,
    settings: SolverSettings = DEFAULT_SETTINGS,
    grid_size: int | None = None,
    max_extensions: int = 8,
) -> QuenchRun:
    """One scan point: quench at E_J/E_C = ratio, extending the window until
    the half-life crossing is found."""
    params = RingParams(e_j=e_j, e_c=e_j / ratio, phi_e=2.0 * math.pi)
    L = grid_size if grid_size is not None else grid_for_ratio(ratio)
    grid = PhaseGrid(L)
    state = load_chiral_state(params, grid, settings)
    t_final = _auto_t_final(params)
    for _ in range(max_extensions):
        run = run_quench(params, grid, t_final, settings, state=state)
        if run.tau is not None:
            return run
        t_final *= 1.6
    raise QuenchError(
        f"no half-life crossing at ratio {ratio:g} within t_final = {t_final:.3g} ns"
    )


def halflife_scan(
    ratios=SCAN_RATIOS,
    e_j: float = 10.0,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> list[QuenchRun]:
    """Sequential scan over ratios (the CLI parallelizes across points)."""
    return [halflife_point(r, e_j, settings) for r in ratios]


@dataclass
class ConvergenceReport:
    """Continuum-scan outcome: trajectory agreement between consecutive grids."""

    l_values: list[int]
    deviations: list[float]  # max |I_L - I_L'| over the window, len(l_values) - 1
    taus: list[float | None]
    tol: float
    l_star: int | None  # smallest L already agreeing with the next grid


def continuum_scan(
    params: RingParams,
    l_values,
    t_final: float,
    tol: float = 1e-3,
    settings: SolverSettings = DEFAULT_SETTINGS,
    hamiltonian: str = "full",
) -> ConvergenceReport:
    """Rerun the same quench on ascending grids until the current traces agree.

    All runs share the sampling cadence, so traces compare sample-by-sample
    on the common window.  Deviations are absolute, in the units of I_ch
    (initial value 3 sqrt(3)/2).  The window should end just past the
    expected half-life: the late post-collapse ripple stays grid-sensitive
    long after tau itself has converged.
    """
    l_values = [int(L) for L in l_values]
    if l_values != sorted(l_values):
        raise QuenchError("l_values must be ascending")
    runs = [
        run_quench(params, PhaseGrid(L), t_final, settings, hamiltonian=hamiltonian)
        for L in l_values
    ]
    deviations = []
    for a, b in zip(runs, runs[1:]):
        n = min(len(a.current), len(b.current))
        deviations.append(float(np.max(np.abs(a.current[:n] - b.current[:n]))))
    l_star = None
    for L, dev in zip(l_values, deviations):
        if dev < tol:
            l_star = L
            break
    return ConvergenceReport(
        l_values=l_values,
        deviations=deviations,
        taus=[r.tau for r in runs],
        tol=tol,
        l_star=l_star,
    )


@dataclass
class PowerLawFit:
    """Least-squares fit of tau = tau0 * ratio^alpha on log-log axes."""

    alpha: float
    tau0: float
    covariance: np.ndarray  # 2x2 for (alpha, ln tau0)
    points: list[tuple[float, float]]
    residuals: np.ndarray  # per-point residuals in ln tau


def fit_power_law(points) -> PowerLawFit:
    """Fit (ratio, tau) points to tau0 * ratio^alpha.

    Standard linear regression on (ln ratio, ln tau); needs >= 3 points
    with distinct ratios, all entries positive.
    """
    pts = [(float(r), float(t)) for r, t in points]
    if len(pts) < 3:
        raise QuenchError("power-law fit needs at least 3 points")
    if any(r <= 0 or t <= 0 for r, t in pts):
        raise QuenchError("ratios and taus must be positive")
    x = np.log([r for r, _ in pts])
    y = np.log([t for _, t in pts])
    if np.ptp(x) < 1e-12:
        raise QuenchError("degenerate fit: all ratios equal")

    A = np.column_stack([x, np.ones_like(x)])
    beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ beta
    dof = max(len(pts) - 2, 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(A.T @ A)
    return PowerLawFit(
        alpha=float(beta[0]),
        tau0=float(math.exp(beta[1])),
        covariance=cov,
        points=pts,
        residuals=resid,
    )
