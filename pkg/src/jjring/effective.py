"""Effective three-resonator model hosted by the chiral plaquette.

Eliminating the ring degrees of freedom (second-order Schrieffer-Wolff,
projected onto the chiral state) leaves three identical resonators with a
complex hopping whose phase -2 pi/3 is inherited from the plaquette:

    H_e = sum_i (omega_r + 3g) a_i^dag a_i
        + (g/2) (a_b^dag a_a + a_c^dag a_b + a_a^dag a_c) e^{-i 2 pi/3} + h.c.

In the single-excitation subspace that is a 3x3 matrix with eigenvalues
Omega_k = 3g + omega_r + 2g cos(2 pi k/3 + 2 pi/3), k in {-1, 0, 1}:
a degenerate pair at omega_r + 2g and a singlet at omega_r + 5g.  All
spectral gaps are 3g, so populations are periodic with period 2 pi/(3g).
The conjugate chiral state conjugates the hopping phase and reverses the
circulation direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

HOP_PHASE = 2.0 * math.pi / 3.0


class EffectiveModelError(ValueError):
    pass


@dataclass(frozen=True)
class EffectiveParams:
    """Resonator frequency and plaquette-induced hopping, both in 1/ns."""

    omega_r: float
    g: float
    chirality_sign: int = +1

    def __post_init__(self):
        if self.omega_r <= 0.0:
            raise EffectiveModelError("omega_r must be positive")
        if self.chirality_sign not in (-1, 1):
            raise EffectiveModelError("chirality_sign must be +1 or -1")

    def period(self) -> float:
        """Population recurrence time 2 pi / (3 g)."""
        if self.g == 0.0:
            raise EffectiveModelError("period undefined at g = 0")
        return 2.0 * math.pi / (3.0 * abs(self.g))


@dataclass(frozen=True)
class SingleExcitationState:
    """Amplitude triple (c_a, c_b, c_c); must be normalized."""

    amplitudes: tuple

    def __post_init__(self):
        c = np.asarray(self.amplitudes, dtype=complex)
        if c.shape != (3,):
            raise EffectiveModelError("need exactly three amplitudes")
        if abs(np.vdot(c, c).real - 1.0) > 1e-12:
            raise EffectiveModelError("state must be normalized to 1e-12")
        object.__setattr__(self, "amplitudes", tuple(c))

    @classmethod
    def basis(cls, i: int) -> "SingleExcitationState":
        c = [0.0, 0.0, 0.0]
        c[i] = 1.0
        return cls(tuple(c))

    @classmethod
    def superposition(cls, i: int, j: int, sign: float = 1.0) -> "SingleExcitationState":
        c = np.zeros(3, dtype=complex)
        c[i] = 1.0 / math.sqrt(2.0)
        c[j] = sign / math.sqrt(2.0)
        return cls(tuple(c))

    def populations(self) -> np.ndarray:
        return np.abs(np.asarray(self.amplitudes)) ** 2


def coupling_g(e_j_r, e_n, omega_r, n_total=1, form="half"):
    """Hopping energy from the ring-resonator junction energy.

    Second-order closed form (with the 1/2 prefactor)

        g = (1/2) (E_J^r)^2 / [ E_N (1 - (omega_r/E_N - 2N)^2) ];

    form="doubled" drops the 1/2.  Both prefactor conventions are in
    circulation, differing by exactly that factor; both are exposed and
    the tests record their ratio.  Raises at the resonance pole
    omega_r = E_N (2N +- 1) where an intermediate state becomes degenerate.
    """
    if form not in ("half", "doubled"):
        raise EffectiveModelError(f"unknown form {form!r}")
    if e_n <= 0.0:
        raise EffectiveModelError("E_N must be positive")
    x = omega_r / e_n - 2.0 * n_total
    denom = e_n * (1.0 - x * x)
    if abs(denom) < 1e-12 * e_n:
        raise EffectiveModelError(
            "resonance pole: omega_r = E_N (2N +- 1) makes an intermediate "
            "ring state degenerate with the initial one"
        )
    g = 0.5 * e_j_r * e_j_r / denom
    return g if form == "half" else 2.0 * g


def coupling_g_low_frequency(e_j_r, e_n, n_total=1):
    """omega_r -> 0 limit of `coupling_g`: g = (1/2)(E_J^r)^2/[E_N(1-4N^2)]."""
    if e_n <= 0.0:
        raise EffectiveModelError("E_N must be positive")
    denom = 1.0 - 4.0 * n_total * n_total
    if denom == 0:
        raise EffectiveModelError("resonance pole at 4 N^2 = 1")
    return 0.5 * e_j_r * e_j_r / (e_n * denom)


def effective_hamiltonian(p: EffectiveParams) -> np.ndarray:
    """Single-excitation 3x3 matrix of H_e (resonator order a, b, c).

    Off-diagonal magnitude g, fixed by the eigenvalue structure
    {omega_r + 2g, omega_r + 2g, omega_r + 5g} and the 2 pi/(3g)
    recurrence; gaps are then exactly 3g.
    """
    hop = p.g * np.exp(-1j * p.chirality_sign * HOP_PHASE)
    H = np.full((3, 3), 0.0, dtype=complex)
    np.fill_diagonal(H, p.omega_r + 3.0 * p.g)
    for src, dst in ((0, 1), (1, 2), (2, 0)):  # a->b->c->a
        H[dst, src] = hop
        H[src, dst] = np.conj(hop)
    return H


def eigenfrequencies(p: EffectiveParams) -> np.ndarray:
    """Omega_k for wave numbers k = -1, 0, 1 (in that order)."""
    k = np.array([-1.0, 0.0, 1.0])
    return 3.0 * p.g + p.omega_r + 2.0 * p.g * np.cos(2.0 * math.pi * k / 3.0 + HOP_PHASE)


def circulation(p: EffectiveParams, initial: SingleExcitationState, times) -> np.ndarray:
    """Per-resonator probabilities P_i(t); rows (t, P_a, P_b, P_c)."""
    H = effective_hamiltonian(p)
    w, U = np.linalg.eigh(H)
    c0 = U.conj().T @ np.asarray(initial.amplitudes)
    out = np.empty((len(times), 4))
    for row, t in enumerate(times):
        amps = U @ (np.exp(-1j * w * t) * c0)
        probs = np.abs(amps) ** 2
        out[row, 0] = t
        out[row, 1:] = probs
    total = out[:, 1:].sum(axis=1)
    if np.max(np.abs(total - 1.0)) > 1e-10:
        raise EffectiveModelError("probability leak beyond 1e-10")
    return out


def visit_order(series: np.ndarray) -> tuple:
    """Resonators ordered by the time of their first probability maximum.

    Works on a `circulation` output covering one period; peaks are local
    maxima strictly inside the window, so a resonator already maximal at
    t = 0 is ranked by its first revival instead.
    """
    times = series[:, 0]
    order = []
    for i in (1, 2, 3):
        y = series[:, i]
        peak_t = None
        for j in range(1, len(y) - 1):
            if y[j] >= y[j - 1] and y[j] > y[j + 1]:
                peak_t = times[j]
                break
        order.append((peak_t if peak_t is not None else math.inf, i - 1))
    order.sort()
    return tuple(idx for _, idx in order)
