"""Three-junction ring Hamiltonian in the collective (phi+, phi-) variables.

A superconducting ring of three islands joined by three Josephson junctions,
threaded by external flux phi_e, reduces at fixed total charge N to two
collective modes.  With phi2, phi3 the island phases relative to island 1,

    phi+ = (phi2 + phi3) / 2,    phi- = (phi2 - phi3) / 2,

the Hamiltonian on the discretized torus is

    H = (E_N + E_C/3) N^2
        + E_C [ 3 (n+ - 2N/3)^2 + n-^2 ]
        - [ EJ1 cos(phi+ + phi- - phi_e/3)
          + EJ3 cos(phi+ - phi- + phi_e/3)
          + EJ2 cos(2 phi- + phi_e/3) ]

with uniform junctions EJ1 = EJ2 = EJ3 = E_J.  The kinetic coefficient is
fixed so the small-oscillation frequency about a potential minimum is
sqrt(12 E_J E_C), the scale all lifetime and period checks are phrased in.

Each potential cosine acts in the charge basis as a pair of cyclic shifts
with flux-dependent phases, so one application costs O(L^2) and no matrix
is ever formed.

The three phase-basis grid deltas at (phi+, phi-) = (0, 0), (0, +2pi/3) and
(0, -2pi/3) are the charge plane waves |N, phi2, phi3> with (phi2, phi3) =
(0,0), (2pi/3, -2pi/3), (-2pi/3, 2pi/3).  The cyclic relabeling of the three
islands is realized on the grid as the phase-diagonal unitary

    P123 = exp(-i N phi-),

which leaves each special state invariant up to the phases 1,
exp(-+ i 2 pi N / 3), and gives the Hermitian chirality witness

    chi = (P123 - P132) / 2i = -sin(N phi-).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import (
    Basis,
    GridError,
    LinearMap,
    PhaseGrid,
    WaveFunction,
    charge_diag_operator,
    diag_operator,
    to_basis,
)

TWO_THIRDS_PI = 2.0 * np.pi / 3.0


@dataclass(frozen=True)
class RingParams:
    """Physical parameters; energies in 1/ns (hbar = 1), flux in radians.

    `junction_e_j` optionally gives the three junction energies (EJ1, EJ2,
    EJ3) individually; when None all three equal `e_j`.
    """

    e_j: float
    e_c: float
    e_n: float = 0.0
    n_total: int = 1
    phi_e: float = 0.0
    junction_e_j: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.e_j <= 0.0:
            raise ValueError("e_j must be positive")
        if self.e_c < 0.0:
            raise ValueError("e_c must be non-negative")
        if self.e_n < 0.0:
            raise ValueError("e_n must be non-negative")
        if self.junction_e_j is not None and len(self.junction_e_j) != 3:
            raise ValueError("junction_e_j must hold exactly three energies")

    @property
    def ratio(self) -> float:
        if self.e_c == 0.0:
            return math.inf
        return self.e_j / self.e_c

    def junction_energies(self) -> tuple[float, float, float]:
        if self.junction_e_j is None:
            return (self.e_j, self.e_j, self.e_j)
        return tuple(float(x) for x in self.junction_e_j)

    def with_flux(self, phi_e: float) -> "RingParams":
        return RingParams(self.e_j, self.e_c, self.e_n, self.n_total, phi_e, self.junction_e_j)


@dataclass(frozen=True)
class HarmonicParams:
    """Small-oscillation scales about the displaced potential minimum."""

    omega: float       # sqrt(12 E_J E_C)
    alpha: float       # coherent displacement (phi_e / sqrt(3)) (E_C / 3 E_J)^(1/4)
    n_expected: float  # |alpha|^2

    @classmethod
    def from_ring(cls, params: RingParams) -> "HarmonicParams":
        if params.e_c <= 0.0:
            raise ValueError("harmonic scales need e_c > 0")
        omega = math.sqrt(12.0 * params.e_j * params.e_c)
        alpha = (params.phi_e / math.sqrt(3.0)) * (params.e_c / (3.0 * params.e_j)) ** 0.25
        return cls(omega=omega, alpha=alpha, n_expected=alpha * alpha)


def _kinetic_grid(params: RingParams, grid: PhaseGrid) -> np.ndarray:
    np_mesh, nm_mesh = grid.charge_mesh()
    N = params.n_total
    const = (params.e_n + params.e_c / 3.0) * N * N
    return const + params.e_c * (3.0 * (np_mesh - 2.0 * N / 3.0) ** 2 + nm_mesh.astype(float) ** 2)


def potential_on_grid(params: RingParams, grid: PhaseGrid) -> np.ndarray:
    """Josephson potential sampled on the (phi+, phi-) grid, shape (L, L)."""
    pp, pm = grid.phi_mesh()
    c = params.phi_e / 3.0
    ej1, ej2, ej3 = params.junction_energies()
    return -(
        ej1 * np.cos(pp + pm - c)
        + ej3 * np.cos(pp - pm + c)
        + ej2 * np.cos(2.0 * pm + c)
    )


def chiral_current_on_grid(grid: PhaseGrid, phi_e: float) -> np.ndarray:
    pp, pm = grid.phi_mesh()
    c = phi_e / 3.0
    return 2.0 * np.cos(pp) * np.sin(pm - c) - np.sin(2.0 * pm + c)


def chiral_current_map(grid: PhaseGrid, phi_e: float) -> LinearMap:
    """Chiral (circulating) current operator; diagonal in the phase basis."""
    return diag_operator(grid, chiral_current_on_grid(grid, phi_e), hermitian=True)


def build_hamiltonian(params: RingParams, grid: PhaseGrid) -> LinearMap:
    """Full ring Hamiltonian as a charge-basis matrix-free map.

    Kinetic charging term is pointwise; each potential cosine contributes a
    conjugate pair of cyclic charge shifts carrying exp(-+ i phi_e / 3).
    """
    L = grid.size
    ekin = _kinetic_grid(params, grid)
    c = params.phi_e / 3.0
    ej1, ej2, ej3 = params.junction_energies()
    # (coefficient, (shift_plus, shift_minus)); shift +1 raises that charge.
    terms = [
        (-0.5 * ej1 * np.exp(-1j * c), (1, 1)),
        (-0.5 * ej1 * np.exp(+1j * c), (-1, -1)),
        (-0.5 * ej3 * np.exp(+1j * c), (1, -1)),
        (-0.5 * ej3 * np.exp(-1j * c), (-1, 1)),
        (-0.5 * ej2 * np.exp(+1j * c), (0, 2)),
        (-0.5 * ej2 * np.exp(-1j * c), (0, -2)),
    ]

    def apply(v):
        a = v.reshape(L, L)
        out = ekin * a
        for coeff, (sp, sm) in terms:
            out = out + coeff * np.roll(a, (sp, sm), axis=(0, 1))
        return out.reshape(-1)

    return LinearMap(grid.dim, apply, hermitian=True, basis=Basis.CHARGE)


def build_harmonic_hamiltonian(params: RingParams, grid: PhaseGrid) -> LinearMap:
    """Quadratic expansion about the flux-displaced minimum.

    Same charging term; potential replaced by E_J [phi+^2 + 3 (phi- -
    phi_e/3)^2] with the displacement wrapped onto the torus.  Applied via
    the unitary DFT since a quadratic is not a short shift sum.
    """
    L = grid.size
    ekin = _kinetic_grid(params, grid)
    pp, pm = grid.phi_mesh()
    d = pm - params.phi_e / 3.0
    d = (d + np.pi) % (2.0 * np.pi) - np.pi
    vquad = params.e_j * (pp**2 + 3.0 * d**2)

    def apply(v):
        a = v.reshape(L, L)
        out = ekin * a
        out = out + np.fft.fft2(vquad * np.fft.ifft2(a, norm="ortho"), norm="ortho")
        return out.reshape(-1)

    return LinearMap(grid.dim, apply, hermitian=True, basis=Basis.CHARGE)


# ---------------------------------------------------------------------------
# Chiral plane-wave states and the cyclic-relabeling algebra.


def phase_delta_state(grid: PhaseGrid, phi_plus: float, phi_minus: float) -> WaveFunction:
    """Grid delta at (phi+, phi-); the requested point must lie on the grid."""
    L = grid.size
    amps = np.zeros((L, L), dtype=complex)
    idx = []
    for phi in (phi_plus, phi_minus):
        k = phi * L / (2.0 * np.pi)
        k_round = round(k)
        if abs(k - k_round) > 1e-9:
            raise GridError(f"phase {phi} does not lie on the L={L} grid")
        idx.append(grid.index_of(k_round))
    amps[idx[0], idx[1]] = 1.0
    return WaveFunction(grid, Basis.PHASE, amps.reshape(-1))


def chiral_state(grid: PhaseGrid, branch: int) -> WaveFunction:
    """One of the three special states, by branch label.

    branch 0  -> (phi2, phi3) = (0, 0),          grid point (0, 0)
    branch +1 -> (phi2, phi3) = (2pi/3, -2pi/3), grid point (0, +2pi/3)
    branch -1 -> (phi2, phi3) = (-2pi/3, 2pi/3), grid point (0, -2pi/3)
    """
    if branch not in (-1, 0, 1):
        raise ValueError("branch must be -1, 0 or +1")
    return phase_delta_state(grid, 0.0, branch * TWO_THIRDS_PI)


def permutation_p123(grid: PhaseGrid, n_total: int) -> LinearMap:
    """Cyclic island relabeling 1->2->3 realized on the reduced grid.

    Phase-diagonal unitary exp(-i N phi-), i.e. the charge-grid displacement
    by -N along the minus axis.  Each special state is an eigenvector with
    eigenvalue 1 or exp(-+ i 2 pi N / 3).
    """
    if grid.size % 3 != 0:
        raise GridError("cyclic relabeling needs a grid size divisible by 3")
    _, pm = grid.phi_mesh()
    vals = np.exp(-1j * n_total * pm)
    return diag_operator(grid, vals, hermitian=False)


def chirality_chi(grid: PhaseGrid, n_total: int) -> LinearMap:
    """Hermitian chirality witness chi = (P123 - P132) / 2i = -sin(N phi-)."""
    if grid.size % 3 != 0:
        raise GridError("chirality witness needs a grid size divisible by 3")
    _, pm = grid.phi_mesh()
    return diag_operator(grid, -np.sin(n_total * pm), hermitian=True)


def cover_parity(grid: PhaseGrid) -> LinearMap:
    """Unitary shifting both phases by pi: diag (-1)^(n+ + n-) in charge.

    The reduced description phi+- = (phi2 +- phi3)/2 covers the physical
    (phi2, phi3) torus twice; this operator swaps the two copies.  Every
    ring Hamiltonian term moves n+ + n- by an even amount, so it is an
    exact symmetry, and the loaded-state well at (0, 2pi/3) always comes
    with a degenerate partner at (pi, -pi/3) describing the same physical
    configuration.  Chirality -sin(N phi-) is odd under the swap (for
    N mod 3 != 0), so symmetry-eigenstate ground states average it to
    zero; picking the polarized member of the doublet recovers the
    physical packet.
    """
    kp, km = grid.charge_mesh()
    signs = np.where((kp + km) % 2 == 0, 1.0, -1.0).astype(complex)
    return charge_diag_operator(grid, signs, hermitian=True)


# ---------------------------------------------------------------------------
# Flux noise and junction disorder (charge-limit diagnostics).


def flux_fluctuation_energy(params: RingParams, delta_phi_e: float) -> float:
    """Quadratic energy cost of a flux excursion about a chiral minimum.

    delta_E = E_J (delta_phi_e)^2 / 6; the exact charge-limit cost is
    3 E_J (1 - cos(delta_phi_e / 3)), so the quadratic form is accurate to
    quartic order in the excursion.
    """
    return params.e_j * delta_phi_e * delta_phi_e / 6.0


@dataclass(frozen=True)
class DiagonalityReport:
    diagonal: np.ndarray      # energies of the three special states, branches (0, +1, -1)
    offdiag_max: float        # largest |<a|H|b>| between distinct special states


def disorder_diagonality(params: RingParams, grid: PhaseGrid) -> DiagonalityReport:
    """Charge-limit check that junction disorder leaves the special states
    eigenstates.

    Uses the Hamiltonian with e_c = 0 (arbitrary per-junction energies kept);
    the special states are phase deltas, so any phase-diagonal potential is
    exactly diagonal on them and only the diagonal energies shift.
    """
    frozen = RingParams(
        params.e_j, 0.0, params.e_n, params.n_total, params.phi_e, params.junction_e_j
    )
    h = build_hamiltonian(frozen, grid)
    states = [chiral_state(grid, b) for b in (0, 1, -1)]
    vecs = [to_basis(s, Basis.CHARGE).amplitudes for s in states]
    mat = np.empty((3, 3), dtype=complex)
    for j, v in enumerate(vecs):
        hv = h(v)
        for i, u in enumerate(vecs):
            mat[i, j] = np.vdot(u, hv)
    off = mat - np.diag(np.diag(mat))
    return DiagonalityReport(diagonal=np.diag(mat).real.copy(), offdiag_max=float(np.abs(off).max()))
