"""Discretized two-mode phase/charge lattice and matrix-free operator algebra.

The ring's two collective degrees of freedom (phi+, phi-) live on an L x L
periodic grid.  Per axis the grid carries L integer labels k in
[-L/2 + 1, L/2], stored in FFT order (0, 1, ..., L/2, -L/2 + 1, ..., -1),
with phase values phi = 2 pi k / L in (-pi, pi].  Charge states use the same
integer labels n.  The two bases are related by the unitary kernel

    <k | n> = exp(i 2 pi k n / L) / sqrt(L)      (per axis)

so phase amplitudes are the unitary inverse FFT of charge amplitudes.
Amplitude vectors are stored flat in row-major order: index i = i_plus * L
+ i_minus with the plus axis outer.  This ordering is part of the on-disk
wavefunction format.

Operators are matrix-free: a `LinearMap` wraps an apply callable plus the
basis its operand vectors are expressed in.  Diagonal multiplications and
cyclic grid shifts are the only primitives; a phase-basis pointwise factor
exp(i s phi) equals a cyclic charge shift n -> n + s, which is what the
Hamiltonian builder exploits.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np


class BasisError(ValueError):
    """Operand expressed in the wrong basis for the requested operation."""


class GridError(ValueError):
    """Grid size violates a structural requirement."""


class Basis(enum.Enum):
    PHASE = "phase"
    CHARGE = "charge"


@dataclass(frozen=True)
class PhaseGrid:
    """Square periodic grid for the (phi+, phi-) torus.

    `size` is the number of points per axis; it must be divisible by 6 so
    that the three special phase points phi- in {0, +-2pi/3} sit exactly on
    the grid and the charge parity structure stays even.
    """

    size: int

    def __post_init__(self):
        if self.size < 6 or self.size % 6 != 0:
            raise GridError(f"grid size must be a positive multiple of 6, got {self.size}")

    @property
    def dim(self) -> int:
        return self.size * self.size

    def k_values(self) -> np.ndarray:
        """Integer labels per axis in FFT order, values in [-L/2+1, L/2]."""
        L = self.size
        k = np.arange(L)
        k[k > L // 2] -= L
        return k

    def phi_values(self) -> np.ndarray:
        return 2.0 * np.pi * self.k_values() / self.size

    def charge_values(self) -> np.ndarray:
        return self.k_values()

    def index_of(self, k: int) -> int:
        """Array index of integer label k (taken mod L)."""
        return int(k) % self.size

    def phi_mesh(self):
        """(phi_plus, phi_minus) meshes of shape (L, L), plus axis outer."""
        phi = self.phi_values()
        return np.meshgrid(phi, phi, indexing="ij")

    def charge_mesh(self):
        n = self.k_values()
        return np.meshgrid(n, n, indexing="ij")


@dataclass
class WaveFunction:
    """Amplitudes over the grid in a declared basis.

    `amplitudes` is a flat complex array of length L^2, row-major with the
    plus axis outer.
    """

    grid: PhaseGrid
    basis: Basis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape == (self.grid.size, self.grid.size):
            amps = amps.reshape(-1)
        if amps.shape != (self.grid.dim,):
            raise ValueError(
                f"amplitude vector has shape {amps.shape}, expected ({self.grid.dim},)"
            )
        self.amplitudes = amps

    def as_grid(self) -> np.ndarray:
        """View of the amplitudes reshaped to (L, L)."""
        return self.amplitudes.reshape(self.grid.size, self.grid.size)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "WaveFunction":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return WaveFunction(self.grid, self.basis, self.amplitudes / n)

    def overlap(self, other: "WaveFunction") -> complex:
        """<self|other>; converts `other` to this wavefunction's basis."""
        if other.grid.size != self.grid.size:
            raise GridError("overlap requires matching grids")
        o = to_basis(other, self.basis)
        return complex(np.vdot(self.amplitudes, o.amplitudes))

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.basis, self.amplitudes.copy())


def fourier_to_phase(psi: WaveFunction) -> WaveFunction:
    """Unitary DFT charge -> phase: psi_phase(k) = sum_n <k|n> psi_charge(n)."""
    if psi.basis is not Basis.CHARGE:
        raise BasisError("fourier_to_phase expects a charge-basis wavefunction")
    a = np.fft.ifft2(psi.as_grid(), norm="ortho")
    return WaveFunction(psi.grid, Basis.PHASE, a.reshape(-1))


def fourier_to_charge(psi: WaveFunction) -> WaveFunction:
    """Unitary DFT phase -> charge (inverse of fourier_to_phase)."""
    if psi.basis is not Basis.PHASE:
        raise BasisError("fourier_to_charge expects a phase-basis wavefunction")
    a = np.fft.fft2(psi.as_grid(), norm="ortho")
    return WaveFunction(psi.grid, Basis.CHARGE, a.reshape(-1))


def to_basis(psi: WaveFunction, basis: Basis) -> WaveFunction:
    if psi.basis is basis:
        return psi
    if basis is Basis.PHASE:
        return fourier_to_phase(psi)
    return fourier_to_charge(psi)


@dataclass(frozen=True)
class LinearMap:
    """Matrix-free linear operator on flat length-dim vectors.

    `basis` records which basis operand vectors must be expressed in; None
    means the action is basis-agnostic (pure index permutations).
    """

    dim: int
    apply: Callable[[np.ndarray], np.ndarray]
    hermitian: bool = False
    basis: Basis | None = None

    def __call__(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec)
        if vec.shape != (self.dim,):
            raise ValueError(f"operand has shape {vec.shape}, expected ({self.dim},)")
        return self.apply(vec)

    def __add__(self, other: "LinearMap") -> "LinearMap":
        if not isinstance(other, LinearMap):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError("dimension mismatch in LinearMap sum")
        if self.basis is not None and other.basis is not None and self.basis is not other.basis:
            raise BasisError("cannot add maps declared in different bases")
        f, g = self.apply, other.apply
        return LinearMap(
            self.dim,
            lambda v: f(v) + g(v),
            hermitian=self.hermitian and other.hermitian,
            basis=self.basis if self.basis is not None else other.basis,
        )

    def __rmul__(self, scalar) -> "LinearMap":
        c = complex(scalar)
        f = self.apply
        herm = self.hermitian and c.imag == 0.0
        return LinearMap(self.dim, lambda v: c * f(v), hermitian=herm, basis=self.basis)

    def __sub__(self, other: "LinearMap") -> "LinearMap":
        return self + (-1.0) * other


def diag_operator(grid: PhaseGrid, values: np.ndarray, hermitian: bool | None = None) -> LinearMap:
    """Pointwise multiplication in the phase basis by `values` over (L, L)."""
    vals = np.asarray(values, dtype=complex).reshape(-1)
    if vals.shape != (grid.dim,):
        raise ValueError("diagonal values must cover the full grid")
    if hermitian is None:
        hermitian = bool(np.all(np.abs(vals.imag) == 0.0))
    return LinearMap(grid.dim, lambda v: vals * v, hermitian=hermitian, basis=Basis.PHASE)


def charge_diag_operator(grid: PhaseGrid, values: np.ndarray, hermitian: bool | None = None) -> LinearMap:
    """Pointwise multiplication in the charge basis."""
    vals = np.asarray(values, dtype=complex).reshape(-1)
    if vals.shape != (grid.dim,):
        raise ValueError("diagonal values must cover the full grid")
    if hermitian is None:
        hermitian = bool(np.all(np.abs(vals.imag) == 0.0))
    return LinearMap(grid.dim, lambda v: vals * v, hermitian=hermitian, basis=Basis.CHARGE)


def shift_operator(grid: PhaseGrid, axis: int, steps: int) -> LinearMap:
    """Cyclic shift of the phase grid by `steps` points along `axis` (0 = plus).

    Acting on phase amplitudes it moves support phi -> phi + 2 pi steps / L;
    the same operator expressed in the charge basis is multiplication by
    exp(-i 2 pi steps n / L).  Unitary.
    """
    if axis not in (0, 1):
        raise ValueError("axis must be 0 (plus) or 1 (minus)")
    L = grid.size
    s = int(steps) % L

    def apply(v):
        return np.roll(v.reshape(L, L), s, axis=axis).reshape(-1)

    return LinearMap(grid.dim, apply, hermitian=False, basis=Basis.PHASE)


def charge_shift_operator(grid: PhaseGrid, axis: int, steps: int) -> LinearMap:
    """Cyclic shift n -> n + steps of the charge grid along `axis`.

    Equals the phase-diagonal factor exp(i steps phi) on that axis.
    """
    if axis not in (0, 1):
        raise ValueError("axis must be 0 (plus) or 1 (minus)")
    L = grid.size
    s = int(steps) % L

    def apply(v):
        return np.roll(v.reshape(L, L), s, axis=axis).reshape(-1)

    return LinearMap(grid.dim, apply, hermitian=False, basis=Basis.CHARGE)


def parity_minus_operator(grid: PhaseGrid) -> LinearMap:
    """Reflection phi- -> -phi- (equivalently n- -> -n-); its own inverse."""
    L = grid.size

    def apply(v):
        a = v.reshape(L, L)
        out = np.empty_like(a)
        out[:, 0] = a[:, 0]
        out[:, 1:] = a[:, :0:-1]
        return out.reshape(-1)

    return LinearMap(grid.dim, apply, hermitian=True, basis=Basis.PHASE)


def apply_map(op: LinearMap, psi: WaveFunction) -> WaveFunction:
    """Apply op to a wavefunction, converting basis as declared by the map."""
    if op.dim != psi.grid.dim:
        raise ValueError("operator and wavefunction dimensions differ")
    target = op.basis if op.basis is not None else psi.basis
    p = to_basis(psi, target)
    return WaveFunction(psi.grid, target, op(p.amplitudes))


def expectation(op: LinearMap, psi: WaveFunction):
    """<psi|op|psi> / <psi|psi>.  Returns a float for Hermitian maps."""
    target = op.basis if op.basis is not None else psi.basis
    p = to_basis(psi, target)
    nrm2 = float(np.vdot(p.amplitudes, p.amplitudes).real)
    val = complex(np.vdot(p.amplitudes, op(p.amplitudes))) / nrm2
    if op.hermitian:
        return float(val.real)
    return val


# ---------------------------------------------------------------------------
# On-disk wavefunction format: '#'-prefixed header lines carrying L, basis and
# the flat ordering, then one "re,im" float64 pair per grid point.

_ORDERING = "row-major-fft(k_plus outer)"


def save_wavefunction(psi: WaveFunction, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# L={psi.grid.size}\n")
        fh.write(f"# basis={psi.basis.value}\n")
        fh.write(f"# ordering={_ORDERING}\n")
        fh.write("re,im\n")
        for z in psi.amplitudes:
            fh.write(f"{float(z.real)!r},{float(z.imag)!r}\n")


def load_wavefunction(path) -> WaveFunction:
    header: dict[str, str] = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line.lstrip("# ").partition("=")
                header[key.strip()] = value.strip()
            elif line != "re,im":
                re_s, _, im_s = line.partition(",")
                rows.append(complex(float(re_s), float(im_s)))
    try:
        L = int(header["L"])
        basis = Basis(header["basis"])
        ordering = header["ordering"]
    except KeyError as exc:
        raise ValueError(f"wavefunction file missing header field {exc}") from exc
    if ordering != _ORDERING:
        raise ValueError(f"unsupported ordering {ordering!r}")
    grid = PhaseGrid(L)
    if len(rows) != grid.dim:
        raise ValueError(f"expected {grid.dim} amplitude rows, found {len(rows)}")
    return WaveFunction(grid, basis, np.asarray(rows, dtype=complex))
