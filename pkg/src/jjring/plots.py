"""Figure rendering for the report path.

Every experiment writes its delimited data first; these helpers turn the same
in-memory arrays into PNG files sitting next to ``data.csv``. Only the CLI
imports this module, and only when plotting is enabled, so the computational
modules stay free of any matplotlib dependency. The Agg backend is forced on
import because runs happen in headless sessions.

Each function returns the list of file names it wrote (relative to the output
directory) so the run metadata can record them.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def _save(fig, out_dir, name: str) -> str:
    fig.tight_layout()
    fig.savefig(out_dir / name, dpi=DPI)
    plt.close(fig)
    return name


def spectrum_figures(out_dir, ratios, phis, energies, currents) -> list[str]:
    """Band diagram per ratio plus the ground-state chiral current.

    energies: dict ratio -> array (n_phi, levels); currents: dict ratio -> array.
    """
    written = []
    fig, axes = plt.subplots(1, len(ratios), figsize=(4.2 * len(ratios), 3.4), sharex=True)
    axes = np.atleast_1d(axes)
    for ax, ratio in zip(axes, ratios):
        bands = energies[ratio]
        for level in range(bands.shape[1]):
            ax.plot(phis / np.pi, bands[:, level] - bands[:, 0].min(), lw=1.0)
        ax.set_title(f"$E_J/E_C = {ratio:g}$")
        ax.set_xlabel(r"$\varphi_e / \pi$")
    axes[0].set_ylabel(r"$E - E_0^{\min}$ (1/ns)")
    written.append(_save(fig, out_dir, "spectrum.png"))

    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    for ratio in ratios:
        ax.plot(phis / np.pi, currents[ratio], lw=1.2, label=f"{ratio:g}")
    ax.axhline(0.0, color="0.7", lw=0.8)
    ax.set_xlabel(r"$\varphi_e / \pi$")
    ax.set_ylabel(r"$\langle I_{\mathrm{ch}} \rangle$")
    ax.legend(title=r"$E_J/E_C$", fontsize=8)
    written.append(_save(fig, out_dir, "chiral_current.png"))
    return written


def quench_figure(out_dir, times, currents, tau=None) -> list[str]:
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    ax.plot(times, currents, lw=1.2)
    ax.axhline(currents[0] / 2.0, color="0.7", lw=0.8, ls="--")
    if tau is not None and np.isfinite(tau):
        ax.axvline(tau, color="C3", lw=0.8, ls=":", label=rf"$\tau = {tau:.3g}$ ns")
        ax.legend(fontsize=8)
    ax.set_xlabel("t (ns)")
    ax.set_ylabel(r"$\langle I_{\mathrm{ch}} \rangle(t)$")
    return [_save(fig, out_dir, "quench.png")]


def halflife_figure(out_dir, ratios, taus, alpha, tau0) -> list[str]:
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    ax.loglog(ratios, taus, "o", ms=5)
    grid = np.geomspace(min(ratios), max(ratios), 64)
    ax.loglog(grid, tau0 * grid**alpha, "-", lw=1.0,
              label=rf"$\tau_0 r^\alpha$, $\alpha = {alpha:.3f}$")
    ax.set_xlabel(r"$E_J / E_C$")
    ax.set_ylabel(r"$\tau$ (ns)")
    ax.legend(fontsize=8)
    return [_save(fig, out_dir, "halflife.png")]


def continuum_figure(out_dir, l_values, taus, deviations, tol) -> list[str]:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.6, 3.2))
    ax1.plot(l_values, taus, "o-", lw=1.0, ms=4)
    ax1.set_xlabel("grid points per angle")
    ax1.set_ylabel(r"$\tau$ (ns)")
    mask = np.isfinite(deviations)
    ax2.semilogy(np.asarray(l_values)[mask], np.asarray(deviations)[mask], "o-", lw=1.0, ms=4)
    ax2.axhline(tol, color="0.7", lw=0.8, ls="--")
    ax2.set_xlabel("grid points per angle")
    ax2.set_ylabel("relative change")
    return [_save(fig, out_dir, "continuum.png")]


def effective_figure(out_dir, times, populations, period=None) -> list[str]:
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    for idx, label in enumerate(("$P_a$", "$P_b$", "$P_c$")):
        ax.plot(times, populations[:, idx], lw=1.2, label=label)
    if period is not None:
        ax.axvline(period, color="0.7", lw=0.8, ls="--")
    ax.set_xlabel("t (ns)")
    ax.set_ylabel("site population")
    ax.legend(fontsize=8)
    return [_save(fig, out_dir, "effective.png")]


def smatrix_figures(out_dir, omegas, forward, backward, collective, peak_omega=None) -> list[str]:
    written = []
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    ax.plot(omegas, forward, lw=1.2, label=r"$|S_{21}|^2$")
    ax.plot(omegas, backward, lw=1.2, label=r"$|S_{12}|^2$")
    ax.set_xlabel(r"$\omega$ (1/ns)")
    ax.set_ylabel("transmitted power")
    ax.legend(fontsize=8)
    written.append(_save(fig, out_dir, "transmission.png"))

    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    ax.plot(omegas, collective, lw=1.2)
    if peak_omega is not None:
        ax.axvline(peak_omega, color="0.7", lw=0.8, ls="--")
    ax.set_xlabel(r"$\omega$ (1/ns)")
    ax.set_ylabel(r"$|\tilde S_{3-}|^2$")
    written.append(_save(fig, out_dir, "directionality.png"))
    return written


def lindblad_figures(out_dir, times, traces, purities, sectors, sector_pops,
                     phase_overlap=None) -> list[str]:
    written = []
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.6, 3.2))
    occupied = [i for i, n in enumerate(sectors) if sector_pops[:, i].max() > 1e-4]
    for i in occupied:
        ax1.plot(times, sector_pops[:, i], lw=1.0, label=f"N = {sectors[i]}")
    ax1.set_xlabel("t (ns)")
    ax1.set_ylabel("sector population")
    ax1.legend(fontsize=7, ncol=2)
    ax2.plot(times, purities, lw=1.2, label="purity")
    ax2.plot(times, traces, lw=1.0, ls="--", label="trace")
    if phase_overlap is not None:
        ax2.plot(times, phase_overlap, lw=1.0, ls=":", label="phase overlap")
    ax2.set_xlabel("t (ns)")
    ax2.legend(fontsize=8)
    written.append(_save(fig, out_dir, "lindblad.png"))
    return written
