"""Experiment runner for the ring simulations.

A run is described by one INI-style config file with a ``[run]`` section
(experiment name, seed, plot toggle) and at most one section of parameters
named after the experiment. Every key has a default, unknown sections or
keys are rejected, and malformed values report the offending ``section.key``.

Results land under ``<out>/<experiment>/<config-hash>/`` as

* ``data.csv``   delimited sweep data, floats written via ``repr`` so a rerun
  of the identical config and seed reproduces the file byte for byte,
* ``meta.json``  config echo, config hash, seed, derived quantities, scalar
  results, wall time,
* PNG figures rendered from the same arrays unless ``plots = false``.

The hash covers every key that can influence ``data.csv`` (the seed
included); ``plots`` and ``--threads`` cannot change the data and stay out
of it. An output directory whose ``meta.json`` carries a different hash is
refused rather than overwritten.

Exit codes: 0 success, 2 config or usage error, 3 numerical failure
(including ``--verify`` residuals out of bound).

Energies are entered in GHz and used directly as 1/ns (hbar = 1, no 2 pi
factor); times are ns throughout.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .lattice import Basis, BasisError, GridError, PhaseGrid, expectation, to_basis
from .ring import HarmonicParams, RingParams, build_hamiltonian, build_harmonic_hamiltonian, chiral_current_map
from .solver import ConvergenceError, DenseOperator, PropagatorConfig, lowest_eigenpairs, step_doubling_check
from .quench import (
    SCAN_RATIOS,
    QuenchError,
    SolverSettings,
    continuum_scan,
    fit_power_law,
    grid_for_ratio,
    halflife_point,
    load_chiral_state,
    oscillation_period,
    sample_interval,
)
from .quench import run_quench as quench_run
from .effective import EffectiveModelError, EffectiveParams, SingleExcitationState, circulation, eigenfrequencies, visit_order
from .scattering import (
    ScatteringError,
    ScatteringParams,
    default_omega_grid,
    differential_basis,
    directionality,
    lorentzian_product,
    peak_formula,
    smatrix,
)
from .opensys import (
    OpenSystemError,
    TruncatedRingSpace,
    lindblad_evolve,
    plane_wave_state,
    ring_hamiltonian,
)

TWO_PI = 2.0 * math.pi
THIRD = TWO_PI / 3.0

RUN_FAILURES = (
    QuenchError,
    ConvergenceError,
    OpenSystemError,
    EffectiveModelError,
    ScatteringError,
    GridError,
    BasisError,
)


class ConfigError(ValueError):
    """Bad config file, value, or output-directory mismatch (exit 2)."""


class VerifyError(RuntimeError):
    """An independent cross-check exceeded its bound (exit 3)."""


# ---------------------------------------------------------------------------
# config schema

@dataclass(frozen=True)
class Opt:
    kind: str            # int | float | bool | str | floats | ints
    default: object
    choices: tuple | None = None


RUN_KEYS = {
    "experiment": Opt("str", None),
    "seed": Opt("int", 7),
    "plots": Opt("bool", True),
}

SCHEMAS = {
    "spectrum": {
        "e_j": Opt("float", 10.0),
        "ratios": Opt("floats", (10.0, 100.0, 1e5)),
        "n_points": Opt("int", 121),
        "levels": Opt("int", 4),
        "l": Opt("int", 36),
        "n_total": Opt("int", 1),
    },
    "quench": {
        "e_j": Opt("float", 10.0),
        "ratio": Opt("float", 100.0),
        "branch": Opt("int", 1, choices=(1, -1)),
        "hamiltonian": Opt("str", "full", choices=("full", "harmonic")),
        "l": Opt("int", 0),          # 0 -> heuristic for the ratio
        "t_final": Opt("float", 0.0),  # 0 -> a bit past the expected half-life
    },
    "halflife-scan": {
        "e_j": Opt("float", 10.0),
        "ratios": Opt("floats", SCAN_RATIOS),
    },
    "continuum-scan": {
        "e_j": Opt("float", 10.0),
        "ratio": Opt("float", 100.0),
        "l_values": Opt("ints", ()),   # empty -> ladder around the heuristic grid
        "tol": Opt("float", 1e-3),
        "t_final": Opt("float", 0.0),
        "hamiltonian": Opt("str", "full", choices=("full", "harmonic")),
    },
    "effective": {
        "omega_r": Opt("float", 5.0),
        "g": Opt("float", 0.25),
        "chirality": Opt("int", 1, choices=(1, -1)),
        "initial": Opt("str", "ab-", choices=("a", "b", "c", "ab-", "ab+")),
        "n_periods": Opt("float", 2.0),
        "n_points": Opt("int", 400),
    },
    "smatrix": {
        "omega_r": Opt("float", 5.0),
        "g_ratio": Opt("float", 0.5),
        "gamma_ratio": Opt("float", 0.35),
        "chirality": Opt("int", 1, choices=(1, -1)),
        "n_points": Opt("int", 2001),
    },
    "lindblad": {
        "n_max": Opt("int", 4),
        "n_total": Opt("int", 1),
        "branch": Opt("int", 1, choices=(1, -1, 0)),
        "width": Opt("float", 0.75),
        "gamma": Opt("float", 0.05),
        "t_final": Opt("float", 30.0),
        "dt": Opt("float", 0.5),
        "n_samples": Opt("int", 40),
        "hamiltonian": Opt("str", "none", choices=("none", "ring")),
        "e_j": Opt("float", 1.0),
        "e_c": Opt("float", 0.2),
        "e_n": Opt("float", 0.5),
        "phi_e": Opt("float", 0.0),
    },
}

_BOOL_WORDS = {"true": True, "yes": True, "on": True, "1": True,
               "false": False, "no": False, "off": False, "0": False}


def _parse_scalar(kind, raw):
    if kind == "int":
        return int(raw, 10)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        try:
            return _BOOL_WORDS[raw.strip().lower()]
        except KeyError:
            raise ValueError(f"not a boolean: {raw!r}") from None
    if kind == "str":
        return raw.strip()
    if kind in ("floats", "ints"):
        toks = raw.replace(",", " ").split()
        if not toks:
            raise ValueError("empty list")
        elem = "float" if kind == "floats" else "int"
        return tuple(_parse_scalar(elem, t) for t in toks)
    raise AssertionError(kind)


def load_config(path, seed_override=None):
    """Parse and validate a config file; returns (cfg dict, experiment name)."""
    import configparser

    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    if not parser.has_section("run"):
        raise ConfigError("config needs a [run] section")
    for key in parser["run"]:
        if key not in RUN_KEYS:
            raise ConfigError(f"unknown key run.{key}")
    if "experiment" not in parser["run"]:
        raise ConfigError("run.experiment is required")
    experiment = parser["run"]["experiment"].strip()
    if experiment not in SCHEMAS:
        known = ", ".join(sorted(SCHEMAS))
        raise ConfigError(f"unknown experiment {experiment!r} (one of: {known})")

    schema = SCHEMAS[experiment]
    for section in parser.sections():
        if section not in ("run", experiment):
            raise ConfigError(f"unknown section [{section}] for experiment {experiment}")

    cfg = {"run": {}, experiment: {}}
    for key, opt in RUN_KEYS.items():
        raw = parser["run"].get(key)
        if raw is None:
            cfg["run"][key] = opt.default
        else:
            try:
                cfg["run"][key] = _parse_scalar(opt.kind, raw) if key != "experiment" else experiment
            except ValueError as exc:
                raise ConfigError(f"run.{key}: {exc}") from None
    sec = parser[experiment] if parser.has_section(experiment) else {}
    for key in sec:
        if key not in schema:
            raise ConfigError(f"unknown key {experiment}.{key}")
    for key, opt in schema.items():
        raw = sec.get(key) if hasattr(sec, "get") else None
        if raw is None:
            value = opt.default
        else:
            try:
                value = _parse_scalar(opt.kind, raw)
            except ValueError as exc:
                raise ConfigError(f"{experiment}.{key}: {exc}") from None
        if opt.choices is not None and value not in opt.choices:
            allowed = ", ".join(str(c) for c in opt.choices)
            raise ConfigError(f"{experiment}.{key}: {value!r} not one of {allowed}")
        cfg[experiment][key] = value

    if seed_override is not None:
        cfg["run"]["seed"] = int(seed_override)
    return cfg, experiment


def _canon(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_canon(v) for v in value)
    return str(value)


def config_hash(cfg):
    """Stable short hash over everything that can influence the data."""
    lines = []
    for section in sorted(cfg):
        for key in sorted(cfg[section]):
            if section == "run" and key == "plots":
                continue
            lines.append(f"{section}.{key}={_canon(cfg[section][key])}")
    digest = hashlib.sha256("\n".join(lines).encode()).hexdigest()
    return digest[:12]


# ---------------------------------------------------------------------------
# shared plumbing

def _model(factory, *args, **kwargs):
    """Construct model parameters, turning their validation into config errors."""
    try:
        return factory(*args, **kwargs)
    except (ValueError, OpenSystemError) as exc:
        raise ConfigError(str(exc)) from exc


def _parallel_map(fn, items, threads):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _auto_window(params):
    # a bit past the expected half-life; collapse happens on the 1/omega scale
    omega = HarmonicParams.from_ring(params).omega
    return 0.8 * TWO_PI / omega


def _check(name, residual, bound, report):
    report[name] = float(residual)
    if not residual <= bound:
        raise VerifyError(f"{name} = {residual:.3e} exceeds {bound:.1e}")


# ---------------------------------------------------------------------------
# experiments
#
# Each runner returns (header, rows, results, figure_fn) where figure_fn
# renders PNGs into the output directory and returns their names.

def run_spectrum(cfg, threads, verify):
    sec = cfg["spectrum"]
    seed = cfg["run"]["seed"]
    grid = _model(PhaseGrid, sec["l"])
    levels = sec["levels"]
    if levels < 1:
        raise ConfigError("spectrum.levels must be at least 1")
    phis = np.linspace(-3.0 * math.pi, 3.0 * math.pi, sec["n_points"])
    _model(RingParams, e_j=sec["e_j"], e_c=1.0, n_total=sec["n_total"])  # eager validation

    def point(job):
        ratio, phi = job
        params = RingParams(sec["e_j"], sec["e_j"] / ratio, n_total=sec["n_total"], phi_e=phi)
        h = build_hamiltonian(params, grid)
        res = lowest_eigenpairs(h, k=levels, tol=1e-10, seed=seed)
        ground = res.as_wavefunctions(grid)[0]
        i_ch = expectation(chiral_current_map(grid, phi), ground)
        return (ratio, phi, *res.eigenvalues, i_ch)

    jobs = [(ratio, phi) for ratio in sec["ratios"] for phi in phis]
    for ratio in sec["ratios"]:
        if ratio <= 0:
            raise ConfigError("spectrum.ratios must be positive")
    rows = _parallel_map(point, jobs, threads)

    results = {"levels": levels, "grid": sec["l"], "n_points": sec["n_points"]}
    if verify:
        # exact degeneracies collapse to a single copy in the Krylov solver,
        # so match each value to its nearest dense level instead of by index
        report = {}
        ratio = sec["ratios"][0]
        for phi in (phis[0], phis[len(phis) // 2], phis[-1]):
            params = RingParams(sec["e_j"], sec["e_j"] / ratio, n_total=sec["n_total"], phi_e=phi)
            h = build_hamiltonian(params, grid)
            dense = DenseOperator.from_map(h)
            iterative = lowest_eigenpairs(h, k=levels, tol=1e-10, seed=seed).eigenvalues
            scale = max(1.0, float(np.abs(dense.eigenvalues).max()))
            nearest = np.abs(iterative[:, None] - dense.eigenvalues[None, :]).min(axis=1)
            dev = max(nearest.max(), abs(iterative[0] - dense.eigenvalues[0])) / scale
            _check(f"dense_eigenvalue_dev(phi={phi:.3f})", dev, 1e-8, report)
        results["verify"] = report

    n_phi = len(phis)

    def figures(out_dir):
        from . import plots

        energies = {}
        currents = {}
        for i, ratio in enumerate(sec["ratios"]):
            block = np.array([rows[i * n_phi + j] for j in range(n_phi)])
            energies[ratio] = block[:, 2:2 + levels]
            currents[ratio] = block[:, -1]
        return plots.spectrum_figures(out_dir, sec["ratios"], phis, energies, currents)

    header = ["ratio", "phi_e"] + [f"e{i}" for i in range(levels)] + ["i_ch"]
    return header, rows, results, figures


def _quench_params(sec):
    ratio = sec["ratio"]
    if ratio <= 0:
        raise ConfigError("ratio must be positive")
    return _model(
        RingParams, e_j=sec["e_j"], e_c=sec["e_j"] / ratio,
        phi_e=sec["branch"] * TWO_PI,
    )


def _verify_propagation(params, grid, t_final, settings, hamiltonian, report):
    builder = build_hamiltonian if hamiltonian == "full" else build_harmonic_hamiltonian
    h = builder(params.with_flux(0.0), grid)
    state = load_chiral_state(params, grid, settings, hamiltonian)
    psi0 = to_basis(state, Basis.CHARGE).amplitudes
    cfg = PropagatorConfig(dt=sample_interval(params), krylov_dim=settings.krylov_dim,
                           tol=settings.prop_tol)
    dev = step_doubling_check(h, psi0, min(t_final, 10.0 * sample_interval(params)), cfg)
    _check("step_doubling_dev", dev, 1e-8, report)
    if grid.size**2 <= 1700:
        load_h = builder(params, grid)
        dense = DenseOperator.from_map(load_h)
        ground = lowest_eigenpairs(load_h, k=1, tol=settings.eig_tol, seed=settings.seed)
        scale = max(1.0, float(np.abs(dense.eigenvalues).max()))
        dev = abs(ground.eigenvalues[0] - dense.eigenvalues[0]) / scale
        _check("dense_ground_dev", dev, 1e-8, report)


def run_quench(cfg, threads, verify):
    sec = cfg["quench"]
    settings = SolverSettings(seed=cfg["run"]["seed"])
    params = _quench_params(sec)
    size = sec["l"] if sec["l"] > 0 else grid_for_ratio(sec["ratio"], sec["hamiltonian"])
    grid = _model(PhaseGrid, size)
    t_final = sec["t_final"] if sec["t_final"] > 0 else _auto_window(params)

    run = quench_run(params, grid, t_final, settings, sec["hamiltonian"])
    rows = [tuple(r) for r in run.series]
    results = {
        "tau": run.tau,
        "initial_current": run.initial_current(),
        "oscillation_period": oscillation_period(run),
        "grid": size,
        "t_final": t_final,
        "omega_harmonic": HarmonicParams.from_ring(params).omega,
        "sample_dt": run.metadata["dt"],
    }
    if verify:
        report = {}
        _verify_propagation(params, grid, t_final, settings, sec["hamiltonian"], report)
        results["verify"] = report

    def figures(out_dir):
        from . import plots

        return plots.quench_figure(out_dir, run.times, run.current, run.tau)

    return ["t", "current", "norm", "energy"], rows, results, figures


def run_halflife_scan(cfg, threads, verify):
    sec = cfg["halflife-scan"]
    settings = SolverSettings(seed=cfg["run"]["seed"])
    ratios = sec["ratios"]
    if len(ratios) < 3:
        raise ConfigError("halflife-scan.ratios needs at least 3 values for the fit")
    for r in ratios:
        if r <= 0:
            raise ConfigError("halflife-scan.ratios must be positive")

    runs = _parallel_map(lambda r: halflife_point(r, sec["e_j"], settings), ratios, threads)
    rows = [(run.params.ratio, run.grid_size, run.tau) for run in runs]
    fit = fit_power_law([(run.params.ratio, run.tau) for run in runs])
    results = {
        "alpha": fit.alpha,
        "tau0": fit.tau0,
        "alpha_stderr": math.sqrt(max(fit.covariance[0, 0], 0.0)),
        "log_tau0_stderr": math.sqrt(max(fit.covariance[1, 1], 0.0)),
        "max_fit_residual": float(np.abs(fit.residuals).max()),
    }
    if verify:
        report = {}
        smallest = runs[int(np.argmin(ratios))]
        grid = PhaseGrid(smallest.grid_size)
        _verify_propagation(smallest.params, grid, float(smallest.times[-1]),
                            settings, "full", report)
        results["verify"] = report

    def figures(out_dir):
        from . import plots

        return plots.halflife_figure(out_dir, [r[0] for r in rows], [r[2] for r in rows],
                                     fit.alpha, fit.tau0)

    return ["ratio", "l", "tau"], rows, results, figures


def run_continuum_scan(cfg, threads, verify):
    sec = cfg["continuum-scan"]
    settings = SolverSettings(seed=cfg["run"]["seed"])
    params = _quench_params({**sec, "branch": 1})
    base = grid_for_ratio(sec["ratio"], sec["hamiltonian"])
    l_values = list(sec["l_values"]) or sorted({max(24, base - 12), base - 6, base, base + 6})
    t_final = sec["t_final"] if sec["t_final"] > 0 else _auto_window(params)

    report = continuum_scan(params, l_values, t_final, sec["tol"], settings, sec["hamiltonian"])
    devs = list(report.deviations) + [math.nan]
    rows = [
        (L, math.nan if tau is None else tau, dev)
        for L, tau, dev in zip(report.l_values, report.taus, devs)
    ]
    results = {"l_star": report.l_star, "tol": report.tol, "t_final": t_final}
    if verify:
        vrep = {}
        _verify_propagation(params, PhaseGrid(report.l_values[0]), t_final,
                            settings, sec["hamiltonian"], vrep)
        results["verify"] = vrep

    def figures(out_dir):
        from . import plots

        return plots.continuum_figure(out_dir, report.l_values,
                                      [math.nan if t is None else t for t in report.taus],
                                      np.array(devs), report.tol)

    return ["l", "tau", "deviation"], rows, results, figures


_INITIAL_STATES = {
    "a": lambda: SingleExcitationState.basis(0),
    "b": lambda: SingleExcitationState.basis(1),
    "c": lambda: SingleExcitationState.basis(2),
    "ab-": lambda: SingleExcitationState.superposition(0, 1, -1.0),
    "ab+": lambda: SingleExcitationState.superposition(0, 1, +1.0),
}


def run_effective(cfg, threads, verify):
    sec = cfg["effective"]
    p = _model(EffectiveParams, omega_r=sec["omega_r"], g=sec["g"],
               chirality_sign=sec["chirality"])
    period = p.period()
    times = np.linspace(0.0, sec["n_periods"] * period, sec["n_points"])
    series = circulation(p, _INITIAL_STATES[sec["initial"]](), times)
    rows = [tuple(r) for r in series]

    # the visit order is read off a localized start regardless of `initial`
    probe = circulation(p, SingleExcitationState.basis(0), times)
    flipped = circulation(
        EffectiveParams(p.omega_r, p.g, -p.chirality_sign),
        SingleExcitationState.basis(0), times)
    letters = lambda order: "".join("abc"[i] for i in order)
    results = {
        "eigenfrequencies": sorted(eigenfrequencies(p).tolist()),
        "period": period,
        "visit_order": letters(visit_order(probe)),
        "visit_order_flipped": letters(visit_order(flipped)),
        "max_norm_defect": float(np.abs(series[:, 1:].sum(axis=1) - 1.0).max()),
    }
    if verify:
        report = {}
        expected = sorted([p.omega_r + 2.0 * p.g, p.omega_r + 2.0 * p.g, p.omega_r + 5.0 * p.g])
        dev = max(abs(a - b) for a, b in zip(results["eigenfrequencies"], expected))
        _check("eigenfrequency_dev", dev, 1e-12, report)
        _check("norm_defect", results["max_norm_defect"], 1e-10, report)
        results["verify"] = report

    def figures(out_dir):
        from . import plots

        return plots.effective_figure(out_dir, series[:, 0], series[:, 1:], period)

    return ["t", "p_a", "p_b", "p_c"], rows, results, figures


def run_smatrix(cfg, threads, verify):
    sec = cfg["smatrix"]
    omega_r = sec["omega_r"]
    if omega_r <= 0:
        raise ConfigError("smatrix.omega_r must be positive")
    g = sec["g_ratio"] * omega_r
    gamma = sec["gamma_ratio"] * omega_r
    p = _model(ScatteringParams, omega_r, g, gamma)
    omegas = default_omega_grid(p, sec["n_points"])
    sign = sec["chirality"]

    def point(w):
        s = smatrix(w, omega_r, g, gamma, chirality_sign=sign)
        st = differential_basis(s)
        e = np.abs(s.entries) ** 2
        return (w, e[0, 0], e[1, 0], e[2, 0], e[0, 1],
                abs(st[2, 0]) ** 2, abs(st[2, 1]) ** 2, lorentzian_product(w, p),
                s.unitarity_residual(), s.nonreciprocity())

    rows = _parallel_map(point, omegas, threads)
    arr = np.array(rows)
    diff_col = 6  # |S~_3-|^2 follows the Lorentzian closed form at either sign
    report_dir = directionality(omega_r, g, gamma, n_grid=sec["n_points"])
    results = {
        "numeric_peak": report_dir.numeric_peak,
        "omega_at_peak": report_dir.omega_at_peak,
        "formula_peak": report_dir.formula_peak,
        "peak_formula_center": peak_formula(p),
        "max_unitarity_residual": float(arr[:, 8].max()),
        "nonreciprocity_at_omega_r": float(smatrix(omega_r, omega_r, g, gamma,
                                                   chirality_sign=sign).nonreciprocity()),
    }
    if verify:
        vrep = {}
        _check("unitarity_residual", results["max_unitarity_residual"], 1e-12, vrep)
        _check("closed_form_dev",
               float(np.abs(arr[:, diff_col] - arr[:, 7]).max()), 1e-12, vrep)
        phase_target = 4.0 * math.pi / 3.0 if sign > 0 else 2.0 * math.pi / 3.0
        _check("nonreciprocity_dev",
               abs(results["nonreciprocity_at_omega_r"] - phase_target), 1e-10, vrep)
        results["verify"] = vrep

    def figures(out_dir):
        from . import plots

        return plots.smatrix_figures(out_dir, arr[:, 0], arr[:, 2], arr[:, 4],
                                     arr[:, diff_col], report_dir.omega_at_peak)

    header = ["omega", "p11", "p21", "p31", "p12", "p3_plus", "p3_minus",
              "lorentzian_product", "unitarity_residual", "nonreciprocity"]
    return header, rows, results, figures


def _branch_labels(branch):
    if branch == 0:
        return (0.0, 0.0)
    return (branch * THIRD, -branch * THIRD)


def run_lindblad(cfg, threads, verify):
    sec = cfg["lindblad"]
    space = _model(TruncatedRingSpace, sec["n_max"])
    labels = _branch_labels(sec["branch"])
    try:
        psi = plane_wave_state(space, sec["n_total"], labels[0], labels[1], width=sec["width"])
    except OpenSystemError as exc:
        raise ConfigError(str(exc)) from exc
    rho0 = np.outer(psi, psi.conj())
    h = None
    if sec["hamiltonian"] == "ring":
        ring_params = _model(RingParams, e_j=sec["e_j"], e_c=sec["e_c"], e_n=sec["e_n"],
                             n_total=sec["n_total"], phi_e=sec["phi_e"])
        h = ring_hamiltonian(space, ring_params)
    if sec["gamma"] <= 0 or sec["t_final"] <= 0 or sec["dt"] <= 0:
        raise ConfigError("lindblad.gamma, t_final and dt must be positive")

    series = lindblad_evolve(rho0, h, sec["gamma"], sec["t_final"], sec["dt"],
                             space=space, n_samples=sec["n_samples"], phase_labels=labels)
    sectors = series.sectors
    header = ["t", "trace", "purity"]
    header += [f"pop_{n}" for n in sectors]
    header += [f"chi_{n}" for n in sectors]
    rows = []
    for i, t in enumerate(series.times):
        rows.append((t, series.traces[i], series.purities[i],
                     *series.sector_pops[i], *series.sector_chi[i]))

    overlap = series.phase_overlap
    results = {
        "sectors": [int(n) for n in sectors],
        "final_trace_defect": float(abs(series.traces[-1] - 1.0)),
        "final_purity": float(series.purities[-1]),
        "min_eigenvalue": float(np.nanmin(series.min_eigenvalues)),
        "min_phase_overlap": None if overlap is None else float(np.nanmin(overlap)),
    }
    if verify:
        report = {}
        small = TruncatedRingSpace(1)
        small_psi = plane_wave_state(small, min(sec["n_total"], 1), labels[0], labels[1],
                                     width=sec["width"])
        small_rho = np.outer(small_psi, small_psi.conj())
        small_h = None if h is None else ring_hamiltonian(small, ring_params)
        rk = lindblad_evolve(small_rho, small_h, sec["gamma"], 2.0, 0.01,
                             space=small, n_samples=2).final.matrix
        exact = _superoperator_reference(small, small_h, sec["gamma"], small_rho, 2.0)
        _check("superoperator_dev", float(np.abs(rk - exact).max()), 1e-6, report)
        results["verify"] = report

    def figures(out_dir):
        from . import plots

        return plots.lindblad_figures(out_dir, series.times, series.traces,
                                      series.purities, sectors, series.sector_pops,
                                      overlap)

    return header, rows, results, figures


def _superoperator_reference(space, h, gamma, rho0, t_final):
    """Dense exp(L t) on the vectorized state; usable only at tiny n_max."""
    from scipy.linalg import expm
    from .opensys import jump_operator

    d = space.dim
    eye = np.eye(d)
    if h is None:
        lial = np.zeros((d * d, d * d), dtype=complex)
    else:
        hm = h.toarray() if hasattr(h, "toarray") else np.asarray(h)
        lial = -1j * (np.kron(hm, eye) - np.kron(eye, hm.T))
    for k in (1, 2, 3):
        lk = jump_operator(space, k).toarray()
        ldl = lk.conj().T @ lk
        lial += gamma * (np.kron(lk, lk.conj())
                         - 0.5 * np.kron(ldl, eye) - 0.5 * np.kron(eye, ldl.T))
    return (expm(lial * t_final) @ rho0.reshape(-1)).reshape(d, d)


RUNNERS = {
    "spectrum": run_spectrum,
    "quench": run_quench,
    "halflife-scan": run_halflife_scan,
    "continuum-scan": run_continuum_scan,
    "effective": run_effective,
    "smatrix": run_smatrix,
    "lindblad": run_lindblad,
}


# ---------------------------------------------------------------------------
# driver

def prepare_out_dir(out_root, experiment, digest):
    out_dir = Path(out_root) / experiment / digest
    meta_path = out_dir / "meta.json"
    if meta_path.exists():
        try:
            recorded = json.loads(meta_path.read_text()).get("config_hash")
        except (OSError, json.JSONDecodeError):
            recorded = None
        if recorded != digest:
            raise ConfigError(
                f"{out_dir} holds results for config hash {recorded!r}, "
                f"not {digest!r}; refusing to overwrite")
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def build_parser():
    parser = argparse.ArgumentParser(
        prog="jjring",
        description="Run a ring-simulation experiment described by an INI config.")
    parser.add_argument("--config", required=True, help="path to the INI config file")
    parser.add_argument("--out", default="runs", help="output root directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for independent sweep points")
    parser.add_argument("--seed", type=int, default=None,
                        help="override run.seed from the config")
    parser.add_argument("--verify", action="store_true",
                        help="run independent cross-checks; failures exit 3")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, experiment = load_config(args.config, seed_override=args.seed)
        digest = config_hash(cfg)
        out_dir = prepare_out_dir(args.out, experiment, digest)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    runner = RUNNERS[experiment]
    started = time.perf_counter()
    try:
        header, rows, results, figure_fn = runner(cfg, max(1, args.threads), args.verify)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (VerifyError, *RUN_FAILURES) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 3

    write_csv(out_dir / "data.csv", header, rows)
    figure_files = []
    if cfg["run"]["plots"]:
        figure_files = figure_fn(out_dir)

    energy_keys = ("e_j", "e_c", "e_n", "omega_r", "g", "gamma")
    meta = {
        "experiment": experiment,
        "tool_version": __version__,
        "config_hash": digest,
        "seed": cfg["run"]["seed"],
        "threads": max(1, args.threads),
        "config": {sect: dict(cfg[sect]) for sect in cfg},
        "energy_unit_note": "GHz inputs are used directly as 1/ns (hbar = 1, no 2 pi)",
        "energies_ns": {k: v for k, v in cfg[experiment].items() if k in energy_keys},
        "results": results,
        "figures": figure_files,
        "rows": len(rows),
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    (out_dir / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n")

    print(f"{experiment}: {len(rows)} rows -> {out_dir}")
    for key, value in results.items():
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            print(f"  {key} = {value:.6g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
