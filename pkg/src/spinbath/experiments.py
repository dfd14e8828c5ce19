"""Ensemble statistics, steady-state extraction and temperature sweeps.

The four standard method tags pair a bath with its matching noise:

    llg-classical     memory-free damping + white noise
    llg-quantum       memory-free damping + quantum-statistics noise
    lorentzian-set1   resonant bath, near-memory-free regime, quantum noise
    lorentzian-set2   resonant bath, strongly non-Markovian, quantum noise

All four share the same effective damping 50/2401, so their steady states
are directly comparable.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import IntegratorConfig, integrate
from .model import (HBAR, KB, SET1, SET2, IntegrationDivergedError,
                    OhmicParams, ParameterError, SpinSystem, UnitFrame)
from .noise import derive_seed

METHOD_TAGS = ("llg-classical", "llg-quantum", "lorentzian-set1",
               "lorentzian-set2")

DEFAULT_ETA = SET1.eta_equivalent  # 50/2401, shared by both parameter sets

# Desk-scale defaults: long enough for converged steady states in CI runs.
# Full-scale figure reproduction uses t_max = 2*pi*7200 and 500 trajectories.
DESK_SWEEP_T_MAX = 2.0 * math.pi * 500.0
DESK_ENSEMBLE_T_MAX = 2.0 * math.pi * 48.0
FULL_SWEEP_T_MAX = 2.0 * math.pi * 7200.0
DESK_N_TRAJ = 100
FULL_N_TRAJ = 500

DEFAULT_INITIAL_SPIN = (-1.0, 0.0, 0.0)


def method_config(method: str, frame: UnitFrame, temperature: float,
                  dt: float = 0.15, t_max: float = DESK_SWEEP_T_MAX,
                  eta: float | None = None, cutoff: float | None = None,
                  noise_margin: float | None = None) -> IntegratorConfig:
    """IntegratorConfig for one of the standard method tags."""
    if method not in METHOD_TAGS:
        raise ParameterError(f"unknown method {method!r}; choose from {METHOD_TAGS}")
    if method == "llg-classical":
        bath, kind = OhmicParams(eta if eta is not None else DEFAULT_ETA), "classical-ohmic"
    elif method == "llg-quantum":
        bath, kind = OhmicParams(eta if eta is not None else DEFAULT_ETA), "quantum-ohmic"
    elif method == "lorentzian-set1":
        bath, kind = SET1, "quantum-lorentzian"
    else:
        bath, kind = SET2, "quantum-lorentzian"
    if kind == "classical-ohmic" and temperature == 0.0:
        kind = None  # the white spectrum vanishes identically at T = 0
    return IntegratorConfig(frame=frame, bath=bath, noise_kind=kind,
                            temperature=temperature, dt=dt, t_max=t_max,
                            cutoff=cutoff, noise_margin=noise_margin)


def _langevin(x: float) -> float:
    if x != x:
        raise ParameterError("NaN argument")
    if x > 350.0:
        return 1.0 - 1.0 / x
    if x < 1e-4:
        return x / 3.0 - x ** 3 / 45.0
    return 1.0 / math.tanh(x) - 1.0 / x


def statphys_oracle(n: float, temperature: float, frame: UnitFrame) -> float:
    """Boltzmann-average alignment of a fixed-length classical spin.

    coth(n hbar w_L / 2 kB T) - 2 kB T / (n hbar w_L); equals 1 at T = 0.
    """
    if temperature < 0.0:
        raise ParameterError("temperature must be >= 0")
    if temperature == 0.0:
        return 1.0
    return _langevin(n / frame.thermal_ratio(temperature))


def equivalent_classical_temperature(frame: UnitFrame) -> float:
    """Temperature whose white-noise level equals the zero-point noise at
    the precession frequency: hbar larmor / (2 kB)."""
    return HBAR * frame.larmor / (2.0 * KB)


@dataclass
class EnsembleResult:
    times: np.ndarray
    sz_mean: np.ndarray
    sz_stderr: np.ndarray
    n_used: int
    diverged: list


def _traj_sz_job(args):
    cfg, seed, initial_spin = args
    try:
        return ("ok", integrate(SpinSystem.single(initial_spin), cfg, seed=seed).sz())
    except IntegrationDivergedError as err:
        return ("diverged", err.step)


def _pmap(job, items, workers: int):
    if workers <= 1:
        return [job(it) for it in items]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(job, items))


def ensemble_average(cfg: IntegratorConfig, n_traj: int, base_seed: int = 0,
                     initial_spin=DEFAULT_INITIAL_SPIN,
                     workers: int = 1) -> EnsembleResult:
    """Pointwise mean and standard error of s_z over seeded trajectories.

    Member i uses seed base_seed XOR i; members are independent work items,
    and the reduction is ordered by index, so the result does not depend on
    `workers`.  Diverged members are excluded with a warning; more than 1%
    diverging is a failure.
    """
    if n_traj < 2:
        raise ParameterError("n_traj must be >= 2")
    jobs = [(cfg, derive_seed(base_seed, i), tuple(initial_spin))
            for i in range(n_traj)]
    results = _pmap(_traj_sz_job, jobs, workers)
    mean = None
    m2 = None
    n_used = 0
    diverged = []
    times = np.arange(cfg.n_steps + 1) * cfg.dt
    for i, (status, payload) in enumerate(results):
        if status == "diverged":
            diverged.append((i, payload))
            continue
        sz = payload
        if mean is None:
            mean = np.zeros_like(sz)
            m2 = np.zeros_like(sz)
        # Welford update: exactly zero spread for identical members
        n_used += 1
        delta = sz - mean
        mean += delta / n_used
        m2 += delta * (sz - mean)
    if diverged:
        warnings.warn(f"{len(diverged)} of {n_traj} trajectories diverged")
        if len(diverged) > 0.01 * n_traj:
            raise RuntimeError(
                f"more than 1% of trajectories diverged: {diverged[:5]}...")
    stderr = np.sqrt(m2 / max(n_used - 1, 1)) / math.sqrt(n_used)
    return EnsembleResult(times=times, sz_mean=mean, sz_stderr=stderr,
                          n_used=n_used, diverged=diverged)


def steady_state_sz(cfg: IntegratorConfig, t_max: float | None = None,
                    window_fraction: float = 0.25, seed: int = 0,
                    initial_spin=DEFAULT_INITIAL_SPIN,
                    block_length: float = 50.0) -> tuple[float, float]:
    """Late-time average of s_z over the trailing window of one trajectory.

    The error bar comes from block averaging (blocks of `block_length`
    unit-free time), which absorbs the autocorrelation of s_z.
    """
    if t_max is not None:
        cfg = dataclasses.replace(cfg, t_max=t_max)
    if not 0.0 < window_fraction <= 1.0:
        raise ParameterError("window_fraction must be in (0, 1]")
    traj = integrate(SpinSystem.single(initial_spin), cfg, seed=seed)
    sz = traj.sz()
    start = int(math.ceil((1.0 - window_fraction) * cfg.t_max / cfg.dt))
    window = sz[start:]
    block_steps = max(1, int(round(block_length / cfg.dt)))
    n_blocks = len(window) // block_steps
    if n_blocks < 10:
        raise ParameterError(
            f"averaging window holds only {n_blocks} blocks of "
            f"{block_length}; need at least 10")
    trimmed = window[len(window) - n_blocks * block_steps:]
    blocks = trimmed.reshape(n_blocks, block_steps).mean(axis=1)
    value = float(trimmed.mean())
    err = float(np.std(blocks, ddof=1) / math.sqrt(n_blocks))
    return value, err


def averaged_steady_state(cfg: IntegratorConfig, n_replicas: int,
                          base_seed: int = 0, **kwargs) -> tuple[float, float]:
    """Mean of independent steady_state_sz replicas with derived seeds."""
    if n_replicas < 1:
        raise ParameterError("n_replicas must be >= 1")
    vals = []
    errs = []
    for r in range(n_replicas):
        v, e = steady_state_sz(cfg, seed=derive_seed(base_seed, r << 8), **kwargs)
        vals.append(v)
        errs.append(e)
    if n_replicas == 1:
        return vals[0], errs[0]
    sem = float(np.std(vals, ddof=1) / math.sqrt(n_replicas))
    propagated = float(math.sqrt(np.mean(np.square(errs)) / n_replicas))
    return float(np.mean(vals)), max(sem, propagated)


@dataclass
class SweepResult:
    """Steady-state alignment versus temperature for one method."""

    method: str
    temperatures: np.ndarray
    sz_mean: np.ndarray
    sz_stderr: np.ndarray
    rescaled: np.ndarray | None = None


def _sweep_seed(base: int, mi: int, ti: int) -> int:
    return derive_seed(base, ((mi + 1) * 1024 + ti) << 32)


def _sweep_point_job(args):
    cfg, n_replicas, base_seed, window_fraction, block_length, initial_spin = args
    return averaged_steady_state(cfg, n_replicas, base_seed=base_seed,
                                 window_fraction=window_fraction,
                                 block_length=block_length,
                                 initial_spin=initial_spin)


def temperature_sweep(methods, temperatures, frame: UnitFrame, *,
                      dt: float = 0.15, t_max: float = DESK_SWEEP_T_MAX,
                      seed: int = 0, n_replicas: int = 1,
                      eta: float | None = None, cutoff: float | None = None,
                      window_fraction: float = 0.25,
                      block_length: float = 50.0,
                      initial_spin=DEFAULT_INITIAL_SPIN,
                      workers: int = 1) -> list[SweepResult]:
    """Steady-state s_z for every (method, temperature) pair.

    Temperatures must be sorted ascending; if the grid starts at 0 the
    rescaled curve m(T) = sz(T)/sz(0) is attached to each result.  Points
    are independent work items with index-derived seeds, so the output does
    not depend on `workers`.
    """
    temps = np.asarray(temperatures, dtype=float)
    if temps.ndim != 1 or len(temps) == 0:
        raise ParameterError("temperatures must be a non-empty 1-d sequence")
    if np.any(np.diff(temps) < 0):
        raise ParameterError("temperatures must be sorted ascending")
    if np.any(temps < 0):
        raise ParameterError("temperatures must be >= 0")
    methods = list(methods)
    jobs = []
    for mi, method in enumerate(methods):
        for ti, temp in enumerate(temps):
            cfg = method_config(method, frame, float(temp), dt=dt, t_max=t_max,
                                eta=eta, cutoff=cutoff)
            jobs.append((cfg, n_replicas, _sweep_seed(seed, mi, ti),
                         window_fraction, block_length, tuple(initial_spin)))
    results = _pmap(_sweep_point_job, jobs, workers)
    out = []
    for mi, method in enumerate(methods):
        means = np.empty(len(temps))
        errs = np.empty(len(temps))
        for ti in range(len(temps)):
            means[ti], errs[ti] = results[mi * len(temps) + ti]
        rescaled = means / means[0] if temps[0] == 0.0 else None
        out.append(SweepResult(method=method, temperatures=temps.copy(),
                               sz_mean=means, sz_stderr=errs,
                               rescaled=rescaled))
    return out


def equilibration_time(times, mean_trace, band: float = 0.05) -> float:
    """First time after which the trace stays within +-band of its plateau.

    The plateau is the mean over the last quarter; the band is relative to
    the plateau magnitude.  A trace that never settles reports the final
    time.
    """
    t = np.asarray(times, dtype=float)
    m = np.asarray(mean_trace, dtype=float)
    if t.shape != m.shape or len(t) < 8:
        raise ParameterError("times and mean_trace must match and be non-trivial")
    plateau = float(m[3 * len(m) // 4:].mean())
    tol = band * (abs(plateau) if plateau != 0.0 else 1.0)
    outside = np.abs(m - plateau) > tol
    if not outside.any():
        return float(t[0])
    last_out = int(np.nonzero(outside)[0][-1])
    if last_out == len(m) - 1:
        return float(t[-1])
    return float(t[last_out + 1])
