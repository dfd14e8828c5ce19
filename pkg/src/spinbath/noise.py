"""Deterministic seeded white noise and its spectral colouring.

A trace is generated in one shot before integration: white Gaussian samples
are filtered in the frequency domain by the square root of the target
spectral density (circular convolution via FFT).  The leading wrap-affected
margin is discarded by the caller, which makes the retained part effectively
stationary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coupling import PowerSpectrum
from .model import ParameterError

_MASK64 = (1 << 64) - 1

# Golden-ratio multiplier used to decorrelate per-site streams; trajectory
# streams within an ensemble use a plain XOR with the trajectory index.
_SITE_STRIDE = 0x9E3779B97F4A7C15


def derive_seed(base: int, index: int) -> int:
    """Seed for ensemble member `index`: base XOR index, 64-bit."""
    return (int(base) ^ int(index)) & _MASK64


def site_seed(base: int, site: int) -> int:
    """Seed for lattice site `site` within one trajectory (site 0 = base)."""
    if site == 0:
        return int(base) & _MASK64
    return (int(base) ^ ((site * _SITE_STRIDE) & _MASK64)) & _MASK64


@dataclass(frozen=True)
class WhiteSeed:
    """Address of a reproducible block of white Gaussian samples.

    Identical (seed, n_samples, dt) yields bit-identical samples.  The
    per-sample variance is 1/dt, the discrete stand-in for delta-correlated
    unit-intensity noise.
    """

    seed: int
    n_samples: int
    dt: float

    def __post_init__(self):
        if self.n_samples < 2:
            raise ParameterError("n_samples must be >= 2")
        if not self.dt > 0.0:
            raise ParameterError("dt must be positive")


def white_gaussian(ws: WhiteSeed) -> np.ndarray:
    """3 x n i.i.d. Gaussian samples with variance 1/dt per sample.

    Generation is pinned to the Philox counter-based generator with numpy's
    ziggurat normal sampler; the contract across platforms is statistical
    equivalence, with bit reproducibility only for a fixed numpy install.
    """
    rng = np.random.Generator(np.random.Philox(key=ws.seed & _MASK64))
    return rng.standard_normal((3, ws.n_samples)) / math.sqrt(ws.dt)


@dataclass(frozen=True)
class NoiseTrace:
    """Stationary coloured field samples on the integration grid.

    components has shape (3, n), in units of the external field, sampled
    every dt (unit-free time).  provenance records the white-noise address
    and a description of the spectrum used to colour it.
    """

    components: np.ndarray
    dt: float
    provenance: tuple

    @property
    def n_samples(self) -> int:
        return self.components.shape[1]


def colour(white: np.ndarray, psd: PowerSpectrum, dt: float,
           seed: WhiteSeed | None = None) -> NoiseTrace:
    """Filter white samples so their spectral density matches the target.

    Implements component-wise circular convolution as
    ifft(sqrt(density(omega_k)) * fft(xi)); the filter is even in omega, so
    Hermitian symmetry keeps the output real.
    """
    xi = np.asarray(white, dtype=float)
    if xi.ndim != 2 or xi.shape[0] != 3 or xi.shape[1] < 2:
        raise ParameterError("white must have shape (3, n) with n >= 2")
    n = xi.shape[1]
    omega = 2.0 * math.pi * np.fft.fftfreq(n, d=dt)
    density = np.asarray(psd.trace_density(omega), dtype=float)
    if np.any(density < 0.0) or not np.all(np.isfinite(density)):
        raise RuntimeError("spectral density must be finite and non-negative")
    amp = np.sqrt(density)
    out = np.fft.ifft(amp * np.fft.fft(xi, axis=1), axis=1)
    rms = math.sqrt(float(np.mean(out.real ** 2)))
    if rms > 0.0 and float(np.max(np.abs(out.imag))) > 1e-10 * rms:
        raise RuntimeError("colouring produced a non-real trace")
    return NoiseTrace(components=np.ascontiguousarray(out.real), dt=dt,
                      provenance=(seed, psd.describe()))


def coloured_trace(ws: WhiteSeed, psd: PowerSpectrum) -> NoiseTrace:
    """Generate the white block for `ws` and colour it with `psd`."""
    return colour(white_gaussian(ws), psd, ws.dt, seed=ws)


def trace_for_run(psd: PowerSpectrum, seed: int, dt: float, n_steps: int,
                  margin_time: float) -> NoiseTrace:
    """Trace covering n_steps+1 grid points after a discarded lead-in.

    margin_time (unit-free) absorbs the circular-convolution wrap; it should
    be several correlation times of the target spectrum.
    """
    n_margin = int(math.ceil(margin_time / dt)) if margin_time > 0 else 0
    n = n_steps + 1 + n_margin
    ws = WhiteSeed(seed=seed, n_samples=n, dt=dt)
    full = coloured_trace(ws, psd)
    return NoiseTrace(components=full.components[:, n_margin:], dt=dt,
                      provenance=full.provenance)


def dump_trace(trace: NoiseTrace, path) -> None:
    """Write (t, b_x, b_y, b_z) rows as CSV for debugging."""
    b = trace.components
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# dt={trace.dt!r}\n")
        fh.write(f"# provenance={trace.provenance[1]}\n")
        fh.write("t,b_x,b_y,b_z\n")
        for i in range(b.shape[1]):
            t = i * trace.dt
            fh.write(f"{t:.17g},{b[0, i]:.17g},{b[1, i]:.17g},{b[2, i]:.17g}\n")
