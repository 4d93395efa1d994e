"""Fourier spectra of imaginary-time trajectories and fast-mode classification."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import SingularityEncountered, StepSizeUnderflow
from .field import VectorField, jacobian_spectrum
from .integrator import SINGULARITY, IntegratorConfig, integrate_path
from .io import fmt, write_json

ON_SIM = "OnSIM"
OFF_SIM = "OffSIM"
EQUILIBRIUM = "Equilibrium"


def _check_pow2(n: int) -> None:
    if n < 2 or n & (n - 1):
        raise ValueError(f"length must be a power of two >= 2, got {n}")


def fft(signal: Sequence[complex]) -> np.ndarray:
    """Radix-2 decimation-in-time FFT, X_k = sum_j x_j exp(-2 pi i jk/N).

    Output is in natural order (k = 0..N-1); see :func:`two_sided`.
    """
    x = np.asarray(signal, dtype=complex)
    n = x.shape[0]
    _check_pow2(n)
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=int)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    a = x[rev].copy()
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(-2j * np.pi * np.arange(half) / size)
        a = a.reshape(-1, size)
        even = a[:, :half].copy()
        odd = a[:, half:] * tw
        a[:, :half] = even + odd
        a[:, half:] = even - odd
        a = a.reshape(n)
        size *= 2
    return a


def ifft(spectrum: Sequence[complex]) -> np.ndarray:
    X = np.asarray(spectrum, dtype=complex)
    return np.conj(fft(np.conj(X))) / X.shape[0]


def two_sided(X: np.ndarray) -> np.ndarray:
    """Rotate natural-order bins so index 0 holds k = -N/2."""
    return np.roll(X, X.shape[0] // 2, axis=0)


def window(name: str, n: int) -> np.ndarray:
    if name == "rect":
        return np.ones(n)
    if name == "hann":
        # periodic Hann: exact-period signals leak into +-1 bin only
        return 0.5 * (1.0 - np.cos(2 * np.pi * np.arange(n) / n))
    raise ValueError(f"unknown window {name!r} (rect, hann)")


@dataclass(frozen=True)
class Spectrum:
    n: int
    tau_span: float
    freqs: np.ndarray  # two-sided, k/tau_span for k in [-N/2, N/2)
    amplitudes: np.ndarray  # (N, dim) complex, two-sided order
    power: np.ndarray  # (N, dim)
    window: str
    windowed: np.ndarray  # (N, dim) signal fed to the FFT

    @property
    def total_power(self) -> np.ndarray:
        return self.power.sum(axis=1)

    @property
    def bin_width(self) -> float:
        return 1.0 / self.tau_span

    @property
    def nyquist(self) -> float:
        return self.n / (2 * self.tau_span)

    def peaks(self, count: int = 1) -> np.ndarray:
        """Frequencies of the ``count`` strongest local maxima of the aggregate power."""
        p = self.total_power
        left, right = np.roll(p, 1), np.roll(p, -1)
        cand = np.flatnonzero((p >= left) & (p >= right) & (p > 0))
        cand = cand[np.argsort(-p[cand], kind="stable")]
        return self.freqs[cand[:count]]


def spectrum_of(samples: np.ndarray, tau_span: float, window_name: str = "hann") -> Spectrum:
    """Spectrum of uniformly spaced samples (rows) over ``tau_span``."""
    x = np.asarray(samples, dtype=complex)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    _check_pow2(n)
    x = x - x.mean(axis=0)
    xw = x * window(window_name, n)[:, None]
    X = np.stack([two_sided(fft(xw[:, k])) for k in range(x.shape[1])], axis=1)
    freqs = np.arange(-n // 2, n // 2) / tau_span
    return Spectrum(n, float(tau_span), freqs, X, np.abs(X) ** 2, window_name, xw)


def imaginary_time_spectrum(field: VectorField, z0: Sequence[complex], sigma_anchor: float = 0.0,
                            tau_span: float = 16 * math.pi, n: int = 1024, window_name: str = "hann",
                            cfg: IntegratorConfig | None = None) -> Spectrum:
    """Spectrum of z(sigma_anchor + i tau) sampled at tau = k tau_span / n, k < n."""
    _check_pow2(n)
    if not tau_span > 0:
        raise ValueError("tau_span must be positive")
    cfg = cfg or IntegratorConfig()
    z = np.array(z0, dtype=complex)
    if sigma_anchor != 0:
        leg = integrate_path(field, z, [0, sigma_anchor],
                             IntegratorConfig(**{**asdict(cfg), "dense_samples": 1}))
        if not leg.ok:
            _raise(leg, "real leg")
        z = leg.end
    t0 = complex(sigma_anchor, 0)
    traj = integrate_path(field, z, [t0, t0 + 1j * tau_span],
                          IntegratorConfig(**{**asdict(cfg), "dense_samples": n}))
    if not traj.ok:
        _raise(traj, "imaginary leg")
    return spectrum_of(np.array(traj.states[:n]), tau_span, window_name)


def _raise(traj, leg):
    msg = f"{leg} failed at tau = {traj.t_reached.imag:.6g}: {traj.message}"
    if traj.status == SINGULARITY:
        raise SingularityEncountered(msg, traj)
    raise StepSizeUnderflow(msg, traj)


@dataclass(frozen=True)
class ClassificationReport:
    band: tuple[float, float]
    band_power: float
    total_power: float
    ratio: float
    epsilon: float
    power_floor: float
    verdict: str

    def to_dict(self) -> dict:
        return {
            "band": [self.band[0], self.band[1]],
            "mirror_band": [-self.band[1], -self.band[0]],
            "band_power": self.band_power,
            "total_power": self.total_power,
            "ratio": self.ratio,
            "epsilon": self.epsilon,
            "power_floor": self.power_floor,
            "verdict": self.verdict,
        }


def classify_sim_membership(spectrum: Spectrum, band: Sequence[float], epsilon: float = 1e-4,
                            power_floor: float = 1e-18) -> ClassificationReport:
    """OnSIM iff the fraction of power with |f| in ``band`` is below ``epsilon``."""
    f_lo, f_hi = float(band[0]), float(band[1])
    if not 0 < f_lo < f_hi:
        raise ValueError(f"band must satisfy 0 < f_lo < f_hi, got {band}")
    if f_hi > spectrum.nyquist * (1 + 1e-12):
        raise ValueError(f"band upper edge {f_hi} exceeds Nyquist {spectrum.nyquist}")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    af = np.abs(spectrum.freqs)
    mask = (af >= f_lo) & (af <= f_hi)
    if not mask.any():
        raise ValueError(f"no frequency bins fall inside band {band}")
    p = spectrum.total_power
    total = float(p.sum())
    in_band = float(p[mask].sum())
    if total < power_floor:
        ratio = 0.0 if total == 0 else in_band / total
        verdict = EQUILIBRIUM
    else:
        ratio = in_band / total
        verdict = ON_SIM if ratio < epsilon else OFF_SIM
    return ClassificationReport((f_lo, f_hi), in_band, total, ratio, float(epsilon),
                                float(power_floor), verdict)


def suggest_fast_band(field: VectorField, equilibrium_point: Sequence[complex],
                      slow_dimension: int = 1) -> tuple[float, float]:
    n = field.dimension
    if not 0 <= slow_dimension < n:
        raise ValueError(f"slow_dimension must be in [0, {n}) for a {n}-dimensional field")
    eig = jacobian_spectrum(field, equilibrium_point).eigenvalues
    eig = sorted(eig, key=lambda lam: abs(lam.real))
    fast = np.abs(np.array(eig[slow_dimension:]))
    return (0.5 * fast.min() / (2 * math.pi), 1.5 * fast.max() / (2 * math.pi))


def write_spectrum_csv(spec: Spectrum, path) -> None:
    dim = spec.power.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["f", "power_total"] + [f"power_z{k}" for k in range(1, dim + 1)])
        total = spec.total_power
        for i, f in enumerate(spec.freqs):
            w.writerow([fmt(f), fmt(total[i])] + [fmt(v) for v in spec.power[i]])


def write_report_json(report: ClassificationReport, path) -> None:
    write_json(report.to_dict(), path)
