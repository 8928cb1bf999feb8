"""Tension-dependent lumped vibration model and impact-test processing.

Each Cartesian axis carries an independent single mass-spring-damper whose
natural frequency grows linearly with the static tension carried by the
coupling module. The module provides FRF synthesis from that model, H1
FRF estimation from hammer-impact records, compliance peak picking and a
linear frequency-shift-vs-tension fit.
"""

from __future__ import annotations

import io

import math
from dataclasses import dataclass

import numpy as np
import scipy.signal

from .errors import DegenerateSignalError, InvalidInputError, RankDeficiencyError

AXES = ("x", "y", "z")


@dataclass(frozen=True)
class ModalModel:
    """Per-axis 1-DOF oscillator with linear tension sensitivity."""

    axis: str
    mass: float           # kg
    damping_ratio: float  # dimensionless, [0, 1)
    f0: float             # natural frequency at zero tension, Hz
    sensitivity: float    # Hz per N of tension

    def __post_init__(self):
        if self.axis not in AXES:
            raise InvalidInputError(f"axis must be one of {AXES}")
        if not (self.mass > 0):
            raise InvalidInputError("mass must be positive")
        if not (0 <= self.damping_ratio < 1):
            raise InvalidInputError("damping ratio must lie in [0, 1)")
        if not (self.f0 > 0):
            raise InvalidInputError("zero-tension natural frequency must be positive")


@dataclass(frozen=True)
class FrfSeries:
    """Complex compliance (m/N) over an ascending frequency grid."""

    frequencies: np.ndarray
    values: np.ndarray
    axis: str = "x"
    position: str = ""
    tension: float = 0.0

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if f.ndim != 1 or f.shape != v.shape:
            raise InvalidInputError("frequencies and values must be 1-D and the same length")
        if f.size and np.any(np.diff(f) <= 0):
            raise InvalidInputError("frequency grid must be strictly ascending")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(v))):
            raise InvalidInputError("FRF contains non-finite entries")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class ImpactRecord:
    """One hammer impact: force and acceleration time series."""

    sample_rate: float
    force: np.ndarray
    acceleration: np.ndarray
    axis: str = "x"
    position: str = ""
    tension: float = 0.0

    def __post_init__(self):
        f = np.asarray(self.force, dtype=float)
        a = np.asarray(self.acceleration, dtype=float)
        if not (self.sample_rate > 0):
            raise InvalidInputError("sample rate must be positive")
        if f.ndim != 1 or f.shape != a.shape or f.size < 2:
            raise InvalidInputError("force and acceleration must be equal-length series of >= 2 samples")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(a))):
            raise InvalidInputError("impact record contains non-finite samples")
        peak = np.max(np.abs(f))
        if peak == 0:
            raise DegenerateSignalError("force signal is identically zero")
        med = np.median(np.abs(f))
        if med > 0 and peak <= 10 * med:
            raise InvalidInputError("force signal lacks a dominant transient")
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "acceleration", a)


@dataclass(frozen=True)
class ShiftFit:
    """Least-squares line through (tension, natural frequency) points."""

    slope: float       # Hz/N
    intercept: float   # Hz
    residuals: np.ndarray
    scope: str = "global"

    def predict(self, tension):
        return self.intercept + self.slope * np.asarray(tension, dtype=float)


def effective_stiffness(model: ModalModel, tension):
    fn = natural_frequency(model, tension)
    return model.mass * (2 * math.pi * fn) ** 2


def natural_frequency(model: ModalModel, tension):
    """f_n(T) = f0 + sensitivity * T; compression (T < 0) is rejected."""
    if tension < 0:
        raise InvalidInputError("tension must be non-negative")
    return model.f0 + model.sensitivity * tension


def frf_synthesize(model: ModalModel, tension, grid) -> FrfSeries:
    """Compliance H(f) = 1 / (k_eff - m w^2 + i c w) on the given grid."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise InvalidInputError("frequency grid is empty")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise InvalidInputError("frequency grid must be positive and strictly ascending")
    k = effective_stiffness(model, tension)
    c = 2.0 * model.damping_ratio * math.sqrt(k * model.mass)
    w = 2 * math.pi * grid
    H = 1.0 / (k - model.mass * w**2 + 1j * c * w)
    return FrfSeries(grid, H, axis=model.axis, tension=float(tension))


def _force_window(force, threshold=0.02):
    """Rectangular window over the impact support (samples above a small
    fraction of the peak, padded by one sample each side)."""
    mask = np.abs(force) >= threshold * np.max(np.abs(force))
    idx = np.nonzero(mask)[0]
    lo = max(0, idx[0] - 1)
    hi = min(force.size, idx[-1] + 2)
    w = np.zeros(force.size)
    w[lo:hi] = 1.0
    return w


def _exp_window(n, final=0.01):
    return np.exp(np.log(final) * np.arange(n) / (n - 1))


def h1_estimate(records, nfft=None, force_threshold=0.02, exp_final=0.01,
                window=True) -> FrfSeries:
    """H1 compliance FRF averaged over repeated impacts.

    Accelerance S_fa/S_ff is formed from windowed FFTs (rectangular force
    window over the impact, exponential decay window on the response) and
    converted to compliance by dividing by -w^2; the DC bin is dropped.
    """
    records = list(records)
    if not records:
        raise InvalidInputError("at least one impact record is required")
    first = records[0]
    for r in records[1:]:
        if (r.sample_rate, r.axis, r.position, r.tension) != (
            first.sample_rate,
            first.axis,
            first.position,
            first.tension,
        ):
            raise InvalidInputError("impact records differ in sample rate, axis, position or tension")
    if nfft is None:
        nfft = max(len(r.force) for r in records)
    s_ff = np.zeros(nfft // 2 + 1)
    s_fa = np.zeros(nfft // 2 + 1, dtype=complex)
    for r in records:
        f = r.force
        a = r.acceleration
        if window:
            f = f * _force_window(f, force_threshold)
            a = a * _exp_window(a.size, exp_final)
        F = np.fft.rfft(f, nfft)
        A = np.fft.rfft(a, nfft)
        s_ff += (np.conj(F) * F).real
        s_fa += np.conj(F) * A
    if np.all(s_ff == 0):
        raise DegenerateSignalError("force auto-spectrum is identically zero")
    freqs = np.fft.rfftfreq(nfft, 1.0 / first.sample_rate)
    accelerance = s_fa / s_ff
    w = 2 * math.pi * freqs[1:]
    compliance = accelerance[1:] / (-(w**2))
    return FrfSeries(freqs[1:], compliance, axis=first.axis, position=first.position,
                     tension=first.tension)


def peak_pick(frf: FrfSeries, min_freq, max_freq, prominence_factor=3.0):
    """Prominent local maxima of |H| inside [min_freq, max_freq].

    Returns (frequency, magnitude) tuples sorted ascending by frequency.
    Prominence threshold is prominence_factor times the median magnitude
    inside the band.
    """
    if prominence_factor <= 0:
        raise InvalidInputError("prominence factor must be positive")
    sel = (frf.frequencies >= min_freq) & (frf.frequencies <= max_freq)
    if min_freq >= max_freq or not np.any(sel):
        raise InvalidInputError("requested band contains no grid points")
    mag = np.abs(frf.values[sel])
    freqs = frf.frequencies[sel]
    prominence = prominence_factor * np.median(mag)
    idx, _ = scipy.signal.find_peaks(mag, prominence=prominence)
    return [(float(freqs[i]), float(mag[i])) for i in idx]


def fit_shift(points, scope="global") -> ShiftFit:
    """Ordinary least-squares line through (tension, frequency) points."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise InvalidInputError("at least two (tension, frequency) points are required")
    T, f = pts[:, 0], pts[:, 1]
    if np.ptp(T) == 0:
        raise RankDeficiencyError("all tensions identical: the line fit is rank deficient")
    A = np.column_stack([T, np.ones_like(T)])
    (slope, intercept), *_ = np.linalg.lstsq(A, f, rcond=None)
    residuals = f - (slope * T + intercept)
    return ShiftFit(float(slope), float(intercept), residuals, scope=scope)


def simulate_impact(model: ModalModel, tension, sample_rate=4096.0, duration=4.0,
                    amplitude=100.0, impact_width=0.002) -> ImpactRecord:
    """Simulate the oscillator response to a half-sine hammer impact.

    Used to generate desk-scale stand-ins for the physical impact tests.
    """
    if sample_rate <= 0 or duration <= 0 or impact_width <= 0:
        raise InvalidInputError("sample rate, duration and impact width must be positive")
    n = int(round(sample_rate * duration))
    t = np.arange(n) / sample_rate
    force = np.where(t < impact_width, amplitude * np.sin(math.pi * t / impact_width), 0.0)
    k = effective_stiffness(model, tension)
    c = 2.0 * model.damping_ratio * math.sqrt(k * model.mass)
    m = model.mass
    A = np.array([[0.0, 1.0], [-k / m, -c / m]])
    B = np.array([[0.0], [1.0 / m]])
    C = np.array([[-k / m, -c / m]])  # output: acceleration
    D = np.array([[1.0 / m]])
    _, accel, _ = scipy.signal.lsim((A, B, C, D), force, t)
    return ImpactRecord(sample_rate, force, np.asarray(accel), axis=model.axis,
                        tension=float(tension))


# ---------------------------------------------------------------------------
# CSV interchange


def _write_meta(fh, meta):
    for key, value in meta.items():
        fh.write(f"# {key}={value}\n")


def _read_meta_lines(text):
    meta = {}
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, value = body.split("=", 1)
                meta[key.strip()] = value.strip()
        else:
            rows.append(line)
    return meta, rows


def frf_to_csv(frf: FrfSeries) -> str:
    buf = io.StringIO()
    _write_meta(buf, {"axis": frf.axis, "position": frf.position, "tension_N": repr(frf.tension)})
    buf.write("freq_hz,re,im\n")
    for f, v in zip(frf.frequencies, frf.values):
        buf.write(f"{f:.17g},{v.real:.17g},{v.imag:.17g}\n")
    return buf.getvalue()


def frf_from_csv(text) -> FrfSeries:
    meta, rows = _read_meta_lines(text)
    if not rows or rows[0] != "freq_hz,re,im":
        raise InvalidInputError("FRF CSV must start with header 'freq_hz,re,im'")
    data = np.array([[float(x) for x in row.split(",")] for row in rows[1:]])
    return FrfSeries(
        data[:, 0],
        data[:, 1] + 1j * data[:, 2],
        axis=meta.get("axis", "x"),
        position=meta.get("position", ""),
        tension=float(meta.get("tension_N", 0.0)),
    )


def shift_fit_to_csv(points, fit: ShiftFit) -> str:
    buf = io.StringIO()
    _write_meta(buf, {"scope": fit.scope, "slope_hz_per_n": repr(fit.slope),
                      "intercept_hz": repr(fit.intercept)})
    buf.write("tension_N,freq_hz,fit_hz,residual_hz\n")
    for (T, f), r in zip(points, fit.residuals):
        buf.write(f"{T:.17g},{f:.17g},{fit.intercept + fit.slope * T:.17g},{r:.17g}\n")
    return buf.getvalue()


def impact_record_from_csv(text) -> ImpactRecord:
    """Parse an impact record CSV: columns time_s, force_N, accel_ms2 with
    metadata in '# key=value' header comments."""
    meta, rows = _read_meta_lines(text)
    if not rows or rows[0] != "time_s,force_N,accel_ms2":
        raise InvalidInputError("impact CSV must start with header 'time_s,force_N,accel_ms2'")
    data = np.array([[float(x) for x in row.split(",")] for row in rows[1:]])
    if data.shape[0] < 2:
        raise InvalidInputError("impact CSV needs at least two samples")
    if "sample_rate_hz" in meta:
        rate = float(meta["sample_rate_hz"])
    else:
        dt = np.diff(data[:, 0])
        if np.max(np.abs(dt - dt[0])) > 1e-9 * dt[0]:
            raise InvalidInputError("impact CSV time column is not uniformly sampled")
        rate = 1.0 / dt[0]
    return ImpactRecord(
        rate,
        data[:, 1],
        data[:, 2],
        axis=meta.get("axis", "x"),
        position=meta.get("position", ""),
        tension=float(meta.get("tension_N", 0.0)),
    )


def impact_record_to_csv(record: ImpactRecord) -> str:
    buf = io.StringIO()
    _write_meta(buf, {
        "axis": record.axis,
        "position": record.position,
        "tension_N": repr(record.tension),
        "sample_rate_hz": repr(record.sample_rate),
    })
    buf.write("time_s,force_N,accel_ms2\n")
    t = np.arange(record.force.size) / record.sample_rate
    for ti, fi, ai in zip(t, record.force, record.acceleration):
        buf.write(f"{ti:.17g},{fi:.17g},{ai:.17g}\n")
    return buf.getvalue()


def modal_model_from_dict(d, axis) -> ModalModel:
    return ModalModel(
        axis=axis,
        mass=float(d["mass_kg"]),
        damping_ratio=float(d["damping_ratio"]),
        f0=float(d["f0_hz"]),
        sensitivity=float(d["sensitivity_hz_per_n"]),
    )


def modal_model_to_dict(m: ModalModel):
    return {
        "mass_kg": m.mass,
        "damping_ratio": m.damping_ratio,
        "f0_hz": m.f0,
        "sensitivity_hz_per_n": m.sensitivity,
    }
