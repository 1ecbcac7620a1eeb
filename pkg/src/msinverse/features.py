"""Notch extraction and the 24-wide normalized design-target vector."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .surrogate import F_START_GHZ, F_STOP_GHZ, FREQUENCIES, Spectrum

THRESHOLD_DB = -10.0
MAX_NOTCHES = 8
VECTOR_LEN = 3 * MAX_NOTCHES

_F_SPAN = F_STOP_GHZ - F_START_GHZ
_DEPTH_CAP_DB = 50.0
_BW_CAP_GHZ = 5.0
_LIVE_DEPTH_NORM = -THRESHOLD_DB / _DEPTH_CAP_DB  # 0.2


@dataclass(frozen=True)
class Notch:
    freq_ghz: float
    depth_db: float
    bandwidth_ghz: float

    def __post_init__(self):
        for name in ("freq_ghz", "depth_db", "bandwidth_ghz"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if not F_START_GHZ <= self.freq_ghz <= F_STOP_GHZ:
            raise ValueError(
                f"notch frequency {self.freq_ghz} GHz outside [{F_START_GHZ}, {F_STOP_GHZ}]"
            )
        if not self.depth_db < THRESHOLD_DB:
            raise ValueError(f"notch depth {self.depth_db} dB is not below {THRESHOLD_DB} dB")
        if not self.bandwidth_ghz > 0:
            raise ValueError(f"notch bandwidth must be positive, got {self.bandwidth_ghz}")


@dataclass(frozen=True)
class DesignTarget:
    """Up to eight notches in ascending frequency order."""

    notches: tuple[Notch, ...] = ()

    def __post_init__(self):
        notches = tuple(self.notches)
        if len(notches) > MAX_NOTCHES:
            raise ValueError(f"at most {MAX_NOTCHES} notches, got {len(notches)}")
        if any(b.freq_ghz <= a.freq_ghz for a, b in zip(notches, notches[1:])):
            raise ValueError("notch frequencies must be strictly increasing")
        object.__setattr__(self, "notches", notches)

    def __len__(self):
        return len(self.notches)

    def __iter__(self):
        return iter(self.notches)

    @classmethod
    def from_notches(cls, notches) -> "DesignTarget":
        return cls(tuple(sorted(notches, key=lambda n: n.freq_ghz)))

    def format(self) -> str:
        return ";".join(f"{n.freq_ghz:g},{n.depth_db:g},{n.bandwidth_ghz:g}" for n in self.notches)


def parse_target(text: str) -> DesignTarget:
    """Parse ``"freq,depth,bw;freq,depth,bw;..."`` (GHz, dB, GHz)."""
    notches = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != 3:
            raise ValueError(f"notch {chunk!r} must be 'freq,depth,bandwidth'")
        try:
            f, d, bw = (float(p) for p in parts)
        except ValueError as exc:
            raise ValueError(f"notch {chunk!r} has a non-numeric field") from exc
        notches.append(Notch(f, d, bw))
    return DesignTarget.from_notches(notches)


def _crossing(i_out: int, i_in: int, values: np.ndarray, threshold: float) -> float:
    """Frequency where the line between samples i_out (>= threshold) and
    i_in (< threshold) crosses the threshold."""
    f0, f1 = FREQUENCIES[i_out], FREQUENCIES[i_in]
    v0, v1 = values[i_out], values[i_in]
    return f0 + (threshold - v0) / (v1 - v0) * (f1 - f0)


def extract_notches(spectrum: Spectrum, threshold_db: float = THRESHOLD_DB) -> DesignTarget:
    """One notch per maximal run of samples below ``threshold_db``.

    Frequency and depth come from the run's minimum (first index on ties);
    bandwidth is the span between the linearly interpolated threshold
    crossings, using the band edge for runs that touch it. When more than
    eight runs exist the eight deepest are kept.
    """
    values = spectrum.values if isinstance(spectrum, Spectrum) else Spectrum(spectrum).values
    below = values < threshold_db
    if not below.any():
        return DesignTarget()
    edges = np.diff(below.astype(np.int8))
    starts = list(np.flatnonzero(edges == 1) + 1)
    stops = list(np.flatnonzero(edges == -1))  # inclusive run ends
    if below[0]:
        starts.insert(0, 0)
    if below[-1]:
        stops.append(len(values) - 1)

    notches = []
    last = len(values) - 1
    for a, b in zip(starts, stops):
        i_min = a + int(np.argmin(values[a : b + 1]))
        left = FREQUENCIES[0] if a == 0 else _crossing(a - 1, a, values, threshold_db)
        right = FREQUENCIES[last] if b == last else _crossing(b + 1, b, values, threshold_db)
        notches.append(Notch(FREQUENCIES[i_min], values[i_min], right - left))
    if len(notches) > MAX_NOTCHES:
        notches = sorted(notches, key=lambda n: n.depth_db)[:MAX_NOTCHES]
    return DesignTarget.from_notches(notches)


def target_to_vector(target: DesignTarget) -> np.ndarray:
    v = np.zeros(VECTOR_LEN)
    for i, n in enumerate(target.notches):
        if not F_START_GHZ <= n.freq_ghz <= F_STOP_GHZ:
            raise ValueError(f"notch frequency {n.freq_ghz} GHz outside the band")
        v[3 * i] = (n.freq_ghz - F_START_GHZ) / _F_SPAN
        v[3 * i + 1] = min(-n.depth_db, _DEPTH_CAP_DB) / _DEPTH_CAP_DB
        v[3 * i + 2] = min(n.bandwidth_ghz, _BW_CAP_GHZ) / _BW_CAP_GHZ
    return v


def vector_to_target(v) -> DesignTarget:
    """Inverse of :func:`target_to_vector`. A slot is a notch when its depth
    component exceeds 0.2 (deeper than -10 dB)."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (VECTOR_LEN,):
        raise ValueError(f"expected a {VECTOR_LEN}-element vector, got {v.shape}")
    notches = []
    for f_n, d_n, bw_n in v.reshape(MAX_NOTCHES, 3):
        if d_n <= _LIVE_DEPTH_NORM or bw_n <= 0:
            continue
        notches.append(
            Notch(F_START_GHZ + f_n * _F_SPAN, -d_n * _DEPTH_CAP_DB, bw_n * _BW_CAP_GHZ)
        )
    return DesignTarget.from_notches(notches)
