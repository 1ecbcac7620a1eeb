"""Closed-form reflection model standing in for full-wave simulation.

Each tile code k owns one resonance at ``centers_ghz[k]``. Its notch depth
saturates with the number of tiles n carrying that code,
``depth(n) = -D * (1 - exp(-n / 2))``, and the reflection in dB is a sum of
Lorentzian lines:

    R(f) = sum_k depth(n_k) * g**2 / ((f - f_k)**2 + g**2)

Tile arrangement does not matter, only the per-code counts.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .codec import N_CODES, as_cell

F_START_GHZ = 4.0
F_STOP_GHZ = 45.0
F_STEP_GHZ = 0.05
N_POINTS = int(round((F_STOP_GHZ - F_START_GHZ) / F_STEP_GHZ)) + 1  # 821

FREQUENCIES = F_START_GHZ + F_STEP_GHZ * np.arange(N_POINTS)
FREQUENCIES.setflags(write=False)


@dataclass(frozen=True)
class SurrogateConfig:
    centers_ghz: tuple[float, ...] = (6.0, 11.0, 16.0, 21.0, 26.0, 31.0, 36.0, 41.0)
    halfwidth_ghz: float = 0.4
    max_depth_db: float = 40.0

    def __post_init__(self):
        centers = tuple(float(c) for c in self.centers_ghz)
        if len(centers) != N_CODES:
            raise ValueError(f"need {N_CODES} resonance centers, got {len(centers)}")
        if any(b <= a for a, b in zip(centers, centers[1:])):
            raise ValueError("resonance centers must be strictly increasing")
        if not all(F_START_GHZ < c < F_STOP_GHZ for c in centers):
            raise ValueError("resonance centers must lie inside the frequency band")
        if not self.halfwidth_ghz > 0 or not self.max_depth_db > 0:
            raise ValueError("halfwidth and max depth must be positive")
        object.__setattr__(self, "centers_ghz", centers)

    def to_dict(self) -> dict:
        return {
            "centers_ghz": list(self.centers_ghz),
            "halfwidth_ghz": self.halfwidth_ghz,
            "max_depth_db": self.max_depth_db,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SurrogateConfig":
        return cls(tuple(d["centers_ghz"]), float(d["halfwidth_ghz"]), float(d["max_depth_db"]))

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


DEFAULT_CONFIG = SurrogateConfig()


@dataclass
class Spectrum:
    """Reflection magnitude in dB on the fixed 4-45 GHz grid."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (N_POINTS,):
            raise ValueError(f"a spectrum has {N_POINTS} samples, got {self.values.shape}")
        if not np.isfinite(self.values).all():
            raise ValueError("spectrum values must be finite")
        if (self.values > 0).any():
            raise ValueError("reflection magnitude in dB must be <= 0")

    @property
    def frequencies(self) -> np.ndarray:
        return FREQUENCIES

    def __eq__(self, other):
        return isinstance(other, Spectrum) and np.array_equal(self.values, other.values)

    def to_csv(self) -> str:
        lines = ["frequency_ghz,reflection_db"]
        lines.extend(f"{f:.17g},{v:.17g}" for f, v in zip(FREQUENCIES, self.values))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    @classmethod
    def read_csv(cls, path) -> "Spectrum":
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        if not np.allclose(data[:, 0], FREQUENCIES, rtol=0, atol=1e-9):
            raise ValueError(f"{path}: frequency column does not match the standard grid")
        return cls(data[:, 1])


def frequency_at(index: int) -> float:
    return F_START_GHZ + F_STEP_GHZ * index


def tile_counts(cell) -> np.ndarray:
    return np.bincount(np.array(as_cell(cell).codes), minlength=N_CODES)


def depth_for_count(n, cfg: SurrogateConfig = DEFAULT_CONFIG):
    """Notch depth in dB produced by ``n`` tiles of one code (0 for n = 0)."""
    return -cfg.max_depth_db * (1.0 - np.exp(-np.asarray(n, dtype=np.float64) / 2.0))


@lru_cache(maxsize=16)
def _line_shapes(cfg: SurrogateConfig) -> np.ndarray:
    g2 = cfg.halfwidth_ghz**2
    centers = np.array(cfg.centers_ghz)
    shapes = g2 / ((FREQUENCIES[None, :] - centers[:, None]) ** 2 + g2)
    shapes.setflags(write=False)
    return shapes


def simulate_counts(counts, cfg: SurrogateConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Spectra for one count vector ``(8,)`` or a batch ``(n, 8)``."""
    depths = depth_for_count(counts, cfg)
    return depths @ _line_shapes(cfg)


def simulate(cell, cfg: SurrogateConfig = DEFAULT_CONFIG) -> Spectrum:
    return Spectrum(simulate_counts(tile_counts(cell), cfg))


@dataclass(frozen=True)
class AnalyticNotch:
    freq_ghz: float
    depth_db: float
    bandwidth_ghz: float | None  # None when the notch does not reach -10 dB
    isolated: bool
    neighbor_db: float = field(default=0.0)


def analytic_notch(
    cell, code: int, cfg: SurrogateConfig = DEFAULT_CONFIG, threshold_db: float = -10.0
) -> AnalyticNotch:
    """Closed-form notch of one code: exact depth at its center (own line plus
    neighbour tails) and the -10 dB width of the isolated Lorentzian."""
    counts = tile_counts(cell)
    if not 0 <= code < N_CODES:
        raise ValueError(f"code must lie in 0..{N_CODES - 1}")
    if counts[code] < 1:
        raise ValueError(f"code {code} does not occur in the cell")
    f_k = cfg.centers_ghz[code]
    g2 = cfg.halfwidth_ghz**2
    own = float(depth_for_count(counts[code], cfg))
    neighbor = 0.0
    for j, f_j in enumerate(cfg.centers_ghz):
        if j != code and counts[j]:
            neighbor += float(depth_for_count(counts[j], cfg)) * g2 / ((f_k - f_j) ** 2 + g2)
    depth = own + neighbor
    bandwidth = None
    if depth < threshold_db:
        bandwidth = 2.0 * cfg.halfwidth_ghz * math.sqrt(depth / threshold_db - 1.0)
    return AnalyticNotch(f_k, depth, bandwidth, abs(neighbor) < 0.5, neighbor)
