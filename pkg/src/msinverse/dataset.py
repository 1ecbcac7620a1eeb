"""Labeled (target vector, unit cell) datasets generated through the surrogate.

File format ``MSDS/1``: UTF-8, newline-delimited JSON. The first line is a
header carrying the format tag, generator seed, surrogate config and its
digest, and the canonical-label flag; every following line is one sample
``{"codes": [16 ints], "features": [24 reals]}`` with an optional
``"spectrum"`` array. Reals are written with 17 significant digits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .codec import N_CODES, N_TILES, UnitCellCodes
from .features import VECTOR_LEN, extract_notches, target_to_vector
from .surrogate import DEFAULT_CONFIG, N_POINTS, Spectrum, SurrogateConfig, simulate_counts

DATASET_FORMAT = "MSDS/1"


class DatasetError(ValueError):
    pass


class DatasetVersionError(DatasetError):
    pass


class DatasetFormatError(DatasetError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ConfigMismatchError(DatasetError):
    pass


@dataclass
class Sample:
    codes: UnitCellCodes
    features: np.ndarray
    spectrum: Spectrum | None = None

    def __eq__(self, other):
        if not isinstance(other, Sample):
            return NotImplemented
        return (
            self.codes == other.codes
            and np.array_equal(self.features, other.features)
            and self.spectrum == other.spectrum
        )


@dataclass
class Dataset:
    samples: list[Sample]
    generator_seed: int
    config: SurrogateConfig = DEFAULT_CONFIG
    canonical_labels: bool = True

    def __post_init__(self):
        if not self.samples:
            raise DatasetError("a dataset needs at least one sample")

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.generator_seed == other.generator_seed
            and self.config == other.config
            and self.canonical_labels == other.canonical_labels
            and self.samples == other.samples
        )

    @property
    def surrogate_config_digest(self) -> str:
        return self.config.digest()

    def features(self) -> np.ndarray:
        return np.stack([s.features for s in self.samples])

    def codes(self) -> np.ndarray:
        return np.array([s.codes.codes for s in self.samples], dtype=np.int64)

    def subset(self, indices: Sequence[int]) -> "Dataset":
        return Dataset(
            [self.samples[i] for i in indices],
            self.generator_seed,
            self.config,
            self.canonical_labels,
        )


def draw_codes(rng: np.random.Generator, n: int) -> np.ndarray:
    """``(n, 16)`` independent uniform tile codes."""
    return rng.integers(0, N_CODES, size=(n, N_TILES))


def features_for_counts(counts: np.ndarray, cfg: SurrogateConfig = DEFAULT_CONFIG):
    """Target vectors (and spectra) for a batch of ``(n, 8)`` count vectors."""
    # per-row evaluation keeps results bit-identical to simulate() on one cell
    spectra = np.stack([simulate_counts(c, cfg) for c in counts])
    feats = np.stack([target_to_vector(extract_notches(Spectrum(s))) for s in spectra])
    return feats, spectra


def generate(
    n: int = 2000,
    seed: int = 42,
    cfg: SurrogateConfig = DEFAULT_CONFIG,
    canonical: bool = True,
    store_spectra: bool = False,
) -> Dataset:
    """Draw ``n`` random unit cells and label them through the surrogate.

    With ``canonical`` each cell's codes are sorted ascending before storage,
    so all arrangements of one tile multiset share a single label.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    codes = draw_codes(np.random.default_rng(seed), n)
    if canonical:
        codes = np.sort(codes, axis=1)
    counts = np.stack([np.bincount(row, minlength=N_CODES) for row in codes])
    feats, spectra = features_for_counts(counts, cfg)
    samples = [
        Sample(
            UnitCellCodes(tuple(int(c) for c in codes[i])),
            feats[i],
            Spectrum(spectra[i]) if store_spectra else None,
        )
        for i in range(n)
    ]
    return Dataset(samples, seed, cfg, canonical)


def split(d: Dataset, train_fraction: float = 0.7, seed: int = 42) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then the first ``floor(n * fraction)`` go to training."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    n = len(d)
    n_train = int(np.floor(n * train_fraction))
    if n_train == 0 or n_train == n:
        raise ValueError(f"a {train_fraction} split of {n} samples leaves one side empty")
    order = np.random.default_rng(seed).permutation(n)
    return d.subset(order[:n_train]), d.subset(order[n_train:])


def check_labels(d: Dataset, atol: float = 1e-12) -> list[int]:
    """Indices of samples whose stored features disagree with a fresh
    surrogate evaluation of their codes."""
    counts = np.stack([np.bincount(d.codes()[i], minlength=N_CODES) for i in range(len(d))])
    fresh, _ = features_for_counts(counts, d.config)
    bad = np.flatnonzero(np.abs(fresh - d.features()).max(axis=1) > atol)
    return [int(i) for i in bad]


def _reals(values) -> str:
    return "[" + ",".join(f"{float(v):.17g}" for v in values) + "]"


def dumps(d: Dataset) -> str:
    header = {
        "format": DATASET_FORMAT,
        "seed": d.generator_seed,
        "canonical": d.canonical_labels,
        "config": d.config.to_dict(),
        "config_digest": d.surrogate_config_digest,
        "count": len(d),
    }
    lines = [json.dumps(header, sort_keys=True)]
    for s in d.samples:
        line = '{"codes":[' + ",".join(str(c) for c in s.codes) + '],"features":' + _reals(s.features)
        if s.spectrum is not None:
            line += ',"spectrum":' + _reals(s.spectrum.values)
        lines.append(line + "}")
    return "\n".join(lines) + "\n"


def save(d: Dataset, path) -> None:
    Path(path).write_text(dumps(d), encoding="utf-8")


def loads(text: str, expected_config: SurrogateConfig | None = None) -> Dataset:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DatasetFormatError("empty file", 1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"unreadable header ({exc.msg})", 1) from None
    if not isinstance(header, dict) or header.get("format") != DATASET_FORMAT:
        found = header.get("format") if isinstance(header, dict) else None
        raise DatasetVersionError(f"expected format {DATASET_FORMAT}, found {found!r}")
    try:
        cfg = SurrogateConfig.from_dict(header["config"])
        seed = int(header["seed"])
        canonical = bool(header["canonical"])
        digest = header["config_digest"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetFormatError(f"incomplete header ({exc})", 1) from None
    if cfg.digest() != digest:
        raise ConfigMismatchError(
            f"header digest {digest[:12]}... does not match its surrogate config "
            f"({cfg.digest()[:12]}...)"
        )
    if expected_config is not None and expected_config.digest() != digest:
        raise ConfigMismatchError("dataset was generated with a different surrogate config")

    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"malformed record ({exc.msg})", lineno) from None
        try:
            codes = UnitCellCodes(tuple(rec["codes"]))
            feats = np.array(rec["features"], dtype=np.float64)
            if feats.shape != (VECTOR_LEN,):
                raise ValueError(f"features must have {VECTOR_LEN} entries")
            spectrum = None
            if "spectrum" in rec:
                if len(rec["spectrum"]) != N_POINTS:
                    raise ValueError(f"spectrum must have {N_POINTS} entries")
                spectrum = Spectrum(rec["spectrum"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetFormatError(f"invalid record ({exc})", lineno) from None
        samples.append(Sample(codes, feats, spectrum))
    if "count" in header and int(header["count"]) != len(samples):
        raise DatasetFormatError(
            f"header announces {header['count']} samples but {len(samples)} were read",
            len(lines),
        )
    if not samples:
        raise DatasetFormatError("no samples", 2)
    return Dataset(samples, seed, cfg, canonical)


def load(path, expected_config: SurrogateConfig | None = None) -> Dataset:
    return loads(Path(path).read_text(encoding="utf-8"), expected_config)
