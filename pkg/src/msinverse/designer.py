"""The two inverse-design networks and the design/evaluation loop around them.

``non_restricted`` predicts all 1024 pixels of the unit cell and is
legalized by snapping each 8x8 block to the nearest tile. ``restricted``
predicts the 48-bit tile-code vector directly, so every output decodes to
a legal cell.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import nn
from .codec import (
    N_BITS,
    N_TILES,
    UnitCellCodes,
    assemble_unit_cell,
    decode_bits,
    encode_codes,
    flatten_mask,
    project_pixels_to_tiles,
)
from .dataset import Dataset
from .features import DesignTarget, Notch, extract_notches, target_to_vector, vector_to_target
from .surrogate import DEFAULT_CONFIG, Spectrum, SurrogateConfig, simulate

MATCH_GATE_GHZ = 1.5
WEIGHTS_FILE = "weights.msinn"
MANIFEST_FILE = "manifest.json"


class Variant(str, Enum):
    NON_RESTRICTED = "non_restricted"
    RESTRICTED = "restricted"


@dataclass(frozen=True)
class ArchitectureSpec:
    variant: Variant
    layer_dims: tuple[int, ...]
    dropout_after: tuple[int, ...]
    activations: tuple[str, ...]


ARCHITECTURES = {
    Variant.NON_RESTRICTED: ArchitectureSpec(
        Variant.NON_RESTRICTED,
        (24, 24, 300, 300, 300, 300, 1024),
        (0, 1, 2, 3, 4),
        ("relu",) * 5 + ("sigmoid",),
    ),
    # no dropout after the fifth dense layer
    Variant.RESTRICTED: ArchitectureSpec(
        Variant.RESTRICTED,
        (24, 24, 500, 500, 500, 500, 48),
        (0, 1, 2, 3),
        ("relu",) * 5 + ("sigmoid",),
    ),
}


def build(variant, seed: int = 0, dropout_rate: float = 0.1) -> nn.MlpModel:
    arch = ARCHITECTURES[Variant(variant)]
    return nn.MlpModel.from_dims(
        arch.layer_dims,
        arch.activations,
        np.random.default_rng(seed),
        arch.dropout_after,
        dropout_rate,
    )


def infer_variant(model: nn.MlpModel) -> Variant:
    for variant, arch in ARCHITECTURES.items():
        if tuple(model.dims()) == arch.layer_dims:
            return variant
    raise ValueError(f"model with widths {model.dims()} matches neither architecture")


def label_vector(variant, codes) -> np.ndarray:
    if Variant(variant) is Variant.RESTRICTED:
        return encode_codes(codes).astype(np.float64)
    return flatten_mask(assemble_unit_cell(codes)).astype(np.float64)


def labels(variant, d: Dataset) -> np.ndarray:
    return np.stack([label_vector(variant, s.codes) for s in d.samples])


def decode_output(variant, raw) -> UnitCellCodes:
    if Variant(variant) is Variant.RESTRICTED:
        return decode_bits(raw)
    return project_pixels_to_tiles(raw)


def train_inverse(
    variant,
    train_set: Dataset,
    test_set: Dataset | None,
    config: nn.TrainConfig,
    on_epoch=None,
):
    """Build the variant's network (initialized from ``config.rng_seed``) and
    train it. History carries train and held-out MSE/accuracy per epoch."""
    variant = Variant(variant)
    model = build(variant, config.rng_seed, config.dropout_rate)
    validation = None
    if test_set is not None:
        validation = (test_set.features(), labels(variant, test_set))
    return nn.train(
        model,
        train_set.features(),
        labels(variant, train_set),
        config,
        validation=validation,
        on_epoch=on_epoch,
    )


@dataclass
class NotchError:
    target_freq_ghz: float
    achieved_freq_ghz: float
    dfreq_ghz: float
    ddepth_db: float
    dbw_ghz: float


@dataclass
class DesignReport:
    target: DesignTarget
    codes: UnitCellCodes
    mask: np.ndarray
    spectrum: Spectrum
    achieved: DesignTarget
    errors: list[NotchError] = field(default_factory=list)
    missed: list[Notch] = field(default_factory=list)
    spurious: list[Notch] = field(default_factory=list)

    @property
    def matched(self) -> int:
        return len(self.errors)

    def to_dict(self) -> dict:
        return {
            "target": [asdict(n) for n in self.target],
            "codes": list(self.codes.codes),
            "achieved": [asdict(n) for n in self.achieved],
            "matched": [asdict(e) for e in self.errors],
            "missed": [asdict(n) for n in self.missed],
            "spurious": [asdict(n) for n in self.spurious],
            "counts": {
                "matched": self.matched,
                "missed": len(self.missed),
                "spurious": len(self.spurious),
            },
        }

    def summary(self) -> str:
        lines = [
            f"target:   {self.target.format() or '(no notches)'}",
            f"achieved: {self.achieved.format() or '(no notches)'}",
            "tile grid (patterns 1-8):",
            self.codes.display(),
            f"matched {self.matched}, missed {len(self.missed)}, spurious {len(self.spurious)}",
        ]
        for e in self.errors:
            lines.append(
                f"  {e.target_freq_ghz:g} GHz -> {e.achieved_freq_ghz:g} GHz "
                f"(dfreq {e.dfreq_ghz:+.3f} GHz, ddepth {e.ddepth_db:+.2f} dB, "
                f"dbw {e.dbw_ghz:+.3f} GHz)"
            )
        return "\n".join(lines)


def match_notches(target: DesignTarget, achieved: DesignTarget, gate_ghz: float = MATCH_GATE_GHZ):
    """Greedy nearest-frequency pairing within ``gate_ghz``.

    Returns ``(pairs, missed, spurious)`` where pairs are
    ``(target_notch, achieved_notch)``.
    """
    candidates = sorted(
        (abs(a.freq_ghz - t.freq_ghz), i, j)
        for i, t in enumerate(target.notches)
        for j, a in enumerate(achieved.notches)
        if abs(a.freq_ghz - t.freq_ghz) <= gate_ghz
    )
    used_t, used_a, pairs = set(), set(), []
    for _, i, j in candidates:
        if i in used_t or j in used_a:
            continue
        used_t.add(i)
        used_a.add(j)
        pairs.append((target.notches[i], achieved.notches[j]))
    pairs.sort(key=lambda p: p[0].freq_ghz)
    missed = [t for i, t in enumerate(target.notches) if i not in used_t]
    spurious = [a for j, a in enumerate(achieved.notches) if j not in used_a]
    return pairs, missed, spurious


def report_for(target: DesignTarget, codes: UnitCellCodes, cfg: SurrogateConfig = DEFAULT_CONFIG):
    spectrum = simulate(codes, cfg)
    achieved = extract_notches(spectrum)
    pairs, missed, spurious = match_notches(target, achieved)
    errors = [
        NotchError(
            t.freq_ghz,
            a.freq_ghz,
            a.freq_ghz - t.freq_ghz,
            a.depth_db - t.depth_db,
            a.bandwidth_ghz - t.bandwidth_ghz,
        )
        for t, a in pairs
    ]
    return DesignReport(
        target, codes, assemble_unit_cell(codes), spectrum, achieved, errors, missed, spurious
    )


def _check_model(model: nn.MlpModel, variant: Variant):
    arch = ARCHITECTURES[variant]
    if not isinstance(model, nn.MlpModel) or model.in_dim != arch.layer_dims[0] \
            or model.out_dim != arch.layer_dims[-1]:
        raise ValueError(f"model does not fit the {variant.value} architecture")


def design(
    model: nn.MlpModel, variant, target: DesignTarget, cfg: SurrogateConfig = DEFAULT_CONFIG
) -> DesignReport:
    variant = Variant(variant)
    _check_model(model, variant)
    raw = model.predict(target_to_vector(target))
    return report_for(target, decode_output(variant, raw), cfg)


@dataclass
class Metrics:
    bit_accuracy: float
    tile_accuracy: float
    mean_abs_dfreq_ghz: float | None
    mean_abs_ddepth_db: float | None
    mean_abs_dbw_ghz: float | None
    notch_count_match_rate: float | None
    n_samples: int

    def to_dict(self) -> dict:
        return asdict(self)


def tile_hits(variant, raw, codes: UnitCellCodes) -> int:
    """Number of tiles predicted correctly: all three code bits for the
    restricted network, the projected tile code for the pixel network."""
    variant = Variant(variant)
    if variant is Variant.RESTRICTED:
        pred_bits = (np.asarray(raw) >= 0.5).reshape(N_TILES, 3)
        true_bits = encode_codes(codes).reshape(N_TILES, 3).astype(bool)
        return int(np.all(pred_bits == true_bits, axis=1).sum())
    return int(sum(p == t for p, t in zip(project_pixels_to_tiles(raw), codes)))


def evaluate_predictions(
    variant, raw_outputs, d: Dataset, round_trip: bool = True
) -> Metrics:
    """Score raw network outputs (one row per sample) against ``d``."""
    variant = Variant(variant)
    raw_outputs = np.asarray(raw_outputs, dtype=np.float64)
    if len(raw_outputs) != len(d):
        raise ValueError("need one prediction per sample")
    bit = tiles = count_hits = 0.0
    dfs, dds, dbs = [], [], []
    for raw, s in zip(raw_outputs, d.samples):
        bit += nn.binary_accuracy(raw, label_vector(variant, s.codes))
        tiles += tile_hits(variant, raw, s.codes) / N_TILES
        if round_trip:
            target = vector_to_target(s.features)
            rep = report_for(target, decode_output(variant, raw), d.config)
            count_hits += len(rep.achieved) == len(target)
            for e in rep.errors:
                dfs.append(abs(e.dfreq_ghz))
                dds.append(abs(e.ddepth_db))
                dbs.append(abs(e.dbw_ghz))
    n = len(d)

    def mean(xs):
        return float(np.mean(xs)) if xs else None

    return Metrics(
        bit / n,
        tiles / n,
        mean(dfs),
        mean(dds),
        mean(dbs),
        count_hits / n if round_trip else None,
        n,
    )


def evaluate(model: nn.MlpModel, variant, d: Dataset, round_trip: bool = True) -> Metrics:
    variant = Variant(variant)
    _check_model(model, variant)
    return evaluate_predictions(variant, model.predict(d.features()), d, round_trip)


def save_bundle(directory, model: nn.MlpModel, variant, manifest: dict) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    nn.save_weights(model, directory / WEIGHTS_FILE)
    body = {"variant": Variant(variant).value, "weights": WEIGHTS_FILE, **manifest}
    (directory / MANIFEST_FILE).write_text(
        json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_bundle(directory) -> tuple[nn.MlpModel, Variant, dict]:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_FILE
    if not manifest_path.is_file():
        raise ValueError(f"{directory}: no {MANIFEST_FILE} found")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    variant = Variant(manifest["variant"])
    model = nn.load_weights(directory / manifest.get("weights", WEIGHTS_FILE))
    _check_model(model, variant)
    return model, variant, manifest
