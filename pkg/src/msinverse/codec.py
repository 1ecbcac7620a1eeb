"""Ring tiles, 3-bit tile codes and 32x32 unit-cell masks.

A unit cell is a 4x4 grid of tiles; each tile is one of eight fixed 8x8
copper bitmaps shaped as concentric square rings. Codes are 0-based
(0..7) internally; user-facing text shows them as 1..8.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

N_CODES = 8
TILE = 8
GRID = 4
CELL = TILE * GRID  # 32
N_TILES = GRID * GRID  # 16
BITS_PER_CODE = 3
N_BITS = N_TILES * BITS_PER_CODE  # 48

# Which border bands (distance to the nearest tile edge) carry copper.
_RING_BANDS = {
    0: (0,),
    1: (0, 1),
    2: (1,),
    3: (1, 2),
    4: (2,),
    5: (2, 3),
    6: (3,),
    7: (0, 2),
}


def _build_bitmaps() -> np.ndarray:
    i, j = np.indices((TILE, TILE))
    band = np.minimum(np.minimum(i, j), np.minimum(TILE - 1 - i, TILE - 1 - j))
    maps = np.stack([np.isin(band, _RING_BANDS[c]) for c in range(N_CODES)]).astype(np.uint8)
    maps.setflags(write=False)
    return maps


RING_BITMAPS = _build_bitmaps()


@dataclass(frozen=True)
class GeometryMetadata:
    """Physical dimensions of the fabricated cell. Export-only."""

    lattice_length_mm: float = 0.2
    period_mm: float = 6.4
    copper_thickness_mm: float = 0.018
    substrate_height_mm: float = 1.5
    substrate_permittivity: complex = complex(4.2, 0.025)

    def comment_lines(self) -> list[str]:
        eps = self.substrate_permittivity
        return [
            f"lattice_length_mm={self.lattice_length_mm}",
            f"period_mm={self.period_mm}",
            f"copper_thickness_mm={self.copper_thickness_mm}",
            f"substrate_height_mm={self.substrate_height_mm}",
            f"substrate_permittivity={eps.real}+{eps.imag}j",
        ]


GEOMETRY = GeometryMetadata()


@dataclass(frozen=True)
class UnitCellCodes:
    """Sixteen tile codes, row-major over the 4x4 grid."""

    codes: tuple[int, ...]

    def __post_init__(self):
        codes = tuple(int(c) for c in self.codes)
        if len(codes) != N_TILES:
            raise ValueError(f"a unit cell has {N_TILES} tiles, got {len(codes)}")
        if any(c < 0 or c >= N_CODES for c in codes):
            raise ValueError(f"tile codes must lie in 0..{N_CODES - 1}: {codes}")
        object.__setattr__(self, "codes", codes)

    def __iter__(self):
        return iter(self.codes)

    def __len__(self):
        return N_TILES

    def __getitem__(self, i):
        return self.codes[i]

    def grid(self) -> np.ndarray:
        return np.array(self.codes, dtype=np.int64).reshape(GRID, GRID)

    def canonical(self) -> "UnitCellCodes":
        """Same multiset of tiles, sorted ascending in row-major order."""
        return UnitCellCodes(tuple(sorted(self.codes)))

    def display(self) -> str:
        """4x4 grid with 1-based pattern numbers."""
        return "\n".join(" ".join(str(c + 1) for c in row) for row in self.grid())


def as_cell(cell) -> UnitCellCodes:
    return cell if isinstance(cell, UnitCellCodes) else UnitCellCodes(tuple(cell))


def parse_codes(text: str) -> UnitCellCodes:
    """Parse 16 integers separated by whitespace or commas."""
    tokens = text.replace(",", " ").split()
    try:
        values = [int(t) for t in tokens]
    except ValueError as exc:
        raise ValueError(f"tile codes must be integers: {text!r}") from exc
    return UnitCellCodes(tuple(values))


def pattern_bitmap(code: int) -> np.ndarray:
    if not 0 <= int(code) < N_CODES:
        raise ValueError(f"tile code must lie in 0..{N_CODES - 1}, got {code}")
    return RING_BITMAPS[int(code)]


def encode_codes(cell) -> np.ndarray:
    """48 bits, three per tile, most significant bit first."""
    codes = np.array(as_cell(cell).codes)
    shifts = np.array([2, 1, 0])
    return ((codes[:, None] >> shifts) & 1).astype(np.uint8).reshape(N_BITS)


def decode_bits(bits) -> UnitCellCodes:
    bits = np.asarray(bits, dtype=np.float64)
    if bits.shape != (N_BITS,):
        raise ValueError(f"expected {N_BITS} bits, got shape {bits.shape}")
    hard = (bits >= 0.5).astype(np.int64).reshape(N_TILES, BITS_PER_CODE)
    return UnitCellCodes(tuple(int(c) for c in hard @ np.array([4, 2, 1])))


def assemble_unit_cell(cell) -> np.ndarray:
    grid = as_cell(cell).grid()
    # (4, 4, 8, 8) -> (4, 8, 4, 8) -> (32, 32)
    return RING_BITMAPS[grid].transpose(0, 2, 1, 3).reshape(CELL, CELL).copy()


def check_mask(mask) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != (CELL, CELL):
        raise ValueError(f"a pixel mask is {CELL}x{CELL}, got {mask.shape}")
    if not np.isin(mask, (0, 1)).all():
        raise ValueError("pixel mask values must be 0 or 1")
    return mask.astype(np.uint8)


def flatten_mask(mask) -> np.ndarray:
    return check_mask(mask).reshape(CELL * CELL)


def unflatten_mask(vec) -> np.ndarray:
    vec = np.asarray(vec)
    if vec.shape != (CELL * CELL,):
        raise ValueError(f"expected {CELL * CELL} values, got shape {vec.shape}")
    return check_mask(vec.reshape(CELL, CELL))


def project_pixels_to_tiles(raw) -> UnitCellCodes:
    """Snap a 1024-pixel probability map to the nearest legal unit cell.

    Each 8x8 block is thresholded at 0.5 and replaced by the tile with the
    smallest Hamming distance; ties go to the lowest code.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape != (CELL * CELL,):
        raise ValueError(f"expected {CELL * CELL} values, got shape {raw.shape}")
    hard = (raw >= 0.5).astype(np.int64).reshape(GRID, TILE, GRID, TILE)
    blocks = hard.transpose(0, 2, 1, 3).reshape(N_TILES, TILE * TILE)
    tiles = RING_BITMAPS.reshape(N_CODES, TILE * TILE).astype(np.int64)
    dist = np.abs(blocks[:, None, :] - tiles[None, :, :]).sum(axis=2)
    return UnitCellCodes(tuple(int(c) for c in np.argmin(dist, axis=1)))


def _header_comments(meta: GeometryMetadata | None, prefix: str) -> list[str]:
    meta = GEOMETRY if meta is None else meta
    return [f"{prefix} {line}" for line in meta.comment_lines()]


def mask_to_pbm(mask, meta: GeometryMetadata | None = None) -> str:
    """Plain portable bitmap (P1); 1 = copper."""
    mask = check_mask(mask)
    lines = ["P1", *_header_comments(meta, "#"), f"{CELL} {CELL}"]
    lines.extend(" ".join(str(int(v)) for v in row) for row in mask)
    return "\n".join(lines) + "\n"


def mask_to_csv(mask, meta: GeometryMetadata | None = None) -> str:
    mask = check_mask(mask)
    lines = _header_comments(meta, "#")
    lines.extend(",".join(str(int(v)) for v in row) for row in mask)
    return "\n".join(lines) + "\n"


def read_pbm(text: str) -> np.ndarray:
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if not tokens or tokens[0] != "P1":
        raise ValueError("not a plain PBM (P1) file")
    width, height = int(tokens[1]), int(tokens[2])
    if (height, width) != (CELL, CELL):
        raise ValueError(f"expected a {CELL}x{CELL} bitmap, got {width}x{height}")
    # P1 allows pixels without separating whitespace
    pixels = "".join(tokens[3:])
    return unflatten_mask(np.array([int(ch) for ch in pixels], dtype=np.uint8))


def write_mask(mask, path, meta: GeometryMetadata | None = None) -> None:
    """Write as CSV when the suffix is .csv, otherwise as P1 PBM."""
    path = Path(path)
    text = mask_to_csv(mask, meta) if path.suffix.lower() == ".csv" else mask_to_pbm(mask, meta)
    path.write_text(text, encoding="utf-8")
