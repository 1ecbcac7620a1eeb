import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msinverse import codec
from msinverse.codec import UnitCellCodes

cells = st.lists(st.integers(0, 7), min_size=16, max_size=16).map(lambda c: UnitCellCodes(tuple(c)))


def band_count(bands):
    """Brute-force count of 8x8 cells whose border distance is in ``bands``."""
    return sum(1 for i in range(8) for j in range(8) if min(i, j, 7 - i, 7 - j) in bands)


def test_bitmap_ones_counts():
    assert codec.pattern_bitmap(0).sum() == band_count({0}) == 28
    assert codec.pattern_bitmap(6).sum() == band_count({3}) == 4
    expected = [{0}, {0, 1}, {1}, {1, 2}, {2}, {2, 3}, {3}, {0, 2}]
    for code, bands in enumerate(expected):
        ones = int(codec.pattern_bitmap(code).sum())
        assert ones == band_count(bands)
        assert 4 <= ones <= 64


def test_bitmaps_distinct_and_symmetric():
    for a, b in itertools.permutations(range(8), 2):
        assert not np.array_equal(codec.pattern_bitmap(a), codec.pattern_bitmap(b))
    for c in range(8):
        bm = codec.pattern_bitmap(c)
        assert np.array_equal(bm, np.rot90(bm))
        assert set(np.unique(bm)) <= {0, 1}


def test_bitmaps_are_read_only():
    with pytest.raises(ValueError):
        codec.pattern_bitmap(0)[0, 0] = 0


@pytest.mark.parametrize("code", [-1, 8])
def test_pattern_bitmap_rejects_out_of_range(code):
    with pytest.raises(ValueError):
        codec.pattern_bitmap(code)


def test_unit_cell_validation():
    with pytest.raises(ValueError):
        UnitCellCodes((0,) * 15)
    with pytest.raises(ValueError):
        UnitCellCodes((0,) * 15 + (8,))


def test_encode_examples():
    assert not codec.encode_codes([0] * 16).any()
    bits = codec.encode_codes([5] + [0] * 15)
    assert list(bits[:6]) == [1, 0, 1, 0, 0, 0]
    assert bits.shape == (48,)


def test_round_trip_all_two_tile_prefixes():
    for a, b in itertools.product(range(8), repeat=2):
        cell = UnitCellCodes((a, b) + (0,) * 14)
        assert codec.decode_bits(codec.encode_codes(cell)) == cell


def test_decode_examples():
    assert codec.decode_bits(np.full(48, 0.49)).codes == (0,) * 16
    bits = np.zeros(48)
    bits[:3] = [0.6, 0.4, 0.7]
    assert codec.decode_bits(bits)[0] == 5
    assert codec.decode_bits(np.full(48, 0.5)).codes == (7,) * 16
    with pytest.raises(ValueError):
        codec.decode_bits(np.zeros(47))


def test_every_bit_string_decodes():
    # 3-bit groups cover 0..7 exactly, so all 2^48 strings are legal; check each group value
    for bits in itertools.product([0, 1], repeat=3):
        cell = codec.decode_bits(np.array(bits * 16, dtype=float))
        assert cell.codes == (bits[0] * 4 + bits[1] * 2 + bits[2],) * 16


@settings(max_examples=300)
@given(cells)
def test_encode_decode_property(cell):
    assert codec.decode_bits(codec.encode_codes(cell)) == cell


def test_assemble_examples():
    mask = codec.assemble_unit_cell([6] * 16)
    assert mask.shape == (32, 32)
    assert mask.sum() == 64
    cell = [3] + [1] * 15
    mask = codec.assemble_unit_cell(cell)
    np.testing.assert_array_equal(mask[:8, :8], codec.pattern_bitmap(3))
    np.testing.assert_array_equal(mask[8:16, 24:32], codec.pattern_bitmap(1))


def test_assemble_block_placement_row_major():
    cell = list(range(8)) * 2
    mask = codec.assemble_unit_cell(cell)
    for t, code in enumerate(cell):
        r, c = divmod(t, 4)
        np.testing.assert_array_equal(mask[8 * r : 8 * r + 8, 8 * c : 8 * c + 8], codec.pattern_bitmap(code))


@settings(max_examples=200)
@given(cells)
def test_assemble_ones_conserved(cell):
    mask = codec.assemble_unit_cell(cell)
    assert mask.sum() == sum(codec.pattern_bitmap(c).sum() for c in cell)


def test_assemble_injective_over_bitmap_pairs():
    for a, b in itertools.permutations(range(8), 2):
        base = [0] * 16
        ma = codec.assemble_unit_cell([a] + base[1:])
        mb = codec.assemble_unit_cell([b] + base[1:])
        assert not np.array_equal(ma, mb)


def test_flatten_examples():
    assert not codec.flatten_mask(np.zeros((32, 32), dtype=np.uint8)).any()
    mask = np.zeros((32, 32), dtype=np.uint8)
    mask[2, 5] = 1
    vec = codec.flatten_mask(mask)
    assert np.flatnonzero(vec).tolist() == [69]
    with pytest.raises(ValueError):
        codec.unflatten_mask(np.zeros(1023))


def test_flatten_round_trip_random():
    rng = np.random.default_rng(0)
    for _ in range(100):
        m = rng.integers(0, 2, size=(32, 32)).astype(np.uint8)
        np.testing.assert_array_equal(codec.unflatten_mask(codec.flatten_mask(m)), m)


def test_project_fixed_point_and_zero_block():
    cell = UnitCellCodes(tuple(range(8)) * 2)
    raw = codec.flatten_mask(codec.assemble_unit_cell(cell)).astype(float)
    assert codec.project_pixels_to_tiles(raw) == cell
    # Hamming distance of an empty block to tile k is its ones-count; code 6 has the fewest
    dists = [int(codec.pattern_bitmap(c).sum()) for c in range(8)]
    assert int(np.argmin(dists)) == 6
    assert codec.project_pixels_to_tiles(np.zeros(1024)).codes == (6,) * 16


def test_project_exhaustive_per_tile():
    for code in range(8):
        cell = UnitCellCodes((code,) * 16)
        raw = codec.flatten_mask(codec.assemble_unit_cell(cell)) * 0.8 + 0.1
        assert codec.project_pixels_to_tiles(raw) == cell


def test_project_tie_goes_to_lowest_code():
    # one block half-way between code 0 (band 0) and code 1 (bands 0+1):
    # keep band 0 and half of band 1 -> distance 10 to both
    i, j = np.indices((8, 8))
    band = np.minimum(np.minimum(i, j), np.minimum(7 - i, 7 - j))
    block = (band == 0).astype(float)
    ring1 = np.argwhere(band == 1)
    for r, c in ring1[:10]:
        block[r, c] = 1.0
    mask = codec.assemble_unit_cell([6] * 16).astype(float)
    mask[:8, :8] = block
    d0 = np.abs(block - codec.pattern_bitmap(0)).sum()
    d1 = np.abs(block - codec.pattern_bitmap(1)).sum()
    assert d0 == d1
    assert codec.project_pixels_to_tiles(mask.reshape(1024))[0] == 0


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_project_idempotent(seed, bias):
    raw = np.clip(np.random.default_rng(seed).random(1024) + bias - 0.5, 0.0, 1.0)
    once = codec.project_pixels_to_tiles(raw)
    again = codec.project_pixels_to_tiles(codec.flatten_mask(codec.assemble_unit_cell(once)))
    assert again == once


@settings(max_examples=200)
@given(cells)
def test_project_inverts_assemble(cell):
    assert codec.project_pixels_to_tiles(codec.flatten_mask(codec.assemble_unit_cell(cell))) == cell


def test_pbm_and_csv_exports(tmp_path):
    cell = UnitCellCodes(tuple(range(8)) * 2)
    mask = codec.assemble_unit_cell(cell)
    text = codec.mask_to_pbm(mask)
    lines = text.splitlines()
    assert lines[0] == "P1"
    assert any("period_mm=6.4" in l for l in lines if l.startswith("#"))
    assert "32 32" in lines
    np.testing.assert_array_equal(codec.read_pbm(text), mask)

    codec.write_mask(mask, tmp_path / "m.csv")
    rows = [l for l in (tmp_path / "m.csv").read_text().splitlines() if not l.startswith("#")]
    assert len(rows) == 32
    np.testing.assert_array_equal(np.array([[int(v) for v in r.split(",")] for r in rows]), mask)


def test_display_is_one_based():
    cell = UnitCellCodes((0,) * 15 + (7,))
    assert cell.display().splitlines()[-1] == "1 1 1 8"


def test_canonical_sorts():
    cell = UnitCellCodes((3, 1, 0, 0) + (2,) * 12)
    assert cell.canonical().codes == (0, 0, 1) + (2,) * 12 + (3,)


def test_parse_codes():
    assert codec.parse_codes("1, 2 3 4 5 6 7 0 1 2 3 4 5 6 7 0")[0] == 1
    with pytest.raises(ValueError):
        codec.parse_codes("1 2 3")
    with pytest.raises(ValueError):
        codec.parse_codes("a " * 16)
