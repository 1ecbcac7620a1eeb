import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msinverse import features as ft
from msinverse import surrogate
from msinverse.features import DesignTarget, Notch
from msinverse.surrogate import FREQUENCIES, Spectrum


def brute_runs(values, threshold=-10.0):
    """Scan sample by sample for maximal below-threshold runs."""
    runs, start = [], None
    for i, v in enumerate(values):
        if v < threshold and start is None:
            start = i
        if v >= threshold and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(values) - 1))
    return runs


def brute_notch(values, a, b, threshold=-10.0):
    i_min = a
    for i in range(a, b + 1):
        if values[i] < values[i_min]:
            i_min = i
    f = lambda i: 4.0 + 0.05 * i

    def cross(i_out, i_in):
        t = (threshold - values[i_out]) / (values[i_in] - values[i_out])
        return f(i_out) + t * (f(i_in) - f(i_out))

    left = f(0) if a == 0 else cross(a - 1, a)
    right = f(len(values) - 1) if b == len(values) - 1 else cross(b + 1, b)
    return f(i_min), values[i_min], right - left


def random_spectrum(rng, n_dips):
    """Flat -3 dB floor with up to ``n_dips`` random box/triangle dips."""
    v = np.full(821, -3.0)
    for _ in range(n_dips):
        c = rng.integers(0, 821)
        w = rng.integers(1, 25)
        depth = rng.uniform(-45, -5)
        lo, hi = max(0, c - w), min(821, c + w)
        v[lo:hi] = np.minimum(v[lo:hi], depth * (1 - np.abs(np.arange(lo, hi) - c) / (w + 1)))
    return Spectrum(v)


def test_flat_spectrum_is_empty():
    assert len(ft.extract_notches(Spectrum(np.zeros(821)))) == 0


def test_single_uniform_notch_matches_closed_form():
    s = surrogate.simulate([2] * 16)
    t = ft.extract_notches(s)
    oracle = surrogate.analytic_notch([2] * 16, 2)
    assert len(t) == 1
    n = t.notches[0]
    assert abs(n.freq_ghz - 16.0) <= 0.05
    assert abs(n.depth_db - -39.99) <= 0.01
    assert abs(n.bandwidth_ghz - 1.385) <= 0.1
    assert abs(n.bandwidth_ghz - oracle.bandwidth_ghz) <= 0.1


def test_two_notches_in_order():
    t = ft.extract_notches(surrogate.simulate([1] * 8 + [4] * 8))
    assert [round(n.freq_ghz, 2) for n in t] == [11.0, 26.0]


@pytest.mark.parametrize("code", range(8))
def test_uniform_cells_agree_with_analytic(code):
    cell = [code] * 16
    n = ft.extract_notches(surrogate.simulate(cell)).notches[0]
    oracle = surrogate.analytic_notch(cell, code)
    assert abs(n.freq_ghz - oracle.freq_ghz) <= 0.05
    assert abs(n.depth_db - oracle.depth_db) <= 0.05
    assert abs(n.bandwidth_ghz - oracle.bandwidth_ghz) <= 0.1


def test_runs_against_brute_force():
    rng = np.random.default_rng(0)
    checked = 0
    for _ in range(400):
        s = random_spectrum(rng, int(rng.integers(0, 10)))
        runs = brute_runs(s.values)
        t = ft.extract_notches(s)
        freqs = [n.freq_ghz for n in t]
        assert freqs == sorted(freqs) and len(set(freqs)) == len(freqs)
        if len(runs) <= 8:
            checked += 1
            assert len(t) == len(runs)
            for n, (a, b) in zip(t, runs):
                f, d, bw = brute_notch(s.values, a, b)
                assert n.freq_ghz == pytest.approx(f, abs=1e-9)
                assert n.depth_db == d
                assert n.bandwidth_ghz == pytest.approx(bw, abs=1e-9)
        else:
            depths = sorted(brute_notch(s.values, a, b)[1] for a, b in runs)[:8]
            assert sorted(n.depth_db for n in t) == depths
    assert checked > 100


def test_edge_runs_use_band_edges():
    v = np.full(821, -3.0)
    v[:5] = -20.0
    v[-3:] = -15.0
    t = ft.extract_notches(Spectrum(v))
    assert len(t) == 2
    assert t.notches[0].freq_ghz == 4.0
    # left crossing at 4.0, right crossing interpolated between index 4 and 5
    assert t.notches[0].bandwidth_ghz == pytest.approx(0.2 + 0.05 * (10 / 17), rel=1e-12)
    right = t.notches[1]
    assert right.bandwidth_ghz == pytest.approx(0.1 + 0.05 * (5 / 12), rel=1e-9)


def test_ties_take_lowest_index():
    v = np.full(821, -3.0)
    v[100:110] = -20.0
    t = ft.extract_notches(Spectrum(v))
    assert t.notches[0].freq_ghz == FREQUENCIES[100]


def test_target_to_vector_examples():
    assert not ft.target_to_vector(DesignTarget()).any()
    fig3a = ft.parse_target("17.5,-30,0.5;23.5,-20,0.5;25.3,-20,0.4")
    v = ft.target_to_vector(fig3a)
    np.testing.assert_allclose(v[:3], [0.32926829268292683, 0.6, 0.1], rtol=1e-15)
    assert not v[9:].any()
    row_b = ft.parse_target("5.8,-25,0.2")
    np.testing.assert_allclose(ft.target_to_vector(row_b)[:3], [0.04390243902439024, 0.5, 0.04], rtol=1e-14)


def test_target_caps():
    v = ft.target_to_vector(DesignTarget((Notch(10, -80, 9.0),)))
    assert v[1] == 1.0 and v[2] == 1.0


def test_vector_to_target_threshold():
    assert len(ft.vector_to_target(np.zeros(24))) == 0
    v = np.zeros(24)
    v[:3] = [0.5, 0.19, 0.1]
    assert len(ft.vector_to_target(v)) == 0
    v[1] = 0.21
    assert len(ft.vector_to_target(v)) == 1


notch_lists = st.lists(
    st.tuples(
        st.floats(4.0, 45.0),
        st.floats(-50.0, -10.0, exclude_max=True),
        st.floats(0.001, 5.0),
    ),
    max_size=8,
    unique_by=lambda n: n[0],
)


@settings(max_examples=300)
@given(notch_lists)
def test_vector_round_trip(raw):
    raw = [r for r in raw if r[1] < -10.0 - 1e-7]
    target = DesignTarget.from_notches([Notch(*r) for r in raw])
    back = ft.vector_to_target(ft.target_to_vector(target))
    assert len(back) == len(target)
    for a, b in zip(target, back):
        assert abs(a.freq_ghz - b.freq_ghz) <= 1e-9
        assert abs(a.depth_db - b.depth_db) <= 1e-9
        assert abs(a.bandwidth_ghz - b.bandwidth_ghz) <= 1e-9


def test_notch_and_target_validation():
    with pytest.raises(ValueError):
        Notch(3.9, -20, 1)
    with pytest.raises(ValueError):
        Notch(10, -10, 1)
    with pytest.raises(ValueError):
        Notch(10, -20, 0)
    with pytest.raises(ValueError):
        DesignTarget((Notch(12, -20, 1), Notch(11, -20, 1)))
    with pytest.raises(ValueError):
        DesignTarget.from_notches([Notch(5 + i, -20, 1) for i in range(9)])


def test_parse_target():
    t = ft.parse_target("23.5,-20,0.5; 17.5,-30,0.5")
    assert [n.freq_ghz for n in t] == [17.5, 23.5]
    assert ft.parse_target("").notches == ()
    assert ft.parse_target(t.format()) == t
    for bad in ("15,-15", "a,b,c", "15,-15,0.5;15,-20,1", "50,-20,1"):
        with pytest.raises(ValueError):
            ft.parse_target(bad)
