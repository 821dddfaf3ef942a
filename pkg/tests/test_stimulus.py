import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mea_reservoir.signal_model import channel_to_grid
from mea_reservoir.stimulus import (
    GlyphLayout, PulseParams, StimulusPattern, build_schedule, digit_patterns,
    digit_to_segments, segments_to_pairs, write_schedule_csv,
)

# Independent copy of the standard seven-segment table.
TABLE = {
    0: "ABCDEF", 1: "BC", 2: "ABDEG", 3: "ABCDG", 4: "BCFG",
    5: "ACDFG", 6: "ACDEFG", 7: "ABC", 8: "ABCDEFG", 9: "ABCDFG",
}


@pytest.mark.parametrize("d", range(10))
def test_digit_to_segments(d):
    assert digit_to_segments(d) == set(TABLE[d])


def test_digit_examples():
    assert digit_to_segments(8) == set("ABCDEFG")
    assert digit_to_segments(1) == {"B", "C"}
    assert digit_to_segments(7) == {"A", "B", "C"}
    with pytest.raises(ValueError):
        digit_to_segments(10)


def test_pairs_for_b_and_c_are_right_verticals():
    lay = GlyphLayout()
    pairs = segments_to_pairs({"B", "C"}, lay)
    assert len(pairs) == 6
    k = lay.pairs_per_segment
    cols = {int(channel_to_grid(e)[1]) - lay.origin[1] for p in pairs for e in p}
    assert cols == {k + 2, k + 3}


def test_empty_segments():
    assert segments_to_pairs(set()) == ()


def test_all_segments_distinct():
    pairs = segments_to_pairs(set("ABCDEFG"))
    assert len(pairs) == 21
    el = [e for p in pairs for e in p]
    assert len(set(el)) == 42


def test_pair_counts_per_digit():
    counts = [len(p.pairs) for p in digit_patterns()]
    assert counts == [3 * len(TABLE[d]) for d in range(10)]


def test_patterns_pairwise_distinct_and_inside_glyph():
    pats = digit_patterns()
    sets = [frozenset(p.pairs) for p in pats]
    assert len(set(sets)) == 10
    lay = GlyphLayout()
    h, w = lay.shape
    for p in pats:
        i, j = channel_to_grid(np.array(p.electrodes()))
        assert np.all((i >= lay.origin[0]) & (i < lay.origin[0] + h))
        assert np.all((j >= lay.origin[1]) & (j < lay.origin[1] + w))


def test_pairs_are_adjacent_and_alternate():
    for seg in "ABCDEFG":
        pairs = segments_to_pairs({seg})
        for n, (pos, neg) in enumerate(pairs):
            pi, pj = channel_to_grid(pos)
            qi, qj = channel_to_grid(neg)
            assert abs(pi - qi) + abs(pj - qj) == 1
        # positive electrode swaps side from one pair to the next
        sides = [channel_to_grid(pos)[0] - channel_to_grid(neg)[0] + channel_to_grid(pos)[1] - channel_to_grid(neg)[1]
                 for pos, neg in pairs]
        assert all(a == -b for a, b in zip(sides, sides[1:]))


def test_layout_overflow_rejected():
    with pytest.raises(ValueError):
        segments_to_pairs({"A"}, GlyphLayout(origin=(60, 60)))


def test_duplicate_electrode_rejected():
    with pytest.raises(ValueError):
        StimulusPattern(0, ((1, 2), (2, 3)))


def test_intensity_map():
    p = digit_patterns()[1]
    u = p.intensity_map()
    assert u.shape == (4096,)
    assert np.count_nonzero(u) == 12
    assert set(u[u != 0]) == {4.0}


@given(st.floats(0.1, 50), st.floats(10, 1000))
def test_charge_balance(a, d):
    pulse = PulseParams(a, d, d)
    pos, neg = pulse.charge_nc()
    assert pos == pytest.approx(a * d * 1e-3)
    assert pulse.net_charge_nc() == 0
    w = pulse.waveform(1e6)  # 1 us resolution
    assert w.sum() == pytest.approx(0.0, abs=1e-9)


def test_pulse_waveform_default():
    w = PulseParams().waveform(20_000)
    assert w.tolist() == [4.0] * 4 + [-4.0] * 4
    with pytest.raises(ValueError):
        PulseParams(amplitude_ua=0)


def test_schedule_single_repetition():
    s = build_schedule(digit_patterns(), repetitions=1, inter_stimulus_s=10.0, seed=0)
    assert [t.onset_s for t in s.trials] == [10.0 * m for m in range(10)]
    assert sorted(s.labels().tolist()) == list(range(10))


@given(st.integers(1, 25), st.integers(0, 2**31), st.floats(0.5, 20))
def test_schedule_balance_and_spacing(n, seed, T):
    s = build_schedule(digit_patterns(), repetitions=n, inter_stimulus_s=T, seed=seed)
    assert len(s) == 10 * n
    assert np.all(np.bincount(s.labels(), minlength=10) == n)
    onsets = np.array([t.onset_s for t in s.trials])
    assert np.allclose(np.diff(onsets), T)


def test_schedule_determinism():
    a = build_schedule(digit_patterns(), 20, seed=5)
    b = build_schedule(digit_patterns(), 20, seed=5)
    c = build_schedule(digit_patterns(), 20, seed=6)
    assert a.labels().tolist() == b.labels().tolist()
    assert a.labels().tolist() != c.labels().tolist()
    assert len(a) == 200


def test_schedule_csv(tmp_path):
    s = build_schedule(digit_patterns(), 2, seed=1)
    p = tmp_path / "s.csv"
    write_schedule_csv(s, p)
    rows = list(csv.DictReader(open(p, newline="")))
    assert len(rows) == 20
    assert list(rows[0]) == ["trial", "label", "onset_s", "n_pairs", "pairs"]
    for r, t in zip(rows, s.trials):
        assert int(r["label"]) == t.label
        assert int(r["n_pairs"]) == len(t.pattern.pairs) == len(r["pairs"].split())
