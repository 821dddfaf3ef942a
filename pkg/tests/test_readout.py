import numpy as np
import pytest
from hypothesis import given, strategies as st

from mea_reservoir.readout import (
    FeatureVector, ReadoutParams, extract_features, feature_matrix, read_features_csv,
    shuffle_spatial, stimulation_mask, window_samples, write_features_csv,
)
from mea_reservoir.spike_detection import SpikeTrain
from mea_reservoir.stimulus import GlyphLayout, StimulusPattern, digit_patterns, segments_to_pairs

FS = 20_000
FAR = StimulusPattern(0, ((63 * 64 + 60, 63 * 64 + 61),))  # corner pair, far from (10, 10)


def brute_force(channels, samples, start, stop, mask):
    out = np.zeros(4096, dtype=np.int64)
    for c, s in zip(channels, samples):
        if start <= s <= stop and not mask[c]:
            out[c] += 1
    return out


def test_empty_train_gives_zero_vector():
    tr = SpikeTrain.empty(n_samples=10_000, t0_offset_s=-0.1)
    fv = extract_features(tr, 0.0, ReadoutParams(), FAR)
    assert fv.values.shape == (4096,) and not fv.values.any()


def test_three_spikes_on_one_channel():
    c = 10 * 64 + 10
    tr = SpikeTrain([c, c, c], [2000, 2010, 2050], n_samples=5000, t0_offset_s=-0.1)
    fv = extract_features(tr, 0.0, ReadoutParams(window_s=0.005), FAR)
    assert fv.values[c] == 3
    assert fv.values.sum() == 3


def test_closed_window_bounds():
    c = 5
    # onset at sample 2000, W = 5 ms = 100 samples
    tr = SpikeTrain([c] * 4, [1999, 2000, 2100, 2101], n_samples=5000, t0_offset_s=-0.1)
    fv = extract_features(tr, 0.0, ReadoutParams(window_s=0.005), FAR)
    assert fv.values[c] == 2
    assert window_samples(tr, 0.0, 0.005) == (2000, 2100)


def test_window_must_fit():
    tr = SpikeTrain.empty(n_samples=2050, t0_offset_s=-0.1)
    with pytest.raises(ValueError):
        extract_features(tr, 0.0, ReadoutParams(window_s=0.005), FAR)
    with pytest.raises(ValueError):
        extract_features(tr, -0.2, ReadoutParams(window_s=0.005), FAR)


def test_params_validation():
    with pytest.raises(ValueError):
        ReadoutParams(window_s=0)
    with pytest.raises(ValueError):
        ReadoutParams(mask_half_width=-1)


def random_train(rng, n_spikes, n_samples=6000):
    ch = rng.integers(0, 4096, n_spikes)
    s = rng.integers(0, n_samples, n_spikes)
    key = np.unique(ch * n_samples + s)
    return SpikeTrain(key // n_samples, key % n_samples, n_samples=n_samples, t0_offset_s=-0.1)


@given(st.integers(0, 2**32 - 1), st.integers(0, 3000), st.sampled_from([0.005, 0.01, 0.05]),
       st.integers(0, 9), st.integers(0, 3))
def test_exact_recount(seed, n, w, digit, hw):
    rng = np.random.default_rng(seed)
    tr = random_train(rng, n)
    pat = digit_patterns()[digit]
    fv = extract_features(tr, 0.0, ReadoutParams(w, hw), pat)
    start, stop = 2000, 2000 + int(round(w * FS))
    mask = stimulation_mask(pat, hw)
    assert np.array_equal(fv.values, brute_force(tr.channels, tr.samples, start, stop, mask))


@given(st.integers(0, 40), st.integers(0, 53), st.integers(1, 4), st.integers(0, 4),
       st.sets(st.sampled_from("ABCDEFG"), min_size=1))
def test_mask_soundness(r0, c0, k, hw, segs):
    lay = GlyphLayout((r0, c0), k)
    h, w = lay.shape
    if r0 + h > 64 or c0 + w > 64:
        return
    pat = StimulusPattern(0, segments_to_pairs(segs, lay))
    tr = SpikeTrain(np.arange(4096), np.full(4096, 2050), n_samples=6000, t0_offset_s=-0.1)
    fv = extract_features(tr, 0.0, ReadoutParams(0.005, hw), pat)
    for e in pat.electrodes():
        i, j = divmod(e, 64)
        for a in range(max(0, i - hw), min(64, i + hw + 1)):
            for b in range(max(0, j - hw), min(64, j + hw + 1)):
                assert fv.values[a * 64 + b] == 0
    # everything else counted once
    assert fv.values.sum() == 4096 - fv.mask.sum()


def test_mask_area_is_small():
    for p in digit_patterns():
        assert stimulation_mask(p, 2).mean() < 0.06


@given(st.integers(0, 2**32 - 1))
def test_window_monotonicity(seed):
    rng = np.random.default_rng(seed)
    tr = random_train(rng, 2000)
    pat = digit_patterns()[int(rng.integers(10))]
    prev = None
    for w in (0.005, 0.01, 0.02, 0.05):
        fv = extract_features(tr, 0.0, ReadoutParams(w), pat)
        if prev is not None:
            assert np.all(fv.values >= prev)
        prev = fv.values


@given(st.integers(0, 2**32 - 1))
def test_shuffle_preserves_multiset_and_mask(seed):
    rng = np.random.default_rng(seed)
    pat = digit_patterns()[int(rng.integers(10))]
    fv = extract_features(random_train(rng, 3000), 0.0, ReadoutParams(0.05), pat)
    sh = shuffle_spatial(fv, seed)
    assert sh.values.sum() == fv.values.sum()
    assert np.array_equal(np.sort(sh.values), np.sort(fv.values))
    assert not sh.values[fv.mask].any()
    assert np.array_equal(sh.mask, fv.mask) and sh.label == fv.label


def test_shuffle_zero_vector_and_determinism():
    fv = extract_features(SpikeTrain.empty(n_samples=6000, t0_offset_s=-0.1), 0.0, ReadoutParams(), FAR)
    assert not shuffle_spatial(fv, 1).values.any()
    rng = np.random.default_rng(0)
    fv = extract_features(random_train(rng, 3000), 0.0, ReadoutParams(0.05), FAR)
    assert np.array_equal(shuffle_spatial(fv, 4).values, shuffle_spatial(fv, 4).values)
    assert not np.array_equal(shuffle_spatial(fv, 4).values, fv.values)


def test_feature_vector_validation():
    mask = np.zeros(4096, bool)
    mask[0] = True
    with pytest.raises(ValueError):
        FeatureVector(np.ones(4096, np.int64), 0, mask)
    with pytest.raises(ValueError):
        FeatureVector(np.full(4096, -1, np.int64), 0, np.zeros(4096, bool))
    with pytest.raises(ValueError):
        FeatureVector(np.zeros(10), 0, np.zeros(10, bool))
    # real-valued signed entries are allowed (reservoir states)
    FeatureVector(np.full(4096, -0.5), 0, np.zeros(4096, bool))


def test_features_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    pats = digit_patterns()
    fvs = [extract_features(random_train(rng, 500), 0.0, ReadoutParams(0.05), pats[d], "s1", d) for d in range(3)]
    p = tmp_path / "f.csv"
    write_features_csv(fvs, p)
    header = p.read_text().splitlines()[0].split(",")
    assert header[:4] == ["label", "session", "trial", "c0"] and header[-1] == "c4095"
    back = read_features_csv(p)
    X, y = feature_matrix(fvs)
    Xb, yb = feature_matrix(back)
    assert np.array_equal(X, Xb) and np.array_equal(y, yb)
    assert [b.session for b in back] == ["s1"] * 3
