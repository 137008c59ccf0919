import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hoiseg.scene_model import Params
from hoiseg.segmenter import (
    ActivityEnded, Eru, InteractionUnit, IuCompleted, OnlineSegmenter, morpho_filter, segment,
    segment_activities, segment_erus, segment_ius,
)

P = Params()
DM = 7   # motion width at depth 2


# -- morphology ----------------------------------------------------------------

def test_filter_constant_and_identity():
    x = np.full(12, 3)
    assert np.array_equal(morpho_filter(x, 5), x)
    y = np.array([0, 1, 0, 2])
    assert np.array_equal(morpho_filter(y, 1), y)
    with pytest.raises(ValueError):
        morpho_filter(y, 4)


def test_filter_single_spike_removed():
    x = np.zeros(9, dtype=int)
    x[4] = 1
    assert not morpho_filter(x, 3).any()


def test_filter_plateau_of_length_l_kept():
    x = np.zeros(9, dtype=int)
    x[3:6] = 1
    assert np.array_equal(morpho_filter(x, 3), x)


def test_filter_hand_trace():
    # erosion(3):   0 0 0 0 0 0 0 1 1 1 0 0 0 1 1
    # opening:      0 0 0 0 0 0 1 1 1 1 1 0 1 1 1   (lone spike at 2 gone)
    # closing:      0 0 0 0 0 0 1 1 1 1 1 1 1 1 1   (one-frame gap at 11 filled)
    x = np.array([0, 0, 1, 0, 0, 0, 1, 1, 1, 1, 1, 0, 1, 1, 1])
    want = np.array([0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1])
    assert np.array_equal(morpho_filter(x, 3), want)


def test_filter_columns_independent():
    x = np.array([[0, 5], [1, 5], [0, 4], [0, 5], [0, 5]])
    out = morpho_filter(x, 3)
    assert np.array_equal(out[:, 0], morpho_filter(x[:, 0], 3))
    assert np.array_equal(out[:, 1], morpho_filter(x[:, 1], 3))


step_signals = st.lists(st.integers(0, 3), min_size=1, max_size=60)
lengths = st.sampled_from([1, 3, 5, 7])


@settings(max_examples=300)
@given(step_signals, lengths)
def test_filter_idempotent(xs, length):
    once = morpho_filter(np.array(xs), length)
    assert np.array_equal(morpho_filter(once, length), once)


# -- ERUs and IUs --------------------------------------------------------------------

def test_erus_examples():
    assert segment_erus([]) == []
    assert len(segment_erus(np.ones((100, 2)))) == 1
    x = np.r_[np.zeros(50), np.ones(50)]
    assert [(e.start, e.end) for e in segment_erus(x)] == [(0, 50), (50, 100)]


@settings(max_examples=200)
@given(st.lists(st.integers(0, 2), min_size=1, max_size=80))
def test_erus_match_rle_oracle(xs):
    rle, pos = [], 0
    for value, grp in itertools.groupby(xs):
        n = len(list(grp))
        rle.append((pos, pos + n, (value,)))
        pos += n
    assert [(e.start, e.end, e.value) for e in segment_erus(np.array(xs))] == rle


def rows_from(xm, xc):
    return np.c_[np.asarray(xm), np.asarray(xc)]


def test_one_iu_for_constant_context():
    xm = np.zeros((30, DM), dtype=int)
    xm[::3, 0] = 1
    xc = np.tile([1, 2, 0, 0], (30, 1))
    erus = segment_erus(rows_from(xm, xc))
    ius = segment_ius(erus, P)
    assert len(erus) > 1 and len(ius) == 1 and ius[0].x_c == (1, 2, 0, 0)


@settings(max_examples=200)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=60), st.integers(0, 2 ** 31 - 1))
def test_ius_match_rle_on_context(ctx, seed):
    rng = np.random.default_rng(seed)
    n = len(ctx)
    xm = np.c_[rng.integers(-1, 2, n), rng.integers(0, 2, (n, DM - 1))]
    xc = np.array([[1, c, 0, 0] for c in ctx])
    ius = segment_ius(segment_erus(rows_from(xm, xc)), P)
    rle, pos = [], 0
    for value, grp in itertools.groupby(ctx):
        k = len(list(grp))
        rle.append((pos, pos + k, (1, value, 0, 0)))
        pos += k
    assert [(iu.start, iu.end, iu.x_c) for iu in ius] == rle
    for iu in ius:
        assert np.array_equal(iu.x_m_raw, xm[iu.start:iu.end])
        assert iu.motion.min() >= 0.0 and iu.motion.max() <= 1.0


def fake_iu(anchor, start):
    return InteractionUnit(start, start + 1, (1, anchor, 0, 0), [], np.zeros((1, DM)), np.zeros((1, DM)))


def test_activities_anchor_scan():
    ius = [fake_iu(a, k) for k, a in enumerate([2, 2, 3, 3, 2])]
    acts, lead = segment_activities(ius)
    assert [a.anchor for a in acts] == [2, 3, 2] and not lead
    acts, lead = segment_activities([fake_iu(a, k) for k, a in enumerate([0, 4, 0, 4, 0])])
    assert len(acts) == 1 and len(acts[0].ius) == 4 and len(lead) == 1


# -- full hierarchy -------------------------------------------------------------------

@st.composite
def feature_rows(draw):
    """Random raw rows with piecewise-constant context runs."""
    seed = draw(st.integers(0, 2 ** 31 - 1))
    rng = np.random.default_rng(seed)
    runs = draw(st.lists(st.tuples(st.integers(0, 3), st.integers(1, 15)), min_size=1, max_size=10))
    xc = np.array([[1, a, a and 5, 0] for a, n in runs for _ in range(n)])
    n = len(xc)
    xm = np.c_[rng.integers(-1, 2, n), rng.integers(0, 5, n), rng.integers(0, 9, n),
               rng.integers(0, 2, n), np.zeros((n, 3), dtype=int)]
    # make motion piecewise constant too, otherwise every frame is its own ERU
    hold = np.repeat(np.arange(n)[::4], 4)[:n]
    return np.c_[xm[hold], xc]


def boundaries(spans):
    return {s for a, b in spans for s in (a, b)}


@settings(max_examples=200)
@given(feature_rows(), lengths)
def test_hierarchy_nesting(rows, length):
    p = Params(filter_len=length)
    seg = segment(rows, p)
    n = len(rows)
    eru_b = boundaries((e.start, e.end) for e in seg.erus)
    iu_b = boundaries((u.start, u.end) for u in seg.ius)
    act_b = boundaries((a.start, a.end) for a in seg.activities)
    assert act_b <= iu_b <= eru_b
    # ERUs tile the series and rebuild the filtered signal exactly
    filtered = morpho_filter(rows, length)
    rebuilt = np.array([e.value for e in seg.erus for _ in range(e.end - e.start)])
    assert np.array_equal(rebuilt, filtered) and seg.erus[-1].end == n
    # IUs tile too, and lead-in plus activities cover every IU once, in order
    assert [u.start for u in seg.ius[1:]] == [u.end for u in seg.ius[:-1]]
    flat = seg.lead_in + [u for a in seg.activities for u in a.ius]
    assert [id(u) for u in flat] == [id(u) for u in seg.ius]
    for a in seg.activities:
        assert a.start == a.ius[0].start and a.end == a.ius[-1].end


@settings(max_examples=100)
@given(feature_rows())
def test_longer_filter_never_adds_ius(rows):
    counts = [len(segment(rows, Params(filter_len=length)).ius) for length in (1, 3, 5, 7, 9)]
    assert counts == sorted(counts, reverse=True)


def offline_summary(seg):
    return ([(u.start, u.end, u.x_c) for u in seg.ius],
            [(a.start, a.end, a.anchor, len(a.ius)) for a in seg.activities])


@settings(max_examples=150)
@given(feature_rows(), lengths)
def test_online_equals_offline(rows, length):
    p = Params(filter_len=length)
    online = OnlineSegmenter(p)
    events = []
    for k, row in enumerate(rows):
        for ev in online.push(row):
            assert ev.detected_at == k       # events are stamped with the arrival frame
            events.append(ev)
    events += online.close()
    ius = [ev.iu for ev in events if isinstance(ev, IuCompleted)]
    acts = [ev.activity for ev in events if isinstance(ev, ActivityEnded)]
    seg = segment(rows, p)
    got = ([(u.start, u.end, u.x_c) for u in ius],
           [(a.start, a.end, a.anchor, len(a.ius)) for a in acts])
    assert got == offline_summary(seg)
    for u, v in zip(ius, seg.ius):
        assert np.array_equal(u.motion, v.motion)


def test_online_closed():
    s = OnlineSegmenter(P)
    s.close()
    with pytest.raises(RuntimeError):
        s.push(np.zeros(11))


def test_eru_dataclass():
    assert Eru(0, 3, (1,)).end == 3
