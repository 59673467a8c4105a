import csv
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from socnav.errors import RecordError
from socnav.metrics import (EpisodeRecord, episode_psc, episode_success, h_coll, psc, spl,
                            success_rate, summarize, total_score)

LEADERBOARD = Path(__file__).parent / "data" / "leaderboard.csv"


def rec(success=True, l=5.0, p=5.0, gaps=(), hc=False):
    return EpisodeRecord(success, l, p, tuple(gaps), hc, len(gaps))


def test_episode_success_examples():
    assert episode_success((0.5, 0.0), (0.0, 0.0), False, True)
    assert not episode_success((0.5, 0.0), (0.0, 0.0), True, True)
    assert not episode_success((1.0, 0.0), (0.0, 0.0), False, True)
    assert not episode_success((0.5, 0.0), (0.0, 0.0), False, False)
    assert episode_success((0.5, 0.0), (0.0, 0.0), False, False, timed_out=True)


def test_spl_examples():
    assert spl([rec(True, 5, 5)]) == 1.0
    assert spl([rec(True, 5, 10)]) == 0.5
    assert spl([rec(False, 5, 5)]) == 0.0
    assert spl([rec(True, 5, 3)]) == 1.0  # p < l clamps
    with pytest.raises(RecordError):
        spl([rec(True, 0.0, 1.0)])
    assert spl([]) == 0.0


def test_psc_examples():
    assert episode_psc(rec(gaps=[math.inf] * 10)) == 1.0
    assert episode_psc(rec(gaps=[1.0] * 80 + [0.2] * 20)) == 0.8
    assert episode_psc(rec(gaps=[0.5])) == 1.0
    assert episode_psc(rec(gaps=[math.nextafter(0.5, 0)])) == 0.0
    assert psc([rec(gaps=[1.0, 0.1]), rec(gaps=[1.0] * 4)]) == pytest.approx(0.75)


def test_record_validation_and_roundtrip():
    with pytest.raises(RecordError):
        EpisodeRecord(True, 1.0, -1.0)
    with pytest.raises(RecordError):
        EpisodeRecord(True, 1.0, 1.0, (1.0,), False, 3)
    r = rec(gaps=[math.inf, 0.4])
    assert EpisodeRecord.from_dict(r.to_dict()) == r


def test_total_examples():
    assert total_score(0.5400, 0.4997, 0.8630) == pytest.approx(0.6248, abs=5e-5)
    assert total_score(0.6560, 0.5958, 0.8608) == pytest.approx(0.6994, abs=5e-5)
    assert total_score(0.6600, 0.5977, 0.8629) == pytest.approx(0.7022, abs=5e-5)


def test_leaderboard_rows():
    rows = list(csv.DictReader(open(LEADERBOARD)))
    assert len(rows) == 16
    for r in rows:
        t = total_score(float(r["sr"]), float(r["spl"]), float(r["psc"]))
        assert abs(t - float(r["total"])) <= 5e-5


def _random_records(rng, n):
    out = []
    for _ in range(n):
        steps = int(rng.integers(0, 30))
        hc = bool(rng.random() < 0.3)
        out.append(EpisodeRecord(bool(rng.random() < 0.5) and not hc, rng.uniform(0.5, 10),
                                 rng.uniform(0, 20), tuple(rng.uniform(0, 2, steps)), hc, steps))
    return out


@given(st.integers(0, 2**32 - 1))
def test_summary_properties(seed):
    rng = np.random.default_rng(seed)
    recs = _random_records(rng, int(rng.integers(1, 30)))
    s = summarize(recs)
    assert s.spl <= s.sr + 1e-12
    assert s.sr + s.h_coll <= 1.0 + 1e-12
    assert abs(s.total - (0.4 * s.sr + 0.3 * s.spl + 0.3 * s.psc)) <= 1e-12
    for v in (s.sr, s.spl, s.psc, s.h_coll, s.total):
        assert 0.0 <= v <= 1.0
    perm = [recs[i] for i in rng.permutation(len(recs))]
    p = summarize(perm)
    assert (p.sr, p.h_coll) == (s.sr, s.h_coll)
    assert p.spl == pytest.approx(s.spl, abs=1e-12) and p.psc == pytest.approx(s.psc, abs=1e-12)
    assert success_rate(recs) == s.sr and h_coll(recs) == s.h_coll
