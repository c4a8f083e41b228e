import io
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import fingerprints, random_db
from fpsearch.data import synthesize
from fpsearch.errors import BuildError, DimensionError, FormatError, IndexStateError, ParameterError
from fpsearch.exact import (
    as_cutoff,
    bitbound_bytes,
    build_bitbound,
    k_first_round,
    load_bitbound,
    prune_range,
    read_bitbound,
    save_bitbound,
    search_bitbound,
    search_bruteforce,
    search_two_stage,
)
from fpsearch.fingerprint import Fingerprint, FoldSpec, fold, tanimoto


def oracle(db, q, k, cutoff=None):
    """Sort every entry by (exact score desc, id asc), optionally filtered."""
    scored = [(tanimoto(fp, q), fp.id) for fp in db]
    if cutoff is not None:
        sc = Fraction(repr(cutoff)) if isinstance(cutoff, float) else Fraction(cutoff)
        scored = [(s, i) for s, i in scored if s.union and s.exact >= sc]
    scored.sort(key=lambda t: (-t[0].exact, t[1]))
    return [(i, s.intersection, s.union) for s, i in scored[:k]]


class TestPruneRange:
    def test_worked_example(self):
        assert prune_range(50, 0.8) == (40, 62)

    def test_decimal_cutoffs_are_exact(self):
        assert as_cutoff(0.8) == Fraction(4, 5)
        # 0.7 * 10 is 7.000000000000001 in floats; the window must still include 7
        assert prune_range(10, 0.7)[0] == 7

    @pytest.mark.parametrize("bad", [0, -0.1, 1.01, "x"])
    def test_invalid_cutoff(self, bad):
        with pytest.raises(ParameterError):
            as_cutoff(bad)

    @given(st.integers(0, 1024), st.integers(1, 100))
    def test_window_is_exactly_the_reachable_counts(self, c, pct):
        sc = Fraction(pct, 100)
        lo, hi = prune_range(c, sc)
        for d in range(0, 1100):
            # best possible score between counts c and d is min/max
            best = Fraction(min(c, d), max(c, d)) if max(c, d) else Fraction(0)
            assert (lo <= d <= hi) == (best >= sc) or max(c, d) == 0


class TestFirstRound:
    @pytest.mark.parametrize("k, m, expected", [(20, 4, 240), (20, 8, 640), (20, 1, 20), (1, 2, 4)])
    def test_values(self, k, m, expected):
        assert k_first_round(k, m) == expected

    @given(st.integers(1, 100), st.integers(0, 10))
    def test_matches_log_formula(self, k, e):
        m = 2 ** e
        assert k_first_round(k, m) == k * m * math.ceil(math.log2(2 * m))


class TestBuild:
    def test_sorted_by_count_then_id(self, small_db):
        idx = build_bitbound(small_db)
        keys = list(zip(idx.counts.tolist(), idx.ids.tolist()))
        assert keys == sorted(keys)
        assert len(idx.offsets) == idx.length + 2
        for c in range(idx.length + 1):
            band = idx.band(c, c)
            assert (idx.counts[band] == c).all()
            assert band.stop - band.start == sum(fp.bit_count == c for fp in small_db)

    def test_entries_round_trip(self, small_db):
        idx = build_bitbound(small_db)
        assert sorted(idx.entries, key=lambda f: f.id) == small_db

    def test_duplicate_ids(self):
        a = Fingerprint.zeros(64, id=1)
        with pytest.raises(BuildError):
            build_bitbound([a, a])

    def test_mixed_lengths(self):
        with pytest.raises(DimensionError):
            build_bitbound([Fingerprint.zeros(64, 0), Fingerprint.zeros(128, 1)])

    def test_folded_columns(self, small_db):
        spec = FoldSpec("adjacent", 4)
        idx = build_bitbound(small_db, spec)
        for row in range(0, len(idx), 37):
            fp = idx.fingerprint(row)
            assert Fingerprint.from_words(idx.folded_words[row], 32, fp.id) == fold(fp, spec)
            assert idx.folded_counts[row] == fold(fp, spec).bit_count


class TestSearch:
    @pytest.mark.parametrize("k", [1, 5, 300, 1000])
    def test_bruteforce_matches_oracle(self, small_db, k):
        q = small_db[11]
        assert search_bruteforce(small_db, q, k).as_tuples() == oracle(small_db, q, k)

    @pytest.mark.parametrize("cutoff", [0.1, 0.2, 0.35, 0.5, 1.0])
    @pytest.mark.parametrize("k", [1, 10, 50])
    def test_bitbound_matches_filtered_oracle(self, small_db, cutoff, k):
        idx = build_bitbound(small_db)
        for qi in (0, 17, 101):
            q = small_db[qi]
            assert search_bitbound(idx, q, k, cutoff).as_tuples() == oracle(small_db, q, k, cutoff)

    @given(st.lists(fingerprints(64, 20), min_size=1, max_size=40), fingerprints(64, 20),
           st.integers(1, 12), st.sampled_from([0.05, 0.25, 1 / 3, 0.5, 0.8, 1.0]))
    def test_bitbound_property(self, fps, q, k, cutoff):
        db = [f.with_id(i) for i, f in enumerate(fps)]
        idx = build_bitbound(db)
        assert search_bitbound(idx, q, k, cutoff).as_tuples() == oracle(db, q, k, cutoff)

    def test_bitbound_evaluations_stay_in_band(self, small_db):
        idx = build_bitbound(small_db)
        q = small_db[3]
        lo, hi = prune_range(q.bit_count, 0.6)
        res = search_bitbound(idx, q, 5, 0.6)
        assert res.evaluations == sum(lo <= fp.bit_count <= hi for fp in small_db)

    def test_query_length_mismatch(self, small_db):
        idx = build_bitbound(small_db)
        with pytest.raises(DimensionError):
            search_bitbound(idx, Fingerprint.zeros(64), 3, 0.5)

    def test_invalid_k(self, small_db):
        with pytest.raises(ParameterError):
            search_bitbound(build_bitbound(small_db), small_db[0], 0, 0.5)

    def test_empty_database(self):
        idx = build_bitbound([], )
        assert search_bitbound(idx, Fingerprint.zeros(1024), 3, 0.5).hits == []


class TestTwoStage:
    def test_requires_fold(self, small_db):
        with pytest.raises(IndexStateError):
            search_two_stage(build_bitbound(small_db), small_db[0], 3)

    def test_m1_is_exact(self, small_db):
        idx = build_bitbound(small_db, FoldSpec("sectioned", 1))
        for q in small_db[:10]:
            assert search_two_stage(idx, q, 10).as_tuples() == oracle(small_db, q, 10)

    def test_exact_when_candidates_cover_database(self):
        db = random_db(60, 128, seed=3)
        idx = build_bitbound(db, FoldSpec("adjacent", 4))
        # k_r1 = 5 * 4 * 3 = 60 covers everything
        for q in db[:5]:
            assert search_two_stage(idx, q, 5).as_tuples() == oracle(db, q, 5)

    def test_cutoff_filters_exact_scores(self, small_db):
        idx = build_bitbound(small_db, FoldSpec("sectioned", 2))
        for q in small_db[:10]:
            hits = search_two_stage(idx, q, 10, 0.3).hits
            assert all(h.score.exact >= Fraction(3, 10) for h in hits)
            ranked = [(h.score.exact, -h.id) for h in hits]
            assert ranked == sorted(ranked, reverse=True)

    def test_recall_high_on_clustered_data(self):
        db = synthesize(3000, seed=2, profile_amplitude=2.0, family_size=25)
        idx = build_bitbound(db, FoldSpec("sectioned", 2))
        found = total = 0
        for q in db[::150]:
            truth = {i for i, _, _ in oracle(db, q, 20)}
            found += len(truth & set(search_two_stage(idx, q, 20).ids))
            total += len(truth)
        assert found / total >= 0.95


class TestSerialization:
    @pytest.mark.parametrize("spec", [None, FoldSpec("sectioned", 4), FoldSpec("adjacent", 2)])
    def test_round_trip(self, small_db, spec, tmp_path):
        idx = build_bitbound(small_db, spec)
        save_bitbound(idx, tmp_path / "x.mskb")
        back = read_bitbound(tmp_path / "x.mskb")
        assert back.fold_spec == idx.fold_spec
        np.testing.assert_array_equal(back.ids, idx.ids)
        np.testing.assert_array_equal(back.words, idx.words)
        np.testing.assert_array_equal(back.offsets, idx.offsets)
        assert bitbound_bytes(back) == bitbound_bytes(idx)
        q = small_db[4]
        if spec is None:
            assert search_bitbound(back, q, 5, 0.3).same_hits(search_bitbound(idx, q, 5, 0.3))
        else:
            assert search_two_stage(back, q, 5).same_hits(search_two_stage(idx, q, 5))

    def test_header_layout(self, small_db):
        raw = bitbound_bytes(build_bitbound(small_db, FoldSpec("adjacent", 2)))
        assert raw[:4] == b"MSKB"
        assert int.from_bytes(raw[4:6], "little") == 1
        assert int.from_bytes(raw[6:10], "little") == 128
        assert int.from_bytes(raw[10:14], "little") == 2

    def test_bad_magic(self, small_db):
        raw = bytearray(bitbound_bytes(build_bitbound(small_db)))
        raw[:4] = b"XXXX"
        with pytest.raises(FormatError):
            load_bitbound(io.BytesIO(bytes(raw)))

    def test_truncated(self, small_db):
        raw = bitbound_bytes(build_bitbound(small_db))
        with pytest.raises(FormatError):
            load_bitbound(io.BytesIO(raw[:-5]))
