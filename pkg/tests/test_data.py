import io

import numpy as np
import pytest

from fpsearch.data import bit_profile, ingest, parse_fps, save_fps, synthesize, write_fps
from fpsearch.errors import ParameterError, ParseError
from fpsearch.fingerprint import tanimoto

FF = "ff" + "00" * 127


class TestParse:
    def test_ingest_single_line(self, tmp_path):
        path = tmp_path / "one.fps"
        path.write_text(FF + "\n")
        (fp,) = ingest(path)
        assert fp.length == 1024 and fp.bit_count == 8 and fp.id == 0

    def test_ids_comments_blank_lines(self):
        fps = parse_fps(["# header", "", FF + "\t42", "00" * 128 + "\t7"])
        assert [f.id for f in fps] == [42, 7]

    def test_implicit_ids_count_data_lines(self):
        fps = parse_fps(["# c", "00" * 8, "", "ff" * 8])
        assert [f.id for f in fps] == [0, 1]
        assert fps[0].length == 64

    @pytest.mark.parametrize(
        "lines, lineno",
        [
            (["zz" * 8], 1),
            (["00" * 8, "00" * 16], 2),
            (["00" * 8 + "\t1", "00" * 8 + "\t1"], 2),
            (["00" * 8 + "\t1", "00" * 8], 2),
            (["00" * 8 + "\tx"], 1),
            (["00" * 8 + "\t-3"], 1),
            (["00" * 4], 1),
            (["0" * 15], 1),
        ],
    )
    def test_errors_carry_line_number(self, lines, lineno):
        with pytest.raises(ParseError, match=f"line {lineno}:"):
            parse_fps(lines)

    def test_round_trip(self, tmp_path):
        fps = synthesize(50, seed=1)
        save_fps(fps, tmp_path / "x.fps")
        assert ingest(tmp_path / "x.fps") == fps
        buf = io.StringIO()
        write_fps(fps, buf, with_ids=False)
        assert parse_fps(buf.getvalue().splitlines()) == fps


class TestSynthesize:
    def test_deterministic(self):
        assert synthesize(300, seed=11) == synthesize(300, seed=11)
        assert synthesize(300, seed=11) != synthesize(300, seed=12)

    def test_chunking_does_not_change_counts(self):
        a = synthesize(500, seed=2, chunk=64)
        b = synthesize(500, seed=2)
        assert [f.bit_count for f in a] == [f.bit_count for f in b]

    def test_count_distribution(self):
        counts = np.array([f.bit_count for f in synthesize(20_000, seed=3)])
        assert abs(counts.mean() - 47.5) < 0.3
        assert abs(counts.std() - 12.2) < 0.3

    def test_uniform_positions(self):
        fps = synthesize(5000, seed=4)
        hits = np.zeros(1024)
        for f in fps:
            hits[f.positions()] += 1
        expected = hits.sum() / 1024
        # chi-square with 1023 dof: mean 1023, sd about 45
        chi2 = ((hits - expected) ** 2 / expected).sum()
        assert chi2 < 1023 + 5 * 45

    def test_profile_skews_positions(self):
        w = bit_profile(1024, 2.0)
        assert w.sum() == pytest.approx(1.0)
        assert w.max() / w.min() > 40
        assert np.allclose(bit_profile(64, 0.0), 1 / 64)

    def test_families_create_close_neighbours(self):
        fam = synthesize(400, seed=5, family_size=20)
        flat = synthesize(400, seed=5)

        def best_neighbour(db):
            return np.mean([max(tanimoto(q, f).value for f in db if f.id != q.id) for q in db[:20]])

        assert best_neighbour(fam) > 2 * best_neighbour(flat)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(n=-1), dict(n=5, length=100), dict(n=5, mu=0), dict(n=5, sigma=0),
         dict(n=5, family_size=0), dict(n=5, keep=1.5)],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            synthesize(**kwargs)
