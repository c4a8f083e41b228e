import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpsearch.errors import ParameterError, QueueUnderflow
from fpsearch.topk import (
    BoundedPriorityQueue,
    ScoredEntry,
    merge_cost,
    merge_latency,
    merge_topk_stream,
    pq_cost,
)

entries = st.lists(
    st.tuples(st.integers(0, 4095), st.integers(0, 10_000)), max_size=200, unique_by=lambda t: t[1]
).map(lambda xs: [ScoredEntry(s, i) for s, i in xs])


def best(xs, k, polarity="max"):
    sign = -1 if polarity == "max" else 1
    return sorted(xs, key=lambda e: (sign * e.score, e.id))[:k]


class TestPriorityQueue:
    def test_worked_example(self):
        pq = BoundedPriorityQueue(4)
        for i, s in enumerate([1, 5, 3, 2, 4]):
            pq.enqueue(ScoredEntry(s, i))
        assert sorted(e.score for e in pq.items()) == [2, 3, 4, 5]
        assert pq.dequeue().score == 5
        assert [e.score for e in pq.items()] == [4, 3, 2]

    def test_underflow(self):
        pq = BoundedPriorityQueue(2)
        with pytest.raises(QueueUnderflow):
            pq.dequeue()
        with pytest.raises(QueueUnderflow):
            pq.peek()

    @pytest.mark.parametrize("kwargs", [dict(capacity=0), dict(capacity=2, polarity="mid")])
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            BoundedPriorityQueue(**kwargs)

    def test_score_range(self):
        with pytest.raises(ParameterError):
            ScoredEntry(4096, 0)

    @given(entries, st.integers(1, 40), st.sampled_from(["max", "min"]))
    def test_matches_sorted_oracle(self, xs, k, polarity):
        pq = BoundedPriorityQueue(k, polarity)
        for e in xs:
            pq.enqueue(e)
            assert len(pq) <= k
        assert pq.items() == best(xs, k, polarity)
        out = [pq.dequeue() for _ in range(len(pq))]
        assert out == best(xs, k, polarity)

    @given(entries, st.integers(1, 16))
    def test_interleaved_dequeue(self, xs, k):
        pq = BoundedPriorityQueue(k)
        shadow = []
        for n, e in enumerate(xs):
            pq.enqueue(e)
            shadow = best(shadow + [e], k)
            if n % 5 == 4:
                assert pq.dequeue() == shadow.pop(0)
        assert pq.items() == shadow

    def test_cycles_counted(self):
        pq = BoundedPriorityQueue(8)
        for i in range(20):
            pq.enqueue(ScoredEntry(i, i))
        assert pq.cycles >= 20


class TestMergeSorter:
    @given(entries, st.sampled_from([1, 2, 4, 8, 16, 32]))
    def test_matches_sorted_oracle(self, xs, k):
        res = merge_topk_stream(xs, k)
        assert res.entries == best(xs, k)
        assert res.cycles == len(xs) + k.bit_length() - 1

    def test_power_of_two_required(self):
        with pytest.raises(ParameterError):
            merge_topk_stream([], 3)

    def test_agrees_with_queue(self):
        xs = [ScoredEntry((i * 2654435761) % 4096, i) for i in range(5000)]
        pq = BoundedPriorityQueue(64)
        for e in xs:
            pq.enqueue(e)
        assert merge_topk_stream(xs, 64).entries == pq.items()


class TestCosts:
    @pytest.mark.parametrize("k, expected", [(1, (1, 2)), (2, (2, 5)), (16, (5, 36)), (1024, (11, 2058))])
    def test_merge_cost(self, k, expected):
        assert merge_cost(k) == expected

    def test_pq_cost_linear(self):
        assert [pq_cost(k) for k in (1, 16, 1024)] == [1, 16, 1024]

    def test_merge_cheaper_for_large_k(self):
        assert all(merge_cost(2 ** e)[0] < pq_cost(2 ** e) for e in range(2, 12))

    def test_latency(self):
        assert merge_latency(1000, 16) == 1004
