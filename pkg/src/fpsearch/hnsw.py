"""Hierarchical navigable small world graph over Tanimoto distance.

Distance is ``1 - S`` with the empty-union convention of
:mod:`fpsearch.fingerprint`.  Every comparison between two graph elements
uses the key ``(distance, id)``, so equal distances are resolved towards
the lower id and searches are fully deterministic.

Fingerprints are stored as Python ints; ``int.bit_count`` on a 1024-bit
int is cheaper than a numpy round trip for the handful of neighbours
touched per step.
"""

from __future__ import annotations

import io
import math
import os
import random
import struct
from bisect import insort
from dataclasses import dataclass
from typing import BinaryIO, Callable, Iterable

import numpy as np

from .errors import DimensionError, FormatError, IndexStateError, InsertError, ParameterError
from .fingerprint import DEFAULT_LENGTH, Fingerprint, TanimotoScore, n_words
from .results import Hit, TopKResult

Key = tuple[float, int]


@dataclass(frozen=True)
class HnswParams:
    M: int = 16
    ef_construction: int = 200
    ef_search: int = 50
    seed: int = 0
    M0: int | None = None
    level_scale: float | None = None

    def __post_init__(self):
        if self.M < 2:
            raise ParameterError(f"M must be at least 2, got {self.M}")
        if self.M0 is None:
            object.__setattr__(self, "M0", 2 * self.M)
        if self.level_scale is None:
            object.__setattr__(self, "level_scale", 1.0 / math.log(self.M))
        if self.ef_construction < self.M:
            raise ParameterError(
                f"ef_construction ({self.ef_construction}) must be at least M ({self.M})"
            )
        if self.ef_search < 1:
            raise ParameterError(f"ef_search must be positive, got {self.ef_search}")

    def max_degree(self, layer: int) -> int:
        return self.M0 if layer == 0 else self.M


class HnswIndex:
    """Layered proximity graph built by sequential insertion.

    ``layers[l]`` maps node id to its neighbour list on layer ``l``.  A
    node drawn at level ``l`` is present on layers ``0..l``.  Edges are
    kept symmetric: when an overflowing list drops a neighbour, the
    reverse edge is removed as well.
    """

    def __init__(self, params: HnswParams | None = None, length: int = DEFAULT_LENGTH):
        self.params = params or HnswParams()
        self.length = length
        self.layers: list[dict[int, list[int]]] = []
        self.levels: dict[int, int] = {}
        self.entry_point: int | None = None
        self.frozen = False
        self._bits: dict[int, int] = {}
        self._counts: dict[int, int] = {}
        self._rng = random.Random(self.params.seed)

    def __len__(self) -> int:
        return len(self.levels)

    def __contains__(self, node_id: int) -> bool:
        return node_id in self.levels

    @property
    def max_level(self) -> int:
        return len(self.layers) - 1

    def fingerprint(self, node_id: int) -> Fingerprint:
        return Fingerprint(self._bits[node_id], self.length, node_id)

    def neighbors(self, node_id: int, layer: int = 0) -> list[int]:
        return self.layers[layer][node_id]

    def freeze(self) -> "HnswIndex":
        self.frozen = True
        return self

    # -- distances ---------------------------------------------------------

    def _query_distance(self, bits: int, count: int) -> tuple[Callable[[int], float], dict]:
        """Memoised query-to-node distance; the memo doubles as an evaluation log."""
        cache: dict[int, float] = {}
        node_bits, node_counts = self._bits, self._counts

        def dist(v: int) -> float:
            d = cache.get(v)
            if d is None:
                inter = (node_bits[v] & bits).bit_count()
                union = node_counts[v] + count - inter
                d = 1.0 - inter / union if union else 1.0
                cache[v] = d
            return d

        return dist, cache

    def _pair_distance(self, a: int, b: int) -> float:
        inter = (self._bits[a] & self._bits[b]).bit_count()
        union = self._counts[a] + self._counts[b] - inter
        return 1.0 - inter / union if union else 1.0

    def _check_query(self, q: Fingerprint) -> None:
        if q.length != self.length:
            raise DimensionError(f"query length {q.length} does not match graph length {self.length}")

    # -- search primitives -------------------------------------------------

    def _greedy(self, dist: Callable[[int], float], ep: int, layer: int) -> int:
        adjacency = self.layers[layer]
        cur, dcur = ep, dist(ep)
        moved = True
        while moved:
            moved = False
            for e in adjacency[cur]:
                de = dist(e)
                if de < dcur or (de == dcur and e < cur):
                    cur, dcur = e, de
                    moved = True
        return cur

    def _search_layer(
        self, dist: Callable[[int], float], ep: int, ef: int, layer: int
    ) -> list[Key]:
        adjacency = self.layers[layer]
        start = (dist(ep), ep)
        visited = {ep}
        # both queues are sorted arrays bounded by ef; closest first
        candidates = [start]
        results = [start]
        while candidates:
            top = candidates.pop(0)
            if top > results[-1]:
                break
            for e in adjacency[top[1]]:
                if e in visited:
                    continue
                visited.add(e)
                key = (dist(e), e)
                if len(results) < ef or key < results[-1]:
                    insort(candidates, key)
                    if len(candidates) > ef:
                        candidates.pop()
                    insort(results, key)
                    if len(results) > ef:
                        results.pop()
        return results

    def search_layer_top(self, q: Fingerprint, ep: int, layer: int) -> int:
        """Greedy hill climb on an upper layer; returns a local optimum."""
        self._check_query(q)
        if layer < 1 or layer > self.max_level:
            raise ParameterError(f"layer must be in [1, {self.max_level}], got {layer}")
        dist, _ = self._query_distance(q.bits, q.bit_count)
        return self._greedy(dist, ep, layer)

    def search_layer_base(
        self, q: Fingerprint, ep: int, ef: int, layer: int = 0
    ) -> list[tuple[float, int]]:
        """Bounded best-first search; ``(distance, id)`` pairs, closest first."""
        self._check_query(q)
        if ef < 1:
            raise ParameterError(f"ef must be positive, got {ef}")
        dist, _ = self._query_distance(q.bits, q.bit_count)
        return self._search_layer(dist, ep, ef, layer)

    def search(self, q: Fingerprint, k: int, ef: int | None = None) -> TopKResult:
        ef = self.params.ef_search if ef is None else ef
        if k < 1:
            raise ParameterError(f"k must be at least 1, got {k}")
        if k > ef:
            raise ParameterError(f"k ({k}) must not exceed ef_search ({ef})")
        self._check_query(q)
        if self.entry_point is None:
            return TopKResult()
        dist, cache = self._query_distance(q.bits, q.bit_count)
        cur = self.entry_point
        for layer in range(self.max_level, 0, -1):
            cur = self._greedy(dist, cur, layer)
        found = self._search_layer(dist, cur, ef, 0)[:k]
        hits = []
        for _, node in found:
            inter = (self._bits[node] & q.bits).bit_count()
            hits.append(Hit(TanimotoScore(inter, self._counts[node] + q.bit_count - inter), node))
        hits.sort(key=lambda h: (-h.score.value, h.id))
        return TopKResult(hits, evaluations=len(cache))

    # -- construction ------------------------------------------------------

    def draw_level(self) -> int:
        u = 1.0 - self._rng.random()  # (0, 1]
        return int(-math.log(u) * self.params.level_scale)

    def _select_neighbors(self, base: int, candidates: list[Key], limit: int) -> list[int]:
        """Relative-neighbourhood heuristic, pruned candidates back-filled.

        ``candidates`` are ``(distance to base, id)`` pairs in ascending order.
        A candidate is kept when no already kept neighbour is closer to it
        than ``base`` is.
        """
        if len(candidates) <= limit:
            return [c for _, c in candidates]
        node_bits, node_counts = self._bits, self._counts
        kept: list[int] = []
        kept_bits: list[tuple[int, int]] = []
        discarded: list[int] = []
        for d, c in candidates:
            if len(kept) >= limit:
                break
            cb, cc = node_bits[c], node_counts[c]
            good = True
            for sb, sc in kept_bits:
                inter = (cb & sb).bit_count()
                union = cc + sc - inter
                if (1.0 - inter / union if union else 1.0) < d:
                    good = False
                    break
            if good:
                kept.append(c)
                kept_bits.append((cb, cc))
            else:
                discarded.append(c)
        for c in discarded:
            if len(kept) >= limit:
                break
            kept.append(c)
        return kept

    def _shrink(self, node: int, layer: int) -> None:
        adjacency = self.layers[layer]
        current = adjacency[node]
        ranked = sorted((self._pair_distance(node, x), x) for x in current)
        kept = self._select_neighbors(node, ranked, self.params.max_degree(layer))
        kept_set = set(kept)
        for x in current:
            if x not in kept_set:
                adjacency[x].remove(node)
        adjacency[node] = kept

    def insert(self, fp: Fingerprint, level: int | None = None) -> int:
        """Insert one fingerprint; returns the level it was assigned."""
        if self.frozen:
            raise IndexStateError("graph is frozen")
        if fp.length != self.length:
            raise DimensionError(f"fingerprint length {fp.length} does not match graph length {self.length}")
        node = fp.id
        if node in self.levels:
            raise InsertError(f"id {node} already present")
        if level is None:
            level = self.draw_level()
        self._bits[node] = fp.bits
        self._counts[node] = fp.bit_count
        self.levels[node] = level

        if self.entry_point is None:
            self.layers = [{node: []} for _ in range(level + 1)]
            self.entry_point = node
            return level

        top = self.max_level
        dist, _ = self._query_distance(fp.bits, fp.bit_count)
        cur = self.entry_point
        for layer in range(top, level, -1):
            cur = self._greedy(dist, cur, layer)
        for layer in range(min(level, top), -1, -1):
            found = self._search_layer(dist, cur, self.params.ef_construction, layer)
            chosen = self._select_neighbors(node, found, self.params.M)
            adjacency = self.layers[layer]
            adjacency[node] = list(chosen)
            limit = self.params.max_degree(layer)
            for nb in chosen:
                adjacency[nb].append(node)
                if len(adjacency[nb]) > limit:
                    self._shrink(nb, layer)
            cur = found[0][1]
        for _ in range(top + 1, level + 1):
            self.layers.append({node: []})
        if level > top:
            self.entry_point = node
        return level

    def add(self, fps: Iterable[Fingerprint]) -> "HnswIndex":
        for fp in fps:
            self.insert(fp)
        return self


def build_hnsw(
    fps: Iterable[Fingerprint], params: HnswParams | None = None, length: int | None = None
) -> HnswIndex:
    fps = list(fps)
    if length is None:
        length = fps[0].length if fps else DEFAULT_LENGTH
    return HnswIndex(params, length).add(fps).freeze()


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

MAGIC = b"MSKH"
VERSION = 1
_HEADER = struct.Struct("<4sH")
# M, M0, ef_construction, ef_search, level_scale, seed, length, node count,
# entry point (u64, all ones when empty), layer count
_PARAMS = struct.Struct("<IIIIdQIQQI")
_NO_ENTRY = 2**64 - 1


def dump_hnsw(g: HnswIndex, fh: BinaryIO) -> None:
    """Write the little-endian ``MSKH`` layout.

    After the header and parameter block comes the node table in insertion
    order ``(u64 id, u16 level, u16 bit_count, words)`` and then, per layer,
    a CSR block: u64 node count, u64 node ids, u64 row pointers
    (count + 1) and u64 neighbour ids.
    """
    p = g.params
    fh.write(_HEADER.pack(MAGIC, VERSION))
    entry = _NO_ENTRY if g.entry_point is None else g.entry_point
    fh.write(_PARAMS.pack(p.M, p.M0, p.ef_construction, p.ef_search, p.level_scale,
                          p.seed, g.length, len(g), entry, len(g.layers)))
    dtype = np.dtype([("id", "<u8"), ("level", "<u2"), ("bit_count", "<u2"),
                      ("words", "<u8", (n_words(g.length),))])
    table = np.zeros(len(g), dtype=dtype)
    nbytes = n_words(g.length) * 8
    for i, node in enumerate(g.levels):
        table[i]["id"] = node
        table[i]["level"] = g.levels[node]
        table[i]["bit_count"] = g._counts[node]
        table[i]["words"] = np.frombuffer(g._bits[node].to_bytes(nbytes, "little"), dtype="<u8")
    fh.write(table.tobytes())
    for adjacency in g.layers:
        nodes = np.fromiter(adjacency, dtype="<u8", count=len(adjacency))
        indptr = np.zeros(len(adjacency) + 1, dtype="<u8")
        indptr[1:] = np.cumsum([len(v) for v in adjacency.values()])
        indices = np.fromiter((x for v in adjacency.values() for x in v), dtype="<u8")
        fh.write(struct.pack("<Q", len(adjacency)))
        fh.write(nodes.tobytes() + indptr.tobytes() + indices.tobytes())


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise FormatError("truncated graph file")
    return data


def load_hnsw(fh: BinaryIO) -> HnswIndex:
    magic, version = _HEADER.unpack(_read_exact(fh, _HEADER.size))
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    (M, M0, efc, efs, scale, seed, length, count, entry, n_layers) = _PARAMS.unpack(
        _read_exact(fh, _PARAMS.size)
    )
    params = HnswParams(M=M, ef_construction=efc, ef_search=efs, seed=seed, M0=M0, level_scale=scale)
    g = HnswIndex(params, length)
    dtype = np.dtype([("id", "<u8"), ("level", "<u2"), ("bit_count", "<u2"),
                      ("words", "<u8", (n_words(length),))])
    table = np.frombuffer(_read_exact(fh, dtype.itemsize * count), dtype=dtype)
    for row in table:
        node = int(row["id"])
        bits = int.from_bytes(row["words"].tobytes(), "little")
        if bits.bit_count() != int(row["bit_count"]):
            raise FormatError(f"bit count mismatch for node {node}")
        g._bits[node] = bits
        g._counts[node] = int(row["bit_count"])
        g.levels[node] = int(row["level"])
    for _ in range(n_layers):
        (n_nodes,) = struct.unpack("<Q", _read_exact(fh, 8))
        nodes = np.frombuffer(_read_exact(fh, 8 * n_nodes), dtype="<u8")
        indptr = np.frombuffer(_read_exact(fh, 8 * (n_nodes + 1)), dtype="<u8")
        indices = np.frombuffer(_read_exact(fh, 8 * int(indptr[-1])), dtype="<u8")
        g.layers.append({
            int(nodes[i]): [int(x) for x in indices[indptr[i]:indptr[i + 1]]]
            for i in range(n_nodes)
        })
    g.entry_point = None if entry == _NO_ENTRY else int(entry)
    return g.freeze()


def save_hnsw(g: HnswIndex, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        dump_hnsw(g, fh)


def read_hnsw(path: str | os.PathLike) -> HnswIndex:
    with open(path, "rb") as fh:
        return load_hnsw(fh)


def hnsw_bytes(g: HnswIndex) -> bytes:
    buf = io.BytesIO()
    dump_hnsw(g, buf)
    return buf.getvalue()
