"""Random feature subspaces, their frequency tables and relative-risk scores.

A subspace is a sorted tuple of distinct feature indices.  Projecting a
sample onto it gives a value tuple ``z``; tuples are packed into
fixed-width byte keys (big-endian int32 per feature) so that sorting and
lookup run inside numpy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Subspace = tuple  # sorted tuple of distinct feature indices

_KEY_DTYPE = np.dtype(">i4")


def max_subspace_size(d: int, n: int) -> int:
    return max(1, min(d, int(np.floor(np.sqrt(n)))))


def project_keys(codes: np.ndarray, subspace: Subspace) -> np.ndarray:
    """Byte keys of ``codes`` (n, d) projected on ``subspace``; shape (n,)."""
    sub = np.ascontiguousarray(codes[:, list(subspace)], dtype=_KEY_DTYPE)
    return sub.view(np.dtype((np.void, _KEY_DTYPE.itemsize * len(subspace)))).ravel()


def key_values(keys: np.ndarray, size: int) -> np.ndarray:
    """Inverse of :func:`project_keys`: the (u, size) code matrix behind ``keys``."""
    raw = np.frombuffer(np.ascontiguousarray(keys).tobytes(), dtype=_KEY_DTYPE)
    return raw.reshape(-1, size).astype(np.int64)


def sample_candidate(rng: np.random.Generator, d: int, l_max: int) -> Subspace:
    """Draw a size uniformly from 1..l_max, then that many distinct features."""
    if d < 1 or l_max < 1:
        raise ValueError("need d >= 1 and l_max >= 1")
    size = int(rng.integers(1, min(l_max, d) + 1))
    return tuple(sorted(int(f) for f in rng.choice(d, size=size, replace=False)))


@dataclass(frozen=True, eq=False)
class FrequencyTable:
    """Per-class occurrence counts of every distinct projected tuple.

    ``keys`` is sorted; ``counts[u, h]`` is o_h(z) for the u-th tuple.
    """

    subspace: Subspace
    keys: np.ndarray
    counts: np.ndarray
    class_totals: np.ndarray

    @property
    def n(self) -> int:
        return int(self.class_totals.sum())

    @property
    def k(self) -> int:
        return len(self.class_totals)

    @property
    def totals(self) -> np.ndarray:
        """o(z) for every tuple."""
        return self.counts.sum(axis=1)

    def values(self) -> np.ndarray:
        return key_values(self.keys, len(self.subspace))

    def lookup(self, keys: np.ndarray) -> np.ndarray:
        """Row index of each key in this table, or -1 for unseen tuples."""
        if len(self.keys) == 0:
            return np.full(len(keys), -1)
        pos = np.searchsorted(self.keys, keys)
        pos_c = np.minimum(pos, len(self.keys) - 1)
        return np.where(self.keys[pos_c] == keys, pos_c, -1)

    def as_dict(self) -> dict[tuple, tuple[int, ...]]:
        return {tuple(int(v) for v in z): tuple(int(c) for c in row)
                for z, row in zip(self.values(), self.counts)}

    def __eq__(self, other):
        if not isinstance(other, FrequencyTable):
            return NotImplemented
        return (self.subspace == other.subspace
                and np.array_equal(self.keys, other.keys)
                and np.array_equal(self.counts, other.counts)
                and np.array_equal(self.class_totals, other.class_totals))


def build_frequency_table(subspace: Subspace, codes: np.ndarray, y: np.ndarray,
                          k: int) -> FrequencyTable:
    """Count every projected tuple per class in one pass over the training codes."""
    if len(codes) == 0:
        raise ValueError("cannot build a frequency table from no samples")
    keys, inverse = np.unique(project_keys(codes, subspace), return_inverse=True)
    counts = np.zeros((len(keys), k), dtype=np.int64)
    np.add.at(counts, (inverse.ravel(), y), 1)
    return FrequencyTable(subspace=tuple(subspace), keys=keys, counts=counts,
                          class_totals=np.bincount(y, minlength=k).astype(np.int64))


def table_from_values(subspace: Subspace, values, counts, class_totals) -> FrequencyTable:
    """Rebuild a table from explicit tuples and counts (e.g. when loading a model)."""
    values = np.asarray(values, dtype=np.int64).reshape(-1, len(subspace))
    counts = np.asarray(counts, dtype=np.int64).reshape(len(values), -1)
    keys = project_keys(values, tuple(range(len(subspace))))
    order = np.argsort(keys, kind="stable")
    return FrequencyTable(subspace=tuple(subspace), keys=keys[order], counts=counts[order],
                          class_totals=np.asarray(class_totals, dtype=np.int64))


def relative_risk(o_t_z, o_z, o_t, n):
    """Relative risk of a tuple for its dominant class.

    Plain ratio of in-tuple to out-of-tuple class rates.  When the
    out-of-tuple rate has a zero numerator or denominator, every count
    gets Haldane's +0.5 correction instead.  Works on scalars or arrays.
    """
    o_t_z, o_z, o_t, n = (np.asarray(v, dtype=float) for v in (o_t_z, o_z, o_t, n))
    rest_class = o_t - o_t_z
    rest_all = n - o_z
    plain = (rest_class > 0) & (rest_all > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = (o_t_z / o_z) / (rest_class / rest_all)
    smooth = ((o_t_z + 0.5) / (o_z + 1.0)) / ((rest_class + 0.5) / (rest_all + 1.0))
    out = np.where(plain, exact, smooth)
    return float(out) if out.ndim == 0 else out


def average_relative_risk(table: FrequencyTable) -> float:
    """Mean relative risk over the table's distinct tuples.

    Each tuple is scored against its most frequent class, ties going to
    the smallest class index.
    """
    dominant = table.counts.argmax(axis=1)
    o_t_z = table.counts[np.arange(len(dominant)), dominant]
    rr = relative_risk(o_t_z, table.totals, table.class_totals[dominant], table.n)
    return float(np.mean(rr))


def select_best(candidates, codes: np.ndarray, y: np.ndarray,
                k: int) -> tuple[Subspace, FrequencyTable, float]:
    """Candidate with the highest average relative risk; first one wins ties."""
    if not candidates:
        raise ValueError("need at least one candidate subspace")
    best = None
    for cand in candidates:
        table = build_frequency_table(cand, codes, y, k)
        score = average_relative_risk(table)
        if best is None or score > best[2]:
            best = (tuple(cand), table, score)
    return best
