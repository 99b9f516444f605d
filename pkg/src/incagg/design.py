"""Index-pair designs for second-order incomplete U-statistics.

A design stores each unordered pair ``i < j`` once.  All h kernels used here
are symmetric under swapping the two pair indices, so summing over unordered
pairs gives the same average as summing over ordered ones.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, InputError


@dataclass(frozen=True, eq=False)
class Design:
    """Immutable set of index pairs ``(i, j)`` with ``0 <= i < j < n_items``.

    ``provenance`` is one of ``"subdiagonal"``, ``"random"``, ``"full"`` or
    ``"custom"``; ``params`` records how the design was built (``R``, or
    ``L`` and ``seed``).
    """

    n_items: int
    rows: np.ndarray
    cols: np.ndarray
    provenance: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.intp)
        cols = np.ascontiguousarray(self.cols, dtype=np.intp)
        if rows.shape != cols.shape or rows.ndim != 1:
            raise InputError("design rows and cols must be 1-d arrays of equal length")
        if rows.size and (rows.min() < 0 or cols.max() >= self.n_items or np.any(rows >= cols)):
            raise InputError("design pairs must satisfy 0 <= i < j < n_items")
        rows.setflags(write=False)
        cols.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)

    @property
    def size(self) -> int:
        """Number of pairs, ``L``."""
        return self.rows.size

    def __len__(self):
        return self.size

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.rows.tolist(), self.cols.tolist()))

    def pair_set(self) -> set[tuple[int, int]]:
        return set(self.pairs)

    @property
    def density(self) -> float:
        """Fraction of all unordered pairs that the design covers."""
        total = self.n_items * (self.n_items - 1) // 2
        return self.size / total if total else 0.0

    def describe(self) -> str:
        if self.provenance == "subdiagonal":
            return f"R={self.params['R']}"
        if self.provenance == "random":
            return f"L={self.size}"
        return self.provenance

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j"])
            w.writerows(zip(self.rows.tolist(), self.cols.tolist()))

    @classmethod
    def from_csv(cls, path, n_items: int | None = None) -> "Design":
        """Read a two-column ``i,j`` CSV.  ``n_items`` defaults to ``max(j) + 1``."""
        text = Path(path).read_text(encoding="utf-8").splitlines()
        body = [line for line in text if line.strip()]
        if body and not body[0].split(",")[0].strip().lstrip("-").isdigit():
            body = body[1:]
        try:
            arr = np.array([[int(v) for v in line.split(",")] for line in body], dtype=np.intp).reshape(-1, 2)
        except ValueError as exc:
            raise InputError(f"malformed design CSV {path}: {exc}") from None
        if n_items is None:
            n_items = int(arr[:, 1].max()) + 1 if arr.size else 2
        d = cls(n_items, arr[:, 0], arr[:, 1])
        if len(d.pair_set()) != d.size:
            raise InputError(f"design CSV {path} contains duplicate pairs")
        return d


def _check_n_items(n_items):
    if int(n_items) != n_items or n_items < 2:
        raise ConfigError(f"n_items must be an integer >= 2, got {n_items}")
    return int(n_items)


def subdiagonal_design(n_items: int, R: int) -> Design:
    """First ``R`` sub-diagonals of the ``n_items x n_items`` index matrix.

    Pairs ``(i, i + r)`` for ``r = 1..R``, enumerated by ``r`` then ``i``.
    The size is ``R * n_items - R * (R + 1) / 2``.
    """
    n = _check_n_items(n_items)
    if int(R) != R or not 1 <= R <= n - 1:
        raise ConfigError(f"R must be an integer in [1, {n - 1}], got {R}")
    R = int(R)
    rows = np.concatenate([np.arange(n - r) for r in range(1, R + 1)])
    cols = np.concatenate([np.arange(r, n) for r in range(1, R + 1)])
    return Design(n, rows, cols, "subdiagonal", {"R": R})


def full_design(n_items: int) -> Design:
    """All unordered pairs, enumerated by sub-diagonal like :func:`subdiagonal_design`."""
    n = _check_n_items(n_items)
    d = subdiagonal_design(n, n - 1)
    return Design(n, d.rows, d.cols, "full", {})


def random_design(n_items: int, L: int, seed: int) -> Design:
    """``L`` distinct unordered pairs drawn uniformly without replacement.

    Deterministic in ``(n_items, L, seed)``.  Pairs are sampled as linear
    indices into the strict upper triangle, then listed in sorted order.
    """
    n = _check_n_items(n_items)
    total = n * (n - 1) // 2
    if int(L) != L or not 1 <= L <= total:
        raise ConfigError(f"L must be an integer in [1, {total}], got {L}")
    rng = np.random.default_rng(seed)
    flat = np.sort(rng.choice(total, size=int(L), replace=False))
    rows, cols = _unrank_pairs(flat, n)
    return Design(n, rows, cols, "random", {"L": int(L), "seed": int(seed)})


def _unrank_pairs(flat: np.ndarray, n: int):
    # row-major rank of (i, j), i < j:  rank = i*(2n - i - 1)/2 + (j - i - 1)
    starts = np.arange(n) * (2 * n - np.arange(n) - 1) // 2
    rows = np.searchsorted(starts, flat, side="right") - 1
    cols = flat - starts[rows] + rows + 1
    return rows, cols


def make_design(n_items: int, R: int | None = None, L: int | None = None, full: bool = False, seed: int = 0) -> Design:
    """Build a design from the user-facing knobs (exactly one of ``R``, ``L``, ``full``)."""
    chosen = sum([R is not None, L is not None, bool(full)])
    if chosen != 1:
        raise ConfigError("specify exactly one of R, L (random design) or full")
    if full:
        return full_design(n_items)
    if L is not None:
        return random_design(n_items, L, seed)
    return subdiagonal_design(n_items, R)
