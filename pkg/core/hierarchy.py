"""
Hierarchy bookkeeping: multi-index enumeration and neighbour tables.

Indices are stored flat in graded-lexicographic order (depth 0, then depth 1, ...;
lexicographically descending within a depth), so position 0 is always the
reduced density matrix.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

import config
from .errors import CapacityError, InvalidSpecError

log = logging.getLogger(__name__)

# Sentinel in raise/lower tables for "no such neighbour"
ABSENT = -1

# state + four RK4 stages + one scratch pool
_POOLS_PER_STEP = 6
_BYTES_PER_ENTRY = 16


@dataclass(frozen=True)
class HierarchyIndex:
    n: Tuple[int, ...]

    @property
    def depth(self) -> int:
        return sum(self.n)

    def raised(self, j: int) -> "HierarchyIndex":
        return HierarchyIndex(self.n[:j] + (self.n[j] + 1,) + self.n[j + 1:])

    def lowered(self, j: int) -> Optional["HierarchyIndex"]:
        if self.n[j] == 0:
            return None
        return HierarchyIndex(self.n[:j] + (self.n[j] - 1,) + self.n[j + 1:])


@dataclass
class HierarchyLayout:
    n_sites: int
    depth: int
    indices: List[HierarchyIndex]
    occupations: np.ndarray          # (M, N) int, row i = indices[i].n
    raise_table: np.ndarray          # (M, N) int, position of n + e_j or ABSENT
    lower_table: np.ndarray          # (M, N) int, position of n - e_j or ABSENT
    positions: Dict[Tuple[int, ...], int] = field(repr=False)

    def __len__(self) -> int:
        return len(self.indices)

    def position(self, n: Tuple[int, ...]) -> int:
        return self.positions.get(tuple(n), ABSENT)


def hierarchy_size(n_sites: int, depth: int) -> int:
    """Number of multi-indices with sum <= depth: binomial(depth + N, N)."""
    return math.comb(depth + n_sites, n_sites)


def estimate_bytes(n_sites: int, depth: int) -> int:
    return hierarchy_size(n_sites, depth) * n_sites * n_sites * _BYTES_PER_ENTRY * _POOLS_PER_STEP


def _compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    """All tuples of `parts` non-negative ints summing to `total`, lexicographically descending."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_hierarchy(n_sites: int, depth: int, budget_bytes: Optional[int] = None) -> HierarchyLayout:
    """Enumerate every multi-index of N sites up to truncation depth K, with neighbour tables."""
    if n_sites < 1:
        raise InvalidSpecError(f"n_sites must be >= 1, got {n_sites}")
    if depth < 0:
        raise InvalidSpecError(f"truncation depth must be >= 0, got {depth}")

    budget = budget_bytes if budget_bytes is not None else config.MEMORY_BUDGET_MB * 2**20
    count = hierarchy_size(n_sites, depth)
    needed = estimate_bytes(n_sites, depth)
    if needed > budget:
        raise CapacityError(count, needed, budget)

    occupations = np.array([n for k in range(depth + 1) for n in _compositions(k, n_sites)],
                           dtype=np.int64).reshape(count, n_sites)
    positions = {tuple(int(v) for v in row): i for i, row in enumerate(occupations)}

    raise_table = np.full((count, n_sites), ABSENT, dtype=np.int64)
    lower_table = np.full((count, n_sites), ABSENT, dtype=np.int64)
    for i, row in enumerate(occupations):
        n = tuple(int(v) for v in row)
        for j in range(n_sites):
            up = n[:j] + (n[j] + 1,) + n[j + 1:]
            raise_table[i, j] = positions.get(up, ABSENT)
            if n[j] > 0:
                lower_table[i, j] = positions[n[:j] + (n[j] - 1,) + n[j + 1:]]

    log.debug("Hierarchy N=%d K=%d: %d indices (~%.1f MiB)", n_sites, depth, count, needed / 2**20)
    return HierarchyLayout(
        n_sites=n_sites,
        depth=depth,
        indices=[HierarchyIndex(tuple(int(v) for v in row)) for row in occupations],
        occupations=occupations,
        raise_table=raise_table,
        lower_table=lower_table,
        positions=positions,
    )
