"""Multi-indices as counting functions over channel labels."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import factorial, prod


@dataclass(frozen=True, order=True)
class MultiIndex:
    """Unordered multiset of channel labels, stored sorted.

    ``alpha.count(k)`` is the multiplicity of ``k``; union adds counts, so
    ``len(a | b) == len(a) + len(b)``.
    """

    items: tuple[int, ...] = ()

    def __post_init__(self):
        items = tuple(sorted(int(k) for k in self.items))
        if any(k < 0 for k in items):
            raise ValueError("multi-index labels must be nonnegative")
        object.__setattr__(self, "items", items)

    @classmethod
    def of(cls, *labels: int) -> "MultiIndex":
        return cls(tuple(labels))

    @classmethod
    def from_counts(cls, counts: dict[int, int]) -> "MultiIndex":
        return cls(tuple(k for k, c in counts.items() for _ in range(c)))

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def counts(self) -> dict[int, int]:
        return dict(Counter(self.items))

    def count(self, k: int) -> int:
        return self.items.count(k)

    def factorial(self) -> int:
        """``alpha! = prod_k alpha(k)!``."""
        return prod(factorial(c) for c in self.counts().values())

    def union(self, other: "MultiIndex | int") -> "MultiIndex":
        extra = (other,) if isinstance(other, int) else other.items
        return MultiIndex(self.items + tuple(extra))

    __or__ = union

    def contains(self, other: "MultiIndex") -> bool:
        """Inclusion of counting functions: ``other(k) <= self(k)`` for all k."""
        mine = self.counts()
        return all(mine.get(k, 0) >= c for k, c in other.counts().items())

    def __str__(self) -> str:
        return "(" + ",".join(map(str, self.items)) + ")"


def multi_indices(d: int, max_len: int):
    """All multi-indices over ``{0..d-1}`` with length at most ``max_len``."""
    for n in range(max_len + 1):
        for c in combinations_with_replacement(range(d), n):
            yield MultiIndex(c)
