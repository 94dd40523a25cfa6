"""Disjoint-set forest used by every sweep in the package."""

from __future__ import annotations


class UnionFind:
    """Union by size with path halving.

    Plain Python lists are used on purpose: the sweeps call ``find`` one
    element at a time, where list indexing beats numpy scalar access.
    """

    __slots__ = ("parent", "size", "count")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.count = n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, x: int, y: int) -> int:
        """Merge the sets holding ``x`` and ``y`` and return the new root."""
        rx = self.find(x)
        ry = self.find(y)
        if rx == ry:
            return rx
        if self.size[rx] < self.size[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        self.size[rx] += self.size[ry]
        self.count -= 1
        return rx

    def connected(self, x: int, y: int) -> bool:
        return self.find(x) == self.find(y)

    def __len__(self) -> int:
        return len(self.parent)
