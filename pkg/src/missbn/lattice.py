"""Subset lattice used to organize chain-rule factorizations of a marginal.

Nodes are the subsets of an ordered ground set of k variables, encoded as
bitmasks over positions; edges go from S to S + {V}.  The lattice has 2**k
nodes and k * 2**(k-1) edges, so every factor shared between the k! orderings
is represented exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import GroundSetTooLarge

MAX_GROUND_SET = 20


@dataclass(frozen=True)
class LatticeEdge:
    source: int  # bitmask of S over ground positions
    added: int   # position of V in the ground set

    @property
    def target(self) -> int:
        return self.source | (1 << self.added)


@dataclass(frozen=True)
class FactorizationLattice:
    ground: tuple[int, ...]      # variable ids, the enumeration order
    nodes: tuple[int, ...]       # all bitmasks, ascending
    edges: tuple[LatticeEdge, ...]

    @property
    def k(self) -> int:
        return len(self.ground)

    @property
    def top(self) -> int:
        return (1 << self.k) - 1

    def members(self, mask: int) -> tuple[int, ...]:
        return tuple(v for i, v in enumerate(self.ground) if mask >> i & 1)

    def incoming(self, mask: int) -> list[LatticeEdge]:
        return [
            LatticeEdge(mask & ~(1 << i), i) for i in range(self.k) if mask >> i & 1
        ]


def build_lattice(ground: tuple[int, ...] | list[int]) -> FactorizationLattice:
    """Lattice over ``ground`` (order preserved); k must be in [1, 20]."""
    ground = tuple(ground)
    k = len(ground)
    if not 1 <= k <= MAX_GROUND_SET:
        raise GroundSetTooLarge(f"ground set of size {k} outside [1, {MAX_GROUND_SET}]")
    nodes = tuple(range(1 << k))
    edges = tuple(
        LatticeEdge(mask, i)
        for mask in nodes
        for i in range(k)
        if not mask >> i & 1
    )
    return FactorizationLattice(ground, nodes, edges)
