"""Instances, tours and tour length."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

BRUTE_FORCE_LIMIT = 10


class TourError(ValueError):
    """A tour does not fit the instance it is evaluated on."""


@dataclass(frozen=True)
class TspInstance:
    """``n`` points in the plane. Index ``i`` always refers to the same node,
    also in modified copies of an instance."""

    nodes: np.ndarray

    def __post_init__(self):
        xy = np.array(self.nodes, dtype=np.float64, copy=True)
        if xy.ndim != 2 or xy.shape[1] != 2:
            raise ValueError(f"nodes must have shape (n, 2), got {xy.shape}")
        if xy.shape[0] < 3:
            raise ValueError(f"an instance needs at least 3 nodes, got {xy.shape[0]}")
        if not np.all(np.isfinite(xy)):
            raise ValueError("node coordinates must be finite")
        xy.setflags(write=False)
        object.__setattr__(self, "nodes", xy)

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    def __len__(self) -> int:
        return self.n

    def with_nodes(self, nodes) -> "TspInstance":
        return TspInstance(nodes)


@dataclass(frozen=True)
class Tour:
    """A cyclic visiting order, stored as a permutation of ``0..n-1``."""

    perm: np.ndarray

    def __post_init__(self):
        p = np.array(self.perm, dtype=np.int64, copy=True).reshape(-1)
        n = p.shape[0]
        if n == 0 or not np.array_equal(np.sort(p), np.arange(n)):
            raise TourError("tour must be a permutation of 0..n-1")
        p.setflags(write=False)
        object.__setattr__(self, "perm", p)

    @property
    def n(self) -> int:
        return self.perm.shape[0]

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other):
        return isinstance(other, Tour) and np.array_equal(self.perm, other.perm)

    def __hash__(self):
        return hash(self.perm.tobytes())


def _check_sizes(inst: TspInstance, tour: Tour) -> None:
    if tour.n != inst.n:
        raise TourError(f"tour has {tour.n} nodes but instance has {inst.n}")


def tour_length(inst: TspInstance, tour: Tour) -> float:
    """Sum of Euclidean edge lengths along the closed tour."""
    _check_sizes(inst, tour)
    return float(tour_lengths(inst.nodes, tour.perm[None, :])[0])


def tour_lengths(xy: np.ndarray, perms: np.ndarray) -> np.ndarray:
    """Lengths of a stack of permutations ``(S, n)`` on coordinates ``xy``."""
    pts = xy[perms]
    diff = pts - np.roll(pts, -1, axis=1)
    return np.sum(np.sqrt(np.sum(diff * diff, axis=2)), axis=1)


def evaluate_on_original(original: TspInstance, tour: Tour) -> float:
    """Length on ``original`` of a tour built on a modified copy of it.

    Modified instances keep node indices, so mapping a tour back is the
    identity on the permutation.
    """
    return tour_length(original, tour)


def brute_force_optimal(inst: TspInstance) -> tuple[Tour, float]:
    """Exact optimum by enumeration; refuses ``n > 10``.

    Only one direction of each cycle is enumerated (tours start at node 0 and
    have ``perm[1] < perm[-1]``); of equally short tours the lexicographically
    smallest is returned.
    """
    n = inst.n
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force is limited to n <= {BRUTE_FORCE_LIMIT}, got {n}")
    rest = np.array(list(itertools.permutations(range(1, n))), dtype=np.int64)
    rest = rest[rest[:, 0] < rest[:, -1]]
    perms = np.concatenate([np.zeros((rest.shape[0], 1), dtype=np.int64), rest], axis=1)
    xy = inst.nodes
    k = int(np.argmin(tour_lengths(xy, perms)))
    tour = Tour(perms[k])
    return tour, tour_length(inst, tour)

