"""Deterministic insertion heuristics.

Both heuristics seed a 2-cycle with an extreme pair of nodes, then repeatedly
pick an unvisited node by its distance to the partial tour and splice it in
where it lengthens the tour least. Ties go to the smaller node index, then to
the earlier insertion position, so a given instance always yields the same
tour. That matters: all tour diversity in the sampling pipeline has to come
from moving coordinates, not from the constructor.
"""
from __future__ import annotations

from typing import Callable

from . import _kernels
from .core import Tour, TspInstance

Constructor = Callable[[TspInstance], Tour]


def nearest_insertion(inst: TspInstance) -> Tour:
    """Start from the closest pair; add the node closest to the tour."""
    return Tour(_kernels.insertion(inst.nodes, farthest=False))


def farthest_insertion(inst: TspInstance) -> Tour:
    """Start from the farthest pair; add the node farthest from the tour."""
    return Tour(_kernels.insertion(inst.nodes, farthest=True))


CONSTRUCTORS: dict[str, Constructor] = {
    "nearest": nearest_insertion,
    "farthest": farthest_insertion,
}


def get_constructor(name: str) -> Constructor:
    try:
        return CONSTRUCTORS[name]
    except KeyError:
        raise ValueError(f"unknown constructor {name!r}; choose from {sorted(CONSTRUCTORS)}") from None


def construct_perm(name: str, xy):
    """Raw permutation for coordinates ``xy``; skips instance validation.

    Used by the sampling pipeline, which builds hundreds of modified copies per
    iteration and hands them to worker threads.
    """
    get_constructor(name)
    return _kernels.insertion(xy, farthest=(name == "farthest"))
