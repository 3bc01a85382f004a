"""Best-improvement 2-opt."""
from __future__ import annotations

from . import _kernels
from .core import Tour, TspInstance, _check_sizes

DEFAULT_MAX_PASSES = 1000


def two_opt_run(inst: TspInstance, tour: Tour, max_passes: int = DEFAULT_MAX_PASSES):
    """Like :func:`two_opt` but also returns ``(passes, converged)``."""
    _check_sizes(inst, tour)
    if max_passes < 0:
        raise ValueError("max_passes must be >= 0")
    perm, passes, converged = _kernels.two_opt(inst.nodes, tour.perm, max_passes)
    return Tour(perm), int(passes), bool(converged)


def two_opt(inst: TspInstance, tour: Tour, max_passes: int = DEFAULT_MAX_PASSES) -> Tour:
    """Apply the single best improving 2-exchange per full scan.

    Stops when no exchange shortens the tour by more than 1e-12 or after
    ``max_passes`` scans.
    """
    return two_opt_run(inst, tour, max_passes)[0]
