"""Sampling pipeline: modify, construct on the modified copies, map back, keep the best.

``Episode`` holds the per-instance state shared by training and inference:
the original instance, the best modified instance so far (incumbent) and its
length on the original. One call to :meth:`Episode.advance` is one refinement
iteration.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .agnn import ModelParams, ShapeError, forward
from .constructors import construct_perm, get_constructor
from .core import Tour, TspInstance, tour_lengths
from .graph import DEFAULT_K, build_base_graph, build_dynamic_graph, default_k
from .local_search import DEFAULT_MAX_PASSES, two_opt
from .policy import (
    Modification,
    apply_offsets,
    distributions_for,
    sample_for,
    sample_modifications,
    uniform_distributions,
    zero_modification,
)


def construct_many(constructor: str, xys, workers: int | None = 1) -> np.ndarray:
    """Run the constructor on every coordinate array; order of results follows
    the input regardless of ``workers``."""
    fn = partial(construct_perm, constructor)
    if workers is None or workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return np.stack(list(pool.map(fn, xys)))
    return np.stack([fn(xy) for xy in xys])


def stream(*key) -> np.random.Generator:
    """Independent generator for a tuple of non-negative integers."""
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


@dataclass
class StepResult:
    samples: Modification
    lengths: np.ndarray
    incumbent_before: float
    expert: Modification
    expert_reduction: float

    @property
    def rewards(self) -> np.ndarray:
        return self.incumbent_before - self.lengths


class Episode:
    def __init__(self, inst: TspInstance, constructor: str, M: int, k: int | None = DEFAULT_K,
                 unified: bool = True, base_perm=None):
        self.s = inst
        self.constructor = constructor
        self.M = M
        self.unified = unified
        self.k = k
        self._graph = None
        if base_perm is None:
            base_perm = construct_perm(constructor, inst.nodes)
        self.base_perm = np.asarray(base_perm)
        self.base_length = float(tour_lengths(inst.nodes, self.base_perm[None])[0])
        self.star = inst.nodes
        self.star_perm = self.base_perm
        self.star_length = self.base_length
        # code of the incumbent's total offset from s (non-unified expert)
        self.star_code = zero_modification(inst.n, M)
        self.best_sampled_length = np.inf
        self.best_sampled_perm = None
        self.trace = [self.base_length]

    @property
    def graph(self):
        if self._graph is None:
            self._graph = build_base_graph(self.s, default_k(self.s.n, self.k))
        return self._graph

    def dynamic_graph(self):
        return build_dynamic_graph(self.graph, TspInstance(self.star), self.s, self.M)

    def candidates(self, mods: Modification) -> np.ndarray:
        anchor = self.star if self.unified else self.s.nodes
        return apply_offsets(anchor, self.s.nodes, mods.delta, self.M)

    def advance(self, mods: Modification, perms: np.ndarray) -> StepResult:
        lengths = tour_lengths(self.s.nodes, perms)
        before = self.star_length
        best = int(np.argmin(lengths))
        if lengths[best] < self.best_sampled_length:
            self.best_sampled_length = float(lengths[best])
            self.best_sampled_perm = perms[best]
        improved = lengths[best] < before
        if improved:
            self.star = self.candidates(mods[best : best + 1])[0]
            self.star_perm = perms[best]
            self.star_length = float(lengths[best])
            self.star_code = mods[best]
        if self.unified:
            expert = mods[best] if improved else zero_modification(self.s.n, self.M)
            reduction = before - self.star_length
        else:
            # offsets are taken from s, so the target is the incumbent's whole offset
            expert = self.star_code
            reduction = self.base_length - self.star_length
        self.trace.append(self.star_length)
        return StepResult(mods, lengths, before, expert, reduction)


def run_iteration(episodes, sampled, constructor: str, workers):
    """Construct tours for every episode's sampled modifications (one pooled
    fan-out) and advance each episode."""
    cands = [ep.candidates(mods) for ep, mods in zip(episodes, sampled)]
    flat = [c for block in cands for c in block]
    perms = construct_many(constructor, flat, workers)
    out, start = [], 0
    for ep, mods in zip(episodes, sampled):
        count = len(mods)
        out.append(ep.advance(mods, perms[start : start + count]))
        start += count
    return out


@dataclass
class SolveConfig:
    T: int = 30
    samples_per_iter: int = 100
    M: int | None = None  # None: take from the model
    constructor: str = "farthest"
    seed: int = 0
    run_two_opt: bool = False
    k: int = DEFAULT_K
    unified: bool = True
    workers: int | None = 1
    two_opt_max_passes: int = DEFAULT_MAX_PASSES
    instance: int = 0  # selects the sampling stream together with ``seed``


@dataclass
class SolveResult:
    best_tour: Tour
    best_length: float
    base_length: float
    trace: list[float]
    best_excluding_s: float
    base_tour: Tour
    refined_length: float | None = None
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)


def _finish(inst, ep: Episode, config: SolveConfig, t0: float) -> SolveResult:
    tour = Tour(ep.star_perm)
    best = ep.star_length
    refined = None
    if config.run_two_opt:
        tour = two_opt(inst, tour, config.two_opt_max_passes)
        refined = float(tour_lengths(inst.nodes, tour.perm[None])[0])
    return SolveResult(
        best_tour=tour,
        best_length=best,
        base_length=ep.base_length,
        trace=list(ep.trace),
        best_excluding_s=float(ep.best_sampled_length),
        base_tour=Tour(ep.base_perm),
        refined_length=refined,
        seconds=time.perf_counter() - t0,
    )


def mdf_solve(inst: TspInstance, params: ModelParams, config: SolveConfig) -> SolveResult:
    """Guided sampling over ``config.T`` refinement iterations.

    The returned tour is the best seen on ``inst``, the base constructor's own
    tour included; with ``run_two_opt`` only that tour is then refined.
    """
    get_constructor(config.constructor)
    M = params.M if config.M is None else config.M
    if M != params.M:
        raise ShapeError(f"model was trained with M={params.M}, config asks for M={M}")
    t0 = time.perf_counter()
    ep = Episode(inst, config.constructor, M, config.k, config.unified)
    for t in range(config.T):
        out, _ = forward(params, ep.dynamic_graph(), training=False)
        dists = distributions_for(params.head, out, M)
        mods = sample_for(params.head, dists, stream(config.seed, config.instance, t), config.samples_per_iter, M)
        run_iteration([ep], [mods], config.constructor, config.workers)
    return _finish(inst, ep, config, t0)


def random_modifier_solve(inst: TspInstance, config: SolveConfig) -> SolveResult:
    """Same pipeline with every sign and digit drawn uniformly at random."""
    get_constructor(config.constructor)
    M = 4 if config.M is None else config.M
    t0 = time.perf_counter()
    ep = Episode(inst, config.constructor, M, config.k, config.unified)
    dists = uniform_distributions(inst.n, M)
    for t in range(config.T):
        mods = sample_modifications(dists, stream(config.seed, config.instance, t), config.samples_per_iter)
        run_iteration([ep], [mods], config.constructor, config.workers)
    return _finish(inst, ep, config, t0)
