"""Policy training: REINFORCE with a per-instance mean baseline plus weighted
self-imitation of the best modification found so far.

One optimiser step is taken per refinement iteration ``t`` on the loss
``rl + lam * il`` summed over the batch.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .agnn import (
    ModelParams,
    OptimizerState,
    backward,
    forward,
    init_optimizer,
    init_params,
    optimizer_step,
)
from .constructors import get_constructor
from .graph import DEFAULT_K, DynamicGraph
from .infer import Episode, construct_many, run_iteration, stream
from .policy import Modification, distributions_for, log_prob_for, log_prob_grad_for, sample_for
from .tsplib import generate_uniform


@dataclass(eq=False)
class IterationRecord:
    """What one instance contributes to the loss at iteration ``t``."""

    graph: DynamicGraph
    samples: Modification
    rewards: np.ndarray
    expert: Modification
    reduction: float
    t: int = 0


def mean_baseline(rewards) -> tuple[float, np.ndarray]:
    rewards = np.asarray(rewards, dtype=np.float64)
    if rewards.size == 0:
        raise ValueError("empty sample set")
    b = float(rewards.mean())
    return b, rewards - b


def imitation_weights(reductions, w_fixed: float) -> np.ndarray:
    red = np.asarray(reductions, dtype=np.float64)
    if np.any(red < 0):
        raise AssertionError("expert reductions must be non-negative")
    total = red.sum()
    if total == 0:
        return np.full(red.shape, float(w_fixed))
    return red / total + w_fixed


def _outputs(params, records, outputs):
    if outputs is None:
        outputs = [forward(params, r.graph, training=True) for r in records]
    return outputs


def reinforce_objective(params: ModelParams, records, outputs=None):
    """Return ``(loss, [d_loss/d_out per record])``.

    ``outputs`` may hold the ``(out, tape)`` pairs already computed for
    ``records``; otherwise the model is run again.
    """
    outputs = _outputs(params, records, outputs)
    total_samples = sum(len(r.samples) for r in records)
    if total_samples == 0 or any(len(r.samples) == 0 for r in records):
        raise ValueError("every record needs at least one sample")
    scale = 1.0 / total_samples
    loss, d_outs = 0.0, []
    for rec, (out, _) in zip(records, outputs):
        _, adv = mean_baseline(rec.rewards)
        dists = distributions_for(params.head, out, params.M)
        lp = np.atleast_1d(log_prob_for(params.head, dists, rec.samples))
        loss -= scale * float(adv @ lp)
        d_outs.append(-scale * log_prob_grad_for(params.head, dists, rec.samples, adv))
    return loss, d_outs


def imitation_objective(params: ModelParams, records, w_fixed: float, outputs=None):
    """Weighted negative log-likelihood of each record's expert modification."""
    outputs = _outputs(params, records, outputs)
    weights = imitation_weights([r.reduction for r in records], w_fixed)
    loss, d_outs = 0.0, []
    for rec, w, (out, _) in zip(records, weights, outputs):
        dists = distributions_for(params.head, out, params.M)
        loss -= w * float(log_prob_for(params.head, dists, rec.expert))
        d_outs.append(-w * log_prob_grad_for(params.head, dists, rec.expert, 1.0))
    return loss, d_outs


def combined_objective(params: ModelParams, records, lam: float, w_fixed: float, outputs=None):
    """Return ``(total, rl, il, grads)`` with parameter gradients summed over records."""
    outputs = _outputs(params, records, outputs)
    rl, d_rl = reinforce_objective(params, records, outputs)
    if lam:
        il, d_il = imitation_objective(params, records, w_fixed, outputs)
    else:
        il, d_il = 0.0, [0.0] * len(records)
    grads = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    for (_, tape), a, b in zip(outputs, d_rl, d_il):
        for k, g in backward(params, tape, a + lam * b).items():
            grads[k] += g
    return float(rl + lam * il), float(rl), float(il), grads


@dataclass
class TrainConfig:
    n: int = 500
    epochs: int = 30
    batch_size: int = 16
    T: int = 30
    samples_per_iter: int = 50
    M: int = 4
    lam: float = 1.0
    w_fixed: float = 0.01
    constructor: str = "farthest"
    seed: int = 0
    H: int = 32
    L: int = 12
    k: int = DEFAULT_K
    lr: float = 1e-3
    weight_decay: float = 0.01
    head: str = "discrete"
    unified: bool = True
    workers: int | None = 1
    instance_generator: Callable = field(default=generate_uniform, repr=False)


@dataclass
class EpochMetrics:
    epoch: int
    base_lengths: list[float]
    steps: list[dict] = field(default_factory=list)
    best_sampled_reduction: float = float("nan")
    seconds: float = 0.0


def train_epoch(params: ModelParams, opt_state: OptimizerState, config: TrainConfig, epoch: int):
    """One pass over a fresh batch of ``config.batch_size`` instances."""
    get_constructor(config.constructor)
    if params.M != config.M:
        raise ValueError(f"model has M={params.M}, config asks for M={config.M}")
    t0 = time.perf_counter()
    insts = [
        config.instance_generator(config.n, config.seed, epoch * config.batch_size + b)
        for b in range(config.batch_size)
    ]
    base = construct_many(config.constructor, [s.nodes for s in insts], config.workers)
    eps = [Episode(s, config.constructor, config.M, config.k, config.unified, p) for s, p in zip(insts, base)]
    metrics = EpochMetrics(epoch, [ep.base_length for ep in eps])

    for t in range(config.T):
        graphs = [ep.dynamic_graph() for ep in eps]
        outputs = [forward(params, g, training=True) for g in graphs]
        sampled = [
            sample_for(params.head, distributions_for(params.head, out, config.M),
                       stream(config.seed, epoch, b, t), config.samples_per_iter, config.M)
            for b, (out, _) in enumerate(outputs)
        ]
        steps = run_iteration(eps, sampled, config.constructor, config.workers)
        records = [
            IterationRecord(g, st.samples, st.rewards, st.expert, st.expert_reduction, t)
            for g, st in zip(graphs, steps)
        ]
        total, rl, il, grads = combined_objective(params, records, config.lam, config.w_fixed, outputs)
        optimizer_step(params, opt_state, grads)
        metrics.steps.append({
            "epoch": epoch,
            "t": t,
            "mean_reduction": float(np.mean([ep.base_length - ep.star_length for ep in eps])),
            "mean_relative_reduction": float(np.mean([1 - ep.star_length / ep.base_length for ep in eps])),
            "loss": total,
            "rl_loss": rl,
            "il_loss": il,
        })
    if config.T:
        metrics.best_sampled_reduction = float(np.mean([ep.base_length - ep.best_sampled_length for ep in eps]))
    metrics.seconds = time.perf_counter() - t0
    return params, opt_state, metrics


def train(config: TrainConfig, metrics_path=None, params: ModelParams | None = None,
          opt_state: OptimizerState | None = None, on_epoch=None):
    """Train for ``config.epochs`` epochs; one JSON line per (epoch, t) goes to
    ``metrics_path`` followed by one epoch summary line."""
    if params is None:
        params = init_params(config.H, config.L, config.M, seed=config.seed, head=config.head)
    if opt_state is None:
        opt_state = init_optimizer(params, lr=config.lr, weight_decay=config.weight_decay)
    history = []
    sink = open(metrics_path, "w") if metrics_path else None
    try:
        for epoch in range(config.epochs):
            params, opt_state, m = train_epoch(params, opt_state, config, epoch)
            history.append(m)
            if sink:
                for step in m.steps:
                    sink.write(json.dumps(step) + "\n")
                summary = {k: v for k, v in asdict(m).items() if k not in ("steps", "base_lengths")}
                summary["kind"] = "epoch"
                summary["mean_base_length"] = float(np.mean(m.base_lengths))
                sink.write(json.dumps(summary) + "\n")
                sink.flush()
            if on_epoch:
                on_epoch(m)
    finally:
        if sink:
            sink.close()
    return params, opt_state, history
