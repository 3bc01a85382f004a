import numpy as np
import pytest

from tspmdf.agnn import forward, init_optimizer, init_params
from tspmdf.infer import Episode, run_iteration, stream
from tspmdf.policy import distributions_for, heads_to_distributions, log_prob, sample_for, sample_modifications
from tspmdf.train import (
    IterationRecord,
    TrainConfig,
    combined_objective,
    imitation_objective,
    imitation_weights,
    mean_baseline,
    reinforce_objective,
    train,
    train_epoch,
)
from tspmdf.tsplib import generate_uniform


def test_mean_baseline():
    b, adv = mean_baseline([1.0, 2.0, 3.0])
    assert b == 2.0 and adv.tolist() == [-1.0, 0.0, 1.0]
    assert np.all(mean_baseline([4.0, 4.0, 4.0])[1] == 0)
    with pytest.raises(ValueError):
        mean_baseline([])


@pytest.mark.parametrize(
    "reductions, expected",
    [([1.0, 3.0], [0.26, 0.76]), ([0.0, 0.0], [0.01, 0.01]), ([2.0], [1.01])],
)
def test_imitation_weights(reductions, expected):
    np.testing.assert_allclose(imitation_weights(reductions, 0.01), expected, rtol=1e-12)


def test_negative_reduction_is_internal_error():
    with pytest.raises(AssertionError):
        imitation_weights([1.0, -0.5], 0.01)


# -- objectives on hand-set logits ----------------------------------------------

M = 1
WIDTH = 2 * (2 + 10 * M)


def _records(rng, n=2, samples=2, count=1):
    recs, outs = [], []
    for _ in range(count):
        logits = rng.normal(0, 1, (n, WIDTH))
        mods = sample_modifications(heads_to_distributions(logits, M), rng, samples)
        expert = mods[0]
        recs.append(IterationRecord(None, mods, rng.normal(size=samples), expert, float(rng.random())))
        outs.append((logits, None))
    return recs, outs


class _Head:
    """Stand-in for ModelParams when objectives are evaluated on raw logits."""

    head = "discrete"
    M = M


def test_reinforce_two_samples_by_hand():
    rng = np.random.default_rng(0)
    recs, outs = _records(rng)
    rec, (logits, _) = recs[0], outs[0]
    d = heads_to_distributions(logits, M)
    lp = [log_prob(d, rec.samples[s]) for s in range(2)]
    adv = rec.rewards - rec.rewards.mean()
    expected = -(adv[0] * lp[0] + adv[1] * lp[1]) / 2
    loss, _ = reinforce_objective(_Head(), recs, outs)
    assert loss == pytest.approx(expected, rel=1e-12)


def test_equal_rewards_give_zero_gradient():
    rng = np.random.default_rng(1)
    recs, outs = _records(rng, samples=5)
    recs[0].rewards = np.full(5, 0.7)
    loss, d = reinforce_objective(_Head(), recs, outs)
    assert loss == 0.0
    assert np.all(d[0] == 0)


def _fd_logits(fn, outs, step=1e-6):
    grads = []
    for r, (logits, _) in enumerate(outs):
        g = np.zeros_like(logits)
        for idx in np.ndindex(logits.shape):
            old = logits[idx]
            logits[idx] = old + step
            up = fn()
            logits[idx] = old - step
            down = fn()
            logits[idx] = old
            g[idx] = (up - down) / (2 * step)
        grads.append(g)
    return grads


@pytest.mark.parametrize("which", ["rl", "il"])
def test_objective_logit_gradients_by_finite_differences(which):
    rng = np.random.default_rng(2)
    recs, outs = _records(rng, n=3, samples=4, count=3)
    if which == "rl":
        fn = lambda: reinforce_objective(_Head(), recs, outs)[0]  # noqa: E731
    else:
        fn = lambda: imitation_objective(_Head(), recs, 0.01, outs)[0]  # noqa: E731
    analytic = (reinforce_objective(_Head(), recs, outs) if which == "rl"
                else imitation_objective(_Head(), recs, 0.01, outs))[1]
    for a, f in zip(analytic, _fd_logits(fn, outs)):
        np.testing.assert_allclose(a, f, rtol=1e-4, atol=1e-8)


def test_imitation_loss_by_hand():
    rng = np.random.default_rng(3)
    recs, outs = _records(rng, count=2)
    recs[0].reduction, recs[1].reduction = 1.0, 3.0
    lp = [log_prob(heads_to_distributions(o[0], M), r.expert) for r, o in zip(recs, outs)]
    loss, _ = imitation_objective(_Head(), recs, 0.01, outs)
    assert loss == pytest.approx(-(0.26 * lp[0] + 0.76 * lp[1]), rel=1e-12)


# -- full stack ---------------------------------------------------------------


def episode_records(params, seed, n=6, batch=2, samples=5, steps=2, unified=True):
    """Records from a few real iterations; the last iteration's are returned."""
    eps = [Episode(generate_uniform(n, seed, b), "farthest", params.M, unified=unified) for b in range(batch)]
    for t in range(steps):
        graphs = [ep.dynamic_graph() for ep in eps]
        outs = [forward(params, g)[0] for g in graphs]
        mods = [sample_for(params.head, distributions_for(params.head, o, params.M), stream(seed, b, t), samples, params.M)
                for b, o in enumerate(outs)]
        res = run_iteration(eps, mods, "farthest", 1)
    return [IterationRecord(g, r.samples, r.rewards, r.expert, r.expert_reduction, t) for g, r in zip(graphs, res)]


def full_stack_fd_error(params, records, lam=1.0, w_fixed=0.01, step=1e-5):
    _, _, _, grads = combined_objective(params, records, lam, w_fixed)
    worst = 0.0
    for name, tensor in params.tensors.items():
        for idx in np.ndindex(tensor.shape):
            old = tensor[idx]
            tensor[idx] = old + step
            up = combined_objective(params, records, lam, w_fixed)[0]
            tensor[idx] = old - step
            down = combined_objective(params, records, lam, w_fixed)[0]
            tensor[idx] = old
            fd = (up - down) / (2 * step)
            an = grads[name][idx]
            worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), 1e-6))
    return worst


@pytest.mark.parametrize("head, unified", [("discrete", True), ("discrete", False), ("gaussian", False)])
def test_combined_gradient_through_model(head, unified):
    params = init_params(H=4, L=2, M=1, seed=3, head=head)
    records = episode_records(params, 3, unified=unified)
    assert full_stack_fd_error(params, records) < 1e-4


def test_lambda_zero_ignores_imitation():
    params = init_params(H=4, L=1, M=1, seed=4)
    records = episode_records(params, 4)
    total, rl, il, _ = combined_objective(params, records, 0.0, 0.01)
    assert total == rl and il == 0.0


# -- train_epoch ----------------------------------------------------------------


def small_config(**kw):
    base = dict(n=12, epochs=2, batch_size=2, T=3, samples_per_iter=6, M=2, H=4, L=1, k=5)
    base.update(kw)
    return TrainConfig(**base)


def test_zero_iterations_no_update():
    cfg = small_config(T=0)
    p = init_params(cfg.H, cfg.L, cfg.M)
    before = p.copy()
    opt = init_optimizer(p)
    p, opt, m = train_epoch(p, opt, cfg, 0)
    assert m.steps == [] and len(m.base_lengths) == 2
    assert opt.step == 0
    assert all(np.array_equal(before[k], p[k]) for k in p.tensors)


def test_one_step_per_iteration_and_monotone_reduction():
    cfg = small_config(T=4)
    p = init_params(cfg.H, cfg.L, cfg.M)
    opt = init_optimizer(p)
    p, opt, m = train_epoch(p, opt, cfg, 0)
    assert opt.step == 4 and p.version == 4
    red = [s["mean_reduction"] for s in m.steps]
    assert all(b >= a for a, b in zip(red, red[1:])) and red[0] >= 0
    assert {"rl_loss", "il_loss", "t", "epoch"} <= set(m.steps[0])


def _trajectory(cfg, tmp_path, name):
    path = tmp_path / name
    train(cfg, path)
    return path.read_text()


def test_reproducible_and_independent_of_threads(tmp_path):
    import json

    def strip(text):
        return [{k: v for k, v in json.loads(line).items() if k != "seconds"} for line in text.splitlines()]

    a = _trajectory(small_config(workers=1), tmp_path, "a.jsonl")
    b = _trajectory(small_config(workers=1), tmp_path, "b.jsonl")
    c = _trajectory(small_config(workers=4), tmp_path, "c.jsonl")
    assert strip(a) == strip(b) == strip(c)
    assert len(a.splitlines()) == 2 * 3 + 2


@pytest.mark.parametrize("head, unified, lam", [("gaussian", False, 0.0), ("discrete", False, 1.0)])
def test_ablation_variants_train(head, unified, lam):
    cfg = small_config(head=head, unified=unified, lam=lam, epochs=1)
    params, opt, hist = train(cfg)
    assert params.head == head and opt.step == cfg.T
    assert np.isfinite(hist[0].steps[-1]["loss"])


def test_config_defaults():
    cfg = TrainConfig()
    assert (cfg.n, cfg.epochs, cfg.batch_size, cfg.T, cfg.samples_per_iter, cfg.M) == (500, 30, 16, 30, 50, 4)
    assert (cfg.lam, cfg.w_fixed, cfg.H, cfg.L, cfg.k, cfg.lr, cfg.weight_decay) == (1.0, 0.01, 32, 12, 50, 1e-3, 0.01)
