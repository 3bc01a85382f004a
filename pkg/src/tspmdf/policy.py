"""From head outputs to sampled coordinate modifications and their log-probabilities.

Discrete head, per node, ``2*(2 + 10*M)`` logits laid out as::

    [dim1 sign (2) | dim1 digit_1 .. digit_M (10 each) | dim2 sign (2) | dim2 digits]

Gaussian head (ablation), per node: ``[mu_1, rho_1, mu_2, rho_2]`` with
``sigma = softplus(rho) + 1e-3``.

Arrays describing modifications may carry a leading sample axis; every
function below accepts either a single modification or a stack of them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_softmax

from .codec import CodecError, decode_array, max_offset
from .core import TspInstance

SIGMA_FLOOR = 1e-3
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class NodeDistributions:
    log_sign: np.ndarray  # (n, 2, 2); slot 0 is sign -1, slot 1 is sign +1
    log_digit: np.ndarray  # (n, 2, M, 10)

    @property
    def M(self) -> int:
        return self.log_digit.shape[2]

    @property
    def n(self) -> int:
        return self.log_sign.shape[0]

    @property
    def sign_probs(self) -> np.ndarray:
        return np.exp(self.log_sign)

    @property
    def digit_probs(self) -> np.ndarray:
        return np.exp(self.log_digit)


@dataclass(frozen=True, eq=False)
class Modification:
    """Per node and dimension an offset; ``signs``/``digits`` hold the discrete
    code, ``raw`` the pre-clamp Gaussian draw. ``delta`` is what gets added."""

    delta: np.ndarray
    signs: np.ndarray | None = None
    digits: np.ndarray | None = None
    raw: np.ndarray | None = None

    def __len__(self) -> int:
        return self.delta.shape[0]

    def __getitem__(self, idx) -> "Modification":
        pick = lambda a: None if a is None else a[idx]  # noqa: E731
        return Modification(self.delta[idx], pick(self.signs), pick(self.digits), pick(self.raw))


def zero_modification(n: int, M: int) -> Modification:
    return Modification(
        delta=np.zeros((n, 2)),
        signs=np.ones((n, 2), dtype=np.int8),
        digits=np.zeros((n, 2, M), dtype=np.int8),
        raw=np.zeros((n, 2)),
    )


# -- discrete head ------------------------------------------------------------


def heads_to_distributions(logits: np.ndarray, M: int) -> NodeDistributions:
    logits = np.asarray(logits, dtype=np.float64)
    width = 2 * (2 + 10 * M)
    if logits.ndim != 2 or logits.shape[1] != width:
        raise ValueError(f"expected logits of shape (n, {width}), got {logits.shape}")
    blocks = logits.reshape(-1, 2, 2 + 10 * M)
    log_sign = log_softmax(blocks[..., :2], axis=-1)
    log_digit = log_softmax(blocks[..., 2:].reshape(-1, 2, M, 10), axis=-1)
    return NodeDistributions(log_sign, log_digit)


def uniform_distributions(n: int, M: int) -> NodeDistributions:
    return heads_to_distributions(np.zeros((n, 2 * (2 + 10 * M))), M)


def _categorical(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs, axis=-1)
    idx = np.sum(u[..., None] >= cdf, axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def sample_modifications(dists: NodeDistributions, rng: np.random.Generator, count: int) -> Modification:
    """Draw ``count`` independent modifications (leading axis ``count``)."""
    n, M = dists.n, dists.M
    u_sign = rng.random((count, n, 2))
    u_digit = rng.random((count, n, 2, M))
    sign_idx = _categorical(dists.sign_probs, u_sign)
    digits = _categorical(dists.digit_probs, u_digit).astype(np.int8)
    signs = np.where(sign_idx == 1, 1, -1).astype(np.int8)
    signs[~digits.any(axis=-1)] = 1
    return Modification(decode_array(signs, digits), signs, digits)


def sample_modification(dists: NodeDistributions, rng: np.random.Generator) -> Modification:
    return sample_modifications(dists, rng, 1)[0]


def _check_canonical(mod: Modification):
    if mod.signs is None or mod.digits is None:
        raise CodecError("modification carries no discrete code")
    if np.any((mod.signs != 1) & ~mod.digits.any(axis=-1)):
        raise CodecError("non-canonical code: zero offset must carry sign +1")


def log_prob(dists: NodeDistributions, mod: Modification):
    """Sum of selected log-probabilities over nodes, dimensions and blocks.

    Returns a float for a single modification, an array for a stack.
    """
    _check_canonical(mod)
    slot = (mod.signs > 0).astype(np.int64)
    batched = slot.ndim == 3
    ls = np.broadcast_to(dists.log_sign, slot.shape + (2,)) if batched else dists.log_sign
    ld = np.broadcast_to(dists.log_digit, mod.digits.shape + (10,)) if batched else dists.log_digit
    lp_sign = np.take_along_axis(ls, slot[..., None], axis=-1)[..., 0]
    lp_digit = np.take_along_axis(ld, mod.digits.astype(np.int64)[..., None], axis=-1)[..., 0]
    total = lp_sign.sum(axis=(-1, -2)) + lp_digit.sum(axis=(-1, -2, -3))
    return float(total) if not batched else total


def log_prob_grad(dists: NodeDistributions, mod: Modification, coef) -> np.ndarray:
    """Logit gradient of ``sum_s coef[s] * log_prob(dists, mod[s])``.

    For a softmax block this is ``sum_s coef[s] * onehot_s - sum(coef) * probs``.
    """
    _check_canonical(mod)
    signs, digits = mod.signs, mod.digits
    if signs.ndim == 2:
        signs, digits = signs[None], digits[None]
    coef = np.broadcast_to(np.asarray(coef, dtype=np.float64), (signs.shape[0],))
    n, M = dists.n, dists.M
    slot = (signs > 0).astype(np.int64)
    g_sign = np.zeros((n, 2, 2))
    g_sign[..., 1] = np.tensordot(coef, slot, axes=1)
    g_sign[..., 0] = coef.sum() - g_sign[..., 1]
    onehot = digits[..., None] == np.arange(10)
    g_digit = np.tensordot(coef, onehot.astype(np.float64), axes=1)
    g_sign -= coef.sum() * dists.sign_probs
    g_digit -= coef.sum() * dists.digit_probs
    return np.concatenate([g_sign, g_digit.reshape(n, 2, 10 * M)], axis=-1).reshape(n, -1)


# -- applying modifications ---------------------------------------------------


def apply_offsets(s_star_xy: np.ndarray, s_xy: np.ndarray, delta: np.ndarray, M: int) -> np.ndarray:
    """``s_star + delta`` with the cumulative offset from ``s`` clamped to
    ``+-(1 - 10**-M)``. Broadcasts over a leading sample axis of ``delta``."""
    bound = max_offset(M)
    cand = s_star_xy + delta
    off = cand - s_xy
    over = np.abs(off) > bound
    if np.any(over):
        cand = np.where(over, s_xy + np.clip(off, -bound, bound), cand)
    return cand


def apply_modification(s_star: TspInstance, s: TspInstance, mod: Modification, M: int) -> TspInstance:
    if s_star.n != s.n or mod.delta.shape != (s.n, 2):
        raise ValueError("dimension mismatch between instances and modification")
    return TspInstance(apply_offsets(s_star.nodes, s.nodes, mod.delta, M))


# -- gaussian head (ablation) -------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaussianDistributions:
    mu: np.ndarray  # (n, 2)
    sigma: np.ndarray  # (n, 2)
    rho: np.ndarray  # pre-softplus scale parameter

    @property
    def n(self) -> int:
        return self.mu.shape[0]


def gaussian_heads(out: np.ndarray) -> GaussianDistributions:
    out = np.asarray(out, dtype=np.float64)
    if out.ndim != 2 or out.shape[1] != 4:
        raise ValueError(f"expected gaussian head of shape (n, 4), got {out.shape}")
    blocks = out.reshape(-1, 2, 2)
    mu, rho = blocks[..., 0], blocks[..., 1]
    sigma = np.logaddexp(0.0, rho) + SIGMA_FLOOR
    return GaussianDistributions(mu, sigma, rho)


def gaussian_log_density(mu, sigma, x):
    z = (x - mu) / sigma
    return np.sum(-0.5 * z * z - np.log(sigma) - 0.5 * _LOG_2PI, axis=(-1, -2))


def gaussian_variant_sample_and_logdensity(mu, sigma, rng: np.random.Generator, M: int = 4, count=None):
    """Draw offsets from independent normals and clamp them into
    ``+-(1 - 10**-M)``; the log-density is taken at the unclamped draw."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    shape = mu.shape if count is None else (count,) + mu.shape
    raw = mu + sigma * rng.standard_normal(shape)
    bound = max_offset(M)
    return np.clip(raw, -bound, bound), raw, gaussian_log_density(mu, sigma, raw)


def sample_gaussian(dists: GaussianDistributions, rng, count: int, M: int) -> Modification:
    delta, raw, _ = gaussian_variant_sample_and_logdensity(dists.mu, dists.sigma, rng, M, count)
    return Modification(delta=delta, raw=raw)


def gaussian_log_prob(dists: GaussianDistributions, mod: Modification):
    lp = gaussian_log_density(dists.mu, dists.sigma, mod.raw)
    return float(lp) if np.ndim(lp) == 0 else lp


def gaussian_log_prob_grad(dists: GaussianDistributions, mod: Modification, coef) -> np.ndarray:
    raw = mod.raw if mod.raw.ndim == 3 else mod.raw[None]
    coef = np.broadcast_to(np.asarray(coef, dtype=np.float64), (raw.shape[0],))
    diff = raw - dists.mu
    s = dists.sigma
    d_mu = np.tensordot(coef, diff, axes=1) / (s * s)
    d_sigma = np.tensordot(coef, diff * diff, axes=1) / s**3 - coef.sum() / s
    d_rho = d_sigma * expit(dists.rho)
    return np.stack([d_mu, d_rho], axis=-1).reshape(dists.n, 4)


# -- dispatch on head type ----------------------------------------------------


def distributions_for(head: str, out: np.ndarray, M: int):
    return gaussian_heads(out) if head == "gaussian" else heads_to_distributions(out, M)


def sample_for(head: str, dists, rng, count: int, M: int) -> Modification:
    if head == "gaussian":
        return sample_gaussian(dists, rng, count, M)
    return sample_modifications(dists, rng, count)


def log_prob_for(head: str, dists, mod: Modification):
    return gaussian_log_prob(dists, mod) if head == "gaussian" else log_prob(dists, mod)


def log_prob_grad_for(head: str, dists, mod: Modification, coef) -> np.ndarray:
    if head == "gaussian":
        return gaussian_log_prob_grad(dists, mod, coef)
    return log_prob_grad(dists, mod, coef)
