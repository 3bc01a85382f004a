"""Sign + decimal-digit codes for coordinate offsets in (-1, 1).

An offset is ``sign * sum_m digit_m * 10**-m`` for ``m = 1..M``. Zero has two
spellings; the canonical one carries sign ``+1``.

Feature layout of one code (length ``2 + 10*M``), frozen because checkpoints
depend on it::

    [sign=-1, sign=+1, digit_1 one-hot (10), ..., digit_M one-hot (10)]
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# slack, in units of the last digit, that absorbs representation error
# (0.29 * 100 == 28.999999999999996) when truncating
_SNAP = 1e-7


class CodecError(ValueError):
    pass


@dataclass(frozen=True)
class OffsetCode:
    sign: int
    digits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))
        if self.sign not in (-1, 1):
            raise CodecError(f"sign must be -1 or +1, got {self.sign}")
        if not self.digits:
            raise CodecError("at least one digit is required")
        for d in self.digits:
            if not 0 <= d <= 9:
                raise CodecError(f"digit out of range 0..9: {d}")

    @property
    def M(self) -> int:
        return len(self.digits)

    @property
    def is_canonical(self) -> bool:
        return self.sign == 1 or any(self.digits)


def max_offset(M: int) -> float:
    """Largest representable magnitude, ``1 - 10**-M``."""
    return (10**M - 1) / 10**M


def _digits_to_int(digits: np.ndarray) -> np.ndarray:
    M = digits.shape[-1]
    weights = 10 ** np.arange(M - 1, -1, -1, dtype=np.int64)
    return np.sum(digits.astype(np.int64) * weights, axis=-1)


def decode(code: OffsetCode) -> float:
    """``sign * 0.d1 d2 ... dM``."""
    k = int(_digits_to_int(np.asarray(code.digits)))
    return code.sign * (k / 10**code.M)


def encode(x: float, M: int) -> OffsetCode:
    """Truncate ``x`` toward zero to ``M`` decimal digits."""
    x = float(x)
    if not np.isfinite(x) or abs(x) >= 1.0:
        raise CodecError(f"offset must lie in (-1, 1), got {x}")
    signs, digits = encode_array(np.array([x]), M)
    return OffsetCode(int(signs[0]), tuple(int(d) for d in digits[0]))


def one_hot_features(code: OffsetCode) -> np.ndarray:
    return one_hot_array(np.array([code.sign]), np.array([code.digits]))[0]


# -- array versions ---------------------------------------------------------


def encode_array(x: np.ndarray, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`encode`: returns ``signs`` (int8, +-1) and ``digits``
    with a trailing axis of length ``M``."""
    if M < 1:
        raise CodecError("M must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) >= 1.0):
        raise CodecError("offsets must lie in (-1, 1)")
    scale = 10**M
    k = np.floor(np.abs(x) * scale + _SNAP).astype(np.int64)
    k = np.minimum(k, scale - 1)
    signs = np.where(x < 0, -1, 1).astype(np.int8)
    signs[k == 0] = 1
    powers = 10 ** np.arange(M - 1, -1, -1, dtype=np.int64)
    digits = (k[..., None] // powers) % 10
    return signs, digits.astype(np.int8)


def decode_array(signs: np.ndarray, digits: np.ndarray) -> np.ndarray:
    M = digits.shape[-1]
    return np.asarray(signs, dtype=np.float64) * (_digits_to_int(digits) / 10**M)


def one_hot_array(signs: np.ndarray, digits: np.ndarray) -> np.ndarray:
    """Features of shape ``signs.shape + (2 + 10*M,)``."""
    signs = np.asarray(signs)
    digits = np.asarray(digits, dtype=np.int64)
    M = digits.shape[-1]
    out = np.zeros(signs.shape + (2 + 10 * M,), dtype=np.float64)
    sign_slot = (signs > 0).astype(np.int64)
    np.put_along_axis(out, sign_slot[..., None], 1.0, axis=-1)
    cols = 2 + 10 * np.arange(M) + digits
    np.put_along_axis(out, cols, 1.0, axis=-1)
    return out
