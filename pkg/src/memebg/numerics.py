"""Dense matrix helpers and a seeded, portable pseudo-random generator.

Matrices are plain 2-D C-contiguous ``numpy.float64`` arrays throughout the
toolkit; ``matrix()`` builds one and the operations here enforce that
convention (finite entries, explicit shape checks).

Randomness comes from :class:`Rng`, a hand-rolled xoshiro256** generator
seeded through splitmix64.  The integer stream depends only on 64-bit
integer arithmetic, so a given seed yields a byte-identical stream on every
platform and Python version.  Gaussian variates are produced from that
stream with the Box-Muller transform (two uniforms in, two normals out, the
second cached), which is deterministic per platform up to libm rounding of
``log``/``cos``/``sin``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ShapeError

_MASK64 = 0xFFFFFFFFFFFFFFFF


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31), state


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Rng:
    """xoshiro256** generator with splitmix64 seed expansion.

    The four 64-bit state words are the first four splitmix64 outputs for
    the seed, so any 64-bit seed (including 0) is valid.
    """

    def __init__(self, seed: int):
        if not 0 <= seed <= _MASK64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
        self.seed = seed
        s = []
        sm = seed
        for _ in range(4):
            out, sm = _splitmix64(sm)
            s.append(out)
        self._s = s
        self._spare_normal: float | None = None

    def next_u64(self) -> int:
        """Next raw 64-bit unsigned integer of the stream."""
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def normal(self) -> float:
        """Standard normal variate via Box-Muller."""
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
            return z
        # u1 in (0, 1] so the log is finite; u2 in [0, 1).
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53
        u2 = (self.next_u64() >> 11) * 2.0**-53
        r = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare_normal = r * math.sin(theta)
        return r * math.cos(theta)

    def below(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError(f"n must be positive, got {n}")
        limit = (2**64 // n) * n
        x = self.next_u64()
        while x >= limit:
            x = self.next_u64()
        return x % n

    def permutation(self, n: int) -> list[int]:
        """Fisher-Yates shuffle of range(n), swapping from the top down."""
        order = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            order[i], order[j] = order[j], order[i]
        return order

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle with the same sweep as permutation."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def matrix(data) -> np.ndarray:
    """Coerce nested sequences / arrays to a 2-D C-contiguous float64 array."""
    a = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={a.ndim}")
    if not np.isfinite(a).all():
        raise ValueError("matrix entries must be finite")
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with 64-bit accumulation and explicit shape checking."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(
            f"matmul needs 2-D operands, got ndim {a.ndim} and {b.ndim}"
        )
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = a @ b
    if not np.isfinite(out).all():
        raise ValueError("matmul produced non-finite entries")
    return out


def gauss_sample(
    rng: Rng, rows: int, cols: int, mean: float = 0.0, stddev: float = 1.0
) -> np.ndarray:
    """rows x cols matrix of i.i.d. normal entries, filled in row-major order.

    Consumes the rng identically for every stddev, so stddev=0 yields a
    constant matrix without disturbing the stream.
    """
    if rows < 0 or cols < 0:
        raise ValueError(f"dimensions must be non-negative, got {rows}x{cols}")
    if stddev < 0:
        raise ValueError(f"stddev must be non-negative, got {stddev}")
    out = np.empty((rows, cols), dtype=np.float64)
    flat = out.reshape(-1)
    for i in range(flat.size):
        flat[i] = mean + stddev * rng.normal()
    return out
