"""Counter-based random number streams for reproducible path ensembles.

Every random draw is addressed by (master seed, domain, path index, step
index, lane): the generator is the Philox-4x64-10 block cipher, so a draw
depends only on its address, never on how many other draws were made.  This
gives three properties the simulators rely on:

* identical (seed, path index) reproduces an identical path bit-for-bit,
* ensembles are independent of execution order and chunking, so parallel
  and serial runs agree exactly,
* a path can be replayed on demand (path functionals re-integrate along
  the trajectory without storing it).

The implementation is vectorized over counters with numpy uint64 ops and is
checked bit-exactly against ``numpy.random.Philox`` in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RngSpec", "philox4x64", "CounterStream"]

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)

_MASK32 = np.uint64(0xFFFFFFFF)
_SH32 = np.uint64(32)
_SH11 = np.uint64(11)
_INV53 = 1.0 / float(1 << 53)


def _mulhilo(a: np.uint64, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full 64x64 -> 128 bit product of scalar a with array b, as (hi, lo)."""
    lo = a * b  # wraps mod 2^64
    a_hi, a_lo = a >> _SH32, a & _MASK32
    b_hi, b_lo = b >> _SH32, b & _MASK32
    t = ((a_lo * b_lo) >> _SH32) + ((a_hi * b_lo) & _MASK32) + ((a_lo * b_hi) & _MASK32)
    hi = a_hi * b_hi + ((a_hi * b_lo) >> _SH32) + ((a_lo * b_hi) >> _SH32) + (t >> _SH32)
    return hi, lo


def philox4x64(c0, c1, c2, c3, key0: int, key1: int):
    """Philox-4x64 with 10 rounds, vectorized over counter arrays.

    Returns the four output words as uint64 arrays broadcast to the common
    shape of the counter inputs.  Matches numpy.random.Philox bit for bit.
    """
    c0 = np.asarray(c0, dtype=np.uint64)
    c1 = np.asarray(c1, dtype=np.uint64)
    c2 = np.asarray(c2, dtype=np.uint64)
    c3 = np.asarray(c3, dtype=np.uint64)
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0 = np.uint64(key0)
    k1 = np.uint64(key1)
    with np.errstate(over="ignore"):  # uint64 arithmetic is modular by design
        for _ in range(10):
            hi0, lo0 = _mulhilo(_M0, c0)
            hi1, lo1 = _mulhilo(_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
            k0 = k0 + _W0
            k1 = k1 + _W1
    return c0, c1, c2, c3


def _to_unit(word: np.ndarray) -> np.ndarray:
    # (0, 1]: the +1 keeps log() finite in Box-Muller
    return ((word >> _SH11) + np.uint64(1)).astype(np.float64) * _INV53


@dataclass(frozen=True)
class RngSpec:
    """Master seed plus the stream-derivation convention.

    ``seed`` is a 64-bit integer; streams for distinct purposes are separated
    by a small ``domain`` tag so that e.g. path increments and exit-point
    sampling never share counters.
    """

    seed: int

    def stream(self, domain: int) -> "CounterStream":
        return CounterStream(self.seed, domain)

    def generator(self, domain: int) -> np.random.Generator:
        """Bulk numpy generator for one-shot draws (not per-path streams)."""
        ss = np.random.SeedSequence(entropy=self.seed & 0xFFFFFFFFFFFFFFFF, spawn_key=(domain,))
        return np.random.Generator(np.random.Philox(ss))


class CounterStream:
    """Addressable stream: draws are pure functions of (path, step, lane)."""

    def __init__(self, seed: int, domain: int):
        self.key0 = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        self.key1 = np.uint64((domain * 0x9E3779B97F4A7C15 + 0x6A09E667F3BCC909) & 0xFFFFFFFFFFFFFFFF)

    def words(self, path_ids, step_ids, lane: int = 0):
        return philox4x64(path_ids, step_ids, np.uint64(lane), np.uint64(0), self.key0, self.key1)

    def uniforms4(self, path_ids, step_ids, lane: int = 0) -> np.ndarray:
        """Four uniforms on (0,1] per counter, shape (n, 4)."""
        w = self.words(path_ids, step_ids, lane)
        return np.stack([_to_unit(x) for x in w], axis=-1)

    def normals(self, path_ids, step_ids, count: int) -> np.ndarray:
        """``count`` independent standard normals per (path, step), shape (n, count).

        Uses Box-Muller on consecutive lanes; count up to 8 covers complex
        dimension m <= 4 (2m real coordinates per diffusion step).
        """
        return self.normals_and_uniform(path_ids, step_ids, count)[0]

    def normals_and_uniform(self, path_ids, step_ids, count: int):
        """Standard normals plus one extra uniform per (path, step).

        The uniform feeds the Brownian-bridge exit test; drawing it from the
        same counter block keeps simulation and replay in lockstep.
        """
        if not 1 <= count <= 8:
            raise ValueError(f"normal count {count} outside supported range 1..8")
        if count % 2:
            raise ValueError("normal count must be even (2m real coordinates)")
        words = []
        lane = 0
        while len(words) < count + 1:
            words.extend(self.words(path_ids, step_ids, lane))
            lane += 1
        us = [_to_unit(w) for w in words[:count + 1]]
        cols = []
        for i in range(0, count, 2):
            rad = np.sqrt(-2.0 * np.log(us[i]))
            ang = (2.0 * np.pi) * us[i + 1]
            cols.extend([rad * np.cos(ang), rad * np.sin(ang)])
        return np.stack(cols, axis=-1), us[count]
