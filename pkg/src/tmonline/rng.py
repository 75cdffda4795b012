"""Counter-based 64-bit randomizer.

Draw ``i`` (1-based) of a stream with seed ``k`` is
``splitmix64_finalize(k + i * 0x9E3779B97F4A7C15)``. Being a pure function of
``(seed, counter)`` it vectorizes in numpy and runs as scalar code inside
numba kernels with identical output, which keeps both kernel backends
bit-compatible.
"""
import numpy as np

from ._jit import optional_njit

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 2.0 ** -53

_GOLDEN_U = np.uint64(GOLDEN)
_M1_U = np.uint64(_M1)
_M2_U = np.uint64(_M2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)


def mix64(z: int) -> int:
    """splitmix64 output function on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def raw_draw(seed: int, counter: int) -> int:
    return mix64(seed + counter * GOLDEN)


def derive_seed(master_seed: int, index: int) -> int:
    """Sub-seed for stream ``index``: draw ``index + 1`` of the master stream.

    Stable under partial re-runs: ordering 17 gets the same seed whether or
    not orderings 0..16 were run first.
    """
    return raw_draw(master_seed & MASK64, index + 1)


def uniforms_np(seed: int, counter: int, n: int) -> np.ndarray:
    """Draws ``counter+1 .. counter+n`` as float64 in [0, 1)."""
    c = np.arange(counter + 1, counter + n + 1, dtype=np.uint64)
    z = np.uint64(seed & MASK64) + c * _GOLDEN_U
    z = (z ^ (z >> _S30)) * _M1_U
    z = (z ^ (z >> _S27)) * _M2_U
    z = z ^ (z >> _S31)
    return (z >> _S11).astype(np.float64) * _INV53


@optional_njit(cache=True, inline="always")
def uniform_at(seed, counter):
    """Scalar draw for use inside kernels; ``seed`` uint64, ``counter`` int."""
    z = seed + np.uint64(counter) * _GOLDEN_U
    z = (z ^ (z >> _S30)) * _M1_U
    z = (z ^ (z >> _S27)) * _M2_U
    z = z ^ (z >> _S31)
    return float(z >> _S11) * _INV53


class Randomizer:
    """Seedable stream of uniform draws. Same seed, same sequence."""

    def __init__(self, seed: int = 0, counter: int = 0):
        self.seed = int(seed) & MASK64
        self.counter = int(counter)

    def __repr__(self):
        return f"Randomizer(seed={self.seed}, counter={self.counter})"

    def uniform(self) -> float:
        self.counter += 1
        return (raw_draw(self.seed, self.counter) >> 11) * _INV53

    def uniforms(self, n: int) -> np.ndarray:
        out = uniforms_np(self.seed, self.counter, n)
        self.counter += n
        return out

    def bernoulli(self, p: float) -> bool:
        return self.uniform() < p

    def randbelow(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        return int(self.uniform() * n)

    def permutation(self, n: int) -> np.ndarray:
        keys = self.uniforms(n)
        return np.argsort(keys, kind="stable")

    def spawn(self, index: int) -> "Randomizer":
        return Randomizer(derive_seed(self.seed, index))

    def state(self):
        return self.seed, self.counter

    def copy(self) -> "Randomizer":
        return Randomizer(self.seed, self.counter)
