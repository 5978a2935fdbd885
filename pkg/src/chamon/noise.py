"""I.i.d. depolarizing noise with counter-keyed, order-independent random streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from chamon.lattice import ChamonLattice
from chamon.pauli import PauliOp

# Stream tags keep the error draw and the decoder's own randomness independent.
STREAM_ERROR = 0
STREAM_DECODER = 1


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream identified by ``(seed, *key)``.

    The stream depends only on the key, never on how many other streams were
    drawn before it, so trials can be replayed individually and in any order.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in key)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def rate_key(p: float) -> int:
    """Integer key for an error rate (nanounits)."""
    return int(round(p * 1e9))


@dataclass(frozen=True)
class DepolarizingChannel:
    """Each qubit independently suffers X, Y or Z with probability ``p/3`` each."""

    p: float
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"error rate must lie in [0, 1], got {self.p}")

    def rng(self, draw: int, *key: int) -> np.random.Generator:
        return trial_rng(self.rng_seed, *key, draw, STREAM_ERROR)

    def sample_codes(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Per-qubit Pauli codes (0=I, 1=X, 2=Y, 3=Z), one uniform draw per qubit."""
        u = rng.random(n)
        third = self.p / 3.0
        codes = np.zeros(n, dtype=np.int8)
        codes[u < self.p] = 3
        codes[u < 2 * third] = 2
        codes[u < third] = 1
        return codes

    def sample(self, lattice: ChamonLattice, draw: int, *key: int) -> PauliOp:
        return PauliOp.from_codes(self.sample_codes(lattice.n, self.rng(draw, *key)))


def sample_error(channel: DepolarizingChannel, lattice: ChamonLattice, draw: int = 0) -> PauliOp:
    """The ``draw``-th error of ``channel`` on ``lattice``; deterministic in (seed, draw)."""
    return channel.sample(lattice, draw)
