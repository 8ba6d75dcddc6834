"""Keyed, counter-based random number streams.

Every stochastic ingredient of a run (path noise, forecast uniforms,
observation noise) is drawn from a Philox stream addressed by a
:class:`StreamKey`.  Streams for distinct keys are statistically
independent and a given key always replays the identical variate
sequence, so results do not depend on scheduling or batch layout.

Gaussian variates are produced by the inverse normal CDF applied to
53-bit midpoint uniforms (never exactly 0 or 1).  This avoids the
ziggurat tables of ``Generator.standard_normal`` and keeps the
uniform-to-Gaussian map an explicit, platform-stable transform.
"""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy.special import ndtri

from .errors import InvalidStepError

_LEVEL_BITS = 12
_INDEX_BITS = 48
_U53 = float(2**53)


class StreamPurpose(IntEnum):
    """Disambiguates streams that share (seed, level, index)."""

    PATH_NOISE = 0
    QUANTILE_UNIFORM = 1
    OBSERVATION_NOISE = 2


@dataclass(frozen=True)
class StreamKey:
    """Address of one independent random stream.

    Attributes:
        experiment_seed: 64-bit master seed shared by a whole run.
        level: resolution level the stream drives (>= 0).
        sample_index: ensemble-member or forecast-time index (>= 0).
        purpose: what the variates are used for.
    """

    experiment_seed: int
    level: int
    sample_index: int
    purpose: StreamPurpose = StreamPurpose.PATH_NOISE

    def __post_init__(self):
        if not 0 <= self.level < 2**_LEVEL_BITS:
            raise ValueError(f"level must be in [0, {2**_LEVEL_BITS}), got {self.level}")
        if not 0 <= self.sample_index < 2**_INDEX_BITS:
            raise ValueError(
                f"sample_index must be in [0, {2**_INDEX_BITS}), got {self.sample_index}"
            )
        if not -(2**63) <= self.experiment_seed < 2**64:
            raise ValueError("experiment_seed must fit in 64 bits")

    def philox_key(self):
        """Two 64-bit words identifying the Philox counter stream."""
        word0 = np.uint64(self.experiment_seed % 2**64)
        word1 = (
            (np.uint64(int(self.purpose)) << np.uint64(_LEVEL_BITS + _INDEX_BITS))
            | (np.uint64(self.level) << np.uint64(_INDEX_BITS))
            | np.uint64(self.sample_index)
        )
        return word0, word1


def generator(key: StreamKey) -> np.random.Generator:
    """Fresh generator positioned at the start of the key's stream."""
    return np.random.Generator(np.random.Philox(key=list(key.philox_key())))


def uniform(key: StreamKey, count: int) -> np.ndarray:
    """First ``count`` uniform variates on [0, 1) of the key's stream."""
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    return generator(key).random(count)


def standard_normals(gen: np.random.Generator, count: int) -> np.ndarray:
    """Draw ``count`` N(0, 1) variates from an open generator.

    Uses ndtri((k + 0.5) / 2^53) on 53-bit integers, one 64-bit word per
    variate, so splitting a request into chunks yields the same sequence
    as a single request.
    """
    bits = gen.integers(0, 2**53, size=count, dtype=np.uint64)
    return ndtri((bits.astype(np.float64) + 0.5) / _U53)


def gaussian_increments(key: StreamKey, count: int, step: float) -> np.ndarray:
    """First ``count`` N(0, step) variates of the key's stream.

    These are Brownian increments over intervals of length ``step``.
    """
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    if step <= 0:
        raise InvalidStepError(f"step must be > 0, got {step}")
    return np.sqrt(step) * standard_normals(generator(key), count)


class NormalStream:
    """Stateful reader of one key's N(0, 1) sequence.

    Sequential ``take`` calls walk the stream; the concatenation of
    chunked takes equals one big take, so consumers may draw in whatever
    block sizes are convenient without changing the realized path.
    ``buffer`` > 0 prefetches that many variates at a time, which cuts
    per-call overhead for long simulations without altering the
    sequence served.
    """

    def __init__(self, key: StreamKey, buffer: int = 0):
        self.key = key
        self._gen = generator(key)
        self._buffer_size = buffer
        self._buffer = np.empty(0)
        self._pos = 0

    def take(self, count: int) -> np.ndarray:
        if self._buffer_size == 0:
            return standard_normals(self._gen, count)
        available = len(self._buffer) - self._pos
        if available < count:
            fresh = standard_normals(self._gen, max(count - available, self._buffer_size))
            self._buffer = np.concatenate([self._buffer[self._pos:], fresh])
            self._pos = 0
        out = self._buffer[self._pos:self._pos + count].copy()
        self._pos += count
        return out
