"""
Addressable random streams.

Every stream is a pure function of (master seed, experiment tag, sample index, role, substream):
any sample can be re-derived without replaying the ones before it, so workers may process
samples in any order and quenched experiments can redraw colours on a fixed environment.
"""

import hashlib
import math
from enum import IntEnum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .misc import DEFAULT_SEED, POISSON_INVERSION_THRESHOLD


class StreamRole(IntEnum):
    """
    What a stream is used for. Streams with different roles are independent
    """

    ENVIRONMENT = 0
    COLOR = 1
    AUXILIARY = 2


class SeedSpec(BaseModel):
    """
    Master seed plus a short tag naming the experiment that consumes it
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    master_seed: int = Field(default=DEFAULT_SEED, ge=0, lt=2**64)
    experiment_tag: str = Field(default="default", min_length=1)

    def child(self, suffix: str) -> "SeedSpec":
        """Seed for a sub-experiment. Same master seed, tag extended by [suffix]"""
        return SeedSpec(
            master_seed=self.master_seed, experiment_tag=f"{self.experiment_tag}/{suffix}"
        )

    @property
    def tag_hash(self) -> int:
        """Stable 64-bit hash of the tag (the builtin hash() is salted per process)"""
        digest = hashlib.blake2b(self.experiment_tag.encode(), digest_size=8).digest()
        return int.from_bytes(digest, "little")


def derive_stream(
    seed: SeedSpec, sample_index: int, role: StreamRole, substream: int = 0
) -> np.random.Generator:
    """
    Return the random stream addressed by (seed, sample_index, role, substream).

    The bit generator is Philox, a counter-based generator: identical inputs give identical
    sequences, distinct inputs give statistically independent ones.
    [substream] numbers repeated draws of the same role for one sample (e.g. the k-th colouring
    of a fixed environment).
    """
    if sample_index < 0:
        raise ValueError(f"Sample index must be >= 0, got {sample_index}")
    if substream < 0:
        raise ValueError(f"Substream must be >= 0, got {substream}")
    seq = np.random.SeedSequence(
        entropy=seed.master_seed,
        spawn_key=(seed.tag_hash, sample_index, int(role), substream),
    )
    return np.random.Generator(np.random.Philox(seq))


def poisson_count(stream: np.random.Generator, mean: float) -> int:
    """
    Draw a Poisson(mean) count.

    Below POISSON_INVERSION_THRESHOLD the count is found by sequential inversion of one uniform;
    above it numpy's transformed-rejection sampler (PTRS) is used.
    """
    if not math.isfinite(mean) or mean < 0:
        raise ValueError(f"Poisson mean must be finite and >= 0, got {mean}")
    if mean == 0:
        return 0
    if mean >= POISSON_INVERSION_THRESHOLD:
        return int(stream.poisson(mean))

    u = stream.random()
    k = 0
    prob = math.exp(-mean)
    cumulative = prob
    while u > cumulative and prob > 0:
        k += 1
        prob *= mean / k
        cumulative += prob
    return k
