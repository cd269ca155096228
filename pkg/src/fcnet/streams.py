"""Counter-style random streams keyed by ``(seed, entity)``.

Each entity (a place's routing, a transition's firing times) owns an
independent generator.  The n-th value of an entity's stream is therefore a
function of ``(seed, entity, n)`` only, whatever order the simulation asks
for values in.
"""

from __future__ import annotations

import hashlib

import numpy as np

_BATCH = 256


def entity_key(kind: str, name: str) -> list[int]:
    digest = hashlib.blake2b(f"{kind}\x00{name}".encode(), digest_size=16).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def entity_generator(seed: int, kind: str, name: str) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=entity_key(kind, name))
    return np.random.Generator(np.random.Philox(ss))


class UniformStream:
    """Lazily materialised uniform(0, 1) sequence for one entity; values are 1-indexed."""

    __slots__ = ("_gen", "_values")

    def __init__(self, seed: int, kind: str, name: str):
        self._gen = entity_generator(seed, kind, name)
        self._values: list[float] = []

    def __getitem__(self, n: int) -> float:
        if n < 1:
            raise IndexError("stream values are numbered from 1")
        while len(self._values) < n:
            self._values.extend(self._gen.random(_BATCH).tolist())
        return self._values[n - 1]
