"""Counter-based random streams for reproducible parallel sampling.

Every logical sample (a drawn mapping, a branching-process trial, ...)
gets its own stream derived from ``(seed, index)``.  Streams are backed
by Philox counter blocks, so results do not depend on how samples are
partitioned across workers.
"""

import numpy as np

# Each sample owns a disjoint 2^192-block window of the Philox counter
# space, far more than any single sample can consume.
_WINDOW_SHIFT = 192


def substream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for sample ``index`` under ``seed``."""
    if index < 0:
        raise ValueError("sample index must be nonnegative")
    bits = np.random.Philox(key=seed & (2**64 - 1), counter=index << _WINDOW_SHIFT)
    return np.random.Generator(bits)


class StreamFamily:
    """Reusable view of the ``substream`` family keyed by one seed.

    ``jump(index)`` repositions the shared generator at the start of the
    sample window, producing draws identical to ``substream(seed, index)``
    while skipping per-sample generator construction (hot loops draw
    millions of samples).
    """

    def __init__(self, seed: int):
        self._bits = np.random.Philox(key=seed & (2**64 - 1))
        self.generator = np.random.Generator(self._bits)
        self._state = self._bits.state

    def jump(self, index: int) -> np.random.Generator:
        st = self._state
        inner = st["state"]
        inner["counter"][:] = 0
        inner["counter"][3] = index
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._bits.state = st
        return self.generator
