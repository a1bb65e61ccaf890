import numpy as np


class SampleSeeder:
    """
    Counter-based random streams keyed by (seed, sample index).

    Each sample gets its own Philox stream, so the draws for sample i do not depend
    on how samples are split across workers or in which order they run.
    """

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError(f"Seed must be non-negative, got {seed}")
        self._base_seed = int(seed)

    @property
    def base_seed(self) -> int:
        return self._base_seed

    def stream(self, index: int) -> np.random.Generator:
        if index < 0:
            raise ValueError(f"Sample index must be non-negative, got {index}")
        return np.random.Generator(np.random.Philox(key=self._base_seed, counter=[0, 0, 0, index]))

    def uniforms(self, index: int, count: int = 2) -> np.ndarray:
        """The first `count` uniform [0, 1) draws of sample `index`."""
        return self.stream(index).random(count)
