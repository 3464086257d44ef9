import zlib

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator for a single integer seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def experiment_rng(name: str, horizon: int, n: int, seed_index: int, base_seed: int = 0) -> np.random.Generator:
    """
    Generator keyed by (experiment name, horizon, sample size, seed index).

    The key does not depend on the order in which rows are executed, so a sweep
    gives the same numbers with one worker or many.
    """
    entropy = [zlib.crc32(name.encode("utf-8")), int(horizon), int(n), int(seed_index), int(base_seed)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def categorical(rng: np.random.Generator, probabilities: np.ndarray) -> np.ndarray:
    """
    Draw one index per row of a (N, K) matrix of probability rows.

    Rounding in the cumulative sum never selects an index with zero probability.
    """
    probabilities = np.atleast_2d(probabilities)
    u = rng.random(probabilities.shape[0])
    index = (np.cumsum(probabilities, axis=1) < u[:, None]).sum(axis=1)
    positive = probabilities > 0
    first_positive = np.argmax(positive, axis=1)
    last_positive = probabilities.shape[1] - 1 - np.argmax(positive[:, ::-1], axis=1)
    return np.clip(index, first_positive, last_positive)
