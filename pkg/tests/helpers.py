"""Shared generators for the test modules."""

import numpy as np

from fieldport.wick import OperatorWord, PointLabel, annihilate, create


def random_word_case(rng: np.random.Generator, max_n: int = 3, max_modes: int = 3):
    """A normal-form word with n annihilators and n creators on random mode vectors.

    Labels may repeat so that collapsed multiplicities are exercised too.
    """
    n = int(rng.integers(1, max_n + 1))
    modes = int(rng.integers(1, max_modes + 1))
    pool = [PointLabel(f"p{i}") for i in range(2 * n)]
    ann = [pool[int(rng.integers(0, 2 * n))] for _ in range(n)]
    cre = [pool[int(rng.integers(0, 2 * n))] for _ in range(n)]
    assignment = {
        lab: rng.normal(size=modes) + 1j * rng.normal(size=modes) for lab in pool
    }
    word = OperatorWord(tuple(annihilate(a) for a in ann) + tuple(create(c) for c in cre))
    return word, modes, assignment
