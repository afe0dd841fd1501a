"""Deterministic seed derivation.

Every randomized stage derives its generator from a single master seed and an
integer path (a "counter scheme"): child streams are identified by tuples of
non-negative integers, e.g. ``(STREAM_CORPUS, class_id, jsr_index, k)``.
Two stages never share a stream, so adding samples or stages does not perturb
existing draws. Built on numpy's SeedSequence, whose expansion is stable for
a given (entropy, spawn_key).
"""

from __future__ import annotations

import numpy as np

# Top-level stream ids, one per randomized stage.
STREAM_SYNTH = 0
STREAM_CORPUS = 1
STREAM_SPLIT = 2
STREAM_PAIRS = 3
STREAM_TRAIN_INIT = 4
STREAM_SUPPORT = 5
STREAM_NOISE = 6


def child_seed(master_seed: int, *path: int) -> np.random.SeedSequence:
    """Seed sequence for the child stream identified by ``path``."""
    if master_seed < 0:
        raise ValueError("master seed must be non-negative")
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(p) for p in path))


def child_rng(master_seed: int, *path: int) -> np.random.Generator:
    """Independent generator for the child stream identified by ``path``."""
    return np.random.default_rng(child_seed(master_seed, *path))
