"""Seeded random streams.

Every random draw goes through ``numpy.random.Generator`` on the PCG64 bit
generator. Independent sub-streams are obtained with
``SeedSequence(seed).spawn(k)``: stream i of seed s is always the i-th child,
whatever the number of workers.
"""
from typing import List

import numpy as np
import torch


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def split_rngs(seed: int, k: int) -> List[np.random.Generator]:
    children = np.random.SeedSequence(int(seed)).spawn(k)
    return [np.random.Generator(np.random.PCG64(child)) for child in children]


def child_seeds(seed: int, k: int) -> List[int]:
    """Integer seeds for k independent jobs derived from ``seed``."""
    children = np.random.SeedSequence(int(seed)).spawn(k)
    return [int(child.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1)) for child in children]


def seed_everything(seed: int) -> None:
    torch.manual_seed(int(seed) % (2 ** 63))
