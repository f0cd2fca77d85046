"""Seed derivation.

Every random draw in the workbench comes from a generator built here, keyed by
an explicit 64-bit seed plus a path of labels (stage name, skill, template id,
...). Two calls with the same seed and labels give the same stream; changing
any label gives an independent one.
"""

import hashlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def derive_seed(seed: int, *labels: int | str) -> int:
    """Hash a base seed and a label path into a new 64-bit seed."""
    text = ":".join([str(seed & SEED_MASK), *(str(label) for label in labels)])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def make_rng(seed: int, *labels: int | str) -> np.random.Generator:
    """Generator for one labelled stream."""
    return np.random.default_rng(derive_seed(seed, *labels))
