"""Keyed derivation of RNG seeds from one root seed.

Every random stream in a run is seeded as derive_seed(root, label, index),
so adding streams (more orientations, more error realizations) never
perturbs existing ones.
"""

import hashlib


def derive_seed(root: int, label: str, index: int = 0) -> int:
    """64-bit seed from (root, purpose label, index) via SHA-256."""
    digest = hashlib.sha256(f"{root}/{label}/{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")
