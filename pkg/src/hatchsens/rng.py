"""Named deterministic random streams derived from one master seed.

Each subsystem (plant noise, uplink, downlink) gets its own stream so that
drawing from one never perturbs another; a run is reproduced bit-for-bit
from (config, seed) alone.
"""

from __future__ import annotations

import hashlib
import random


def derive_stream_seed(master_seed: int, stream_name: str) -> int:
    digest = hashlib.sha256(f"{master_seed}:{stream_name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def stream(master_seed: int, stream_name: str) -> random.Random:
    return random.Random(derive_stream_seed(master_seed, stream_name))
