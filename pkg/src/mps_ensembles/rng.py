"""Deterministic substream discipline for ensemble sweeps.

Every random draw in a circuit realization comes from one of three named
substreams of a counter-based Philox generator, keyed by
``(master_seed, realization_index, stream_role)``. This makes sweeps
reproducible regardless of worker scheduling, and makes a monitored run
at p = 0 bit-identical to the corresponding unitary run (the coin and
outcome streams are consumed independently of the gate stream).
"""

from __future__ import annotations

import numpy as np

GATES = 0
MEASUREMENT_COINS = 1
MEASUREMENT_OUTCOMES = 2

_ROLES = {"gates": GATES, "coins": MEASUREMENT_COINS, "outcomes": MEASUREMENT_OUTCOMES}


def substream(master_seed: int, realization: int, role: int | str) -> np.random.Generator:
    """Philox generator for one (realization, role) substream.

    Args:
        master_seed: 64-bit master seed of the sweep.
        realization: realization index within the sweep grid point.
        role: one of ``"gates"``, ``"coins"``, ``"outcomes"`` (or the
            corresponding integer constant).
    """
    role_id = _ROLES[role] if isinstance(role, str) else int(role)
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(realization), role_id))
    return np.random.Generator(np.random.Philox(seq))


def stream_fingerprint(master_seed: int, realization: int) -> int:
    """Stable 63-bit identifier recorded next to per-realization output rows."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(realization),))
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
