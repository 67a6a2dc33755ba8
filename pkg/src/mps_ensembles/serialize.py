"""Self-describing binary container for MPS states.

Layout (all integers little-endian):

    magic   4 bytes  b"MPSE"
    version u32      currently 1
    N       u32      number of site tensors
    d       u32      local dimension
    center  i32      orthogonality center, -1 when unset
    uniform u8       translation-invariance flag
    then per site: chi_l u32, d u32, chi_r u32, tensor data as
    little-endian complex doubles in C order.

A JSON sidecar (same path plus ``.json``) records provenance, typically
the generating CircuitSpec.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .mps import MpsState

MAGIC = b"MPSE"
VERSION = 1
_HEADER = struct.Struct("<4sIIIiB")
_SITE = struct.Struct("<III")


def save_mps(state: MpsState, path, provenance: dict | None = None) -> Path:
    """Write ``state`` to ``path`` and provenance to ``path + '.json'``."""
    path = Path(path)
    center = -1 if state.ortho_center is None else state.ortho_center
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, len(state), state.d, center,
                              1 if state.uniform else 0))
        for t in state.tensors:
            chi_l, d, chi_r = t.shape
            fh.write(_SITE.pack(chi_l, d, chi_r))
            fh.write(np.ascontiguousarray(t, dtype="<c16").tobytes())
    sidecar = {"format": "mps-ensembles/mps", "version": VERSION,
               "provenance": provenance}
    with open(path.with_suffix(path.suffix + ".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
    return path


def load_mps(path) -> tuple[MpsState, dict | None]:
    """Read a state written by :func:`save_mps`.

    Returns:
        The state and the provenance dict from the sidecar (None if the
        sidecar is missing).

    Raises:
        ConfigError: on bad magic bytes or unsupported version.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        magic, version, n, d, center, uniform = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != MAGIC:
            raise ConfigError(f"{path}: not an MPS container (magic {magic!r})")
        if version != VERSION:
            raise ConfigError(f"{path}: unsupported container version {version}")
        tensors = []
        for _ in range(n):
            chi_l, d_site, chi_r = _SITE.unpack(fh.read(_SITE.size))
            count = chi_l * d_site * chi_r
            data = np.frombuffer(fh.read(16 * count), dtype="<c16")
            tensors.append(data.reshape(chi_l, d_site, chi_r).astype(np.complex128))
    state = MpsState(tensors, d, None if center < 0 else center, bool(uniform))
    sidecar_path = path.with_suffix(path.suffix + ".json")
    provenance = None
    if sidecar_path.exists():
        with open(sidecar_path) as fh:
            provenance = json.load(fh).get("provenance")
    return state, provenance
