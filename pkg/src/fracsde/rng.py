"""Deterministic counter-based randomness.

Every random draw in the package is addressed, not sequenced: a draw is
identified by (seed, lane, row, position) where the lane is a 64-bit hash
of a purpose string such as ``"noise/v:3"`` and the row is typically a path
index. Regenerating any slice therefore needs no generator state, draws are
reproducible under any work partitioning, and two ensembles that share a
lane share the same underlying variates (useful for coupling runs that
differ only in a nuisance parameter).

Words come from the Philox4x64-10 block cipher keyed by (seed, lane) with
the row index in the counter. Uniform and normal conversions use the
standard 53-bit mantissa map and the inverse normal CDF.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

from ._accel import philox_words

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 1 << 64

_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53
_HALF_ULP = 1.0 / 18014398509481984.0  # 2**-54
_BELOW_ONE = float(np.nextafter(1.0, 0.0))


def fnv1a64(data: bytes | str) -> int:
    """FNV-1a 64-bit hash of a byte string (strings are UTF-8 encoded)."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) % _U64
    return h


def lane(name: str) -> int:
    """Lane id for a purpose string."""
    return fnv1a64(name)


def raw_words(seed: int, lane_id: int, rows: np.ndarray | int, n_words: int) -> np.ndarray:
    """The (rows, n_words) uint64 word table for a (seed, lane) key.

    ``rows`` may be an integer m (meaning rows 0..m-1) or an explicit array
    of row indices. Row r's words are independent of which other rows are
    requested alongside it.
    """
    if np.isscalar(rows):
        rows = np.arange(int(rows), dtype=np.uint64)
    return philox_words(int(seed) % _U64, int(lane_id) % _U64, rows, n_words)


def words_to_uniform(words: np.ndarray) -> np.ndarray:
    """Map uint64 words to doubles in the open interval (0, 1).

    The half-ulp offset keeps 0 out, but at the very top of the range the
    sum rounds up to 1.0 (the offset needs a 54th mantissa bit there), so
    the maximal bucket is clamped to the largest double below 1. Without
    the clamp the inverse normal CDF turns those words into infinities.
    """
    u = (words >> np.uint64(11)).astype(np.float64) * _INV_2_53 + _HALF_ULP
    return np.minimum(u, _BELOW_ONE)


def uniforms(seed: int, lane_id: int, rows, n: int) -> np.ndarray:
    return words_to_uniform(raw_words(seed, lane_id, rows, n))


def normals(seed: int, lane_id: int, rows, n: int) -> np.ndarray:
    """Standard normal table, one row per requested row index."""
    return ndtri(uniforms(seed, lane_id, rows, n))


def permutations(seed: int, lane_id: int, n_perms: int, size: int) -> np.ndarray:
    """(n_perms, size) array of permutation index rows.

    Each row is the argsort of that row's uniform draws, so permutation r
    depends only on (seed, lane, r).
    """
    u = uniforms(seed, lane_id, n_perms, size)
    return np.argsort(u, axis=1, kind="stable")
