"""Closed-form transfer matrices of the photonic primitives.

All matrices act on column vectors (``out = M @ in``) and are complex128.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.linalg import block_diag

from .errors import InvalidArgument, InvalidPartition, InvalidPermutation


def mmi_transfer(n_ports: int) -> np.ndarray:
    """Transfer matrix of an ``n_ports`` x ``n_ports`` MMI coupler.

    Entry ``[l-1, k-1]`` is the field transmission from input ``k`` to
    output ``l`` (1-indexed in the closed form). A single port reduces to the
    pure phase ``exp(j*3*pi/4)``.
    """
    n = int(n_ports)
    if n < 1:
        raise InvalidArgument(f"n_ports must be >= 1, got {n_ports}")
    l = np.arange(1, n + 1, dtype=float)[:, None]
    k = np.arange(1, n + 1, dtype=float)[None, :]
    sign = np.where((l + k) % 2 == 0, 1.0, -1.0)
    arg = ((l - 0.5) - sign * (k - 0.5)) ** 2 * np.pi / (4 * n)
    return sign * 1j * np.exp(1j * np.pi / 4) * np.sqrt(1.0 / n) * np.exp(-1j * arg)


def phase_shifter_column(phases: Sequence[float]) -> np.ndarray:
    phases = np.asarray(phases, dtype=float)
    if phases.ndim != 1 or phases.size == 0:
        raise InvalidArgument("phase vector must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(phases)):
        raise InvalidArgument("phases must be finite")
    return np.diag(np.exp(-1j * phases))


def check_permutation(indices: Sequence[int]) -> tuple[int, ...]:
    idx = tuple(int(i) for i in indices)
    if sorted(idx) != list(range(len(idx))):
        raise InvalidPermutation(f"not a permutation of 0..{len(idx) - 1}: {list(idx)}")
    return idx


def permutation_matrix(indices: Sequence[int]) -> np.ndarray:
    """0/1 routing matrix sending input wire ``i`` to output ``indices[i]``.

    With this orientation, a layer ``p`` followed by a layer ``q`` equals
    ``permutation_matrix(q) @ permutation_matrix(p)``, which is the matrix of
    the composed routing ``i -> q[p[i]]``.
    """
    idx = check_permutation(indices)
    k = len(idx)
    if k == 0:
        raise InvalidPermutation("empty permutation")
    mat = np.zeros((k, k), dtype=complex)
    mat[list(idx), np.arange(k)] = 1.0
    return mat


def compose_permutations(first: Sequence[int], second: Sequence[int]) -> tuple[int, ...]:
    """Routing of ``first`` followed by ``second`` in light-flow order."""
    first = check_permutation(first)
    second = check_permutation(second)
    if len(first) != len(second):
        raise InvalidPermutation("permutation sizes differ")
    return tuple(second[i] for i in first)


def check_partition(partition: Sequence[int], k: int | None = None) -> tuple[int, ...]:
    part = tuple(int(p) for p in partition)
    if not part or any(p < 1 for p in part):
        raise InvalidPartition(f"partition entries must be >= 1: {list(part)}")
    if k is not None and sum(part) != k:
        raise InvalidPartition(f"partition {list(part)} sums to {sum(part)}, expected {k}")
    return part


def coupler_layer_matrix(partition: Sequence[int], k: int | None = None) -> np.ndarray:
    """Block-diagonal layer of MMI couplers, one block per partition entry."""
    part = check_partition(partition, k)
    return block_diag(*[_cached_mmi(p) for p in part]).astype(complex)


_MMI_CACHE: dict[int, np.ndarray] = {}


def _cached_mmi(n: int) -> np.ndarray:
    mat = _MMI_CACHE.get(n)
    if mat is None:
        mat = mmi_transfer(n)
        mat.setflags(write=False)
        _MMI_CACHE[n] = mat
    return mat
