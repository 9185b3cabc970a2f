"""Tensor-factorization structure of pure states: which groups of systems
are in a pure state of their own, with no finer split.

A block of systems counts as one individual exactly when its reduced state
is pure and no sub-bipartition of the block factorizes further. Over a
trajectory this yields a timeline of partitions: entangling interactions
merge blocks, and measurements or disentangling steps split them again.
Also counts the distinct ways of entangling N labelled systems:
integer partitions of N times N! orderings.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import factorial, prod

import numpy as np

from .linalg import TAU_PURE, TAU_RANK, as_shape

MAX_FACTORS = 12  # factorization search is exponential in block size


class IndividuationError(ValueError):
    pass


def purity(rho) -> float:
    """Tr(rho^2) of a density matrix; 1 for pure states, 1/d for maximal mixing."""
    rho = np.asarray(rho, dtype=complex)
    return float(np.real(np.trace(rho @ rho)))


@dataclass(frozen=True)
class MindPartition:
    """Finest pure-block partition of the systems at one time step."""

    blocks: tuple[tuple[int, ...], ...]
    purities: tuple[float, ...]
    timestamp: int = 0

    def as_sets(self) -> list[set[int]]:
        return [set(b) for b in self.blocks]

    def block_lists(self) -> list[list[int]]:
        return [list(b) for b in self.blocks]


def _try_split(tensor: np.ndarray, local_n: int):
    """First rank-one bipartition of a block, anchored on its first factor.

    Returns (left axes, right axes, left state, right state) or None when
    the block is irreducible. Every bipartition is tried once, smallest
    anchored side first, so the scan order is canonical.
    """
    for size in range(1, local_n):
        for extra in combinations(range(1, local_n), size - 1):
            left_axes = (0,) + extra
            right_axes = tuple(i for i in range(local_n) if i not in left_axes)
            d_left = prod(tensor.shape[i] for i in left_axes)
            mat = tensor.transpose(left_axes + right_axes).reshape(d_left, -1)
            u, s, vh = np.linalg.svd(mat, full_matrices=False)
            if np.sum(s > TAU_RANK) == 1:
                return left_axes, right_axes, u[:, 0], vh[0, :]
    return None


def finest_factorization(psi, shape, *, timestamp: int = 0) -> MindPartition:
    """Split the systems into the finest blocks whose states factorize.

    Recursively peels off any sub-block with Schmidt rank one across its
    bipartition. The factorization of a pure state is unique, so the scan
    order only affects intermediate numerics, not the resulting partition.
    """
    dims = as_shape(shape).factor_dims
    n = len(dims)
    if n > MAX_FACTORS:
        raise IndividuationError(f"factorization search capped at {MAX_FACTORS} factors")
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.size != prod(dims):
        raise IndividuationError(f"state dim {psi.size} does not match factors {dims}")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-9:
        raise IndividuationError("state must be normalized")

    final_blocks: list[tuple[int, ...]] = []
    queue: list[tuple[tuple[int, ...], np.ndarray]] = [(tuple(range(n)), psi)]
    while queue:
        block, vec = queue.pop(0)
        if len(block) == 1:
            final_blocks.append(block)
            continue
        tensor = vec.reshape(tuple(dims[i] for i in block))
        split = _try_split(tensor, len(block))
        if split is None:
            final_blocks.append(block)
        else:
            left_axes, right_axes, left, right = split
            queue.insert(0, (tuple(block[i] for i in right_axes), right))
            queue.insert(0, (tuple(block[i] for i in left_axes), left))

    blocks = tuple(sorted(final_blocks, key=lambda b: b[0]))
    psi_t = psi.reshape(dims if dims else (1,))
    purs = tuple(_marginal_purity(psi_t, n, b) for b in blocks)
    for b, p in zip(blocks, purs):
        if p < 1.0 - TAU_PURE:
            raise IndividuationError(
                f"internal error: block {b} has impure marginal ({p:.12f})"
            )
    return MindPartition(blocks, purs, timestamp)


def _marginal_purity(psi_t: np.ndarray, n: int, block: tuple[int, ...]) -> float:
    rest = [i for i in range(n) if i not in block]
    mat = psi_t.transpose(list(block) + rest).reshape(prod(psi_t.shape[i] for i in block), -1)
    s = np.linalg.svd(mat, compute_uv=False)
    return float(np.sum(s ** 4))


def marginal_purity(psi, shape, block) -> float:
    """Tr(rho_block^2) for the reduced state of a block of factors."""
    dims = as_shape(shape).factor_dims
    psi_t = np.asarray(psi, dtype=complex).reshape(dims)
    return _marginal_purity(psi_t, len(dims), tuple(block))


def classify_timeline(trajectory, shapes=None) -> list[MindPartition]:
    """Finest factorization of every stored state along a trajectory.

    ``trajectory`` is an engine Trajectory run with store_states=True;
    ``shapes`` optionally overrides the per-step factor dimensions (one
    shape per stored state; defaults to the wire dimensions recorded by
    the engine via ``state_dims``).
    """
    partitions: list[MindPartition] = []
    states = [s.state for s in trajectory.steps]
    if any(s is None for s in states):
        raise IndividuationError("trajectory has no stored states; rerun with store_states=True")
    if shapes is None:
        shapes = getattr(trajectory, "state_dims", None)
    if shapes is None:
        raise IndividuationError("provide shapes: one factor-dimension tuple per step")
    for t, (state, shape) in enumerate(zip(states, shapes)):
        partitions.append(finest_factorization(state, shape, timestamp=t))
    return partitions


def count_entanglement_patterns(n: int) -> int:
    """Distinct entanglement patterns of n labelled systems: p(n) * n!."""
    if n < 1:
        raise IndividuationError("need at least one system")
    if n > 20:
        raise IndividuationError("pattern count capped at n = 20")
    return _partition_count(n) * factorial(n)


def _partition_count(n: int) -> int:
    """Number of integer partitions of n (dynamic programming)."""
    table = [1] + [0] * n
    for part in range(1, n + 1):
        for total in range(part, n + 1):
            table[total] += table[total - part]
    return table[n]
