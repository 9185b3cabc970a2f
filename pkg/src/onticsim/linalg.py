"""Dense complex linear algebra over finite-dimensional composite systems.

Everything in this module is a pure function over immutable numpy inputs:
tensor products, partial traces, Schmidt decompositions, contraction checks
and Bloch coordinates. All other modules build on these primitives and on
the shared numerical tolerances defined here.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np

# Shared tolerances. Chosen for double precision with operators up to a few
# thousand dimensions: algebraic identities hold to ~1e-12 there, so these
# leave an order of magnitude of slack.
TAU_NUM = 1e-10     # algebraic identities
TAU_NORM = 1e-9     # state normalization
TAU_RANK = 1e-8     # Schmidt-rank cutoff
TAU_PURE = 1e-8     # purity threshold for factorization checks
TAU_SIC = 1e-9      # pairwise-fidelity check of symmetric frames

#: Default cap on composite dimension (12 qubits). Guards against building
#: dense operators that cannot fit in commodity RAM.
MAX_DIM = 4096


class DimensionError(ValueError):
    """Composite dimension exceeds the configured cap, or shapes mismatch."""


@dataclass(frozen=True)
class SystemShape:
    """Ordered local dimensions of the tensor factors of a composite system."""

    factor_dims: tuple[int, ...]

    def __post_init__(self):
        if not self.factor_dims or any(d < 1 for d in self.factor_dims):
            raise ValueError(f"factor dims must be positive, got {self.factor_dims}")

    @property
    def dim(self) -> int:
        return prod(self.factor_dims)

    def __len__(self) -> int:
        return len(self.factor_dims)


def as_shape(shape) -> SystemShape:
    """Coerce a SystemShape or a plain sequence of dims to a SystemShape."""
    if isinstance(shape, SystemShape):
        return shape
    return SystemShape(tuple(int(d) for d in shape))


def _as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def _as_vector(a) -> np.ndarray:
    v = np.asarray(a, dtype=complex).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def tensor_product(a, b, *, max_dim: int = MAX_DIM) -> np.ndarray:
    """Kronecker product of two matrices (vectors are treated as columns)."""
    am, bm = np.atleast_2d(np.asarray(a, dtype=complex)), np.atleast_2d(np.asarray(b, dtype=complex))
    if am.shape[0] * bm.shape[0] > max_dim or am.shape[1] * bm.shape[1] > max_dim:
        raise DimensionError(
            f"tensor product of {am.shape} and {bm.shape} exceeds max dimension {max_dim}"
        )
    return np.kron(am, bm)


def tensor_many(factors, *, max_dim: int = MAX_DIM) -> np.ndarray:
    """Kronecker product of a nonempty sequence of matrices, left to right."""
    factors = list(factors)
    if not factors:
        raise ValueError("need at least one factor")
    out = np.atleast_2d(np.asarray(factors[0], dtype=complex))
    for f in factors[1:]:
        out = tensor_product(out, f, max_dim=max_dim)
    return out


def partial_trace(rho, shape, keep) -> np.ndarray:
    """Trace out every tensor factor not listed in ``keep``.

    ``keep`` is a set of factor indices; the result is ordered by ascending
    index. The full trace is preserved: Tr(result) == Tr(rho).
    """
    rho = _as_matrix(rho)
    dims = as_shape(shape).factor_dims
    n = len(dims)
    if rho.shape != (prod(dims), prod(dims)):
        raise DimensionError(f"rho shape {rho.shape} inconsistent with factor dims {dims}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise IndexError(f"keep indices {keep} out of range for {n} factors")
    t = rho.reshape(dims + dims)
    # Contract row/column axes of each traced factor, highest index first so
    # the remaining axis numbers stay valid.
    traced = [i for i in range(n) if i not in keep]
    for i in sorted(traced, reverse=True):
        t = np.trace(t, axis1=i, axis2=i + (t.ndim // 2))
    d_keep = prod(dims[k] for k in keep) if keep else 1
    return t.reshape(d_keep, d_keep)


def schmidt_decompose(psi, shape) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    """Schmidt decomposition of a normalized bipartite vector.

    ``shape`` must describe exactly two blocks (d_left, d_right). Returns
    descending coefficients > TAU_RANK and the matching left/right unit
    vectors, so that psi = sum_i c_i |l_i>|r_i> up to global phase.
    """
    psi = _as_vector(psi)
    dims = as_shape(shape).factor_dims
    if len(dims) != 2:
        raise ValueError(f"need a bipartition, got {len(dims)} blocks")
    if psi.size != prod(dims):
        raise DimensionError(f"vector of dim {psi.size} inconsistent with {dims}")
    if abs(np.linalg.norm(psi) - 1.0) > TAU_NORM:
        raise ValueError(f"input not normalized: |psi| = {np.linalg.norm(psi)}")
    u, s, vh = np.linalg.svd(psi.reshape(dims), full_matrices=False)
    rank = int(np.sum(s > TAU_RANK))
    rank = max(rank, 1)
    coeffs = s[:rank]
    lefts = [u[:, i].copy() for i in range(rank)]
    rights = [vh[i, :].copy() for i in range(rank)]
    return coeffs, lefts, rights


def schmidt_rank(psi, shape) -> int:
    coeffs, _, _ = schmidt_decompose(psi, shape)
    return int(np.sum(coeffs > TAU_RANK))


def is_contraction(x, *, tol: float = TAU_NUM) -> tuple[bool, float]:
    """Whether the largest singular value of ``x`` is <= 1 (within tol).

    Also cross-checks the positive-semidefinite ordering I - X^dag X >= 0 via
    an eigenvalue floor; returns (verdict, sigma_max).
    """
    x = _as_matrix(x)
    sigma_max = float(np.linalg.norm(x, ord=2)) if x.size else 0.0
    ok = sigma_max <= 1.0 + tol
    if ok and x.size:
        gram_defect = np.eye(x.shape[1]) - x.conj().T @ x
        ok = bool(np.linalg.eigvalsh(gram_defect).min() >= -10 * tol)
    return ok, sigma_max


_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def bloch_coordinates(psi) -> tuple[float, float, float]:
    """(<sx>, <sy>, <sz>) of a normalized qubit state vector."""
    psi = _as_vector(psi)
    if psi.size != 2:
        raise DimensionError(f"Bloch coordinates need a qubit, got dim {psi.size}")
    if abs(np.linalg.norm(psi) - 1.0) > TAU_NORM:
        raise ValueError("input not normalized")
    return tuple(float(np.real(np.vdot(psi, p @ psi))) for p in (_PAULI_X, _PAULI_Y, _PAULI_Z))


def bloch_projectors(direction) -> tuple[np.ndarray, np.ndarray]:
    """Rank-1 projectors onto the +/- eigenstates along a Bloch direction."""
    n = np.asarray(direction, dtype=float)
    n = n / np.linalg.norm(n)
    op = n[0] * _PAULI_X + n[1] * _PAULI_Y + n[2] * _PAULI_Z
    eye = np.eye(2, dtype=complex)
    return (eye + op) / 2, (eye - op) / 2


def canonical_phase(psi, *, tol: float = TAU_RANK) -> np.ndarray:
    """Rotate the global phase so the first non-negligible amplitude is real >= 0."""
    psi = _as_vector(psi)
    for a in psi:
        if abs(a) > tol:
            return psi * (abs(a) / a)
    return psi.copy()


def states_equal(a, b, *, tol: float = TAU_NUM) -> bool:
    """Equality of two state vectors up to global phase."""
    a, b = _as_vector(a), _as_vector(b)
    if a.shape != b.shape:
        return False
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < tol or nb < tol:
        return na < tol and nb < tol
    return bool(abs(abs(np.vdot(a, b)) / (na * nb) - 1.0) <= tol)


def haar_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unit vector: normalized complex Gaussian amplitudes."""
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_isometry(d_in: int, d_out: int, rng: np.random.Generator) -> np.ndarray:
    """Random isometry V (d_out x d_in), V^dag V = I. Requires d_out >= d_in."""
    if d_out < d_in:
        raise DimensionError(f"no isometry from dim {d_in} into dim {d_out}")
    return haar_unitary(d_out, rng)[:, :d_in]
