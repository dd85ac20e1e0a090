"""One Tucker iteration on a fixed partition.

The core is viewed as an ``m``-way tensor, one mode per block. The step
finds the closest block-product state, computes HOSVD block unitaries,
rotates each so its first column is that product's local vector (the
monotone gauge) and contracts the adjoints into the core. After the step
``<0|new_core>`` equals the attained product overlap ``alpha``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .corrgraph import Partition
from .errors import DimensionMismatch, GaugeIdentityViolation, PartitionMismatch
from .statevec import StateVector

log = logging.getLogger(__name__)

ORTHO_TOL = 1e-10
RANK_TOL = 1e-10
GAUGE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class BlockFactor:
    """A block unitary bound to an ordered qubit list.

    ``matrix`` is ``d x d`` with ``d = 2**len(qubits)``; the first listed
    qubit is the most significant bit of the row index. ``rank`` records how
    many leading columns carry weight in the unfolding (the rest is padding).
    """

    qubits: tuple
    matrix: np.ndarray
    rank: Optional[int] = None

    def __post_init__(self):
        qubits = tuple(int(q) for q in self.qubits)
        m = np.asarray(self.matrix, dtype=np.complex128)
        d = 1 << len(qubits)
        if m.shape[0] != d or m.shape[1] > d:
            raise DimensionMismatch(f"factor of shape {m.shape} on {len(qubits)} qubits")
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def is_identity(self, atol: float = 1e-12) -> bool:
        return self.matrix.shape[0] == self.matrix.shape[1] and np.allclose(
            self.matrix, np.eye(self.dim), rtol=0, atol=atol
        )

    def unitary(self) -> np.ndarray:
        """Square completion (basis-vector padding) of the stored matrix."""
        m = self.matrix
        if m.shape[1] == m.shape[0]:
            return m
        return complete_columns(m, m.shape[0])


@dataclass(frozen=True, eq=False)
class TuckerStepResult:
    factors: list
    new_core: StateVector
    alpha: float
    fidelity_to_zero: float
    product_vectors: list = field(default_factory=list)


@dataclass
class ClosestProductConfig:
    restarts: int = 8
    tol: float = 1e-12
    max_sweeps: int = 500


# ---------------------------------------------------------------------------
# Tensor views


def block_tensor(core: StateVector, partition: Partition) -> np.ndarray:
    """The core as a tensor with one mode of size ``2**|B_i|`` per block."""
    if partition.n != core.n:
        raise PartitionMismatch(f"partition over {partition.n} qubits, state over {core.n}")
    perm = [q for b in partition.blocks for q in b]
    dims = [1 << len(b) for b in partition.blocks]
    return np.transpose(core.tensor(), perm).reshape(dims)


def from_block_tensor(t: np.ndarray, partition: Partition) -> np.ndarray:
    """Inverse of :func:`block_tensor`; returns flat amplitudes."""
    perm = [q for b in partition.blocks for q in b]
    t = t.reshape((2,) * partition.n)
    return np.transpose(t, np.argsort(perm)).reshape(-1)


def _mode_unfolding(t: np.ndarray, mode: int) -> np.ndarray:
    return np.moveaxis(t, mode, 0).reshape(t.shape[mode], -1)


# ---------------------------------------------------------------------------
# Closest product state


def _contract_except(ti: np.ndarray, vecs: list, i: int) -> np.ndarray:
    """Contract all modes but ``i`` against batched vectors ``vecs[j]`` of shape (R, d_j).

    ``ti`` is the core with mode ``i`` moved to the front (other modes keep
    their order). Contracts the trailing mode first with one matmul, then
    one batched matmul per remaining mode. Returns shape (R, d_i).
    """
    others = [j for j in range(len(vecs)) if j != i]
    r = vecs[0].shape[0]
    last = others[-1]
    y = (ti.reshape(-1, ti.shape[-1]) @ vecs[last].conj().T).T
    for j in reversed(others[:-1]):
        y = y.reshape(r, -1, vecs[j].shape[1]) @ vecs[j].conj()[:, :, None]
    return y.reshape(r, ti.shape[0])


def _sweeps(t: np.ndarray, vecs: list, tol: float, max_sweeps: int):
    """Batched alternating maximization; ``vecs[i]`` has shape (R, d_i)."""
    m = t.ndim
    fronts = [np.ascontiguousarray(np.moveaxis(t, i, 0)) for i in range(m)]
    alpha = np.zeros(vecs[0].shape[0])
    history = []
    for sweep in range(max_sweeps):
        prev = alpha
        for i in range(m):
            v = _contract_except(fronts[i], vecs, i)
            norms = np.linalg.norm(v, axis=1)
            safe = np.where(norms > 0, norms, 1.0)
            vecs[i] = np.where(norms[:, None] > 0, v / safe[:, None], vecs[i])
            alpha = norms
        history.append(alpha.copy())
        if sweep > 0 and np.max(np.abs(alpha - prev)) < tol:
            break
    return alpha, vecs, history


def hosvd_leading_vectors(t: np.ndarray) -> list:
    return [np.linalg.svd(_mode_unfolding(t, i), full_matrices=False)[0][:, 0] for i in range(t.ndim)]


def closest_product(
    core: StateVector,
    partition: Partition,
    restarts: int = 8,
    tol: float = 1e-12,
    rng: Optional[np.random.Generator] = None,
    max_sweeps: int = 500,
    seeds: Sequence[Sequence[np.ndarray]] = (),
    return_history: bool = False,
):
    """Best block-product overlap with ``core`` found by alternating maximization.

    Holding all but one local vector fixed, the optimal remaining vector is
    the normalized contraction of the core against the others; sweeps cycle
    through the blocks until ``alpha`` changes by less than ``tol``. Starting
    points are the block-wise ``|0>`` vector, the leading HOSVD singular
    vectors, any caller ``seeds`` and ``restarts`` random draws. The best
    run wins.

    Because ``|0...0>`` is always a starting point, the returned ``alpha``
    is never below ``|<0|core>|``.

    Returns
    -------
    alpha : float
        Attained overlap; a lower bound on the true entanglement eigenvalue.
    vectors : list of ndarray
        Unit local vectors, one per block, phased so that
        ``<u_1 (x) ... (x) u_m | core>`` is real and nonnegative.
    """
    t = block_tensor(core, partition)
    dims = t.shape
    m = len(dims)
    if m == 1:
        u = t.reshape(-1).copy()
        return (1.0, [u], [np.ones(1)]) if return_history else (1.0, [u])
    rng = np.random.default_rng(0) if rng is None else rng

    starts = [[np.eye(d, 1, dtype=np.complex128).ravel() for d in dims], hosvd_leading_vectors(t)]
    starts.extend([np.asarray(v, dtype=np.complex128) for v in s] for s in seeds)
    for _ in range(restarts):
        starts.append([_random_unit(d, rng) for d in dims])
    vecs = [np.stack([s[i] for s in starts]) for i in range(m)]

    # With two blocks the HOSVD start is already the exact optimum (top
    # singular pair); sweeps still run so every path shares one code path.
    alpha, vecs, history = _sweeps(t, vecs, tol, max_sweeps)
    best = int(np.argmax(alpha))
    out = [vecs[i][best].copy() for i in range(m)]

    overlap = _overlap(t, out)
    if abs(overlap) > 0:
        out[0] = out[0] * (overlap / abs(overlap))
    a = float(min(1.0, abs(overlap)))
    if return_history:
        return a, out, [h[best] for h in history]
    return a, out


def _overlap(t: np.ndarray, vecs: list) -> complex:
    """``<u_1 (x) ... (x) u_m | t>``."""
    out = t
    for v in vecs:
        out = np.tensordot(v.conj(), out, axes=(0, 0))
    return complex(out)


def _random_unit(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# Factors and gauge


def hosvd_factors(core: StateVector, partition: Partition) -> list:
    """Full left-singular-vector unitaries of each block's mode unfolding."""
    t = block_tensor(core, partition)
    factors = []
    for i, b in enumerate(partition.blocks):
        u, s, _ = np.linalg.svd(_mode_unfolding(t, i), full_matrices=True)
        rank = int(np.sum(s > RANK_TOL))
        factors.append(BlockFactor(b, u, rank=max(rank, 1)))
    return factors


def complete_columns(cols: np.ndarray, d: int, candidates: Optional[np.ndarray] = None) -> np.ndarray:
    """Extend orthonormal ``cols`` to a ``d x d`` unitary.

    Candidate columns are orthogonalized against the growing set by modified
    Gram-Schmidt (two passes); those with residual norm below 1e-10 are
    skipped. Canonical basis vectors finish the completion if needed.
    """
    basis = [c for c in np.asarray(cols, dtype=np.complex128).T]
    pool = [] if candidates is None else list(np.asarray(candidates).T)
    pool.extend(np.eye(d, dtype=np.complex128))
    for c in pool:
        if len(basis) == d:
            break
        r = np.array(c, dtype=np.complex128)
        for _ in range(2):
            for b in basis:
                r = r - b * np.vdot(b, r)
        norm = np.linalg.norm(r)
        if norm > ORTHO_TOL:
            basis.append(r / norm)
    return np.stack(basis, axis=1)


def monotone_gauge(factors: Sequence[BlockFactor], product_vectors: Sequence[np.ndarray]) -> list:
    """Rotate each factor so that its first column is the product vector.

    The remaining columns are the old factor's columns projected onto the
    orthogonal complement of the new first column, re-orthonormalized in
    their original (HOSVD) order.
    """
    if len(factors) != len(product_vectors):
        raise DimensionMismatch(f"{len(factors)} factors but {len(product_vectors)} product vectors")
    out = []
    for f, u in zip(factors, product_vectors):
        u = np.asarray(u, dtype=np.complex128).reshape(-1)
        if u.size != f.dim:
            raise DimensionMismatch(f"product vector of length {u.size} for a {f.dim}-dim block")
        norm = np.linalg.norm(u)
        if abs(norm - 1) > 1e-12:
            u = u / norm
        out.append(BlockFactor(f.qubits, _gauge_one(f.unitary(), u), rank=f.rank))
    return out


def _gauge_one(w: np.ndarray, u: np.ndarray) -> np.ndarray:
    # u lies in span(w[:, :p+1]) for p = last significant coefficient, so
    # Gram-Schmidt of [u, w_0, w_1, ...] skips exactly column p. A phase-fixed
    # Householder QR of the remaining square matrix gives the same columns.
    d = w.shape[0]
    c = w.conj().T @ u
    p = int(np.flatnonzero(np.abs(c) > ORTHO_TOL)[-1])
    a = np.concatenate([u[:, None], w[:, :p], w[:, p + 1 :]], axis=1)
    q, r = np.linalg.qr(a)
    diag = np.diag(r)
    if np.min(np.abs(diag)) <= ORTHO_TOL:
        return complete_columns(u[:, None], d, w)
    q = q * (diag / np.abs(diag))
    q[:, 0] = u
    return q


def apply_adjoints(core: StateVector, partition: Partition, factors: Sequence[BlockFactor]) -> StateVector:
    """Contract every factor's adjoint into its block mode of ``core``."""
    t = block_tensor(core, partition)
    for i, f in enumerate(factors):
        if f.qubits != partition.blocks[i]:
            raise DimensionMismatch(f"factor on {f.qubits} does not match block {partition.blocks[i]}")
        t = np.moveaxis(np.tensordot(f.unitary().conj().T, t, axes=(1, i)), 0, i)
    return StateVector(core.n, from_block_tensor(t, partition))


def tucker_step(
    core: StateVector,
    partition: Partition,
    cfg: Optional[ClosestProductConfig] = None,
    rng: Optional[np.random.Generator] = None,
    seeds: Sequence = (),
) -> TuckerStepResult:
    """Closest product, HOSVD, monotone gauge and core update on ``partition``.

    Raises
    ------
    GaugeIdentityViolation
        If ``<0|new_core>`` differs from the attained ``alpha`` by more than
        1e-8.
    """
    cfg = cfg or ClosestProductConfig()
    alpha, vecs = closest_product(
        core, partition, restarts=cfg.restarts, tol=cfg.tol, rng=rng, max_sweeps=cfg.max_sweeps, seeds=seeds
    )
    factors = monotone_gauge(hosvd_factors(core, partition), vecs)
    new_core = apply_adjoints(core, partition, factors)
    amp0 = new_core.amps[0]
    if abs(amp0 - alpha) > GAUGE_TOL:
        raise GaugeIdentityViolation(f"<0|G_j> = {amp0} but alpha = {alpha}")
    return TuckerStepResult(factors, new_core, alpha, float(abs(amp0) ** 2), vecs)


def unitary_with_first_column(v: np.ndarray) -> np.ndarray:
    """A unitary whose first column is the unit vector ``v`` (Householder)."""
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    v = v / np.linalg.norm(v)
    d = v.size
    phase = v[0] / abs(v[0]) if abs(v[0]) > 0 else 1.0
    w = v.copy()
    w[0] -= phase
    nw = np.linalg.norm(w)
    if nw < 1e-15:
        out = np.eye(d, dtype=np.complex128)
        out[:, 0] = v
        return out
    w /= nw
    h = np.eye(d, dtype=np.complex128) - 2.0 * np.outer(w, w.conj())
    # h maps phase*e0 to v; rescale its first column so it is exactly v
    h[:, 0] *= phase
    return h
