"""Amplitude vectors, tensor views, marginals, entropies and Schmidt spectra.

Qubit ordering is big-endian throughout the package: qubit 0 is the most
significant bit of the amplitude index, so ``amps.reshape((2,) * n)`` puts
qubit ``q`` on tensor axis ``q``. For example the amplitude of
``|q0=1, q1=0, q2=0>`` lives at index ``0b100 = 4``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptySet, FullSet, NotPowerOfTwo, ZeroVector

NORM_TOL = 1e-12
EIG_CLAMP = 1e-12


@dataclass(frozen=True, eq=False)
class StateVector:
    """A normalized pure state on ``n`` qubits.

    ``amps`` is stored as a read-only complex128 array of length ``2**n``.
    """

    n: int
    amps: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amps, dtype=np.complex128).reshape(-1)
        if self.n < 1 or amps.size != 1 << self.n:
            raise DimensionMismatch(f"expected {1 << max(self.n, 0)} amplitudes for n={self.n}, got {amps.size}")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (|psi|^2 = {norm2!r})")
        amps.flags.writeable = False
        object.__setattr__(self, "amps", amps)

    @property
    def dim(self) -> int:
        return self.amps.size

    def tensor(self) -> np.ndarray:
        """View the amplitudes as an ``n``-way tensor with one axis per qubit."""
        return self.amps.reshape((2,) * self.n)

    def __repr__(self):
        return f"StateVector(n={self.n})"


def normalize(v) -> StateVector:
    """Scale ``v`` to unit norm; its length must be a power of two."""
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    size = v.size
    if size < 2 or size & (size - 1):
        raise NotPowerOfTwo(f"length {size} is not a power of two >= 2")
    norm = np.linalg.norm(v)
    if not norm >= 1e-300:
        raise ZeroVector("cannot normalize a zero vector")
    # already unit within roundoff: keep the input bits
    if abs(norm - 1.0) > 4 * np.finfo(float).eps:
        v = v / norm
    return StateVector(size.bit_length() - 1, v)


def check_qubits(qubits: Iterable[int], n: int) -> tuple[int, ...]:
    qubits = tuple(int(q) for q in qubits)
    if len(set(qubits)) != len(qubits):
        raise DimensionMismatch(f"repeated qubit index in {qubits}")
    for q in qubits:
        if not 0 <= q < n:
            raise DimensionMismatch(f"qubit index {q} out of range for n={n}")
    return qubits


def unfolding(state: StateVector, qubits: Sequence[int]) -> np.ndarray:
    """Return the ``2**k x 2**(n-k)`` matrix with ``qubits`` as row index.

    Row index bits follow the order of ``qubits``; remaining qubits keep
    their relative order in the column index.
    """
    qubits = check_qubits(qubits, state.n)
    t = np.moveaxis(state.tensor(), qubits, range(len(qubits)))
    return t.reshape(1 << len(qubits), -1)


def fidelity(a: StateVector, b: StateVector) -> float:
    if a.n != b.n:
        raise DimensionMismatch(f"fidelity between {a.n}- and {b.n}-qubit states")
    return min(1.0, abs(np.vdot(a.amps, b.amps)) ** 2)


def reduced_density(state: StateVector, keep: Sequence[int]) -> np.ndarray:
    """Marginal density matrix on ``keep`` as a Gram product of the unfolding.

    The full ``2**n x 2**n`` operator is never formed.
    """
    if len(keep) == 0:
        raise EmptySet("reduced_density needs at least one kept qubit")
    m = unfolding(state, keep)
    return m @ m.conj().T


def entropy(rho: np.ndarray) -> float:
    """Von Neumann entropy in bits; eigenvalues below 1e-12 count as zero."""
    lam = np.linalg.eigvalsh(rho)
    lam = lam[lam > EIG_CLAMP]
    return float(max(0.0, -np.sum(lam * np.log2(lam))))


def schmidt_spectrum(state: StateVector, cut: Sequence[int]) -> np.ndarray:
    """Singular values (descending) of the unfolding across ``cut`` | rest."""
    if len(cut) == 0:
        raise EmptySet("empty cut")
    if len(set(cut)) >= state.n:
        raise FullSet("cut must be a proper subset of the qubits")
    return np.linalg.svd(unfolding(state, cut), compute_uv=False)


def apply_matrix(state: StateVector, qubits: Sequence[int], matrix: np.ndarray) -> StateVector:
    """Apply a ``2**k x 2**k`` operator to ``qubits`` (first listed = MSB)."""
    qubits = check_qubits(qubits, state.n)
    k = len(qubits)
    matrix = np.asarray(matrix)
    if matrix.shape != (1 << k, 1 << k):
        raise DimensionMismatch(f"operator of shape {matrix.shape} on {k} qubits")
    t = np.moveaxis(state.tensor(), qubits, range(k))
    shape = t.shape
    out = (matrix @ t.reshape(1 << k, -1)).reshape(shape)
    out = np.moveaxis(out, range(k), qubits)
    return StateVector(state.n, out.reshape(-1))


def apply_block(state: StateVector, factor) -> StateVector:
    """Apply ``factor.matrix`` (square) to ``factor.qubits``."""
    return apply_matrix(state, factor.qubits, factor.matrix)


def apply_block_adjoint(state: StateVector, factor) -> StateVector:
    """Apply the adjoint of ``factor.matrix`` to ``factor.qubits``."""
    return apply_matrix(state, factor.qubits, np.asarray(factor.matrix).conj().T)


# ---------------------------------------------------------------------------
# Standard states, used by tests, examples and the CLI.


def zero_state(n: int) -> StateVector:
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n, amps)


def basis_state(bits: str) -> StateVector:
    amps = np.zeros(1 << len(bits), dtype=np.complex128)
    amps[int(bits, 2)] = 1.0
    return StateVector(len(bits), amps)


def product_state(vectors: Sequence[np.ndarray]) -> StateVector:
    """Kronecker product of local vectors, first vector on the lowest qubits."""
    out = np.ones(1, dtype=np.complex128)
    for v in vectors:
        out = np.kron(out, np.asarray(v, dtype=np.complex128))
    return normalize(out)


def ghz(n: int) -> StateVector:
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[0] = amps[-1] = 1.0
    return normalize(amps)


def w_state(n: int) -> StateVector:
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[[1 << q for q in range(n)]] = 1.0
    return normalize(amps)


def bell() -> StateVector:
    return ghz(2)


def random_state(n: int, rng: np.random.Generator) -> StateVector:
    """Haar-random pure state."""
    v = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return normalize(v)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random ``d x d`` unitary via QR with phase correction."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph
