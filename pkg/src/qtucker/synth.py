"""Lower block factors to gates over {Rx, Ry, Rz, CX}.

One-qubit factors use a ZYZ Euler decomposition; two-qubit factors use the
Cartan (KAK) decomposition with a fixed three-CX interaction circuit, for a
depth of 13 per general two-qubit unitary. Larger blocks are emitted as
opaque unitaries annotated with a CX-count estimate.

Rotation conventions match OpenQASM: ``Rz(t) = diag(e^{-it/2}, e^{it/2})``,
``Ry(t) = exp(-i t Y / 2)``, ``Rx(t) = exp(-i t X / 2)``. Global phase is
dropped everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import NotUnitary
from .tucker import BlockFactor, unitary_with_first_column

UNITARY_TOL = 1e-10
PRUNE_TOL = 1e-12
LOCAL_TOL = 1e-9

RX, RY, RZ, CX, OPAQUE = "rx", "ry", "rz", "cx", "unitary"

_I2 = np.eye(2, dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_Z = np.diag([1.0, -1.0]).astype(np.complex128)

MAGIC = np.array([[1, 0, 0, 1j], [0, 1j, 1, 0], [0, 1j, -1, 0], [1, 0, 0, -1j]], dtype=np.complex128) / np.sqrt(2)
MAGIC_DAG = MAGIC.conj().T

# Rows: phase, XX, YY, ZZ eigenvalues on each magic-basis vector.
_MAGIC_EIGS = np.array(
    [np.ones(4)] + [np.real(np.diag(MAGIC_DAG @ np.kron(p, p) @ MAGIC)) for p in (_X, _Y, _Z)]
).T


def rx(t: float) -> np.ndarray:
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry(t: float) -> np.ndarray:
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rz(t: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])


CX_MATRIX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128)


@dataclass(frozen=True, eq=False)
class Gate:
    """One gate. ``qubits`` is ordered (control first for CX)."""

    kind: str
    qubits: tuple
    params: tuple = ()
    matrix: Optional[np.ndarray] = None
    cx_estimate: int = 0
    residual: bool = False

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind in (RX, RY, RZ):
            if len(self.qubits) != 1 or len(self.params) != 1:
                raise ValueError(f"{self.kind} takes one qubit and one angle")
        elif self.kind == CX:
            if len(self.qubits) != 2 or self.params or self.qubits[0] == self.qubits[1]:
                raise ValueError("cx takes two distinct qubits and no parameters")
        elif self.kind != OPAQUE:
            raise ValueError(f"unknown gate kind {self.kind!r}")

    def to_matrix(self) -> np.ndarray:
        if self.kind == RX:
            return rx(self.params[0])
        if self.kind == RY:
            return ry(self.params[0])
        if self.kind == RZ:
            return rz(self.params[0])
        if self.kind == CX:
            return CX_MATRIX
        return self.matrix

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "qubits": list(self.qubits), "params": list(self.params)}
        if self.kind == OPAQUE:
            m = np.asarray(self.matrix) if self.matrix is not None else None
            d["matrix"] = None if m is None else {"re": m.real.tolist(), "im": m.imag.tolist()}
            d["cx_estimate"] = self.cx_estimate
            d["residual"] = self.residual
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Gate":
        m = d.get("matrix")
        matrix = None if m is None else np.asarray(m["re"]) + 1j * np.asarray(m["im"])
        return cls(
            d["kind"],
            tuple(d["qubits"]),
            tuple(d.get("params", ())),
            matrix,
            int(d.get("cx_estimate", 0)),
            bool(d.get("residual", False)),
        )


@dataclass
class GateCircuit:
    n: int
    gates: List[Gate] = field(default_factory=list)

    @property
    def depth(self) -> int:
        """Greedy (as-soon-as-possible) layering depth; opaque gates count 1."""
        return _layered_depth(self.gates, self.n, weighted=False)

    @property
    def estimated_depth(self) -> int:
        """Like :attr:`depth` but opaque gates weigh their CX estimate."""
        return _layered_depth(self.gates, self.n, weighted=True)

    @property
    def cx_count(self) -> int:
        return sum(1 for g in self.gates if g.kind == CX)

    @property
    def estimated_cx_count(self) -> int:
        return self.cx_count + sum(g.cx_estimate for g in self.gates if g.kind == OPAQUE)

    @property
    def has_opaque(self) -> bool:
        return any(g.kind == OPAQUE for g in self.gates)

    def counts(self) -> dict:
        out: dict = {}
        for g in self.gates:
            out[g.kind] = out.get(g.kind, 0) + 1
        return out

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "depth": self.depth,
            "estimated_depth": self.estimated_depth,
            "cx_count": self.cx_count,
            "gates": [g.to_dict() for g in self.gates],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GateCircuit":
        return cls(int(d["n"]), [Gate.from_dict(g) for g in d["gates"]])

    def to_qasm(self) -> str:
        """OpenQASM 2.0 text; only valid for circuits without opaque gates."""
        if self.has_opaque:
            raise ValueError("opaque unitaries have no OpenQASM 2 form; use the JSON export")
        lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{self.n}];"]
        for g in self.gates:
            if g.kind == CX:
                lines.append(f"cx q[{g.qubits[0]}],q[{g.qubits[1]}];")
            else:
                lines.append(f"{g.kind}({g.params[0]!r}) q[{g.qubits[0]}];")
        return "\n".join(lines) + "\n"


def _layered_depth(gates: Sequence[Gate], n: int, weighted: bool) -> int:
    free = [0] * n
    for g in gates:
        cost = max(1, g.cx_estimate) if (weighted and g.kind == OPAQUE) else 1
        t = max(free[q] for q in g.qubits) + cost
        for q in g.qubits:
            free[q] = t
    return max(free, default=0)


def _check_unitary(u: np.ndarray, d: int):
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (d, d) or not np.allclose(u.conj().T @ u, np.eye(d), rtol=0, atol=UNITARY_TOL):
        raise NotUnitary(f"expected a {d}x{d} unitary")
    return u


def _wrap(t: float) -> float:
    return float((t + np.pi) % (2 * np.pi) - np.pi)


# ---------------------------------------------------------------------------
# One qubit


def zyz_angles(u: np.ndarray) -> tuple:
    """Angles ``(a, b, c)`` with ``u ~ Rz(a) Ry(b) Rz(c)`` up to global phase."""
    u = _check_unitary(u, 2)
    v = u / np.sqrt(np.linalg.det(u))
    a, b = v[0, 0], v[1, 0]
    beta = 2 * np.arctan2(abs(b), abs(a))
    if abs(b) < 1e-14:
        return -2 * np.angle(a), 0.0, 0.0
    if abs(a) < 1e-14:
        return 2 * np.angle(b), beta, 0.0
    return np.angle(b) - np.angle(a), beta, -np.angle(a) - np.angle(b)


def zyz(u: np.ndarray, qubit: int = 0) -> List[Gate]:
    """ZYZ gate sequence in time order; zero angles are pruned."""
    a, b, c = zyz_angles(u)
    gates = []
    for kind, t in ((RZ, c), (RY, b), (RZ, a)):
        t = _wrap(t)
        if abs(t) > PRUNE_TOL:
            gates.append(Gate(kind, (qubit,), (t,)))
    return gates


# ---------------------------------------------------------------------------
# Two qubits


def split_local(u: np.ndarray, tol: float = LOCAL_TOL):
    """Factor ``u = A (x) B`` if it is a tensor product, else return None.

    Uses the operator-Schmidt decomposition: the realigned matrix of a
    product operator has rank one.
    """
    r = np.asarray(u).reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    w, s, vh = np.linalg.svd(r)
    if s[1] > tol:
        return None
    a = w[:, 0].reshape(2, 2) * np.sqrt(2)
    b = vh[0].reshape(2, 2) * (s[0] / np.sqrt(2))
    return a, b


def interaction(x: float, y: float, z: float) -> np.ndarray:
    """``exp(i (x XX + y YY + z ZZ))``."""
    phases = _MAGIC_EIGS[:, 1:] @ np.array([x, y, z])
    return MAGIC @ np.diag(np.exp(1j * phases)) @ MAGIC_DAG


def _real_orthogonal_diagonalizer(m: np.ndarray) -> np.ndarray:
    """Real orthogonal ``P`` (det +1) with ``P^T m P`` diagonal, ``m`` complex symmetric unitary."""
    re, im = m.real, m.imag
    rng = np.random.default_rng(1234)
    for attempt in range(64):
        t = 0.5 if attempt == 0 else rng.uniform(0, np.pi)
        _, p = np.linalg.eigh(np.cos(t) * re + np.sin(t) * im)
        d = p.T @ m @ p
        if np.allclose(d, np.diag(np.diag(d)), rtol=0, atol=1e-12):
            break
    else:
        raise ArithmeticError("failed to diagonalize the symmetric unitary")
    if np.linalg.det(p) < 0:
        p[:, 0] = -p[:, 0]
    return p


def kak_decompose(u: np.ndarray):
    """Cartan decomposition ``u ~ (A1 (x) A2) exp(i(x XX + y YY + z ZZ)) (B1 (x) B2)``.

    Returns ``(A1, A2, (x, y, z), B1, B2)``; equality holds up to global phase.
    """
    u = _check_unitary(u, 4)
    u4 = u / np.linalg.det(u) ** 0.25
    up = MAGIC_DAG @ u4 @ MAGIC
    p = _real_orthogonal_diagonalizer(up.T @ up)
    theta = np.angle(np.diag(p.T @ up.T @ up @ p)) / 2
    k1 = up @ p @ np.diag(np.exp(-1j * theta))
    if np.real(np.linalg.det(k1)) < 0:
        theta[0] += np.pi
        k1 = up @ p @ np.diag(np.exp(-1j * theta))
    coeffs = np.linalg.solve(_MAGIC_EIGS, theta)
    left = MAGIC @ k1 @ MAGIC_DAG
    right = MAGIC @ p.T @ MAGIC_DAG
    a1, a2 = split_local(left, tol=1e-7)
    b1, b2 = split_local(right, tol=1e-7)
    return a1, a2, tuple(float(c) for c in coeffs[1:]), b1, b2


def interaction_gates(x: float, y: float, z: float, q0: int, q1: int) -> List[Gate]:
    """Three-CX circuit equal to ``exp(i(x XX + y YY + z ZZ))`` on ``(q0, q1)``."""
    return [
        Gate(RZ, (q1,), (np.pi / 2,)),
        Gate(CX, (q1, q0)),
        Gate(RZ, (q0,), (_wrap(np.pi / 2 - 2 * z),)),
        Gate(RY, (q1,), (_wrap(np.pi / 2 - 2 * x),)),
        Gate(CX, (q0, q1)),
        Gate(RY, (q1,), (_wrap(2 * y - np.pi / 2),)),
        Gate(CX, (q1, q0)),
        Gate(RZ, (q0,), (-np.pi / 2,)),
    ]


def kak(u: np.ndarray, q0: int = 0, q1: int = 1) -> List[Gate]:
    """Gate sequence (time order) for a two-qubit unitary on ``(q0, q1)``.

    ``q0`` is the most significant qubit of ``u``'s index. Product
    unitaries use no CX; everything else uses exactly three.
    """
    u = _check_unitary(u, 4)
    local = split_local(u)
    if local is not None:
        return zyz(_unitarize(local[0]), q0) + zyz(_unitarize(local[1]), q1)
    a1, a2, (x, y, z), b1, b2 = kak_decompose(u)
    return (
        zyz(_unitarize(b1), q0)
        + zyz(_unitarize(b2), q1)
        + interaction_gates(x, y, z, q0, q1)
        + zyz(_unitarize(a1), q0)
        + zyz(_unitarize(a2), q1)
    )


def _unitarize(m: np.ndarray) -> np.ndarray:
    # nearest unitary (polar factor); removes the O(1e-15) drift from splitting
    w, _, vh = np.linalg.svd(m)
    return w @ vh


# ---------------------------------------------------------------------------
# Plans


def qsd_cx_estimate(k: int) -> int:
    """CX count of the quantum Shannon decomposition of a generic k-qubit unitary."""
    return int(round(0.75 * 4**k - 1.5 * 2**k))


def synthesize_factor(f: BlockFactor) -> List[Gate]:
    k = len(f.qubits)
    u = f.unitary()
    if k == 1:
        return zyz(u, f.qubits[0])
    if k == 2:
        return kak(u, *f.qubits)
    return [Gate(OPAQUE, f.qubits, matrix=u, cx_estimate=qsd_cx_estimate(k))]


def prepare_column(v: np.ndarray, qubits: Sequence[int]) -> List[Gate]:
    """Gates mapping ``|0...0>`` on ``qubits`` to the unit vector ``v``.

    One qubit: ZYZ of a completing unitary. Two qubits: Schmidt form
    ``Ry`` + one CX + local rotations, with no CX for product columns.
    Larger blocks fall back to an opaque completing unitary.
    """
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    k = len(qubits)
    if k == 1:
        return zyz(unitary_with_first_column(v), qubits[0])
    if k > 2:
        return [Gate(OPAQUE, tuple(qubits), matrix=unitary_with_first_column(v), cx_estimate=qsd_cx_estimate(k))]
    q0, q1 = qubits
    u, sv, vh = np.linalg.svd(v.reshape(2, 2))
    if sv[1] <= LOCAL_TOL:
        return zyz(unitary_with_first_column(u[:, 0]), q0) + zyz(unitary_with_first_column(vh[0]), q1)
    theta = 2 * np.arctan2(sv[1], sv[0])
    # s0|00> + s1|11>, then U on q0 and Vh^T on q1
    return [Gate(RY, (q0,), (theta,)), Gate(CX, (q0, q1))] + zyz(u, q0) + zyz(vh.T, q1)


def synthesize_plan(plan) -> GateCircuit:
    """Gate circuit for a plan, in application order (last layer first).

    Identity factors (within 1e-12) are skipped. A residual core becomes a
    leading opaque ``n``-qubit state-preparation gate flagged ``residual``.
    Without a residual, the first applied layer acts on ``|0...0>``, so only
    the first column of each of its factors is synthesized.
    """
    gates: List[Gate] = []
    if plan.residual_core is not None:
        n = plan.n
        gates.append(
            Gate(
                OPAQUE,
                tuple(range(n)),
                matrix=unitary_with_first_column(plan.residual_core.amps),
                cx_estimate=qsd_cx_estimate(n),
                residual=True,
            )
        )
    on_zero = plan.residual_core is None
    for layer in reversed(plan.layers):
        for f in layer.factors:
            if f.is_identity(PRUNE_TOL):
                continue
            if on_zero:
                gates.extend(prepare_column(f.unitary()[:, 0], f.qubits))
            else:
                gates.extend(synthesize_factor(f))
        on_zero = False
    return GateCircuit(plan.n, gates)
