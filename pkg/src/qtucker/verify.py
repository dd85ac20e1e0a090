"""Independent checks: simulation of plans and gate circuits, a brute-force
product-overlap oracle, and a replay audit of engine traces."""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .corrgraph import Partition
from .errors import OpaqueWithoutMatrix, TooLarge
from .statevec import StateVector, apply_matrix, fidelity, schmidt_spectrum, zero_state
from .synth import OPAQUE, GateCircuit
from .tucker import apply_adjoints

ORACLE_MAX_DIM = 1 << 10


def simulate_plan(plan) -> StateVector:
    """Apply the plan's layers, last layer first, to ``|0...0>`` (or the residual core)."""
    state = plan.residual_core if plan.residual_core is not None else zero_state(plan.n)
    for layer in reversed(plan.layers):
        for f in layer.factors:
            state = apply_matrix(state, f.qubits, f.unitary())
    return state


def simulate_gates(circuit: GateCircuit) -> StateVector:
    state = zero_state(circuit.n)
    for g in circuit.gates:
        if g.kind == OPAQUE and g.matrix is None:
            raise OpaqueWithoutMatrix(f"opaque gate on {g.qubits} carries no matrix")
        state = apply_matrix(state, g.qubits, g.to_matrix())
    return state


# ---------------------------------------------------------------------------
# Product-overlap oracle


def _block_tensor(state: StateVector, partition: Partition) -> np.ndarray:
    perm = [q for b in partition.blocks for q in b]
    return np.transpose(state.tensor(), perm).reshape([1 << len(b) for b in partition.blocks])


def _contract_except(t: np.ndarray, vecs: list, skip: int) -> np.ndarray:
    # contract from the last mode down so earlier axis indices stay valid
    out = t
    for i in range(len(vecs) - 1, -1, -1):
        if i != skip:
            out = np.tensordot(out, vecs[i].conj(), axes=(i, 0))
    return out


def _alternate(t: np.ndarray, vecs: list, tol: float, max_sweeps: int = 2000) -> float:
    alpha = 0.0
    for _ in range(max_sweeps):
        prev = alpha
        for i in range(len(vecs)):
            v = _contract_except(t, vecs, i)
            nv = np.linalg.norm(v)
            if nv == 0:
                continue
            vecs[i] = v / nv
            alpha = nv
        if abs(alpha - prev) < tol:
            break
    return float(alpha)


def oracle_closest_product(
    state: StateVector, partition: Partition, budget: int = 64, tol: float = 1e-10, seed: int = 7
) -> float:
    """Best product overlap found by many independent restarts.

    Two-block partitions return the exact top singular value. Otherwise
    seeds are: top eigenvectors of each block marginal, the block digits of
    the largest amplitudes, and ``budget`` random draws.
    """
    if state.dim > ORACLE_MAX_DIM:
        raise TooLarge(f"oracle limited to {ORACLE_MAX_DIM} amplitudes")
    blocks = partition.blocks
    if len(blocks) == 1:
        return 1.0
    if len(blocks) == 2:
        return float(schmidt_spectrum(state, blocks[0])[0])

    t = _block_tensor(state, partition)
    dims = t.shape
    starts = []
    marg = []
    for i in range(len(dims)):
        m = np.moveaxis(t, i, 0).reshape(dims[i], -1)
        _, vecs = np.linalg.eigh(m @ m.conj().T)
        marg.append(vecs[:, -1])
    starts.append(marg)
    for flat in np.argsort(-np.abs(t).reshape(-1), kind="stable")[:8]:
        digits = np.unravel_index(flat, dims)
        starts.append([np.eye(d, dtype=np.complex128)[dg] for d, dg in zip(dims, digits)])
    rng = np.random.default_rng(seed)
    for _ in range(budget):
        starts.append([(rng.standard_normal(d) + 1j * rng.standard_normal(d)) for d in dims])
    best = 0.0
    for s in starts:
        vecs = [np.asarray(v, dtype=np.complex128) / np.linalg.norm(v) for v in s]
        best = max(best, _alternate(t, vecs, tol))
    return min(best, 1.0)


# ---------------------------------------------------------------------------
# Trace audit


def block_cuts(partition: Partition):
    """Every bipartition of the blocks, as the qubit set on the side of block 0."""
    m = len(partition.blocks)
    rest = range(1, m)
    for r in range(0, m - 1):
        for combo in itertools.combinations(rest, r):
            side = (0,) + combo
            yield tuple(q for b in side for q in partition.blocks[b])


def cut_ceiling(state: StateVector, partition: Partition) -> float:
    """Minimum over block cuts of the largest Schmidt coefficient; 1 for one block."""
    best = 1.0
    for cut in block_cuts(partition):
        best = min(best, float(schmidt_spectrum(state, cut)[0]))
    return best


@dataclass
class AuditReport:
    violations: List[dict] = field(default_factory=list)
    iterations: List[dict] = field(default_factory=list)
    simulated_fidelity: float = float("nan")
    expected_fidelity: float = float("nan")

    @property
    def ok(self) -> bool:
        return not self.violations

    def count(self, check: str) -> int:
        return sum(1 for v in self.violations if v["check"] == check)

    def to_json(self) -> str:
        return json.dumps(asdict(self) | {"ok": self.ok}, indent=2)


def audit_trace(
    plan,
    target: StateVector,
    mono_tol: float = 1e-9,
    ceiling_tol: float = 1e-9,
    gauge_tol: float = 1e-8,
    final_tol: float = 1e-9,
) -> AuditReport:
    """Replay a plan against its target and check every iteration.

    Checks are: fidelity never drops (beyond ``mono_tol``); each F_j stays
    under the squared cut ceiling of the partition used; the replayed core
    overlaps ``|0...0>`` by the recorded F_j; and the simulated plan has the
    recorded final fidelity with the target (or prepares it exactly when a
    residual core is present). Violations are collected, never raised.
    """
    report = AuditReport()
    if plan.n != target.n:
        report.violations.append({"iteration": 0, "check": "dimension", "value": plan.n, "bound": target.n})
        return report
    records = plan.trace.records
    prev = plan.trace.initial_fidelity
    core = target
    for j, (rec, layer) in enumerate(zip(records, plan.layers), start=1):
        f = rec.fidelity
        if f < prev - mono_tol:
            report.violations.append({"iteration": j, "check": "monotonicity", "value": f, "bound": prev})
        ceiling = cut_ceiling(core, layer.partition) ** 2
        if f > ceiling + ceiling_tol:
            report.violations.append({"iteration": j, "check": "cut_ceiling", "value": f, "bound": ceiling})
        core = apply_adjoints(core, layer.partition, layer.factors)
        replayed = float(abs(core.amps[0]) ** 2)
        if abs(replayed - f) > gauge_tol:
            report.violations.append({"iteration": j, "check": "gauge_identity", "value": f, "bound": replayed})
        report.iterations.append({"iteration": j, "fidelity": f, "ceiling": ceiling, "replayed": replayed})
        prev = f
    if len(records) != len(plan.layers):
        report.violations.append(
            {"iteration": len(records), "check": "layer_count", "value": len(plan.layers), "bound": len(records)}
        )

    sim = fidelity(simulate_plan(plan), target)
    expected = 1.0 if plan.residual_core is not None else plan.trace.final_fidelity
    report.simulated_fidelity, report.expected_fidelity = sim, expected
    if abs(sim - expected) > final_tol:
        report.violations.append(
            {"iteration": len(records), "check": "final_fidelity", "value": sim, "bound": expected}
        )
    return report
