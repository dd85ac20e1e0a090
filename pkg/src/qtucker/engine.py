"""The iterative compilation loop.

Each iteration builds the correlation graph of the current core, picks a
partition at the current block size, runs a gauged Tucker step and records
the block factors as one circuit layer. The block size grows by one when
the fidelity stalls. The loop ends when ``|<0|core>|^2 >= 1 - epsilon`` (the
core is dropped) or when the iteration cap is hit (the core is kept as a
residual preparation layer).
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .corrgraph import FROBENIUS, METRICS, Partition, cut_value, pair_weights, partition_blocks, partition_pairs, perturbed
from .errors import AtMaxBlockSize, InvalidBlockSize
from .statevec import StateVector
from .tucker import BlockFactor, ClosestProductConfig, tucker_step

log = logging.getLogger(__name__)


@dataclass
class EngineConfig:
    """Engine parameters. ``None`` for ``k_max``/``max_iters`` means ``n``/``n**2``."""

    epsilon: float = 1e-6
    k_init: int = 2
    k_max: Optional[int] = None
    stall_window: int = 3
    stall_eps: float = 1e-8
    max_iters: Optional[int] = None
    metric: str = FROBENIUS
    constraint: Optional[list] = None
    seed: int = 0
    restarts: int = 8
    tol: float = 1e-12
    max_sweeps: int = 500
    weight_noise: float = 0.0

    def resolved(self, n: int) -> "EngineConfig":
        """Copy with defaults filled in for an ``n``-qubit target, validated."""
        k_max = n if self.k_max is None else self.k_max
        max_iters = n * n if self.max_iters is None else self.max_iters
        k_init = min(self.k_init, n) if n == 1 else self.k_init
        k_max = min(k_max, n) if n == 1 else k_max
        cfg = dataclasses.replace(self, k_init=k_init, k_max=k_max, max_iters=max_iters)
        if not 0 < cfg.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {cfg.epsilon}")
        if not min(2, n) <= cfg.k_init <= cfg.k_max <= n:
            raise InvalidBlockSize(f"need 2 <= k_init <= k_max <= n, got {cfg.k_init}, {cfg.k_max}, n={n}")
        if cfg.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if cfg.stall_window < 1:
            raise ValueError("stall_window must be >= 1")
        if cfg.metric not in METRICS:
            raise ValueError(f"unknown metric {cfg.metric!r}")
        return cfg

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["constraint"] is not None:
            d["constraint"] = [list(e) for e in d["constraint"]]
        return d


@dataclass
class IterationRecord:
    j: int
    k: int
    partition: Partition
    phi: float
    alpha: float
    fidelity: float
    seconds: float = 0.0


@dataclass
class IterationTrace:
    initial_fidelity: float
    records: List[IterationRecord] = field(default_factory=list)

    def fidelities(self, include_initial: bool = False) -> np.ndarray:
        f = [r.fidelity for r in self.records]
        return np.array([self.initial_fidelity] + f if include_initial else f)

    @property
    def final_fidelity(self) -> float:
        return self.records[-1].fidelity if self.records else self.initial_fidelity

    @property
    def loss(self) -> float:
        return max(0.0, 1.0 - self.final_fidelity)

    def __len__(self):
        return len(self.records)


@dataclass
class Layer:
    partition: Partition
    factors: List[BlockFactor]


@dataclass
class CircuitPlan:
    """``|target> ~ W_1 W_2 ... W_r |residual or 0>`` with ``layers[j-1] = W_j``.

    Layers are applied right to left: ``layers[-1]`` acts first.
    """

    n: int
    layers: List[Layer]
    trace: IterationTrace
    residual_core: Optional[StateVector] = None
    config: Optional[EngineConfig] = None

    @property
    def converged(self) -> bool:
        return self.residual_core is None


def stall_check(fidelities: Sequence[float], window: int, eps: float) -> bool:
    """True iff each of the last ``window`` steps improved F by less than ``eps``."""
    if window < 1:
        raise ValueError("window must be >= 1")
    diffs = np.diff(np.asarray(fidelities, dtype=float))
    if diffs.size < window:
        return False
    return bool(np.all(diffs[-window:] < eps))


def budget_stall(fidelities: Sequence[float], cfg: EngineConfig, remaining: int, reserve: int) -> bool:
    """True if the recent loss decay rate cannot reach ``epsilon`` in time.

    The rate is the geometric mean loss ratio over the last ``stall_window``
    steps; ``reserve`` iterations are held back for later growth steps.
    """
    f = np.asarray(fidelities, dtype=float)
    w = cfg.stall_window
    if f.size <= w:
        return False
    loss_then, loss_now = 1.0 - f[-1 - w], 1.0 - f[-1]
    if loss_now <= cfg.epsilon:
        return False
    if loss_now >= loss_then:
        return True
    rate = (loss_now / loss_then) ** (1.0 / w)
    needed = np.log(cfg.epsilon / loss_now) / np.log(rate)
    return bool(needed > remaining - reserve)


def grow(k: int, cfg: EngineConfig) -> int:
    if cfg.k_max is None or k >= cfg.k_max:
        raise AtMaxBlockSize(f"block size {k} is already the maximum")
    return k + 1


def choose_partition(graph, k: int, constraint=None) -> Partition:
    n = graph.n
    if k >= n:
        return Partition((tuple(range(n)),), n)
    if k == 2 and n % 2 == 0:
        return partition_pairs(graph, constraint)
    return partition_blocks(graph, k)


def run(
    target: StateVector,
    cfg: Optional[EngineConfig] = None,
    progress: Optional[Callable[[dict], None]] = None,
) -> CircuitPlan:
    """Compile ``target`` into a layered plan of block unitaries.

    Deterministic for a fixed ``cfg.seed``. Never raises for a valid target
    and config: if the iteration cap is reached first, the remaining core is
    returned as ``plan.residual_core``.
    """
    n = target.n
    cfg = (cfg or EngineConfig()).resolved(n)
    rng = np.random.default_rng(cfg.seed)
    cp_cfg = ClosestProductConfig(restarts=cfg.restarts, tol=cfg.tol, max_sweeps=cfg.max_sweeps)

    core = target
    f_prev = float(abs(core.amps[0]) ** 2)
    trace = IterationTrace(initial_fidelity=f_prev)
    layers: List[Layer] = []
    k = cfg.k_init
    window = [f_prev]
    converged = f_prev >= 1.0 - cfg.epsilon

    j = 0
    while not converged and j < cfg.max_iters:
        j += 1
        t0 = time.perf_counter()
        graph = pair_weights(core, cfg.metric, cfg.constraint)
        steer = perturbed(graph, cfg.weight_noise, rng)
        partition = choose_partition(steer, k, cfg.constraint)
        step = tucker_step(core, partition, cp_cfg, rng)
        rec = IterationRecord(
            j=j,
            k=k,
            partition=partition,
            phi=cut_value(graph, partition),
            alpha=step.alpha,
            fidelity=step.fidelity_to_zero,
            seconds=time.perf_counter() - t0,
        )
        trace.records.append(rec)
        layers.append(Layer(partition, step.factors))
        core = step.new_core
        log.debug("iter %d k=%d F=%.12f phi=%.6g", j, k, rec.fidelity, rec.phi)
        if progress is not None:
            progress({"iteration": j, "fidelity": rec.fidelity, "k": k, "phi": rec.phi})

        if rec.fidelity >= 1.0 - cfg.epsilon:
            converged = True
            break
        window.append(rec.fidelity)
        stalled = stall_check(window, cfg.stall_window, cfg.stall_eps)
        if stalled or (k < cfg.k_max and budget_stall(window, cfg, cfg.max_iters - j, cfg.k_max - k)):
            if k < cfg.k_max:
                k = grow(k, cfg)
                window = [rec.fidelity]
                log.info("stalled at F=%.12f; block size -> %d", rec.fidelity, k)
            elif cfg.weight_noise <= 0:
                log.info("stalled at maximal block size %d with F=%.12f", k, rec.fidelity)
                break

    return CircuitPlan(n, layers, trace, None if converged else core, cfg)
