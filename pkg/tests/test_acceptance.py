"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are also
collected into the terminal summary. ``python tests/test_acceptance.py``
runs the same checks without pytest and prints the lines directly.
"""

import csv
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from qtucker.cli import main
from qtucker.corrgraph import CorrelationGraph, Partition, all_pairs, pair_weights, partition_pairs
from qtucker.engine import CircuitPlan, EngineConfig, run
from qtucker.statevec import StateVector, apply_matrix, ghz, random_state, random_unitary, schmidt_spectrum, w_state
from qtucker.synth import CX, GateCircuit, kak, synthesize_plan
from qtucker.tucker import closest_product
from qtucker.verify import audit_trace, oracle_closest_product, simulate_plan

from conftest import DATA, equal_up_to_phase

RESULTS = {}
PUBLISHED_MNIST = {2: 553, 3: 163, 4: 51, 5: 8}


def report(num, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {num:>2}: {detail}"
    RESULTS[num] = line
    print(line)
    assert ok, line


_RUNS = None


def random_runs():
    """Default-config runs on 100 seeded states per size, shared by 1-3."""
    global _RUNS
    if _RUNS is None:
        runs, start = [], time.perf_counter()
        for n in (4, 6, 8, 10):
            rng = np.random.default_rng(1000 + n)
            for seed in range(100):
                s = random_state(n, rng)
                runs.append((s, run(s, EngineConfig(seed=seed))))
        _RUNS = runs, time.perf_counter() - start
    return _RUNS


def test_c01_monotonicity():
    runs, seconds = random_runs()
    worst = min(float(np.min(np.diff(p.trace.fidelities(True)), initial=0.0)) for _, p in runs)
    ok = worst >= -1e-9 and seconds < 120
    report(1, ok, f"{len(runs)} runs, worst step {worst:.2e} (>= -1e-9), {seconds:.1f}s (< 120s)")


def test_c02_gauge_identity():
    runs, _ = random_runs()
    worst, checked = 0.0, 0
    for s, plan in runs:
        rep = audit_trace(plan, s)
        for it in rep.iterations:
            worst = max(worst, abs(it["replayed"] - it["fidelity"]))
            checked += 1
    report(2, worst <= 1e-8, f"{checked} iterations, max |<0|G_j>|^2 - F_j| = {worst:.2e} (<= 1e-8)")


def test_c03_cut_ceiling():
    runs, _ = random_runs()
    worst, checked = -np.inf, 0
    for s, plan in runs:
        if s.n > 8:
            continue
        for it in audit_trace(plan, s).iterations:
            worst = max(worst, it["fidelity"] - it["ceiling"])
            checked += 1
    report(3, worst <= 1e-9, f"{checked} iterations (n <= 8), max F_j - ceiling = {worst:.2e} (<= 1e-9)")


def test_c04_exact_convergence():
    worst_loss, worst_sim, iters = 0.0, 0.0, 0
    for n in (4, 6, 8):
        rng = np.random.default_rng(2000 + n)
        for seed in range(100):
            s = random_state(n, rng)
            plan = run(s, EngineConfig(epsilon=1e-10, k_max=n, max_iters=n * n, seed=seed))
            sim = abs(np.vdot(s.amps, simulate_plan(plan).amps)) ** 2
            worst_loss = max(worst_loss, plan.trace.loss)
            worst_sim = max(worst_sim, abs(sim - plan.trace.final_fidelity))
            iters = max(iters, len(plan.trace))
    ok = worst_loss <= 1e-9 and worst_sim <= 1e-9
    report(4, ok, f"300 runs, max loss {worst_loss:.2e}, max sim gap {worst_sim:.2e}, max iters {iters}")


def test_c05_oracle_cross_check():
    rng = np.random.default_rng(5)
    excess, bip_gap = -np.inf, 0.0
    for _ in range(100):
        n = int(rng.integers(3, 7))
        s = random_state(n, rng)
        perm = rng.permutation(n)
        m = int(rng.integers(2, n + 1))
        cuts = sorted(rng.choice(np.arange(1, n), size=m - 1, replace=False))
        p = Partition(tuple(tuple(int(q) for q in b) for b in np.split(perm, cuts)), n)
        alpha, _ = closest_product(s, p, rng=rng)
        excess = max(excess, alpha - oracle_closest_product(s, p))
        # bipartition of the same state
        left = tuple(sorted(int(q) for q in perm[: int(rng.integers(1, n))]))
        bp = Partition((left, tuple(q for q in range(n) if q not in left)), n)
        lam = float(schmidt_spectrum(s, list(left))[0])
        a_bp, _ = closest_product(s, bp, rng=rng)
        bip_gap = max(bip_gap, abs(a_bp - lam), abs(oracle_closest_product(s, bp) - lam))
    singles = Partition(((0,), (1,), (2,)), 3)
    g3 = closest_product(ghz(3), singles)[0]
    w3 = closest_product(w_state(3), singles)[0]
    og3 = oracle_closest_product(ghz(3), singles)
    ow3 = oracle_closest_product(w_state(3), singles, budget=64)
    named = max(abs(g3 - 2**-0.5), abs(og3 - 2**-0.5), abs(w3 - 2 / 3), abs(ow3 - 2 / 3))
    ok = excess <= 1e-6 and bip_gap <= 1e-8 and named <= 1e-6
    report(5, ok, f"max excess {excess:.2e}, bipartition gap {bip_gap:.2e}, GHZ3/W3 gap {named:.2e}")


def test_c06_kak_synthesis():
    rng = np.random.default_rng(6)
    max_cx = max_depth = 0
    all_equal = True
    for _ in range(200):
        u = random_unitary(4, rng)
        gates = kak(u)
        all_equal &= equal_up_to_phase(_circuit_unitary(gates, 2), u, 1e-8)
        max_cx = max(max_cx, sum(g.kind == CX for g in gates))
        max_depth = max(max_depth, GateCircuit(2, gates).depth)
    ok = all_equal and max_cx <= 3 and max_depth <= 14
    report(6, ok, f"200 Haar unitaries, reconstructed={all_equal}, max CX {max_cx}, max depth {max_depth}")


def _circuit_unitary(gates, n):
    # column j is the gate sequence applied to |j>
    cols = []
    for j in range(1 << n):
        state = StateVector(n, np.eye(1 << n, dtype=complex)[j])
        for g in gates:
            state = apply_matrix(state, g.qubits, g.to_matrix())
        cols.append(state.amps)
    return np.column_stack(cols)


def test_c07_depth_scaling():
    s = random_state(10, np.random.default_rng(7))
    plan = run(s, EngineConfig(k_max=2, max_iters=50, epsilon=1e-14))
    layers = len(plan.layers)
    depths = np.array(
        [synthesize_plan(CircuitPlan(10, plan.layers[:j], plan.trace)).depth for j in range(1, layers + 1)], float
    )
    x = np.arange(1, layers + 1, dtype=float)
    slope, icpt = np.polyfit(x, depths, 1)
    r2 = 1 - np.sum((depths - (slope * x + icpt)) ** 2) / np.sum((depths - depths.mean()) ** 2)
    d6 = depths[5]
    ok = layers == 50 and abs(d6 - 78) <= 0.15 * 78 and r2 >= 0.99
    report(7, ok, f"depth after 6 layers {d6:.0f} (78 +/- 15%), slope {slope:.2f}/layer, R^2 {r2:.5f} over {layers}")


def test_c08_mnist_bench(tmp_path):
    start = time.perf_counter()
    code = main(
        ["bench", str(DATA / "mnist_zero.pgm"), "--factor-sizes", "2,3,4,5", "--precision", "1e-6",
         "--out-dir", str(tmp_path)]
    )
    seconds = time.perf_counter() - start
    with open(tmp_path / "sweep.csv") as fh:
        rows = {int(r["k"]): r for r in csv.DictReader(fh)}
    it = {k: int(rows[k]["iters"]) for k in (2, 3, 4, 5)}
    decreasing = all(it[k] > it[k + 1] for k in (2, 3, 4))
    within = [k for k in it if abs(it[k] - PUBLISHED_MNIST[k]) <= 0.5 * PUBLISHED_MNIST[k]]
    ok = code in (0, 2) and decreasing and it[5] <= 30 and it[2] >= 10 * it[5] and seconds < 600
    report(
        8,
        ok,
        f"iters {[it[k] for k in (2, 3, 4, 5)]} ({seconds:.0f}s); "
        f"published-count match within 50% for k={within or 'none'} (informational)",
    )


def test_c09_weight_scaling():
    sizes = list(range(8, 15))
    times = []
    for n in sizes:
        s = random_state(n, np.random.default_rng(n))
        pair_weights(s)
        best = np.inf
        for _ in range(9):
            t = time.perf_counter()
            pair_weights(s)
            best = min(best, time.perf_counter() - t)
        times.append(best)
    t = np.array(times)
    norm = t / np.array([2.0**n * n * n for n in sizes])
    c = float(np.exp(np.mean(np.log(norm))))
    spread = float(np.max(np.maximum(norm / c, c / norm)))
    slope = np.polyfit(sizes, np.log2(t / np.array(sizes, float) ** 2), 1)[0]
    report(9, spread <= 2.0, f"c={c:.2e}s, worst deviation x{spread:.2f} (<= 2), log2(t/n^2) slope {slope:.2f}")


def _pairings(items):
    if not items:
        yield ()
        return
    a = items[0]
    for t in range(1, len(items)):
        rest = items[1:t] + items[t + 1 :]
        for m in _pairings(rest):
            yield ((a, items[t]),) + m


def _pairing_weight(w, pairs):
    return sum(w[i, j] for i, j in sorted(pairs))


def test_c10_matching_optimality():
    rng = np.random.default_rng(10)
    mismatches = 0
    for n in (4, 6, 8):
        for _ in range(50):
            w = np.triu(rng.random((n, n)), 1)
            w = w + w.T
            graph = CorrelationGraph(n, w, "frobenius", all_pairs(n))
            best = max(_pairing_weight(w, m) for m in _pairings(list(range(n))))
            got = _pairing_weight(w, partition_pairs(graph).blocks)
            mismatches += got != best
    report(10, mismatches == 0, f"150 graphs (n = 4, 6, 8), {mismatches} differ from enumeration")


def test_c11_determinism(tmp_path):
    src = tmp_path / "s.csv"
    amps = random_state(8, np.random.default_rng(11)).amps
    src.write_text("\n".join(f"{float(a.real)!r},{float(a.imag)!r}" for a in amps))
    for tag in ("a", "b"):
        main(["prepare", str(src), "--seed", "11", "--out-dir", str(tmp_path / tag)])
    same = (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()
    report(11, same, "trace.csv byte-identical across two runs" if same else "trace.csv differs")


if __name__ == "__main__":
    import tempfile

    failed = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_c")):
        args = [Path(tempfile.mkdtemp())] if fn.__code__.co_argcount else []
        try:
            fn(*args)
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
