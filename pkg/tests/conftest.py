from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def dense_partial_trace(amps, n, keep):
    """Oracle: partial trace through the full 2^n x 2^n density operator."""
    rho = np.outer(amps, amps.conj()).reshape((2,) * (2 * n))
    drop = [q for q in range(n) if q not in keep]
    # trace out dropped qubits one at a time, highest index first
    cur = n
    for q in sorted(drop, reverse=True):
        rho = np.trace(rho, axis1=q, axis2=q + cur)
        cur -= 1
    # remaining axes are kept qubits in ascending order; reorder to `keep`
    order = sorted(keep)
    perm = [order.index(q) for q in keep]
    k = len(keep)
    rho = rho.transpose(perm + [p + k for p in perm])
    return rho.reshape(1 << k, 1 << k)


def kron_all(mats):
    out = np.ones((1, 1), dtype=np.complex128)
    for m in mats:
        out = np.kron(out, m)
    return out


def equal_up_to_phase(a, b, atol):
    """max |a - e^{i phi} b| with the best phase, compared to atol."""
    a = np.asarray(a).reshape(-1)
    b = np.asarray(b).reshape(-1)
    ov = np.vdot(b, a)
    ph = ov / abs(ov) if abs(ov) > 0 else 1.0
    return np.max(np.abs(a - ph * b)) <= atol


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
