import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtucker.errors import DimensionMismatch, EmptySet, FullSet, NotPowerOfTwo, ZeroVector
from qtucker.statevec import (
    StateVector,
    apply_block_adjoint,
    apply_matrix,
    basis_state,
    bell,
    entropy,
    fidelity,
    ghz,
    normalize,
    random_state,
    random_unitary,
    reduced_density,
    schmidt_spectrum,
    zero_state,
)
from qtucker.tucker import BlockFactor, unitary_with_first_column

from conftest import dense_partial_trace, kron_all

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


class TestNormalize:
    def test_scales_to_unit_norm(self):
        s = normalize([2, 0, 0, 0])
        assert s.n == 2
        np.testing.assert_allclose(s.amps, [1, 0, 0, 0])

    def test_uniform(self):
        np.testing.assert_allclose(normalize([1, 1, 1, 1]).amps, [0.5] * 4)

    def test_length_three(self):
        with pytest.raises(NotPowerOfTwo):
            normalize([0, 0, 0])

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            normalize([0, 0])

    def test_unnormalized_construction_rejected(self):
        with pytest.raises(ValueError):
            StateVector(1, np.array([1.0, 1.0]))

    def test_amplitudes_are_read_only(self):
        s = zero_state(2)
        with pytest.raises(ValueError):
            s.amps[0] = 0


def test_big_endian_round_trip():
    # qubit 0 is the most significant index bit and tensor axis 0
    s = basis_state("100")
    assert s.amps[4] == 1
    assert s.tensor()[1, 0, 0] == 1
    x = np.array([[0, 1], [1, 0]])
    flipped = apply_matrix(zero_state(3), [0], x)
    assert flipped.amps[0b100] == 1
    flipped = apply_matrix(zero_state(3), [2], x)
    assert flipped.amps[0b001] == 1


class TestFidelity:
    def test_self(self, rng):
        s = random_state(3, rng)
        assert fidelity(s, s) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert fidelity(basis_state("00"), basis_state("11")) == 0

    def test_bell_vs_zero(self):
        assert fidelity(bell(), zero_state(2)) == pytest.approx(0.5, abs=1e-15)

    def test_symmetric(self, rng):
        a, b = random_state(4, rng), random_state(4, rng)
        assert fidelity(a, b) == pytest.approx(fidelity(b, a), abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            fidelity(zero_state(2), zero_state(3))


class TestReducedDensity:
    def test_product(self):
        np.testing.assert_allclose(reduced_density(zero_state(2), [0]), [[1, 0], [0, 0]])

    def test_bell(self):
        np.testing.assert_allclose(reduced_density(bell(), [0]), np.eye(2) / 2, atol=1e-15)

    def test_ghz3_pair_matches_dense_partial_trace(self):
        g = ghz(3)
        oracle = dense_partial_trace(g.amps, 3, [0, 1])
        np.testing.assert_allclose(oracle, np.diag([0.5, 0, 0, 0.5]), atol=1e-15)
        np.testing.assert_allclose(reduced_density(g, [0, 1]), oracle, atol=1e-15)

    def test_matches_dense_oracle_with_unordered_keep(self, rng):
        s = random_state(5, rng)
        for keep in ([3, 1], [4, 0, 2], [2]):
            np.testing.assert_allclose(reduced_density(s, keep), dense_partial_trace(s.amps, 5, keep), atol=1e-13)

    def test_density_invariants(self, rng):
        s = random_state(6, rng)
        rho = reduced_density(s, [1, 4])
        assert np.allclose(rho, rho.conj().T, atol=1e-12)
        assert np.trace(rho).real == pytest.approx(1, abs=1e-12)
        assert np.linalg.eigvalsh(rho).min() >= -1e-10

    def test_empty(self):
        with pytest.raises(EmptySet):
            reduced_density(zero_state(2), [])

    def test_bad_index(self):
        with pytest.raises(DimensionMismatch):
            reduced_density(zero_state(2), [2])

    def test_marginal_consistency(self, rng):
        for _ in range(5):
            s = random_state(6, rng)
            for i in range(6):
                single = reduced_density(s, [i])
                for j in range(6):
                    if j == i:
                        continue
                    pair = reduced_density(s, [i, j]).reshape(2, 2, 2, 2)
                    np.testing.assert_allclose(np.trace(pair, axis1=1, axis2=3), single, atol=1e-12)


class TestEntropy:
    def test_pure(self):
        assert entropy(np.diag([1.0, 0.0])) == 0

    def test_one_bit(self):
        assert entropy(np.eye(2) / 2) == pytest.approx(1.0)

    def test_two_bits(self):
        assert entropy(np.eye(4) / 4) == pytest.approx(2.0)

    def test_tolerates_roundoff_negatives(self):
        assert entropy(np.diag([1.0 + 5e-11, -5e-11])) == pytest.approx(0.0, abs=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(3, 6), st.integers(0, 2**32 - 1), st.integers(1, 3))
    def test_bounded_by_qubit_count(self, n, seed, k):
        rng = np.random.default_rng(seed)
        s = random_state(n, rng)
        keep = list(rng.choice(n, size=min(k, n - 1), replace=False))
        e = entropy(reduced_density(s, keep))
        assert -1e-12 <= e <= len(keep) + 1e-12


class TestSchmidt:
    def test_bell(self):
        np.testing.assert_allclose(schmidt_spectrum(bell(), [0]), [2**-0.5] * 2)

    def test_product(self, rng):
        s = normalize(np.kron(random_state(2, rng).amps, random_state(2, rng).amps))
        spec = schmidt_spectrum(s, [0, 1])
        assert spec[0] == pytest.approx(1, abs=1e-12)
        assert np.all(spec[1:] < 1e-12)

    def test_ghz4_dense_svd(self):
        oracle = np.linalg.svd(ghz(4).amps.reshape(4, 4), compute_uv=False)
        np.testing.assert_allclose(oracle, [2**-0.5, 2**-0.5, 0, 0], atol=1e-15)
        np.testing.assert_allclose(schmidt_spectrum(ghz(4), [0, 1]), oracle, atol=1e-15)

    def test_squares_sum_to_one(self, rng):
        s = random_state(5, rng)
        assert np.sum(schmidt_spectrum(s, [0, 3]) ** 2) == pytest.approx(1, abs=1e-10)

    def test_empty_and_full(self):
        with pytest.raises(EmptySet):
            schmidt_spectrum(bell(), [])
        with pytest.raises(FullSet):
            schmidt_spectrum(bell(), [0, 1])

    def test_bounds_product_overlaps(self, rng):
        for _ in range(50):
            s = random_state(4, rng)
            cut = [0, 2]
            a, b = random_state(2, rng).amps, random_state(2, rng).amps
            # product state with `a` on qubits (0, 2) and `b` on (1, 3)
            p = np.einsum("ac,bd->abcd", a.reshape(2, 2), b.reshape(2, 2)).reshape(-1)
            assert abs(np.vdot(p, s.amps)) <= schmidt_spectrum(s, cut)[0] + 1e-10


class TestApplyBlockAdjoint:
    def test_identity(self, rng):
        s = random_state(3, rng)
        out = apply_block_adjoint(s, BlockFactor((1,), np.eye(2)))
        np.testing.assert_allclose(out.amps, s.amps)

    def test_hadamard(self):
        plus0 = normalize([1, 0, 1, 0])
        out = apply_block_adjoint(plus0, BlockFactor((0,), H))
        np.testing.assert_allclose(out.amps, [1, 0, 0, 0], atol=1e-15)

    def test_bell_unitary_dense_oracle(self):
        u = unitary_with_first_column(bell().amps)
        assert np.allclose(u.conj().T @ u, np.eye(4), atol=1e-12)
        dense = u.conj().T @ bell().amps
        np.testing.assert_allclose(dense, [1, 0, 0, 0], atol=1e-12)
        out = apply_block_adjoint(bell(), BlockFactor((0, 1), u))
        np.testing.assert_allclose(out.amps, dense, atol=1e-12)

    def test_matches_dense_kron(self, rng):
        s = random_state(4, rng)
        u = random_unitary(4, rng)
        out = apply_block_adjoint(s, BlockFactor((1, 2), u))
        dense = kron_all([np.eye(2), u.conj().T, np.eye(2)]) @ s.amps
        np.testing.assert_allclose(out.amps, dense, atol=1e-12)

    def test_norm_preserved(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 7))
            k = int(rng.integers(1, min(n, 3) + 1))
            qubits = tuple(int(q) for q in rng.choice(n, size=k, replace=False))
            out = apply_block_adjoint(random_state(n, rng), BlockFactor(qubits, random_unitary(1 << k, rng)))
            assert abs(np.linalg.norm(out.amps) - 1) <= 1e-12

    def test_wrong_size(self):
        # a 4x4 operator bound to a single qubit
        with pytest.raises(DimensionMismatch):
            apply_matrix(zero_state(2), [0], np.eye(4))
