import numpy as np
import pytest
from conftest import (
    dims,
    random_channels,
    random_density,
    random_hermitian,
    random_matrix,
    seeds,
)
from hypothesis import given

from qme.errors import (
    DimensionMismatch,
    EmptyNullSpace,
    NonHermitianHamiltonian,
    NonUniqueSteadyState,
)
from qme.liouville import (
    LindbladChannel,
    build_liouvillian,
    devectorize,
    lindblad_rhs,
    null_space,
    steady_states,
    trace_functional,
    unique_steady_state,
    vectorize,
)
from qme.models import SIGMA_MINUS, two_level
from qme.operators import SIGMA_X, SIGMA_Z, ket2dm, state_score


def random_model(seed, d):
    rng = np.random.default_rng(seed)
    return rng, random_hermitian(rng, d), random_channels(rng, d)


class TestVectorize:
    def test_identity(self):
        assert np.array_equal(vectorize(np.eye(2)), [1, 0, 0, 1])

    def test_column_stacking(self):
        m = np.array([[1, 2], [3, 4]])
        assert np.array_equal(vectorize(m), [1, 3, 2, 4])

    @given(seeds, dims)
    def test_round_trip(self, seed, d):
        rho = random_matrix(np.random.default_rng(seed), d)
        assert np.array_equal(devectorize(vectorize(rho)), rho)

    @given(seeds)
    def test_kronecker_identity(self, seed):
        rng = np.random.default_rng(seed)
        a, x, b = (random_matrix(rng, 3) for _ in range(3))
        assert np.linalg.norm(vectorize(a @ x @ b) - np.kron(b.T, a) @ vectorize(x)) < 1e-12

    def test_devectorize_bad_length(self):
        with pytest.raises(ValueError):
            devectorize(np.ones(5))


class TestBuildLiouvillian:
    def test_zero(self):
        assert np.array_equal(build_liouvillian(np.zeros((2, 2))), np.zeros((4, 4)))

    def test_non_hermitian_hamiltonian(self):
        with pytest.raises(NonHermitianHamiltonian):
            build_liouvillian(np.array([[0, 1], [0, 0]]))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            build_liouvillian(np.eye(2), [LindbladChannel(np.eye(3), 1.0)])

    def test_negative_rate(self):
        with pytest.raises(ValueError):
            LindbladChannel(SIGMA_X, -0.1)

    def test_relaxation_null_space(self):
        m = two_level(delta=1.0, omega=0.0, gamma_down=0.7, gamma_0=0.0)
        ns = null_space(m.liouvillian())
        assert ns.shape[1] == 1
        v = ns[:, 0] / ns[0, 0]
        assert np.allclose(v, [1, 0, 0, 0], atol=1e-10)

    def test_rhs_oracle_twenty_states(self, rng):
        h = random_hermitian(rng, 3)
        chans = random_channels(rng, 3, k=3)
        l = build_liouvillian(h, chans)
        for _ in range(20):
            rho = random_density(rng, 3)
            assert np.linalg.norm(devectorize(l @ vectorize(rho)) - lindblad_rhs(rho, h, chans)) < 1e-12

    @given(seeds, dims)
    def test_oracle_equivalence(self, seed, d):
        rng, h, chans = random_model(seed, d)
        rho = random_density(rng, d)
        l = build_liouvillian(h, chans)
        assert np.linalg.norm(devectorize(l @ vectorize(rho)) - lindblad_rhs(rho, h, chans)) < 1e-12

    @given(seeds, dims)
    def test_trace_preserving(self, seed, d):
        _, h, chans = random_model(seed, d)
        assert np.max(np.abs(trace_functional(d).conj() @ build_liouvillian(h, chans))) < 1e-10

    @given(seeds, dims)
    def test_hermiticity_preserving(self, seed, d):
        rng, h, chans = random_model(seed, d)
        rho = random_hermitian(rng, d)
        out = devectorize(build_liouvillian(h, chans) @ vectorize(rho))
        assert np.linalg.norm(out - out.conj().T) < 1e-12


class TestLindbladRhs:
    def test_coherent_only(self):
        plus = ket2dm(np.array([1, 1]) / np.sqrt(2))
        rhs = lindblad_rhs(plus, SIGMA_Z)
        assert np.allclose(rhs, -1j * (SIGMA_Z @ plus - plus @ SIGMA_Z))
        assert np.allclose(np.diag(rhs), 0)

    def test_amplitude_damping_of_excited_state(self):
        gamma = 0.3
        rhs = lindblad_rhs(np.diag([0, 1]).astype(complex), np.zeros((2, 2)), [(SIGMA_MINUS, gamma)])
        assert np.allclose(rhs, np.diag([gamma, -gamma]), atol=1e-15)

    def test_vanishes_on_steady_state(self, rng):
        h, chans = random_hermitian(rng, 3), random_channels(rng, 3)
        rho = unique_steady_state(build_liouvillian(h, chans))
        assert np.linalg.norm(lindblad_rhs(rho, h, chans)) < 1e-10


class TestSteadyStates:
    def test_relaxation_gives_ground_state(self):
        states = steady_states(two_level(delta=1.0, omega=0.0, gamma_down=1.0, gamma_0=0.0).liouvillian())
        assert len(states) == 1
        assert np.allclose(states[0], np.diag([1, 0]), atol=1e-10)

    def test_driving_without_decay_has_two_dimensional_null_space(self):
        l = two_level(delta=1.0, omega=0.5, gamma_down=0.0, gamma_0=0.4).liouvillian()
        states = steady_states(l)
        assert len(states) == 2
        for rho in states:
            assert state_score(rho).score >= 1 - 1e-8
            assert np.linalg.norm(l @ vectorize(rho)) <= 1e-9
        with pytest.raises(NonUniqueSteadyState):
            unique_steady_state(l)

    def test_zero_generator(self):
        states = steady_states(np.zeros((4, 4)))
        assert len(states) == 4
        stacked = np.array([vectorize(s) for s in states])
        assert np.linalg.matrix_rank(stacked) == 4

    def test_empty_null_space(self):
        with pytest.raises(EmptyNullSpace):
            steady_states(-np.eye(4))

    @given(seeds, dims)
    def test_steady_states_are_states(self, seed, d):
        _, h, chans = random_model(seed, d)
        l = build_liouvillian(h, chans)
        for rho in steady_states(l):
            if abs(np.trace(rho) - 1) < 1e-12:
                assert state_score(rho).score >= 1 - 1e-8
                assert np.linalg.norm(l @ vectorize(rho)) <= 1e-9

    @given(seeds, dims)
    def test_decoupled_blocks_give_valid_basis(self, seed, d):
        # dephasing in the energy basis leaves every energy projector stationary
        rng = np.random.default_rng(seed)
        h = np.diag(rng.normal(size=d)).astype(complex)
        l = build_liouvillian(h, [(np.diag(rng.normal(size=d)).astype(complex), 0.5)])
        states = steady_states(l)
        assert len(states) == d
        for rho in states:
            assert state_score(rho).score >= 1 - 1e-8
            assert np.linalg.norm(l @ vectorize(rho)) <= 1e-9
