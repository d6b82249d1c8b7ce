import numpy as np
import pytest
from conftest import random_hermitian, random_matrix, seeds
from hypothesis import given
from hypothesis import strategies as st

from qme.errors import NonHermitian, TruncationNotConverged
from qme.floquet import (
    FloquetProblem,
    build_floquet_hamiltonian,
    fold,
    local_maxima,
    one_period_propagator,
    quasi_energies_hf,
    quasi_energies_propagator,
    quasi_energy_distance,
    resonance_sweep,
    rwa_rotating_frame,
    time_averaged_probability,
    transition_probability,
)
from qme.models import floquet_tls
from qme.operators import SIGMA_X, SIGMA_Z

OMEGA_OFF = 1.7  # away from every multiphoton resonance of floquet_tls


def tls_problem(coupling, omega=OMEGA_OFF, n=4):
    return floquet_tls(coupling=coupling, omega=omega, n_harmonics=n).floquet


class TestRotatingFrame:
    def test_undriven(self):
        assert np.allclose(rwa_rotating_frame(0.6, 0), 0.3 * SIGMA_Z)

    def test_resonant_eigenvalues(self):
        assert np.allclose(np.linalg.eigvalsh(rwa_rotating_frame(0.0, 0.7)), [-0.7, 0.7])

    def test_complex_rabi_hermitian(self):
        h = rwa_rotating_frame(0.2, 0.3 + 0.4j)
        assert np.allclose(h, h.conj().T)
        assert np.allclose(np.linalg.eigvalsh(h), [-np.hypot(0.1, 0.5), np.hypot(0.1, 0.5)])


class TestFloquetHamiltonian:
    def test_undriven_block_diagonal(self):
        h0 = np.diag([0.0, 0.4]).astype(complex)
        p = FloquetProblem(h0, np.zeros((2, 2)), 1.0, n_harmonics=3)
        hf = build_floquet_hamiltonian(p)
        assert np.allclose(hf, np.diag(np.diag(hf)))
        want = np.sort([e + n for n in range(-3, 4) for e in (0.0, 0.4)])
        assert np.allclose(np.linalg.eigvalsh(hf), want)

    @given(seeds, st.integers(1, 4))
    def test_hermitian(self, seed, n):
        rng = np.random.default_rng(seed)
        p = FloquetProblem(random_hermitian(rng, 3), random_matrix(rng, 3), 1.3, n_harmonics=n)
        hf = build_floquet_hamiltonian(p)
        assert hf.shape == (3 * (2 * n + 1),) * 2
        assert np.array_equal(hf, hf.conj().T)

    def test_block_pattern(self, rng):
        h0, hp = random_hermitian(rng, 2), random_matrix(rng, 2)
        hf = build_floquet_hamiltonian(FloquetProblem(h0, hp, 0.5, n_harmonics=2))
        blocks = hf.reshape(5, 2, 5, 2).transpose(0, 2, 1, 3)
        for i in range(5):
            for j in range(5):
                if i == j:
                    want = h0 + (i - 2) * 0.5 * np.eye(2)
                elif j == i + 1:
                    want = hp
                elif j == i - 1:
                    want = hp.conj().T
                else:
                    want = np.zeros((2, 2))
                assert np.array_equal(blocks[i, j], want)


class TestQuasiEnergies:
    def test_uncoupled(self):
        p = tls_problem(0.0)
        e = np.diag(p.h0).real
        assert np.allclose(quasi_energies_hf(p).quasi_energies, np.sort(fold(e, p.omega)), atol=1e-14)

    def test_second_order_shift(self):
        shifts = []
        base = quasi_energies_hf(tls_problem(0.0)).quasi_energies
        vs = np.array([1e-3, 2e-3, 4e-3])
        for v in vs:
            shifts.append(np.max(np.abs(quasi_energies_hf(tls_problem(v)).quasi_energies - base)))
        slope = np.polyfit(np.log(vs), np.log(shifts), 1)[0]
        assert abs(slope - 2) < 0.05

    @pytest.mark.parametrize("ratio", [0.05, 0.1])
    def test_dual_route(self, ratio):
        p = tls_problem(ratio * OMEGA_OFF)
        hf = quasi_energies_hf(p).quasi_energies
        assert quasi_energy_distance(hf, quasi_energies_propagator(p), p.omega) < 1e-8

    def test_constant_hamiltonian_propagator(self, rng):
        h0 = random_hermitian(rng, 3)
        p = FloquetProblem(h0, np.zeros((3, 3)), 0.9)
        u = one_period_propagator(p, steps=50)
        w, v = np.linalg.eigh(h0)
        assert np.allclose(u, (v * np.exp(-1j * w * p.period)) @ v.conj().T, atol=1e-12)
        assert quasi_energy_distance(quasi_energies_propagator(p, 50), fold(w, 0.9), 0.9) < 1e-12

    def test_propagator_eigenvalues_on_unit_circle(self):
        u = one_period_propagator(tls_problem(0.3), steps=2000)
        assert np.allclose(np.abs(np.linalg.eigvals(u)), 1, atol=1e-10)

    @given(st.floats(-50, 50), st.floats(0.1, 10))
    def test_fold_zone_and_idempotence(self, x, omega):
        y = fold(x, omega)
        assert -omega / 2 < y <= omega / 2 + 1e-12
        assert abs(fold(y, omega) - y) < 1e-12
        assert quasi_energy_distance([x], [y], omega) < 1e-9

    def test_truncation_not_converged(self):
        p = tls_problem(2.0, omega=0.3, n=1)
        with pytest.raises(TruncationNotConverged):
            quasi_energies_hf(p, tol=1e-14, max_harmonics=3)

    def test_non_hermitian_inputs(self):
        with pytest.raises(NonHermitian):
            FloquetProblem(np.array([[0, 1], [0, 0]]), np.zeros((2, 2)), 1.0)
        with pytest.raises(NonHermitian):
            FloquetProblem(np.eye(2), SIGMA_X, 1.0, h_minus=2 * SIGMA_X)


class TestTransitionProbability:
    def test_initial_time(self):
        p = tls_problem(0.2)
        assert transition_probability(p, 0, 0, 0.0) == pytest.approx(1, abs=1e-12)
        assert transition_probability(p, 0, 1, 0.0) == pytest.approx(0, abs=1e-12)

    def test_completeness(self):
        p = tls_problem(0.2, n=8)
        ts = np.linspace(0, 40, 21)
        total = transition_probability(p, 0, 0, ts) + transition_probability(p, 0, 1, ts)
        assert np.max(np.abs(total - 1)) < 1e-8

    def test_resonant_rabi(self):
        p = FloquetProblem(np.diag([0.0, 1.0]).astype(complex), 0.01 * SIGMA_X, 1.0, n_harmonics=6)
        ts = np.linspace(0, 400, 81)
        got = transition_probability(p, 0, 1, ts)
        assert np.max(np.abs(got - np.sin(0.02 * ts / 2) ** 2)) < 5e-3

    @given(seeds)
    def test_bounded(self, seed):
        rng = np.random.default_rng(seed)
        p = FloquetProblem(random_hermitian(rng, 3), 0.2 * random_matrix(rng, 3), 1.1)
        ts = np.linspace(0, 30, 11)
        for beta in range(3):
            prob = transition_probability(p, 0, beta, ts)
            assert prob.min() >= -1e-12 and prob.max() <= 1 + 1e-8

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            transition_probability(tls_problem(0.1), 0, 2, 1.0)


class TestTimeAverage:
    def test_no_drive(self):
        assert time_averaged_probability(tls_problem(0.0), 0, 1) == pytest.approx(0, abs=1e-14)

    def test_symmetry(self):
        p = tls_problem(0.15, omega=1.2)
        assert abs(time_averaged_probability(p, 0, 1) - time_averaged_probability(p, 1, 0)) < 1e-8

    def test_truncation_convergence(self):
        p = tls_problem(0.15, omega=1.2, n=2)
        vals = [time_averaged_probability(p.with_harmonics(n), 0, 1, converge=False) for n in (2, 4, 8, 16)]
        diffs = np.abs(np.diff(vals))
        assert diffs[-1] < 1e-10 and diffs[-1] <= diffs[0]

    def test_resonance_peaks(self):
        p = tls_problem(0.1)
        gap = float(np.real(p.h0[1, 1] - p.h0[0, 0]))
        omegas = np.arange(0.5, 2.0 + 1e-9, 0.005)
        sweep = resonance_sweep(p.h0, p.h_plus, omegas)
        assert sweep.min() >= 0 and sweep.max() <= 1
        peaks = omegas[local_maxima(sweep)]
        for order in (1, 2):
            assert np.min(np.abs(peaks - gap / order)) <= 0.005 + 1e-12
