import warnings

import numpy as np
import pytest
from conftest import dims, random_channels, random_density, random_hermitian, seeds
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import block_diag, expm

from qme.errors import DefectiveGenerator, StepSizeUnderflow, StepSizeWarning
from qme.liouville import (
    build_liouvillian,
    dissipator,
    hamiltonian_superoperator,
    vectorize,
)
from qme.models import driven_dephasing, exchange_dephasing, split_dephasing
from qme.operators import SIGMA_X, SIGMA_Z
from qme.propagation import (
    TimeDependentGenerator,
    TimeGrid,
    expm_trajectory,
    generator_rhs,
    jitter,
    propagate_expm,
    propagate_piecewise,
    propagator,
    rk45_propagate,
    semigroup_propagate,
    spectral_decomposition,
    spectral_solution,
    trotter_propagate,
)


def random_liouvillian(seed, d):
    rng = np.random.default_rng(seed)
    return rng, build_liouvillian(random_hermitian(rng, d), random_channels(rng, d))


def max_pop_dev(a, b):
    return np.max(np.abs(a.populations() - b.populations()))


class TestExpm:
    def test_zero_time(self, rng):
        rho = random_density(rng, 3)
        l = build_liouvillian(random_hermitian(rng, 3), random_channels(rng, 3))
        assert np.array_equal(propagate_expm(l, rho, 0.0), rho)

    def test_rabi_formula(self):
        omega = 0.8
        l = build_liouvillian(omega * SIGMA_X)
        for t in np.linspace(0, 10, 21):
            pe = propagate_expm(l, np.diag([1, 0]), t)[1, 1].real
            assert abs(pe - np.sin(omega * t) ** 2) < 1e-12

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            propagate_expm(np.zeros((4, 4)), np.eye(2) / 2, -1.0)

    def test_initial_vector_of_reference_system(self):
        m = exchange_dephasing()
        assert np.array_equal(vectorize(m.rho0), [0, 0, 0, 1])

    def test_matches_spectral_on_reference_system(self):
        m = exchange_dephasing()
        times = np.linspace(0, 10, 100)
        a = expm_trajectory(m.liouvillian(), m.rho0, times)
        b = spectral_solution(m.liouvillian(), m.rho0, times)
        assert np.max(np.abs(a.states - b.states)) < 1e-8


class TestSpectral:
    def test_pure_dephasing_diagonal(self):
        gamma = 0.4
        l = dissipator(SIGMA_Z, gamma)
        assert np.count_nonzero(l - np.diag(np.diag(l))) == 0
        rho0 = np.full((2, 2), 0.5, dtype=complex)
        times = np.linspace(0, 5, 11)
        traj = spectral_solution(l, rho0, times)
        assert np.allclose(traj.states[:, 0, 1], 0.5 * np.exp(l[2, 2] * times), atol=1e-14)
        assert np.allclose(traj.states[:, 1, 0], 0.5 * np.exp(l[1, 1] * times), atol=1e-14)

    @given(seeds, dims)
    def test_spectrum_in_left_half_plane(self, seed, d):
        _, l = random_liouvillian(seed, d)
        assert np.max(spectral_decomposition(l).eigenvalues.real) <= 1e-10

    def test_biorthonormal(self, rng):
        l = build_liouvillian(random_hermitian(rng, 3), random_channels(rng, 3))
        dec = spectral_decomposition(l)
        assert dec.biorthogonality_error() < 1e-8 and not dec.jittered


class TestJitter:
    def test_zero_eps(self, rng):
        l = build_liouvillian(random_hermitian(rng, 2), random_channels(rng, 2))
        assert np.array_equal(jitter(l, 0.0), l)

    def test_defective_generator_rescued(self):
        # one Jordan block plus two simple modes
        l = block_diag(np.array([[-0.3, 1.0], [0.0, -0.3]]), [[-1.0]], [[-2.0]]).astype(complex)
        with pytest.raises(DefectiveGenerator):
            spectral_decomposition(l, allow_jitter=False)
        dec = spectral_decomposition(l)
        assert dec.jittered
        rho0 = np.array([[0.2, 0.3], [0.1, 0.8]], dtype=complex)
        times = np.linspace(0, 5, 11)
        got = spectral_solution(l, rho0, times, decomposition=dec).states
        want = expm_trajectory(l, rho0, times).states
        assert np.max(np.abs(got - want)) < 1e-3

    def test_two_identical_jordan_blocks_fail(self):
        l = np.kron(np.eye(2), np.array([[-0.3, 1.0], [0.0, -0.3]])).astype(complex)
        with pytest.raises(DefectiveGenerator):
            spectral_decomposition(l)

    def test_negligible_effect_on_regular_generators(self, rng):
        l = build_liouvillian(random_hermitian(rng, 3), random_channels(rng, 3))
        rho0 = random_density(rng, 3)
        times = np.linspace(0, 3, 7)
        a = spectral_solution(l, rho0, times).states
        b = spectral_solution(jitter(l), rho0, times).states
        assert np.max(np.abs(a - b)) < 1e-9


class TestPiecewise:
    def test_no_drive_matches_expm(self, rng):
        l = build_liouvillian(random_hermitian(rng, 2), random_channels(rng, 2))
        rho0 = random_density(rng, 2)
        grid = TimeGrid(0.0, 0.05, 40)
        traj = propagate_piecewise(TimeDependentGenerator(l), rho0, grid)
        ref = expm_trajectory(l, rho0, grid.times)
        assert np.max(np.abs(traj.states - ref.states)) < 1e-10

    def test_zero_amplitude_drive(self, rng):
        l = build_liouvillian(random_hermitian(rng, 2), random_channels(rng, 2))
        g = TimeDependentGenerator(l, [(hamiltonian_superoperator(SIGMA_X), lambda t: 0.0)])
        rho0 = random_density(rng, 2)
        grid = TimeGrid(0.0, 0.02, 50)
        assert np.allclose(propagate_piecewise(g, rho0, grid).states,
                           expm_trajectory(l, rho0, grid.times).states, atol=1e-10)

    def test_driven_dephasing_physical(self):
        m = driven_dephasing()
        traj = propagate_piecewise(m.generator, m.rho0, TimeGrid(0.0, 0.01, 2000))
        pops = traj.populations()
        assert pops.min() >= -1e-12 and pops.max() <= 1 + 1e-12
        assert np.max(np.abs(np.trace(traj.states, axis1=1, axis2=2) - 1)) < 1e-12

    def test_first_order_convergence(self):
        m = driven_dephasing()
        t1 = 5.0
        ref = rk45_propagate(generator_rhs(m.generator), m.rho0, (0, t1), t_eval=[t1],
                             rtol=1e-12, atol=1e-12).final
        errs = []
        for dt in (0.02, 0.01, 0.005):
            end = propagate_piecewise(m.generator, m.rho0, TimeGrid(0.0, dt, int(round(t1 / dt)))).final
            errs.append(np.linalg.norm(end - ref))
        ratios = np.array(errs[:-1]) / np.array(errs[1:])
        assert np.all((ratios > 1.7) & (ratios < 2.3))

    def test_against_rk45(self):
        m = driven_dephasing()
        grid = TimeGrid(0.0, 1e-3, 20000)
        pw = propagate_piecewise(m.generator, m.rho0, grid)
        times = grid.times[::100]
        rk = rk45_propagate(generator_rhs(m.generator), m.rho0, (0.0, 20.0), t_eval=times)
        assert np.max(np.abs(pw.populations()[::100] - rk.populations())) < 5e-3

    def test_large_step_warns(self):
        l = build_liouvillian(10 * SIGMA_X, [(SIGMA_Z, 1.0)])
        with pytest.warns(StepSizeWarning):
            propagate_piecewise(TimeDependentGenerator(l), np.eye(2) / 2, TimeGrid(0.0, 0.1, 3))


class TestSemigroup:
    def test_doubling(self, rng):
        l = build_liouvillian(random_hermitian(rng, 3), random_channels(rng, 3))
        p1 = propagator(l, 0.37)
        assert np.linalg.norm(p1 @ p1 - propagator(l, 0.74)) < 1e-12

    def test_thousand_steps_match_expm(self, rng):
        l = build_liouvillian(random_hermitian(rng, 3), random_channels(rng, 3))
        rho0 = random_density(rng, 3)
        traj = semigroup_propagate(l, rho0, TimeGrid(0.0, 0.01, 1000))
        assert np.max(np.abs(traj.final - propagate_expm(l, rho0, 10.0))) < 1e-9

    def test_single_step(self, rng):
        l = build_liouvillian(random_hermitian(rng, 2), random_channels(rng, 2))
        rho0 = random_density(rng, 2)
        traj = semigroup_propagate(l, rho0, TimeGrid(0.0, 0.3, 1))
        assert np.array_equal(traj.final, propagate_expm(l, rho0, 0.3))

    @given(seeds, st.floats(0.0, 3.0), st.floats(0.0, 3.0))
    def test_semigroup_law(self, seed, s, t):
        _, l = random_liouvillian(seed, 3)
        assert np.linalg.norm(propagator(l, s) @ propagator(l, t) - propagator(l, s + t), 2) < 1e-12


class TestTrotter:
    def test_commuting_parts_exact(self):
        l1 = dissipator(SIGMA_Z, 0.3)
        l2 = hamiltonian_superoperator(0.7 * SIGMA_Z)
        rho0 = np.full((2, 2), 0.5, dtype=complex)
        for n in (1, 3, 10):
            assert np.allclose(trotter_propagate(l1, l2, rho0, 2.0, n), propagate_expm(l1 + l2, rho0, 2.0),
                               atol=1e-13)

    def test_reference_setup_convergence(self):
        m = split_dephasing()
        l1, l2 = m.split()
        exact = propagate_expm(l1 + l2, m.rho0, 2.0)
        errs = [np.linalg.norm(trotter_propagate(l1, l2, m.rho0, 2.0, n) - exact) for n in (50, 100, 1000)]
        assert errs[0] > errs[1] > errs[2]
        ratio = errs[0] / errs[1]
        assert 1.8 <= ratio <= 2.2

    def test_correction_improves(self):
        m = split_dephasing()
        l1, l2 = m.split()
        exact = propagate_expm(l1 + l2, m.rho0, 2.0)
        plain = np.linalg.norm(trotter_propagate(l1, l2, m.rho0, 2.0, 100) - exact)
        corrected = np.linalg.norm(trotter_propagate(l1, l2, m.rho0, 2.0, 100, correction=True) - exact)
        assert corrected < plain / 10

    @given(seeds)
    def test_error_decreases_on_random_pairs(self, seed):
        rng = np.random.default_rng(seed)
        l1 = hamiltonian_superoperator(random_hermitian(rng, 2))
        l2 = build_liouvillian(np.zeros((2, 2)), random_channels(rng, 2))
        rho0 = random_density(rng, 2)
        exact = propagate_expm(l1 + l2, rho0, 1.0)
        errs = [np.linalg.norm(trotter_propagate(l1, l2, rho0, 1.0, n) - exact) for n in (8, 16, 32, 64)]
        assert all(b < a or b < 1e-12 for a, b in zip(errs, errs[1:]))


class TestRK45:
    def test_matches_expm(self):
        m = exchange_dephasing()
        times = np.linspace(0, 10, 200)
        rtol = 1e-8
        rk = rk45_propagate(m.liouvillian(), m.rho0, (0, 10), t_eval=times, rtol=rtol, atol=1e-10)
        ex = expm_trajectory(m.liouvillian(), m.rho0, times)
        assert np.max(np.abs(rk.states - ex.states)) < max(10 * rtol, 1e-7)

    def test_zero_rhs(self, rng):
        rho0 = random_density(rng, 3)
        traj = rk45_propagate(lambda t, rho: np.zeros_like(rho), rho0, (0, 5), t_eval=np.linspace(0, 5, 6))
        assert np.all(traj.states == rho0)

    def test_energy_conserved_in_closed_system(self, rng):
        h = random_hermitian(rng, 3)
        rho0 = random_density(rng, 3)
        period = 2 * np.pi / np.ptp(np.linalg.eigvalsh(h))
        times = np.linspace(0, 10 * period, 50)
        traj = rk45_propagate(build_liouvillian(h), rho0, (0, times[-1]), t_eval=times,
                              rtol=1e-10, atol=1e-12)
        energy = traj.expectation(h).real
        assert np.max(np.abs(energy - energy[0])) < 1e-7

    def test_dense_output(self):
        m = exchange_dephasing()
        traj = rk45_propagate(m.liouvillian(), m.rho0, (0, 2), rtol=1e-10, atol=1e-12)
        assert np.max(np.abs(traj.solution(1.3) - propagate_expm(m.liouvillian(), m.rho0, 1.3))) < 1e-7

    def test_blow_up_raises(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(StepSizeUnderflow):
                rk45_propagate(lambda t, rho: rho @ rho, np.eye(2), (0.0, 2.0))


class TestPhysicality:
    @given(seeds, st.integers(2, 4))
    def test_all_methods_cptp_and_consistent(self, seed, d):
        rng, l = random_liouvillian(seed, d)
        rho0 = random_density(rng, d)
        grid = TimeGrid(0.0, 0.1, 30)
        trajs = [
            expm_trajectory(l, rho0, grid.times),
            spectral_solution(l, rho0, grid.times),
            semigroup_propagate(l, rho0, grid),
            rk45_propagate(l, rho0, (0, grid.t1), t_eval=grid.times, rtol=1e-10, atol=1e-12),
        ]
        for traj in trajs:
            for rho in traj.states:
                assert abs(np.trace(rho) - 1) < 1e-8
                assert np.max(np.abs(rho - rho.conj().T)) < 1e-8
                assert np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() >= -1e-7
        for other in trajs[1:3]:
            assert np.max(np.abs(other.states - trajs[0].states)) < 1e-8

    def test_expm_oracle(self, rng):
        l = build_liouvillian(random_hermitian(rng, 2), random_channels(rng, 2))
        rho0 = random_density(rng, 2)
        assert np.allclose(propagate_expm(l, rho0, 1.7),
                           (expm(1.7 * l) @ rho0.reshape(-1, order="F")).reshape(2, 2, order="F"))
