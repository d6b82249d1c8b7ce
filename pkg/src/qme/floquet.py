"""Floquet treatment of harmonically driven Hamiltonians.

A drive ``H(t) = H0 + H_plus exp(-i w t) + H_minus exp(+i w t)`` is handled
either through the truncated Floquet Hamiltonian (harmonic blocks
``n = -N..N``) or through the one-period propagator. Quasi-energies are
reported in the zone ``(-w/2, w/2]``.
"""
from dataclasses import dataclass, replace

import numpy as np

from ._validation import as_square, check_same_dim
from .errors import NonHermitian, NonUnitaryPropagator, TruncationNotConverged
from .operators import SIGMA_X, SIGMA_Y, SIGMA_Z

QUASI_TOL = 1e-6
PROB_TOL = 1e-4
MAX_HARMONICS = 80


@dataclass(frozen=True)
class FloquetProblem:
    """Static part, first harmonics and drive frequency of a periodic Hamiltonian."""

    h0: np.ndarray
    h_plus: np.ndarray
    omega: float
    h_minus: np.ndarray | None = None
    n_harmonics: int = 4

    def __post_init__(self):
        h0 = as_square(self.h0, "h0")
        hp = as_square(self.h_plus, "h_plus")
        hm = hp.conj().T if self.h_minus is None else as_square(self.h_minus, "h_minus")
        check_same_dim(h0.shape[0], hp, hm, names=["h_plus", "h_minus"])
        if np.linalg.norm(h0 - h0.conj().T) > 1e-10:
            raise NonHermitian("h0 is not Hermitian")
        if np.linalg.norm(hm - hp.conj().T) > 1e-10:
            raise NonHermitian("h_minus must equal h_plus^dagger")
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if int(self.n_harmonics) < 1:
            raise ValueError("n_harmonics must be at least 1")
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "h_plus", hp)
        object.__setattr__(self, "h_minus", hm)
        object.__setattr__(self, "n_harmonics", int(self.n_harmonics))

    @property
    def dim(self):
        return self.h0.shape[0]

    @property
    def period(self):
        return 2 * np.pi / self.omega

    def hamiltonian(self, t):
        ph = np.exp(-1j * self.omega * t)
        return self.h0 + self.h_plus * ph + self.h_minus * np.conj(ph)

    def with_harmonics(self, n):
        return replace(self, n_harmonics=int(n))


@dataclass
class FloquetSolution:
    """Eigen-decomposition of a truncated Floquet Hamiltonian."""

    quasi_energies: np.ndarray
    modes: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    n_harmonics: int
    dim: int

    def central_index(self, alpha):
        return self.n_harmonics * self.dim + alpha


def fold(eps, omega):
    """Reduce quasi-energies into ``(-omega/2, omega/2]``."""
    eps = np.asarray(eps, dtype=float)
    out = 0.5 * omega - np.mod(0.5 * omega - eps, omega)
    return float(out) if out.ndim == 0 else out


def zone_distance(a, b, omega):
    """Distance between quasi-energies modulo ``omega``."""
    x = np.mod(np.asarray(a) - np.asarray(b), omega)
    return np.minimum(x, omega - x)


def rwa_rotating_frame(delta_omega, rabi):
    """Rotating-frame two-level Hamiltonian ``(dw/2) sz + Re(R) sx + Im(R) sy``."""
    rabi = complex(rabi)
    return 0.5 * delta_omega * SIGMA_Z + rabi.real * SIGMA_X + rabi.imag * SIGMA_Y


def with_drive_phase(p: FloquetProblem, phi0):
    """Problem with the drive started at phase ``phi0`` instead of 0."""
    hp = p.h_plus * np.exp(1j * phi0)
    return replace(p, h_plus=hp, h_minus=hp.conj().T)


def build_floquet_hamiltonian(p: FloquetProblem, n_harmonics=None):
    """Block-tridiagonal Floquet Hamiltonian over harmonics ``-N..N``.

    Diagonal blocks are ``H0 + n w``, the superdiagonal holds ``H_plus`` and
    the subdiagonal ``H_minus``.
    """
    n = p.n_harmonics if n_harmonics is None else int(n_harmonics)
    d = p.dim
    m = 2 * n + 1
    hf = np.zeros((m * d, m * d), dtype=complex)
    eye = np.eye(d)
    for k, harmonic in enumerate(range(-n, n + 1)):
        s = slice(k * d, (k + 1) * d)
        hf[s, s] = p.h0 + harmonic * p.omega * eye
        if k + 1 < m:
            s1 = slice((k + 1) * d, (k + 2) * d)
            hf[s, s1] = p.h_plus
            hf[s1, s] = p.h_minus
    return hf


def _solve(p: FloquetProblem, n):
    d = p.dim
    hf = build_floquet_hamiltonian(p, n)
    lam, vec = np.linalg.eigh(hf)
    central = vec[n * d:(n + 1) * d, :]
    weight = np.sum(np.abs(central) ** 2, axis=0)
    pick = np.sort(np.argsort(weight)[::-1][:d])
    eps = np.sort(fold(lam[pick], p.omega))
    modes = vec[:, pick].reshape(2 * n + 1, d, d)
    return FloquetSolution(eps, modes, lam, vec, n, d)


def quasi_energy_distance(a, b, omega):
    """Largest mismatch between two quasi-energy sets, modulo ``omega``."""
    a = np.sort(np.asarray(a))
    b = np.sort(np.asarray(b))
    best = np.inf
    for r in range(len(b)):
        best = min(best, float(np.max(zone_distance(a, np.roll(b, r), omega))))
    return best


def quasi_energies_hf(p: FloquetProblem, converge=True, tol=QUASI_TOL, max_harmonics=MAX_HARMONICS):
    """Quasi-energies from diagonalizing the truncated Floquet Hamiltonian.

    Parameters
    ----------
    p : FloquetProblem
        ``p.n_harmonics`` is the starting truncation.
    converge : bool
        Grow the truncation by 2 until no quasi-energy moves by more than ``tol``.
    tol : float
    max_harmonics : int

    Returns
    -------
    FloquetSolution
        The ``d`` quasi-energies are taken from the eigenvectors with the
        largest weight in the central harmonic block.

    Raises
    ------
    TruncationNotConverged
        If ``max_harmonics`` is reached first.
    """
    n = p.n_harmonics
    sol = _solve(p, n)
    if not converge:
        return sol
    while n + 2 <= max_harmonics:
        n += 2
        nxt = _solve(p, n)
        if quasi_energy_distance(sol.quasi_energies, nxt.quasi_energies, p.omega) < tol:
            return nxt
        sol = nxt
    raise TruncationNotConverged(f"quasi-energies not converged at N={n}")


def one_period_propagator(p: FloquetProblem, steps=10000):
    """``U(T, 0)`` from a fourth-order Magnus integrator with ``steps`` slices."""
    d = p.dim
    dt = p.period / steps
    c1, c2 = 0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6
    u = np.eye(d, dtype=complex)
    for k in range(steps):
        t = k * dt
        h1 = p.hamiltonian(t + c1 * dt)
        h2 = p.hamiltonian(t + c2 * dt)
        # Omega = -i K with K Hermitian
        k_mat = 0.5 * dt * (h1 + h2) - 1j * (np.sqrt(3) / 12) * dt**2 * (h2 @ h1 - h1 @ h2)
        w, v = np.linalg.eigh(0.5 * (k_mat + k_mat.conj().T))
        u = (v * np.exp(-1j * w)) @ v.conj().T @ u
    return u


def quasi_energies_propagator(p: FloquetProblem, steps=10000):
    """Quasi-energies ``-arg(eta)/T`` from the eigenvalues of the one-period propagator.

    Raises
    ------
    NonUnitaryPropagator
        If ``||U^dag U - I|| > 1e-8``.
    """
    u = one_period_propagator(p, steps)
    if np.linalg.norm(u.conj().T @ u - np.eye(p.dim)) > 1e-8:
        raise NonUnitaryPropagator("one-period propagator is not unitary")
    eta = np.linalg.eigvals(u)
    return np.sort(fold(-np.angle(eta) / p.period, p.omega))


def _central_vector(sol: FloquetSolution, alpha):
    e = np.zeros(sol.eigenvectors.shape[0], dtype=complex)
    e[sol.central_index(alpha)] = 1.0
    return e


def _check_index(p, *idx):
    for i in idx:
        if not 0 <= int(i) < p.dim:
            raise IndexError(f"state index {i} out of range for dimension {p.dim}")


def transition_probability(p: FloquetProblem, alpha, beta, t, solution=None):
    """``P(t) = sum_k |<beta k| exp(-i H_F t) |alpha 0>|^2``.

    ``t`` may be a scalar or an array of times.
    """
    _check_index(p, alpha, beta)
    sol = solution or quasi_energies_hf(p)
    v = sol.eigenvectors
    coeff = v.conj().T @ _central_vector(sol, alpha)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    amps = (v * coeff) @ np.exp(-1j * np.outer(sol.eigenvalues, ts))
    blocks = amps.reshape(2 * sol.n_harmonics + 1, sol.dim, len(ts))
    prob = np.sum(np.abs(blocks[:, beta, :]) ** 2, axis=0)
    return float(prob[0]) if np.ndim(t) == 0 else prob


def _time_average(sol: FloquetSolution, alpha, beta):
    v = sol.eigenvectors
    over_alpha = np.abs(v[sol.central_index(alpha), :]) ** 2
    rows = v.reshape(2 * sol.n_harmonics + 1, sol.dim, -1)[:, beta, :]
    return float(np.sum(np.abs(rows) ** 2 * over_alpha[None, :]))


def time_averaged_probability(p: FloquetProblem, alpha, beta, converge=True, tol=PROB_TOL,
                              max_harmonics=MAX_HARMONICS):
    """Long-time average ``sum_k sum_l |<beta k|l><l|alpha 0>|^2``.

    The truncation grows by 2 until the quasi-energies move by less than 1e-6
    and the averaged probability by less than ``tol``.
    """
    _check_index(p, alpha, beta)
    if not converge:
        return _time_average(_solve(p, p.n_harmonics), alpha, beta)
    n = p.n_harmonics
    sol = _solve(p, n)
    prev = _time_average(sol, alpha, beta)
    while n + 2 <= max_harmonics:
        n += 2
        nxt = _solve(p, n)
        val = _time_average(nxt, alpha, beta)
        if abs(val - prev) < tol and quasi_energy_distance(sol.quasi_energies, nxt.quasi_energies, p.omega) < QUASI_TOL:
            return val
        sol, prev = nxt, val
    raise TruncationNotConverged(f"time-averaged probability not converged at N={n}")


def resonance_sweep(h0, h_plus, omegas, alpha=0, beta=1, n_harmonics=4):
    """``P_bar(alpha -> beta)`` for each drive frequency in ``omegas``."""
    return np.array([
        time_averaged_probability(FloquetProblem(h0, h_plus, float(w), n_harmonics=n_harmonics), alpha, beta)
        for w in omegas
    ])


def local_maxima(values):
    """Indices of strict interior local maxima."""
    v = np.asarray(values)
    return np.nonzero((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:]))[0] + 1
