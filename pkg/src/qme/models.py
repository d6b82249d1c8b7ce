"""Named model builders used by the bundled scenarios and the tests.

Two-level models use index 0 = |g>, index 1 = |e>.
"""
from dataclasses import dataclass, field

import numpy as np

from .floquet import FloquetProblem
from .liouville import LindbladChannel, build_liouvillian, hamiltonian_superoperator
from .operators import (
    SIGMA_X,
    SIGMA_Z,
    destroy,
    ket2dm,
    partial_trace,
    purity,
    tensor_product,
)
from .propagation import TimeDependentGenerator
from .redfield import CouplingSpec, OhmicSpectrum, eigenframe

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|
SIGMA_PLUS = SIGMA_MINUS.conj().T


@dataclass
class Model:
    """Hamiltonian plus whichever environment description the model uses."""

    hamiltonian: np.ndarray
    channels: list = field(default_factory=list)
    couplings: list = field(default_factory=list)
    rho0: np.ndarray | None = None
    psi0: np.ndarray | None = None
    generator: TimeDependentGenerator | None = None
    floquet: FloquetProblem | None = None

    @property
    def dim(self):
        return self.hamiltonian.shape[0]

    def liouvillian(self):
        return build_liouvillian(self.hamiltonian, self.channels)

    def split(self):
        """Coherent and dissipative parts of the Liouvillian."""
        zero = np.zeros_like(self.hamiltonian)
        return hamiltonian_superoperator(self.hamiltonian), build_liouvillian(zero, self.channels)


def two_level(delta=1.0, omega=0.0, gamma_down=1.0, gamma_0=0.0, excited=True):
    """``H = [[0, W], [W, D]]`` with relaxation ``sqrt(g)|g><e|`` and the identity channel ``sqrt(g0) I``."""
    h = np.array([[0, omega], [omega, delta]], dtype=complex)
    chans = [LindbladChannel(SIGMA_MINUS, gamma_down), LindbladChannel(np.eye(2), gamma_0)]
    rho0 = np.diag([0.0, 1.0] if excited else [1.0, 0.0]).astype(complex)
    return Model(h, chans, rho0=rho0)


def exchange_dephasing(omega=1.0):
    """Coherent exchange ``W sx`` with an ``sx`` jump operator, starting in |e><e|."""
    h = omega * SIGMA_X
    return Model(h, [LindbladChannel(SIGMA_X, 1.0)], rho0=np.diag([0.0, 1.0]).astype(complex))


def driven_dephasing(omega0=1.0, omega=3.0, gamma=0.3):
    """``H(t) = w0 sz/2 + cos(w t) w0 sx/2`` with dephasing ``(I - sz)/2``."""
    h0 = omega0 * SIGMA_Z / 2
    h1 = omega0 * SIGMA_X / 2
    jump = (np.eye(2) - SIGMA_Z) / 2
    static = build_liouvillian(h0, [LindbladChannel(jump, gamma)])
    driven = hamiltonian_superoperator(h1)
    gen = TimeDependentGenerator(static, [(driven, lambda t: np.cos(omega * t))])
    rho0 = np.diag([1.0, 0.0]).astype(complex)
    return Model(h0, [LindbladChannel(jump, gamma)], rho0=rho0, generator=gen)


def split_dephasing(omega=1.0, gamma=0.5):
    """``H = W sx`` with ``sz`` dephasing at rate ``gamma``, starting in |e><e|."""
    h = omega * SIGMA_X
    return Model(h, [LindbladChannel(SIGMA_Z, gamma)], rho0=np.diag([0.0, 1.0]).astype(complex))


def unraveling_demo():
    """``H = sz`` with jump operators ``sz/2`` and ``sx/5``, starting in ``(|0> + |1>)/sqrt 2``."""
    psi0 = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
    chans = [LindbladChannel(SIGMA_Z / 2, 1.0), LindbladChannel(SIGMA_X / 5, 1.0)]
    return Model(SIGMA_Z.copy(), chans, rho0=ket2dm(psi0), psi0=psi0)


def driven_tls(rabi=1.0, gamma=None, detuning=0.0):
    """Resonantly driven, damped emitter in the rotating frame; ``gamma`` defaults to ``rabi/10``."""
    gamma = rabi / 10 if gamma is None else gamma
    h = detuning * np.diag([0.0, 1.0]) + 0.5 * rabi * SIGMA_X
    return Model(h.astype(complex), [LindbladChannel(SIGMA_MINUS, gamma)],
                 rho0=np.diag([1.0, 0.0]).astype(complex))


def spin_boson(eps0=1.0, delta=0.5, eta=0.02, omega_c=5.0, beta=2.0):
    """``H = eps0 sz/2 + delta sx/2`` coupled through ``sz`` to an Ohmic bath."""
    h = 0.5 * eps0 * SIGMA_Z + 0.5 * delta * SIGMA_X
    coupling = CouplingSpec(SIGMA_Z, OhmicSpectrum(eta, omega_c, beta))
    top = eigenframe(h).vectors[:, 1]
    return Model(h, couplings=[coupling], rho0=ket2dm(top), psi0=top)


def random_network(n=5, seed=11, energy_scale=1.0, coupling_scale=0.2, eta=0.01, omega_c=2.0, beta=1.0):
    """Sites with uniform random energies and Gaussian random couplings, each site on its own Ohmic bath.

    ``rho0`` is the top eigenstate, a state diagonal in the eigenbasis.
    """
    rng = np.random.default_rng(seed)
    energies = rng.uniform(0.0, energy_scale, n)
    h = np.diag(energies).astype(complex)
    for j in range(n):
        for k in range(j + 1, n):
            v = rng.normal(0.0, coupling_scale)
            h[j, k] = h[k, j] = v
    spec = OhmicSpectrum(eta, omega_c, beta)
    couplings = [CouplingSpec(np.diag(np.eye(n)[k]).astype(complex), spec) for k in range(n)]
    top = eigenframe(h).vectors[:, -1]
    return Model(h, couplings=couplings, rho0=ket2dm(top), psi0=top)


def floquet_tls(delta=1.0, eps=0.5, coupling=0.1, omega=None, n_harmonics=4):
    """``H0 = delta sz/2 + eps sx`` driven by ``coupling sz/2`` at each harmonic, in the H0 eigenbasis.

    ``omega`` defaults to the level splitting.
    """
    h0 = 0.5 * delta * SIGMA_Z + eps * SIGMA_X
    frame = eigenframe(h0)
    hp = frame.to_eigenbasis(0.5 * coupling * SIGMA_Z)
    w = frame.energies[1] - frame.energies[0] if omega is None else omega
    p = FloquetProblem(np.diag(frame.energies).astype(complex), hp, float(w), n_harmonics=n_harmonics)
    return Model(p.h0, floquet=p)


def floquet_cavity(delta=1.0, eps=0.5, coupling=0.1, omega=1.0, n_max=10, n_harmonics=4):
    """``H_S + V sz (a^dag e^{-iwt} + a e^{iwt}) + w a^dag a`` with ``n_max`` photon states.

    ``H_S = delta sz/2 + eps sx``.
    """
    h_s = 0.5 * delta * SIGMA_Z + eps * SIGMA_X
    a = destroy(n_max)
    h0 = tensor_product(h_s, np.eye(n_max)) + omega * tensor_product(np.eye(2), a.conj().T @ a)
    hp = coupling * tensor_product(SIGMA_Z, a.conj().T)
    p = FloquetProblem(h0, hp, float(omega), n_harmonics=n_harmonics)
    return Model(p.h0, floquet=p)


def bell_state(theta):
    """``cos(theta)|00> + sin(theta)|11>`` as a density matrix."""
    psi = np.zeros(4, dtype=complex)
    psi[0], psi[3] = np.cos(theta), np.sin(theta)
    return ket2dm(psi)


def marginal_purity(theta):
    return purity(partial_trace(bell_state(theta), (2, 2), keep=1))


BUILDERS = {
    "two_level": two_level,
    "exchange_dephasing": exchange_dephasing,
    "driven_dephasing": driven_dephasing,
    "split_dephasing": split_dephasing,
    "unraveling_demo": unraveling_demo,
    "driven_tls": driven_tls,
    "spin_boson": spin_boson,
    "random_network": random_network,
    "floquet_tls": floquet_tls,
    "floquet_cavity": floquet_cavity,
}
