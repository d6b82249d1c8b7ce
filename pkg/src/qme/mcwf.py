"""Monte Carlo wavefunction unraveling of the Lindblad equation.

Each trajectory owns an independent Philox substream spawned from the
configuration seed, so results are reproducible and do not depend on how
trajectories are scheduled. The ensemble is stepped in a vectorized loop.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_square, as_vector, check_hermitian, check_same_dim
from .errors import JumpBudgetExceeded, StepSizeWarning, ZeroNorm
from .liouville import as_channels
from .propagation import Trajectory

NORM_FLOOR = 1e-14


@dataclass
class TrajectoryConfig:
    """Time step, ensemble size, seed and model for trajectory sampling."""

    dt: float
    n_steps: int
    n_trajectories: int
    seed: int
    hamiltonian: np.ndarray
    channels: list = field(default_factory=list)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.n_steps) < 1 or int(self.n_trajectories) < 1:
            raise ValueError("n_steps and n_trajectories must be at least 1")
        self.n_steps = int(self.n_steps)
        self.n_trajectories = int(self.n_trajectories)
        self.seed = int(self.seed)
        self.hamiltonian = check_hermitian(as_square(self.hamiltonian, "hamiltonian"),
                                           name="hamiltonian")
        self.channels = as_channels(self.channels)
        check_same_dim(self.hamiltonian.shape[0], *(c.operator for c in self.channels))

    @property
    def dim(self):
        return self.hamiltonian.shape[0]

    @property
    def times(self):
        return self.dt * np.arange(self.n_steps + 1)

    def jump_operators(self):
        """Jump operators with the rates folded in, shape ``(K, d, d)``."""
        if not self.channels:
            return np.zeros((0, self.dim, self.dim), dtype=complex)
        return np.array([c.scaled for c in self.channels])

    def effective_hamiltonian(self):
        ops = self.jump_operators()
        decay = np.einsum("kji,kjl->il", ops.conj(), ops)
        return self.hamiltonian - 0.5j * decay

    def check_step(self):
        size = self.dt * np.linalg.norm(self.effective_hamiltonian(), 2)
        if size > 0.1:
            warnings.warn(f"dt*||H_eff|| = {size:.3g} exceeds 0.1", StepSizeWarning, stacklevel=3)


@dataclass
class EnsembleResult:
    """Trajectory-averaged density operator and per-trajectory statistics."""

    mean_state: Trajectory
    n: int
    jump_counts: np.ndarray
    observables: dict = field(default_factory=dict)

    def standard_error(self, name):
        return self.observables[name][1]


def trajectory_streams(seed, n):
    """One independent Philox generator per trajectory index."""
    children = np.random.SeedSequence(int(seed)).spawn(int(n))
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def _uniforms(gen, n_steps):
    # (0, 1]: one draw for the jump test and one for the channel choice per step
    return (1.0 - gen.random(2 * n_steps)).reshape(n_steps, 2)


def _step(psi, ops, heff, dt, u, u2):
    """Advance a batch ``psi`` (N, d) by one step; returns new states and jump indices."""
    if ops.shape[0]:
        jumped = np.einsum("kij,nj->nki", ops, psi)
        dps = dt * np.sum(np.abs(jumped) ** 2, axis=2)
    else:
        jumped = np.zeros((psi.shape[0], 0, psi.shape[1]), dtype=complex)
        dps = np.zeros((psi.shape[0], 0))
    dp = dps.sum(axis=1)
    if np.any(dp >= 1.0):
        raise JumpBudgetExceeded(f"total jump probability {dp.max():.3g} >= 1; reduce dt")
    new = psi - 1j * dt * (psi @ heff.T)
    which = np.full(psi.shape[0], -1)
    jump = dp >= u
    if np.any(jump):
        idx = np.nonzero(jump)[0]
        q = np.cumsum(dps[idx], axis=1) / dp[idx, None]
        k = np.argmax(q > u2[idx, None], axis=1)
        # u2 == 1 can exceed every Q_k by rounding; fall back to the last live channel
        none = ~np.any(q > u2[idx, None], axis=1)
        if np.any(none):
            live = dps[idx[none]][:, ::-1] > 0
            k[none] = dps.shape[1] - 1 - np.argmax(live, axis=1)
        new[idx] = jumped[idx, k]
        which[idx] = k
    norms = np.linalg.norm(new, axis=1)
    if np.any(norms < NORM_FLOOR):
        raise ZeroNorm("state norm collapsed below 1e-14")
    return new / norms[:, None], which


def _initial(cfg, psi0):
    psi0 = as_vector(psi0, "psi0")
    if psi0.shape[0] != cfg.dim:
        raise ValueError(f"psi0 has length {psi0.shape[0]}, expected {cfg.dim}")
    norm = np.linalg.norm(psi0)
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"psi0 must be normalized, got norm {norm}")
    return psi0 / norm


def sample_trajectory(cfg: TrajectoryConfig, psi0, stream=None, return_jumps=False):
    """Sample one quantum trajectory.

    Parameters
    ----------
    cfg : TrajectoryConfig
    psi0 : array_like, shape (d,)
        Normalized initial state.
    stream : numpy.random.Generator, optional
        Random source; defaults to the substream of trajectory 0 of ``cfg.seed``.
    return_jumps : bool
        Also return the list of ``(step, channel)`` jump events.

    Returns
    -------
    ndarray, shape (n_steps + 1, d)
        Normalized states at ``cfg.times``.

    Raises
    ------
    JumpBudgetExceeded
        If the total jump probability of a step reaches 1.
    ZeroNorm
        If the unnormalized state vanishes.
    """
    cfg.check_step()
    psi = _initial(cfg, psi0)[None, :]
    if stream is None:
        stream = trajectory_streams(cfg.seed, 1)[0]
    draws = _uniforms(stream, cfg.n_steps)
    ops = cfg.jump_operators()
    heff = cfg.effective_hamiltonian()
    out = np.empty((cfg.n_steps + 1, cfg.dim), dtype=complex)
    out[0] = psi[0]
    jumps = []
    for n in range(cfg.n_steps):
        psi, which = _step(psi, ops, heff, cfg.dt, draws[n, :1], draws[n, 1:])
        out[n + 1] = psi[0]
        if which[0] >= 0:
            jumps.append((n, int(which[0])))
    return (out, jumps) if return_jumps else out


def ensemble_average(cfg: TrajectoryConfig, psi0, observables=None):
    """Average ``|psi_j(t)><psi_j(t)|`` over ``cfg.n_trajectories`` trajectories.

    Parameters
    ----------
    cfg : TrajectoryConfig
    psi0 : array_like, shape (d,)
    observables : dict, optional
        ``name -> operator``; the result then carries the ensemble mean and
        standard error of each expectation value at every time.

    Returns
    -------
    EnsembleResult
        ``mean_state`` includes the ``1/N`` normalization, so every point has
        unit trace.
    """
    cfg.check_step()
    n_traj = cfg.n_trajectories
    psi = np.tile(_initial(cfg, psi0), (n_traj, 1))
    draws = np.stack([_uniforms(g, cfg.n_steps) for g in trajectory_streams(cfg.seed, n_traj)])
    ops = cfg.jump_operators()
    heff = cfg.effective_hamiltonian()
    obs = {k: as_square(v, k) for k, v in (observables or {}).items()}

    means = np.empty((cfg.n_steps + 1, cfg.dim, cfg.dim), dtype=complex)
    stats = {k: np.empty((cfg.n_steps + 1, 2)) for k in obs}
    counts = np.zeros(n_traj, dtype=int)

    def record(i, psi):
        means[i] = np.einsum("ni,nj->ij", psi, psi.conj()) / n_traj
        for k, a in obs.items():
            vals = np.real(np.einsum("ni,ij,nj->n", psi.conj(), a, psi))
            err = vals.std(ddof=1) / np.sqrt(n_traj) if n_traj > 1 else 0.0
            stats[k][i] = vals.mean(), err

    record(0, psi)
    for n in range(cfg.n_steps):
        psi, which = _step(psi, ops, heff, cfg.dt, draws[:, n, 0], draws[:, n, 1])
        counts += which >= 0
        record(n + 1, psi)
    traj = Trajectory(cfg.times, means)
    observables_out = {k: (v[:, 0], v[:, 1]) for k, v in stats.items()}
    return EnsembleResult(traj, n_traj, counts, observables_out)
