"""Time evolution of density operators under Liouville-space generators.

All routines take a column-stacked generator ``L`` (see :mod:`qme.liouville`)
and return :class:`Trajectory` objects or single ``d x d`` matrices.
"""
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eig, expm

from ._validation import as_generator, as_square
from .errors import (
    DefectiveGenerator,
    DimensionMismatch,
    StepSizeUnderflow,
    StepSizeWarning,
)
from .liouville import devectorize, vectorize

BIORTHO_TOL = 1e-8
DEFAULT_JITTER = 1e-14


@dataclass
class Trajectory:
    """Sampled states ``rho(t_k)``; iterates as ``(t, rho)`` pairs."""

    times: np.ndarray
    states: np.ndarray
    solution: Callable | None = field(default=None, repr=False)

    def __iter__(self):
        return iter(zip(self.times, self.states))

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k):
        return self.times[k], self.states[k]

    @property
    def final(self):
        return self.states[-1]

    def populations(self):
        return np.real(np.einsum("kii->ki", self.states))

    def expectation(self, obs):
        obs = np.asarray(obs, dtype=complex)
        return np.einsum("ij,kji->k", obs, self.states)


@dataclass(frozen=True)
class TimeGrid:
    """Evenly spaced grid ``t0 + k*dt`` for ``k = 0..steps``."""

    t0: float
    dt: float
    steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.steps) < 1:
            raise ValueError(f"steps must be at least 1, got {self.steps}")

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(int(self.steps) + 1)

    @property
    def t1(self):
        return self.t0 + self.dt * int(self.steps)


@dataclass
class TimeDependentGenerator:
    """``L(t) = L0 + sum_i v_i(t) L_i``."""

    static: np.ndarray
    driven: Sequence = ()

    def __post_init__(self):
        self.static, self.d = as_generator(self.static, "static generator")
        parts = []
        for op, fn in self.driven:
            op = as_square(op, "driven generator")
            if op.shape != self.static.shape:
                raise DimensionMismatch("driven generator does not match the static part")
            parts.append((op, fn))
        self.driven = parts

    def __call__(self, t):
        out = self.static.copy()
        for op, fn in self.driven:
            out += fn(t) * op
        return out


@dataclass
class SpectralDecomposition:
    """Right/left eigenvectors of ``L`` normalized so ``left[:, i]^dag right[:, j] = delta_ij``."""

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    jittered: bool = False

    def biorthogonality_error(self):
        n = self.right.shape[1]
        return float(np.max(np.abs(self.left.conj().T @ self.right - np.eye(n))))


def _vec0(rho0, d):
    rho0 = as_square(rho0, "rho0")
    if rho0.shape[0] != d:
        raise DimensionMismatch(f"state has dimension {rho0.shape[0]}, generator expects {d}")
    return vectorize(rho0)


def propagator(l, t):
    """``P(t) = exp(L t)``."""
    l, _ = as_generator(l)
    return expm(l * t)


def propagate_expm(l, rho0, t):
    """Propagate ``rho0`` to time ``t`` with the exact matrix exponential.

    Parameters
    ----------
    l : array_like, shape (d**2, d**2)
    rho0 : array_like, shape (d, d)
    t : float
        Non-negative elapsed time.

    Returns
    -------
    ndarray, shape (d, d)
    """
    l, d = as_generator(l)
    if t < 0:
        raise ValueError("t must be non-negative")
    v = _vec0(rho0, d)
    if t == 0:
        return devectorize(v, d)
    return devectorize(expm(l * t) @ v, d)


def expm_trajectory(l, rho0, times):
    """Matrix-exponential solution at each of ``times`` (measured from 0)."""
    l, d = as_generator(l)
    v = _vec0(rho0, d)
    times = np.asarray(times, dtype=float)
    states = np.array([devectorize(expm(l * t) @ v, d) for t in times])
    return Trajectory(times, states)


def jitter(l, eps=DEFAULT_JITTER):
    """Add ``i*eps`` to every entry of ``l`` to split degenerate eigenvalues."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    l = np.asarray(l, dtype=complex)
    return l + 1j * eps if eps else l.copy()


def _decompose(l):
    w, vl, vr = eig(l, left=True, right=True)
    s = np.einsum("ij,ij->j", vl.conj(), vr)
    with np.errstate(divide="ignore", invalid="ignore"):
        left = vl / s.conj()
    return SpectralDecomposition(w, vr, left)


def spectral_decomposition(l, eps=DEFAULT_JITTER, allow_jitter=True):
    """Bi-orthonormal eigendecomposition of a generator.

    Parameters
    ----------
    l : array_like, shape (n, n)
    eps : float
        Jitter size used when the first attempt fails.
    allow_jitter : bool
        If False, fail immediately instead of retrying with jitter.

    Raises
    ------
    DefectiveGenerator
        If ``max |L^dag R - I| > 1e-8`` even after jitter.
    """
    l = as_square(l, "generator")
    dec = _decompose(l)
    if np.isfinite(dec.biorthogonality_error()) and dec.biorthogonality_error() <= BIORTHO_TOL:
        return dec
    if allow_jitter and eps > 0:
        dec = _decompose(jitter(l, eps))
        dec.jittered = True
        err = dec.biorthogonality_error()
        if np.isfinite(err) and err <= BIORTHO_TOL:
            return dec
    raise DefectiveGenerator("left/right eigenvectors are not bi-orthonormal; generator looks defective")


def spectral_solution(l, rho0, times, t0=0.0, decomposition=None):
    """``rho(t) = sum_k (L_k^dag rho0) R_k exp(lambda_k (t - t0))`` at each time."""
    l, d = as_generator(l)
    dec = decomposition or spectral_decomposition(l)
    coeffs = dec.left.conj().T @ _vec0(rho0, d)
    times = np.asarray(times, dtype=float)
    phases = np.exp(np.outer(times - t0, dec.eigenvalues))
    vecs = (phases * coeffs) @ dec.right.T
    states = np.array([devectorize(v, d) for v in vecs])
    return Trajectory(times, states)


def generator_norm(l):
    return float(np.linalg.norm(l, 2))


def propagate_piecewise(g: TimeDependentGenerator, rho0, grid: TimeGrid):
    """Piecewise-constant propagation with the generator frozen at each step start.

    Warns with :class:`StepSizeWarning` when ``dt * max ||L(t_n)|| > 0.1``.
    """
    d = g.d
    v = _vec0(rho0, d)
    times = grid.times
    dt = grid.dt
    static_dt = g.static * dt
    states = [devectorize(v, d)]
    worst = 0.0
    for t in times[:-1]:
        step = static_dt.copy()
        for op, fn in g.driven:
            step += (fn(t) * dt) * op
        worst = max(worst, generator_norm(step))
        v = expm(step) @ v
        states.append(devectorize(v, d))
    if worst > 0.1:
        warnings.warn(f"dt*||L(t)|| reaches {worst:.3g} > 0.1; piecewise result may be inaccurate",
                      StepSizeWarning, stacklevel=2)
    return Trajectory(times, np.array(states))


def semigroup_propagate(l, rho0, grid: TimeGrid):
    """Propagate on an even grid by repeated application of ``P1 = exp(L dt)``."""
    l, d = as_generator(l)
    v = _vec0(rho0, d)
    p1 = expm(l * grid.dt)
    states = [devectorize(v, d)]
    for _ in range(int(grid.steps)):
        v = p1 @ v
        states.append(devectorize(v, d))
    return Trajectory(grid.times, np.array(states))


def trotter_step(l1, l2, tau, correction=False):
    step = expm(l1 * tau) @ expm(l2 * tau)
    if correction:
        comm = l1 @ l2 - l2 @ l1
        step = step @ expm(-0.5 * comm * tau**2)
    return step


def trotter_propagate(l1, l2, rho0, t, n, correction=False):
    """Lie-Trotter splitting of ``exp((L1 + L2) t)`` into ``n`` slices.

    Parameters
    ----------
    l1, l2 : array_like, shape (d**2, d**2)
    rho0 : array_like, shape (d, d)
    t : float
    n : int
        Number of slices, at least 1.
    correction : bool
        Append ``exp(-[L1, L2] tau**2 / 2)`` to every slice.

    Returns
    -------
    ndarray, shape (d, d)
    """
    l1, d = as_generator(l1, "l1")
    l2, d2 = as_generator(l2, "l2")
    if d != d2:
        raise DimensionMismatch("l1 and l2 act on different spaces")
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    step = trotter_step(l1, l2, t / n, correction)
    v = _vec0(rho0, d)
    for _ in range(n):
        v = step @ v
    return devectorize(v, d)


def liouvillian_rhs(l):
    """Wrap a constant generator as ``rhs(t, rho)``."""
    l, d = as_generator(l)
    return lambda t, rho: devectorize(l @ vectorize(rho), d)


def generator_rhs(g: TimeDependentGenerator):
    return lambda t, rho: devectorize(g(t) @ vectorize(rho), g.d)


def rk45_propagate(rhs, rho0, t_span, t_eval=None, rtol=1e-8, atol=1e-10):
    """Adaptive Dormand-Prince 4(5) integration of ``d rho/dt = rhs(t, rho)``.

    Parameters
    ----------
    rhs : callable or array_like
        ``rhs(t, rho) -> drho`` on ``d x d`` matrices, or a constant generator.
    rho0 : array_like, shape (d, d)
    t_span : (float, float)
    t_eval : array_like, optional
        Output times; defaults to the integrator's own steps.
    rtol, atol : float

    Returns
    -------
    Trajectory
        With ``solution`` set to the dense interpolant returning ``d x d`` matrices.

    Raises
    ------
    StepSizeUnderflow
        If the step size collapses below the floating-point spacing of ``t``.
    """
    if rtol <= 0 or atol <= 0:
        raise ValueError("rtol and atol must be positive")
    if not callable(rhs):
        rhs = liouvillian_rhs(rhs)
    rho0 = as_square(rho0, "rho0")
    d = rho0.shape[0]
    n = d * d

    def f(t, y):
        rho = devectorize(y[:n] + 1j * y[n:], d)
        dv = vectorize(np.asarray(rhs(t, rho), dtype=complex))
        return np.concatenate([dv.real, dv.imag])

    v0 = vectorize(rho0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        sol = solve_ivp(f, t_span, np.concatenate([v0.real, v0.imag]), method="RK45",
                        t_eval=t_eval, rtol=rtol, atol=atol, dense_output=True)
    if sol.status != 0:
        if "step size" in sol.message:
            raise StepSizeUnderflow(sol.message)
        raise RuntimeError(sol.message)
    ys = sol.y.T
    states = np.array([devectorize(y[:n] + 1j * y[n:], d) for y in ys])

    def dense(t):
        y = sol.sol(t)
        return devectorize(y[:n] + 1j * y[n:], d)

    return Trajectory(sol.t, states, dense)
