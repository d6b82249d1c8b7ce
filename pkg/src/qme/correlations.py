"""Two-time correlation functions and optical spectra via quantum regression."""
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from ._validation import as_generator, as_square
from .errors import DimensionMismatch, TruncatedCorrelationWarning
from .liouville import devectorize, unique_steady_state, vectorize
from .propagation import TimeGrid, propagate_expm, semigroup_propagate

DECAY_RATIO = 1e-4


@dataclass
class CorrelationSeries:
    """Samples of ``<A(tau) B(0)>`` on a uniform grid starting at ``taus[0]``."""

    taus: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.taus.shape != self.values.shape:
            raise ValueError("taus and values must have the same length")
        if len(self.taus) > 2:
            steps = np.diff(self.taus)
            if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
                raise ValueError("tau grid must be uniform")

    @property
    def dtau(self):
        return float(self.taus[1] - self.taus[0])


@dataclass
class Spectrum:
    omegas: np.ndarray
    values: np.ndarray

    def peaks(self):
        """Frequencies of strict interior local maxima, highest first."""
        v = self.values
        idx = np.nonzero((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:]))[0] + 1
        return self.omegas[idx[np.argsort(v[idx])[::-1]]]


def _uniform_taus(taus):
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or len(taus) < 2:
        raise ValueError("need at least two tau points")
    dt = taus[1] - taus[0]
    if not dt > 0:
        raise ValueError("tau grid must be increasing")
    return taus, dt


def _regress(l, d, a, seed_op, taus):
    """``Tr[A Lambda_tau(X)]`` with ``X`` propagated by semigroup composition."""
    taus, dt = _uniform_taus(taus)
    x = seed_op
    if taus[0] != 0:
        x = devectorize(expm(l * taus[0]) @ vectorize(x), d)
    grid = TimeGrid(float(taus[0]), float(dt), len(taus) - 1)
    traj = semigroup_propagate(l, x, grid)
    return np.einsum("ij,kji->k", a, traj.states)


def _ops(d, *mats):
    out = [as_square(m, "operator") for m in mats]
    for m in out:
        if m.shape != (d, d):
            raise DimensionMismatch(f"operator has shape {m.shape}, system dimension is {d}")
    return out


def two_time_correlation(l, rho_init, a, b, t, taus):
    """``<A(t + tau) B(t)>`` from the quantum regression theorem.

    Parameters
    ----------
    l : array_like, shape (d**2, d**2)
        Time-independent generator.
    rho_init : array_like, shape (d, d)
        State at time 0.
    a, b : array_like, shape (d, d)
    t : float
        Time of the first operator insertion.
    taus : array_like
        Uniform, increasing delay grid.

    Returns
    -------
    CorrelationSeries
    """
    l, d = as_generator(l)
    rho_init, a, b = _ops(d, rho_init, a, b)
    rho_t = propagate_expm(l, rho_init, t) if t else rho_init
    return CorrelationSeries(taus, _regress(l, d, a, b @ rho_t, taus))


def steady_correlation(l, a, b, taus, connected=False, rho_ss=None):
    """Stationary ``<A(tau) B(0)>`` using the unique steady state of ``l``.

    With ``connected=True`` the factorized part ``<A><B>`` is subtracted.

    Raises
    ------
    NonUniqueSteadyState
        If the generator has more than one steady state.
    """
    l, d = as_generator(l)
    a, b = _ops(d, a, b)
    rho = unique_steady_state(l) if rho_ss is None else as_square(rho_ss)
    vals = _regress(l, d, a, b @ rho, taus)
    if connected:
        vals = vals - np.trace(a @ rho) * np.trace(b @ rho)
    return CorrelationSeries(taus, vals)


def _one_sided_transform(series: CorrelationSeries, omegas, sign):
    taus, dt = _uniform_taus(series.taus)
    w = np.full(len(taus), dt)
    w[0] = w[-1] = 0.5 * dt
    kernel = np.exp(sign * 1j * np.outer(np.asarray(omegas, dtype=float), taus - taus[0]))
    return kernel @ (w * series.values)


def _check_decay(series):
    c0 = abs(series.values[0])
    if c0 > 0 and abs(series.values[-1]) >= DECAY_RATIO * c0:
        warnings.warn("correlation has not decayed to 1e-4 of its initial value; spectrum is truncated",
                      TruncatedCorrelationWarning, stacklevel=3)


def emission_spectrum(series: CorrelationSeries, omegas):
    """``E(w) = 2 Re sum_j c(tau_j) exp(-i w tau_j) dtau`` with trapezoid weights.

    Parameters
    ----------
    series : CorrelationSeries
        One-sided correlation starting at ``tau = 0``.
    omegas : array_like

    Returns
    -------
    Spectrum
    """
    _check_decay(series)
    omegas = np.asarray(omegas, dtype=float)
    return Spectrum(omegas, 2.0 * np.real(_one_sided_transform(series, omegas, -1)))


def absorption_spectrum(l, sigma_plus, nus, taus):
    """Probe absorption ``A(nu) = Re int e^{i nu tau} <[s(tau), sigma_plus(0)]>``.

    ``s = sigma_plus^dagger``. The commutator is split into
    ``<s(tau) sigma_plus(0)>`` and ``<sigma_plus(0) s(tau)>``; the latter equals
    ``<sigma_plus(tau) s(0)>^*`` at stationarity.
    """
    l, d = as_generator(l)
    (sp,) = _ops(d, sigma_plus)
    s = sp.conj().T
    rho = unique_steady_state(l)
    forward = steady_correlation(l, s, sp, taus, rho_ss=rho)
    backward = steady_correlation(l, sp, s, taus, rho_ss=rho)
    comm = CorrelationSeries(forward.taus, forward.values - np.conj(backward.values))
    _check_decay(comm)
    nus = np.asarray(nus, dtype=float)
    return Spectrum(nus, np.real(_one_sided_transform(comm, nus, +1)))


def multilevel_emission(l, jumps, taus, omegas):
    """Sum of emission spectra ``<J^dag(tau) J(0)>`` over transitions.

    Parameters
    ----------
    l : array_like, shape (d**2, d**2)
    jumps : sequence of (operator, rate)
        Lowering operators ``|j><i|`` (``i > j``) with their rates.
    taus, omegas : array_like

    Returns
    -------
    Spectrum
    """
    l, d = as_generator(l)
    rho = unique_steady_state(l)
    omegas = np.asarray(omegas, dtype=float)
    total = np.zeros(len(omegas))
    for op, rate in jumps:
        (j,) = _ops(d, np.sqrt(rate) * np.asarray(op, dtype=complex))
        series = steady_correlation(l, j.conj().T, j, taus, rho_ss=rho)
        total += emission_spectrum(series, omegas).values
    return Spectrum(omegas, total)


def spectral_gap(l):
    """Smallest ``|Re lambda|`` over non-stationary eigenvalues of ``l``."""
    ev = np.linalg.eigvals(np.asarray(l, dtype=complex))
    re = np.abs(ev.real)
    scale = max(1.0, float(np.max(np.abs(ev))))
    nonzero = re[np.abs(ev) > 1e-9 * scale]
    return float(nonzero.min()) if nonzero.size else 0.0


def default_taus(l, points=4001):
    """Delay grid covering ``20 / gap`` so correlations have decayed."""
    gap = spectral_gap(l)
    if gap <= 0:
        raise ValueError("generator has no decaying modes")
    return np.linspace(0.0, 20.0 / gap, points)
