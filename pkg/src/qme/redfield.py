"""Bloch-Redfield relaxation tensors, their Lindblad form and Pauli rate equations.

Tensors are built in the eigenbasis of the system Hamiltonian and flattened
with the same column-stacking convention as :mod:`qme.liouville`, so
``G[b*d + a, d_*d + c] = R[a, b, c, d_]``.
"""
import warnings
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import expm

from ._validation import as_square, check_hermitian
from .errors import DegenerateBohrFrequencies, DegenerateSpectrum, NonHermitian
from .liouville import LindbladChannel

BOHR_TOL = 1e-9


@dataclass(frozen=True)
class OhmicSpectrum:
    """``S(w) = 2 pi eta w exp(-|w|/wc) / (1 - exp(-beta w))``."""

    eta: float
    omega_c: float
    beta: float

    def __post_init__(self):
        if self.eta < 0 or self.omega_c <= 0 or self.beta <= 0:
            raise ValueError("need eta >= 0, omega_c > 0 and beta > 0")

    def __call__(self, omega):
        return ohmic_spectrum(self.eta, self.omega_c, self.beta, omega)


@dataclass(frozen=True)
class TabulatedSpectrum:
    """Cubic-spline interpolation of sampled ``(omega, S)`` pairs."""

    omegas: tuple
    values: tuple

    def __call__(self, omega):
        spline = CubicSpline(np.asarray(self.omegas, float), np.asarray(self.values, float))
        return np.asarray(spline(omega), dtype=float)


def ohmic_spectrum(eta, omega_c, beta, omega):
    """Ohmic noise-power spectrum with a thermal detailed-balance factor.

    Parameters
    ----------
    eta : float
        Dimensionless coupling strength.
    omega_c : float
        Cutoff frequency.
    beta : float
        Inverse temperature.
    omega : float or array_like

    Returns
    -------
    float or ndarray
        ``S(omega)``; where ``|beta*omega| < 1e-8`` the continuous limit
        ``2 pi eta exp(-|omega|/omega_c) / beta`` is returned.
    """
    w = np.asarray(omega, dtype=float)
    small = np.abs(beta * w) < 1e-8
    safe = np.where(small, 1.0, w)
    with np.errstate(over="ignore"):
        regular = 2 * np.pi * eta * safe * np.exp(-np.abs(safe) / omega_c) / (-np.expm1(-beta * safe))
    limit = 2 * np.pi * eta * np.exp(-np.abs(w) / omega_c) / beta
    out = np.where(small, limit, regular)
    return float(out) if out.ndim == 0 else out


def _spectrum_fn(spec) -> Callable:
    if callable(spec):
        return spec
    raise TypeError(f"spectrum must be callable, got {type(spec).__name__}")


@dataclass(frozen=True)
class CouplingSpec:
    """Hermitian system coupling operator and the noise spectrum of its bath."""

    operator: np.ndarray
    spectrum: Callable

    def __post_init__(self):
        op = check_hermitian(as_square(self.operator, "coupling operator"), name="coupling operator")
        object.__setattr__(self, "operator", op)
        object.__setattr__(self, "spectrum", _spectrum_fn(self.spectrum))

    def evaluate(self, omega):
        return np.asarray(self.spectrum(np.asarray(omega, dtype=float)), dtype=float)


@dataclass(frozen=True)
class EigenFrame:
    energies: np.ndarray
    vectors: np.ndarray

    @property
    def bohr_frequencies(self):
        """``w[a, b] = w_a - w_b``."""
        return self.energies[:, None] - self.energies[None, :]

    def to_eigenbasis(self, op):
        return self.vectors.conj().T @ op @ self.vectors

    def from_eigenbasis(self, op):
        return self.vectors @ op @ self.vectors.conj().T


def eigenframe(h):
    """Eigenbasis of a Hermitian Hamiltonian with a fixed phase convention.

    Energies are ascending; each eigenvector is rotated so its largest-magnitude
    component is real and positive.
    """
    h = as_square(h, "hamiltonian")
    check_hermitian(h, 1e-10, "hamiltonian", exc=NonHermitian)
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    idx = np.argmax(np.abs(v), axis=0)
    lead = v[idx, np.arange(v.shape[1])]
    v = v * (np.abs(lead) / lead)[None, :]
    return EigenFrame(w, v)


def _couplings(couplings):
    out = []
    for c in couplings:
        out.append(c if isinstance(c, CouplingSpec) else CouplingSpec(*c))
    return out


def _flatten(r):
    """``R[a, b, c, d] -> G[b*n + a, d*n + c]``."""
    n = r.shape[0]
    return r.transpose(1, 0, 3, 2).reshape(n * n, n * n)


def redfield_tensor_elements(frame: EigenFrame, couplings, include_unitary=True, secular_cutoff=None):
    """Four-index tensor ``R[a, b, c, d]`` in the eigenbasis (before flattening)."""
    w = frame.bohr_frequencies
    n = len(frame.energies)
    eye = np.eye(n)
    r = np.zeros((n, n, n, n), dtype=complex)
    for c in _couplings(couplings):
        a = frame.to_eigenbasis(c.operator)
        s = c.evaluate(w)  # s[i, j] = S(w_i - w_j)
        x = a @ (a * s.T)  # x[a, c] = sum_n A_an A_nc S(w_cn)
        y = (a * s) @ a  # y[d, b] = sum_n A_dn A_nb S(w_dn)
        aa = np.einsum("ac,db->abcd", a, a)
        r += -0.5 * (
            np.einsum("bd,ac->abcd", eye, x)
            - aa * s.T[:, None, :, None]  # S(w_ca)
            + np.einsum("ac,db->abcd", eye, y)
            - aa * s.T[None, :, None, :]  # S(w_db)
        )
    if include_unitary:
        r += np.einsum("ab,ac,bd->abcd", -1j * w, eye, eye)
    if secular_cutoff is not None:
        gap = np.abs(w[:, :, None, None] - w[None, None, :, :])
        r[gap > secular_cutoff + BOHR_TOL] = 0.0
    return r


def bloch_redfield_tensor(h, couplings, include_unitary=True, secular_cutoff=None):
    """Bloch-Redfield generator in the eigenbasis of ``h``.

    Parameters
    ----------
    h : array_like, shape (d, d)
        Hermitian system Hamiltonian.
    couplings : sequence of CouplingSpec or (operator, spectrum) pairs
        Baths are taken as mutually uncorrelated.
    include_unitary : bool
        Add the coherent part ``-i w_ab`` on the diagonal.
    secular_cutoff : float, optional
        Drop every element with ``|w_ab - w_cd| > secular_cutoff``. ``None``
        keeps the full tensor.

    Returns
    -------
    ndarray, shape (d**2, d**2)
        Column-stacked generator acting on ``vec`` of the eigenbasis density matrix.
    """
    frame = eigenframe(h)
    return _flatten(redfield_tensor_elements(frame, couplings, include_unitary, secular_cutoff))


def _group_frequencies(w):
    """Cluster Bohr frequencies within ``BOHR_TOL``; returns representative -> [(a, b)]."""
    n = w.shape[0]
    pairs = sorted(((w[b, a], a, b) for a in range(n) for b in range(n)), key=lambda x: x[0])
    groups = []
    for freq, a, b in pairs:
        if groups and abs(freq - groups[-1][0]) <= BOHR_TOL:
            groups[-1][1].append((a, b))
        else:
            groups.append([freq, [(a, b)]])
    merged = any(freq != 0 and len(members) > 1 and abs(freq) > BOHR_TOL for freq, members in groups)
    return groups, merged


def br_lindblad_form(h, couplings):
    """Secular Bloch-Redfield dynamics as Lindblad channels.

    Returns
    -------
    hamiltonian : ndarray, shape (d, d)
        The system Hamiltonian (no Lamb shift is generated).
    channels : list of LindbladChannel
        One channel per coupling and Bohr frequency ``w = w_b - w_a``, with
        operator ``sum A_ab |a><b|`` (in the original basis) and rate ``S(w)``.

    Warns
    -----
    DegenerateBohrFrequencies
        When distinct transitions share a Bohr frequency within 1e-9 and are merged.
    """
    h = as_square(h, "hamiltonian")
    frame = eigenframe(h)
    groups, merged = _group_frequencies(frame.bohr_frequencies)
    if merged:
        warnings.warn("distinct transitions share a Bohr frequency and were merged",
                      DegenerateBohrFrequencies, stacklevel=2)
    n = h.shape[0]
    channels = []
    for c in _couplings(couplings):
        a = frame.to_eigenbasis(c.operator)
        for freq, members in groups:
            op = np.zeros((n, n), dtype=complex)
            for i, j in members:
                op[i, j] = a[i, j]
            if not np.any(op):
                continue
            rate = float(c.evaluate(freq))
            channels.append(LindbladChannel(frame.from_eigenbasis(op), max(rate, 0.0)))
    return h, channels


def pauli_rates(h, couplings):
    """Transition-rate matrix ``W[a, b]`` (rate of ``b -> a``) between eigenstates.

    ``W[a, b] = sum_alpha A_ba A_ab S(w_b - w_a)``; the diagonal is set to zero.

    Raises
    ------
    DegenerateSpectrum
        If two energy levels are closer than 1e-9.
    """
    frame = eigenframe(h)
    if np.any(np.diff(frame.energies) <= BOHR_TOL):
        raise DegenerateSpectrum("Pauli rates need a non-degenerate Hamiltonian")
    w = frame.bohr_frequencies
    out = np.zeros_like(w)
    for c in _couplings(couplings):
        a = frame.to_eigenbasis(c.operator)
        out += np.real(a.T * a) * c.evaluate(w.T)
    np.fill_diagonal(out, 0.0)
    return out


def pauli_generator(w):
    """``G[a, b] = W[a, b]`` off the diagonal, ``G[a, a] = -sum_b W[b, a]``."""
    w = np.array(w, dtype=float)
    np.fill_diagonal(w, 0.0)
    return w - np.diag(w.sum(axis=0))


def pauli_propagate(w, p0, times):
    """Solve ``dp/dt = G p`` by matrix exponentials at each time.

    Returns
    -------
    ndarray, shape (len(times), d)
    """
    g = pauli_generator(w)
    p0 = np.asarray(p0, dtype=float)
    if np.any(p0 < -1e-12) or abs(p0.sum() - 1.0) > 1e-10:
        raise ValueError("p0 must be a probability vector")
    return np.array([expm(g * t) @ p0 for t in np.asarray(times, dtype=float)])


def gibbs_populations(h, beta):
    e = eigenframe(h).energies
    x = np.exp(-beta * (e - e.min()))
    return x / x.sum()
