"""Input validation helpers shared by the public functions."""
import math

import numpy as np

from .errors import DimensionMismatch, LengthNotSquare, NonHermitian, NonSquare


def as_matrix(a, name="matrix"):
    """Return ``a`` as a 2-d complex array, rejecting NaN/Inf entries."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def as_square(a, name="matrix"):
    m = as_matrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise NonSquare(f"{name} must be square, got shape {m.shape}")
    return m


def as_vector(v, name="vector"):
    x = np.asarray(v, dtype=complex)
    if x.ndim == 2 and 1 in x.shape:
        x = x.reshape(-1)
    if x.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-dimensional, got shape {x.shape}")
    return x


def check_hermitian(m, tol=1e-10, name="matrix", exc=NonHermitian):
    dev = np.linalg.norm(m - m.conj().T)
    if dev > tol:
        raise exc(f"{name} is not Hermitian (||m - m^dag||_F = {dev:.3e})")
    return m


def check_same_dim(d, *mats, names=None):
    for i, m in enumerate(mats):
        if m.shape != (d, d):
            label = names[i] if names else f"operand {i}"
            raise DimensionMismatch(f"{label} has shape {m.shape}, expected ({d}, {d})")


def liouville_dim(n):
    """Hilbert-space dimension ``d`` of a Liouville-space size ``n == d**2``."""
    d = math.isqrt(int(n))
    if d * d != n:
        raise LengthNotSquare(f"length {n} is not a perfect square")
    return d


def as_generator(l, name="generator"):
    """Validate a d^2 x d^2 superoperator and return it with ``d``."""
    m = as_square(l, name)
    return m, liouville_dim(m.shape[0])
