"""Column-stacked Liouville space: vectorization, Lindblad generators, steady states."""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr

from ._validation import (
    as_generator,
    as_square,
    check_hermitian,
    check_same_dim,
    liouville_dim,
)
from .errors import (
    DimensionMismatch,
    EmptyNullSpace,
    NonHermitianHamiltonian,
    NonUniqueSteadyState,
)


@dataclass(frozen=True)
class LindbladChannel:
    """Jump operator ``L`` acting at rate ``gamma``."""

    operator: np.ndarray
    rate: float = 1.0

    def __post_init__(self):
        op = as_square(self.operator, "channel operator")
        rate = float(self.rate)
        if not np.isfinite(rate) or rate < 0:
            raise ValueError(f"channel rate must be finite and non-negative, got {self.rate!r}")
        object.__setattr__(self, "operator", op)
        object.__setattr__(self, "rate", rate)

    @property
    def scaled(self):
        """``sqrt(gamma) * L``, the form used by the trajectory sampler."""
        return np.sqrt(self.rate) * self.operator


def as_channels(channels):
    """Accept ``LindbladChannel`` objects, ``(op, rate)`` pairs or bare operators."""
    out = []
    for c in channels or ():
        if isinstance(c, LindbladChannel):
            out.append(c)
        elif isinstance(c, tuple) and len(c) == 2:
            out.append(LindbladChannel(c[0], c[1]))
        else:
            out.append(LindbladChannel(c, 1.0))
    return out


def vectorize(rho):
    """Column-stack a square matrix: ``v[j*d + i] = rho[i, j]``."""
    rho = as_square(rho, "rho")
    return rho.reshape(-1, order="F").copy()


def devectorize(v, d=None):
    """Inverse of :func:`vectorize`. ``d`` is inferred when omitted."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    n = v.shape[0]
    if d is None:
        d = liouville_dim(n)
    elif d * d != n:
        liouville_dim(n)
        raise DimensionMismatch(f"length {n} does not match d={d}")
    return v.reshape(d, d, order="F").copy()


def hamiltonian_superoperator(h):
    """``-i(I x H - H^T x I)``, the generator of ``-i[H, rho]``."""
    h = as_square(h, "h")
    eye = np.eye(h.shape[0], dtype=complex)
    return -1j * (np.kron(eye, h) - np.kron(h.T, eye))


def dissipator(op, rate=1.0):
    """Superoperator of ``rate * (L rho L^dag - 1/2 {L^dag L, rho})``."""
    op = as_square(op, "op")
    eye = np.eye(op.shape[0], dtype=complex)
    ldl = op.conj().T @ op
    return rate * (np.kron(op.conj(), op) - 0.5 * (np.kron(eye, ldl) + np.kron(ldl.T, eye)))


def _checked_inputs(h, channels):
    h = as_square(h, "hamiltonian")
    check_hermitian(h, 1e-10, "hamiltonian", exc=NonHermitianHamiltonian)
    chans = as_channels(channels)
    check_same_dim(h.shape[0], *(c.operator for c in chans),
                   names=[f"channels[{i}]" for i in range(len(chans))])
    return h, chans


def build_liouvillian(h, channels=()):
    """Assemble the Lindblad generator in column-stacked Liouville space.

    Parameters
    ----------
    h : array_like, shape (d, d)
        Hermitian Hamiltonian (hbar = 1).
    channels : sequence
        ``LindbladChannel`` objects, ``(operator, rate)`` pairs or operators
        with unit rate.

    Returns
    -------
    ndarray, shape (d**2, d**2)
        ``L`` with ``d vec(rho)/dt = L vec(rho)``.

    Raises
    ------
    NonHermitianHamiltonian
        If ``||H - H^dag||_F > 1e-10``.
    DimensionMismatch
        If a channel operator does not match ``H``.
    """
    h, chans = _checked_inputs(h, channels)
    out = hamiltonian_superoperator(h)
    for c in chans:
        if c.rate:
            out = out + dissipator(c.operator, c.rate)
    return out


def lindblad_rhs(rho, h, channels=()):
    """Right-hand side of the Lindblad equation from plain matrix products."""
    rho = as_square(rho, "rho")
    h = as_square(h, "hamiltonian")
    chans = as_channels(channels)
    check_same_dim(rho.shape[0], h, *(c.operator for c in chans))
    out = -1j * (h @ rho - rho @ h)
    for c in chans:
        op = c.operator
        ldl = op.conj().T @ op
        out = out + c.rate * (op @ rho @ op.conj().T - 0.5 * (ldl @ rho + rho @ ldl))
    return out


def trace_functional(d):
    """``vec(I)``; ``vec(I)^dag L == 0`` for trace-preserving generators."""
    return np.eye(d, dtype=complex).reshape(-1, order="F")


def null_space(l, rtol=1e-10):
    """Orthonormal basis (columns) of ``{v : ||L v|| <= rtol * ||L||}``."""
    l = np.asarray(l, dtype=complex)
    _, s, vh = np.linalg.svd(l)
    scale = s[0] if s.size and s[0] > 0 else 1.0
    rank = int(np.sum(s > rtol * scale)) if s[0] > 0 else 0
    return vh[rank:].conj().T


def _probe_states(d):
    """Pure states whose projectors span all ``d x d`` matrices."""
    eye = np.eye(d, dtype=complex)
    kets = [eye[i] for i in range(d)]
    for i in range(d):
        for j in range(i + 1, d):
            kets.append((eye[i] + eye[j]) / np.sqrt(2))
            kets.append((eye[i] + 1j * eye[j]) / np.sqrt(2))
    return [np.outer(k, k.conj()) for k in kets]


def _stationary_basis(l, right, d):
    # project informationally complete probe states onto the null space
    left = null_space(l.conj().T, 1e-10)
    if left.shape[1] != right.shape[1]:
        return None
    overlap = left.conj().T @ right
    if np.linalg.cond(overlap) > 1e8:
        return None
    proj = right @ np.linalg.solve(overlap, left.conj().T)
    images = np.column_stack([proj @ vectorize(p) for p in _probe_states(d)])
    _, _, piv = qr(images, pivoting=True, mode="economic")
    return images[:, np.sort(piv[: right.shape[1]])]


def steady_states(l, rtol=1e-10):
    """Null-space steady states of a generator.

    Parameters
    ----------
    l : array_like, shape (d**2, d**2)
    rtol : float
        Singular values below ``rtol * s_max`` count as zero.

    Returns
    -------
    list of ndarray
        A basis of the null space, one ``d x d`` matrix per element. A
        one-dimensional null space yields its unit-trace, Hermitian-symmetrized
        representative. For larger null spaces the basis is built from the
        stationary projections of a fixed set of pure probe states, so every
        element is itself a density operator; if that projection is
        ill-conditioned the raw singular vectors are returned, with trace-carrying
        ones normalized.

    Raises
    ------
    EmptyNullSpace
        If no singular value falls below the threshold.
    """
    l, d = as_generator(l, "liouvillian")
    basis = null_space(l, rtol)
    if basis.shape[1] == 0:
        raise EmptyNullSpace("generator has no null space at the requested tolerance")
    if basis.shape[1] > 1:
        states = _stationary_basis(l, basis, d)
        if states is not None:
            basis = states
    out = []
    for k in range(basis.shape[1]):
        m = devectorize(basis[:, k], d)
        tr = np.trace(m)
        if abs(tr) > 1e-8:
            m = m / tr
            m = 0.5 * (m + m.conj().T)
        out.append(m)
    return out


def unique_steady_state(l, rtol=1e-10):
    """The single trace-one steady state; raises if the null space is larger."""
    states = steady_states(l, rtol)
    if len(states) != 1:
        raise NonUniqueSteadyState(f"null space has dimension {len(states)}")
    return states[0]
