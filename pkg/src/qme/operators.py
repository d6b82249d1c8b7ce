"""Dense operator primitives and density-operator diagnostics.

Matrices are plain ``numpy`` complex arrays. Basis index 0 is the first basis
vector of the configuration; for two-level systems that is ``|g>`` unless a
scenario says otherwise. Units have hbar = 1.
"""
from dataclasses import dataclass

import numpy as np

from ._validation import as_matrix, as_square, as_vector
from .errors import DimensionMismatch

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


def basis(d, i):
    """Unit column vector ``|i>`` of a ``d``-dimensional space."""
    v = np.zeros(d, dtype=complex)
    v[i] = 1.0
    return v


def ket2dm(psi):
    psi = as_vector(psi, "psi")
    return np.outer(psi, psi.conj())


def projector(d, i, j=None):
    """``|i><j|`` (``|i><i|`` when ``j`` is omitted)."""
    m = np.zeros((d, d), dtype=complex)
    m[i, i if j is None else j] = 1.0
    return m


def commutator(a, b):
    return a @ b - b @ a


def tensor_product(a, b):
    """Kronecker product with ``(A x B)[i*db + k, j*eb + l] = A[i, j] B[k, l]``.

    Vectors are accepted as well, so ``tensor_product(|0>, |0>)`` gives ``|00>``.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    return np.kron(a, b)


def direct_sum(a, b):
    """Block-diagonal matrix with ``a`` top-left and ``b`` bottom-right."""
    a = as_square(a, "a")
    b = as_square(b, "b")
    da, db = a.shape[0], b.shape[0]
    out = np.zeros((da + db, da + db), dtype=complex)
    out[:da, :da] = a
    out[da:, da:] = b
    return out


def partial_trace(rho, dims, keep=1):
    """Reduced state of a bipartite operator.

    Parameters
    ----------
    rho : array_like, shape (d1*d2, d1*d2)
    dims : tuple of int
        ``(d1, d2)``.
    keep : {1, 2}
        Subsystem retained; the other one is traced out.
    """
    rho = as_square(rho, "rho")
    d1, d2 = (int(x) for x in dims)
    if d1 * d2 != rho.shape[0]:
        raise DimensionMismatch(f"dims {dims} do not match operator dimension {rho.shape[0]}")
    r = rho.reshape(d1, d2, d1, d2)
    if keep == 1:
        return np.trace(r, axis1=1, axis2=3)
    if keep == 2:
        return np.trace(r, axis1=0, axis2=2)
    raise ValueError(f"keep must be 1 or 2, got {keep!r}")


def expectation(state, obs):
    """``Tr[A rho]`` for a density matrix, ``<psi|A|psi>`` for a state vector."""
    obs = as_square(obs, "obs")
    s = np.asarray(state, dtype=complex)
    if s.ndim == 1 or (s.ndim == 2 and 1 in s.shape and s.shape[0] != s.shape[1]):
        psi = s.reshape(-1)
        if psi.shape[0] != obs.shape[0]:
            raise DimensionMismatch("state and observable dimensions differ")
        return complex(np.vdot(psi, obs @ psi))
    rho = as_square(s, "state")
    if rho.shape != obs.shape:
        raise DimensionMismatch("state and observable dimensions differ")
    # Tr[A rho] without forming the product
    return complex(np.sum(obs * rho.T))


def purity(rho):
    rho = as_square(rho, "rho")
    return float(np.real(np.sum(rho * rho.T)))


def populations(rho):
    return np.real(np.diagonal(np.asarray(rho)))


@dataclass(frozen=True)
class StateScore:
    """Deviation of a matrix from the density-operator conditions.

    ``score == 1`` exactly when all three deviations are at most 1e-12.
    """

    score: float
    herm_dev: float
    trace_dev: float
    pos_dev: float

    @property
    def is_state(self):
        return self.score == 1.0


_SCORE_FLOOR = 1e-12


def state_score(m):
    """Score hermiticity, normalisation and positivity of ``m``.

    ``score = 1 - (herm_dev + trace_dev + pos_dev)``, with deviations below
    1e-12 counted as exact.
    """
    m = as_square(m, "m")
    herm_dev = float(np.linalg.norm(m - m.conj().T))
    trace_dev = float(abs(np.trace(m) - 1.0))
    lam_min = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])
    pos_dev = max(0.0, -lam_min)
    devs = [x if x > _SCORE_FLOOR else 0.0 for x in (herm_dev, trace_dev, pos_dev)]
    return StateScore(1.0 - sum(devs), herm_dev, trace_dev, pos_dev)


def is_density_operator(m, tol=1e-10):
    """True when ``m`` is Hermitian, unit-trace and positive within ``tol``."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return False
    s = state_score(m)
    return s.herm_dev <= tol and s.trace_dev <= tol and s.pos_dev <= tol


def mixed_state(probs, states):
    """``sum_j p_j |psi_j><psi_j|`` from probabilities and state vectors."""
    probs = np.asarray(probs, dtype=float)
    return sum(p * ket2dm(s) for p, s in zip(probs, states))


def thermal_populations(energies, beta):
    e = np.asarray(energies, dtype=float)
    w = np.exp(-beta * (e - e.min()))
    return w / w.sum()


def destroy(n):
    """Truncated bosonic lowering operator on ``n`` Fock states."""
    return np.diag(np.sqrt(np.arange(1, n)), 1).astype(complex)
