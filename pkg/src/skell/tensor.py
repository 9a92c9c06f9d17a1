"""Dense vec / Kronecker / commutation-matrix algebra and the moment tensors.

Storage convention: arrays are ordinary row-major numpy arrays. ``vec`` stacks
columns (Fortran order), so ``vec(A)[j*m + i] == A[i, j]`` for an ``m x n``
matrix. Vectors passed to the tensor builders are 1-D and are promoted to
columns; a primed vector in a Kronecker expression is the matching row.
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .exceptions import ValidationError

__all__ = [
    "MomentTensors",
    "commutation_matrix",
    "kron",
    "kron_chain",
    "moment_tensors",
    "unvec",
    "vec",
]


def kron(A, B):
    """Kronecker product; block ``(i, j)`` of the result is ``A[i, j] * B``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    m, n = A.shape
    s, t = B.shape
    return (A[:, None, :, None] * B[None, :, None, :]).reshape(m * s, n * t)


def kron_chain(*factors):
    """Left-to-right Kronecker product of several factors."""
    return reduce(kron, factors)


def vec(A):
    """Stack the columns of ``A`` into a single 1-D vector."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        return A.copy()
    return A.reshape(-1, order="F")


def unvec(v, m, n):
    """Inverse of :func:`vec` for an ``m x n`` matrix."""
    return np.asarray(v, dtype=float).reshape((m, n), order="F")


def commutation_matrix(m, n):
    """The ``mn x mn`` permutation matrix with ``K @ vec(A) == vec(A.T)``.

    ``A`` is ``m x n``. Built explicitly; sizes here are small.
    """
    m, n = int(m), int(n)
    if m < 1 or n < 1:
        raise ValidationError(f"commutation_matrix needs m, n >= 1, got ({m}, {n})")
    K = np.zeros((m * n, m * n))
    # vec(A)[j*m + i] = A[i, j] and vec(A')[i*n + j] = A[i, j]
    for i in range(m):
        for j in range(n):
            K[i * n + j, j * m + i] = 1.0
    return K


def _col(x):
    return np.asarray(x, dtype=float).reshape(-1, 1)


def _row(x):
    return np.asarray(x, dtype=float).reshape(1, -1)


@dataclass(frozen=True)
class MomentTensors:
    """The A- and B-tensors that assemble third and fourth moments.

    ``A1..A3`` are ``n^2 x n`` and ``B1..B4`` are ``n^2 x n^2``.
    """

    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    B3: np.ndarray
    B4: np.ndarray

    @property
    def n(self):
        return self.A1.shape[1]


def _b3_terms(d, m, Om, I, dr, mr, vO):
    """Individual B3 summands as printed, keyed by a short label (sign included)."""
    Id = kron(I, d)  # (I (x) delta_w), n^2 x n
    Idr = kron(I, dr)  # (I (x) delta_w'), n x n^2
    return {
        "d*Om*m'": kron_chain(d, Om, mr),
        "vecOm*d'*m'": kron_chain(vO, dr, mr),
        "(I*d)Om*m'": kron(Id @ Om, mr),
        "d'*Om*m": kron_chain(dr, Om, m),
        "d*vecOm'*m": kron_chain(d, vO.T, m),
        "Om(I*d')*m": kron(Om @ Idr, m),
        "m'*d*Om": kron_chain(mr, d, Om),
        "m'*(vecOm d')": kron(mr, vO @ dr),
        "m'*((I*d)Om)": kron(mr, Id @ Om),
        "m*d'*Om": kron_chain(m, dr, Om),
        "m*d*vecOm'": kron_chain(m, d, vO.T),
        "m*(Om(I*d'))": kron(m, Om @ Idr),
        "-d*d'*d*m'": -kron_chain(d, dr, d, mr),
        "-d'*d*d'*m": -kron_chain(dr, d, dr, m),
        "-m'*d*d'*d": -kron_chain(mr, d, dr, d),
        "-m*d'*d*d'": -kron_chain(m, dr, d, dr),
    }


def b3_terms(mu, delta_w, Omega):
    """Return the sixteen printed B3 summands (for ablation studies)."""
    mu, delta_w, Omega = _check(mu, delta_w, Omega)
    n = mu.size
    return _b3_terms(
        _col(delta_w), _col(mu), Omega, np.eye(n), _row(delta_w), _row(mu),
        _col(vec(Omega)),
    )


def _check(mu, delta_w, Omega):
    mu = np.asarray(mu, dtype=float).ravel()
    delta_w = np.asarray(delta_w, dtype=float).ravel()
    Omega = np.atleast_2d(np.asarray(Omega, dtype=float))
    n = mu.size
    if delta_w.size != n or Omega.shape != (n, n):
        raise ValidationError(
            f"shape mismatch: mu {mu.shape}, delta_w {delta_w.shape}, Omega {Omega.shape}"
        )
    if not np.allclose(Omega, Omega.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Omega).max())):
        raise ValidationError("Omega must be symmetric")
    return mu, delta_w, Omega


def moment_tensors(mu, delta_w, Omega):
    """Assemble A1-A3 and B1-B4 from location, scaled skewness and dispersion.

    The formulas are transcribed term by term; the identity written ``I_p``
    is taken to be ``I_n``.
    """
    mu, delta_w, Omega = _check(mu, delta_w, Omega)
    n = mu.size
    I = np.eye(n)
    d, m = _col(delta_w), _col(mu)
    dr, mr = _row(delta_w), _row(mu)
    vO = _col(vec(Omega))
    Id = kron(I, d)

    A1 = kron_chain(d, mr, m) + kron_chain(m, dr, m) + kron_chain(m, mr, d)
    A2 = kron(Omega, m) + kron(m, Omega) + kron(vO, mr)
    A3 = kron(d, Omega) + vO @ dr + Id @ Omega - Id @ kron(d, dr)

    B1 = (
        kron_chain(d, mr, m, mr)
        + kron_chain(m, dr, m, mr)
        + kron_chain(m, mr, d, mr)
        + kron_chain(m, mr, m, dr)
    )
    B2 = (
        kron_chain(Omega, m, mr)
        + kron_chain(m, Omega, mr)
        + kron_chain(vO, mr, mr)
        + kron_chain(mr, Omega, m)
        + kron_chain(m, m, vO.T)
        + kron_chain(m, mr, Omega)
    )
    B3 = sum(_b3_terms(d, m, Omega, I, dr, mr, vO).values())
    K = commutation_matrix(n, n)
    B4 = (np.eye(n * n) + K) @ kron(Omega, Omega) + vO @ vO.T
    return MomentTensors(A1, A2, A3, B1, B2, B3, B4)
