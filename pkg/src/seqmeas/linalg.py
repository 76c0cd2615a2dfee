"""Dense complex linear algebra primitives shared by every other module.

All operators are numpy arrays of dtype complex128.  Matrices are small
(dimension a few dozen at most), so everything here is plain dense algebra;
no attempt is made to exploit sparsity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Tolerances",
    "DEFAULT",
    "HermitianEigen",
    "as_complex",
    "dagger",
    "frob",
    "tensor",
    "partial_trace",
    "herm_eig",
    "sqrt_psd",
    "is_psd",
    "range_isometry",
]


@dataclass(frozen=True)
class Tolerances:
    """Default numerical tolerances.

    Callers pass tolerances explicitly; these values are the single place
    the defaults are defined.
    """

    hermiticity: float = 1e-9
    psd: float = 1e-9
    rank: float = 1e-9


DEFAULT = Tolerances()


def dagger(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return m.conj().T


def frob(m: np.ndarray) -> float:
    """Frobenius norm, as a float."""
    return float(np.linalg.norm(m))


def as_complex(m) -> np.ndarray:
    """Coerce to a complex128 array without copying when already one."""
    return np.asarray(m, dtype=np.complex128)


def tensor(*ms: np.ndarray) -> np.ndarray:
    """Kronecker product of one or more matrices, left to right."""
    if not ms:
        raise ValueError("tensor of zero factors")
    out = as_complex(ms[0])
    for m in ms[1:]:
        out = np.kron(out, as_complex(m))
    return out


def partial_trace(
    m: np.ndarray, dim_first: int, dim_second: int, traced: str
) -> np.ndarray:
    """Trace out one tensor factor of an operator on C^dim_first (x) C^dim_second.

    ``traced`` is ``"first"`` or ``"second"``; the result acts on the factor
    that is kept.  Row-major index convention: entry (i*dim_second + j) of a
    vector is component (i, j).
    """
    m = as_complex(m)
    n = dim_first * dim_second
    if m.shape != (n, n):
        raise ValueError(f"operator shape {m.shape} does not match {n}x{n}")
    blocks = m.reshape(dim_first, dim_second, dim_first, dim_second)
    if traced == "first":
        return np.einsum("ijik->jk", blocks)
    if traced == "second":
        return np.einsum("ijkj->ik", blocks)
    raise ValueError(f"traced must be 'first' or 'second', got {traced!r}")


@dataclass(frozen=True)
class HermitianEigen:
    """Eigendecomposition of a Hermitian matrix.

    ``eigenvalues`` are real and ascending; column k of ``eigenvectors`` is
    the unit eigenvector for eigenvalue k, with its largest-magnitude entry
    rotated to the positive real axis so repeated runs give identical bases.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    # unit columns, so the anchor entry is never zero
    anchors = np.abs(vecs).argmax(axis=0)
    lead = vecs[anchors, np.arange(vecs.shape[1])]
    return vecs * (np.abs(lead) / lead)


def herm_eig(m: np.ndarray, tol: float = DEFAULT.hermiticity) -> HermitianEigen:
    """Eigendecomposition with a Hermiticity check and deterministic phases."""
    m = as_complex(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if frob(m - dagger(m)) > tol:
        raise ValueError("matrix is not Hermitian within tolerance")
    vals, vecs = np.linalg.eigh((m + dagger(m)) / 2)
    return HermitianEigen(vals, _fix_phases(vecs))


def sqrt_psd(m: np.ndarray, tol: float = DEFAULT.psd) -> np.ndarray:
    """Principal square root of a positive semidefinite matrix.

    Eigenvalues in [-tol, 0) are treated as exact zeros; anything below -tol
    raises.
    """
    eig = herm_eig(m, tol)
    if eig.eigenvalues[0] < -tol:
        raise ValueError(
            f"matrix is not PSD: smallest eigenvalue {eig.eigenvalues[0]:.3e}"
        )
    roots = np.sqrt(np.clip(eig.eigenvalues, 0.0, None))
    out = (eig.eigenvectors * roots) @ dagger(eig.eigenvectors)
    return (out + dagger(out)) / 2


def is_psd(m: np.ndarray, tol: float = DEFAULT.psd) -> bool:
    """Whether ``m`` is Hermitian and positive semidefinite within ``tol``."""
    m = as_complex(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    if frob(m - dagger(m)) > tol:
        return False
    vals = np.linalg.eigvalsh((m + dagger(m)) / 2)
    return bool(vals[0] >= -tol)


def range_isometry(m: np.ndarray, rank_tol: float = DEFAULT.rank) -> np.ndarray:
    """Orthonormal basis of the range of a PSD matrix, as matrix columns.

    Columns are ordered by descending eigenvalue; eigenvalues at or below
    ``rank_tol`` do not contribute.  The result V satisfies V^dag V = I_r and
    V V^dag = projection onto range(m).
    """
    if not is_psd(m, rank_tol):
        raise ValueError("range_isometry expects a PSD matrix")
    eig = herm_eig(m)
    keep = eig.eigenvalues > rank_tol
    cols = eig.eigenvectors[:, keep]
    return cols[:, ::-1].copy()
