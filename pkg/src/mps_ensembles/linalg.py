"""Dense complex linear algebra with validated contracts.

Thin wrappers around numpy/scipy routines used everywhere else in the
package. The wrappers pin down conventions that the rest of the code
relies on:

* all matrices are ``complex128``, finite, and row-major;
* ``kron`` uses the row-major pairing convention, i.e.
  ``kron(a, b)[i*rb + j, k*cb + l] = a[i, k] * b[j, l]``, so that
  a flattened matrix ``x.reshape(-1)`` transforms as
  ``kron(a, b) @ vec(x) = vec(a @ x @ b.T)``;
* ``qr_unitary`` absorbs the phases of R's diagonal into Q so that
  feeding it a Ginibre matrix yields a Haar-distributed unitary;
* dense eigensolves are capped (default 4096) because transfer spectra
  reach down to |lambda| ~ 1e-3 and must stay above solver noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import CapExceededError, DimensionMismatchError, NumericalError

# Dimension cap for dense eigensolves (chi <= 64 for chi^2-sized transfer
# matrices).
DENSE_EIG_CAP = 4096

# Entry-count cap for Kronecker products (a 4096 x 4096 output).
KRON_MAX_ENTRIES = 1 << 26


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances fixed at construction time.

    Attributes:
        svd_reconstruction: relative Frobenius error allowed when
            rebuilding a matrix from its SVD factors.
        unitarity: Frobenius deviation of U^dag U from the identity.
        eig_residual: per-pair residual ``|Mv - lambda v| / |M|``.
        rank: singular values below ``rank * s_max`` are treated as
            exact zeros (explicit null directions).
    """

    svd_reconstruction: float = 1e-10
    unitarity: float = 1e-12
    eig_residual: float = 1e-8
    rank: float = 1e-12


DEFAULT_TOLERANCES = Tolerances()


@dataclass
class SvdResult:
    """SVD factors ``m = U @ diag(s) @ Vh`` with ``s`` descending."""

    U: np.ndarray
    s: np.ndarray
    Vh: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.s) @ self.Vh


@dataclass
class EigResult:
    """Eigenvalues and (optionally) right eigenvectors of a square matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D complex128 array.

    Raises:
        DimensionMismatchError: if the input is not 2-D.
        NumericalError: if any entry is NaN or infinite.
    """
    a = np.ascontiguousarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(np.float64))):
        raise NumericalError(f"{name} contains non-finite entries")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit inner-dimension check."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatchError(
            f"matmul: inner dimensions differ ({a.shape} vs {b.shape})"
        )
    return a @ b


def svd(m) -> SvdResult:
    """Full (economy) SVD with a gesvd fallback for stubborn inputs.

    Returns:
        SvdResult with singular values sorted descending, all >= 0.

    Raises:
        NumericalError: if both LAPACK drivers fail to converge; the
            message carries the matrix dimensions.
    """
    a = as_matrix(m)
    if a.size == 0:
        raise DimensionMismatchError("svd: empty matrix")
    try:
        u, s, vh = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesdd")
    except scipy.linalg.LinAlgError:
        try:
            u, s, vh = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesvd")
        except scipy.linalg.LinAlgError as exc:
            raise NumericalError(f"svd did not converge for shape {a.shape}") from exc
    return SvdResult(U=u, s=s, Vh=vh)


def qr_unitary(m, rank_tol: float = 1e-12) -> np.ndarray:
    """QR-derived unitary with R's diagonal phases absorbed into Q.

    The phase fix makes the map Ginibre -> Q sample the Haar measure,
    rather than the phase-skewed distribution raw QR produces.

    Raises:
        DimensionMismatchError: if the input is not square.
        NumericalError: if the input is rank-deficient within tolerance.
    """
    a = as_matrix(m)
    n, mcols = a.shape
    if n != mcols:
        raise DimensionMismatchError(f"qr_unitary needs a square matrix, got {a.shape}")
    q, r = scipy.linalg.qr(a)
    diag = np.diagonal(r)
    scale = np.max(np.abs(diag)) if n else 0.0
    if scale == 0.0 or np.any(np.abs(diag) < rank_tol * scale):
        raise NumericalError(f"qr_unitary: input of shape {a.shape} is singular")
    return q * (diag / np.abs(diag))


def eig_general(m, want_vectors: bool = False, cap: int = DENSE_EIG_CAP) -> EigResult:
    """Eigendecomposition of a general (non-Hermitian) complex matrix.

    Args:
        m: square matrix.
        want_vectors: also return right eigenvectors (as columns).
        cap: maximum allowed dimension for the dense solve.

    Raises:
        CapExceededError: if the dimension exceeds ``cap``.
        NumericalError: on LAPACK non-convergence.
    """
    a = as_matrix(m)
    n, mcols = a.shape
    if n != mcols:
        raise DimensionMismatchError(f"eig_general needs a square matrix, got {a.shape}")
    if n > cap:
        raise CapExceededError(f"eig_general: dimension {n} exceeds dense cap {cap}")
    try:
        if want_vectors:
            w, vr = scipy.linalg.eig(a)
            return EigResult(eigenvalues=w, eigenvectors=vr)
        w = scipy.linalg.eigvals(a)
        return EigResult(eigenvalues=w)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"eig did not converge for shape {a.shape}") from exc


def kron(a, b, max_entries: int = KRON_MAX_ENTRIES) -> np.ndarray:
    """Kronecker product in the repo-wide row-major pairing convention.

    Raises:
        CapExceededError: if the output would exceed ``max_entries``.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    entries = a.size * b.size
    if entries > max_entries:
        raise CapExceededError(
            f"kron output would have {entries} entries (cap {max_entries})"
        )
    return np.kron(a, b)


def random_ginibre(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Square matrix of iid standard complex Gaussians."""
    return (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)


def eigenvalue_clusters(w: np.ndarray, tol: float = 1e-8) -> list[list[int]]:
    """Group indices of eigenvalues that coincide within tolerance.

    Needed wherever spectra carry systematic degeneracies (e.g. replica
    sectors whose eigenvalues are unordered products), since spectral
    weights are only defined cluster-wise there.
    """
    order = np.lexsort((w.imag, w.real))
    clusters: list[list[int]] = []
    for idx in order:
        if clusters and abs(w[idx] - w[clusters[-1][0]]) <= tol * max(1.0, abs(w[idx])):
            clusters[-1].append(int(idx))
        else:
            clusters.append([int(idx)])
    return clusters


def spectral_terms(m: np.ndarray, left_probe: np.ndarray, right_probe: np.ndarray):
    """Cluster-resolved spectral weights ``<left| P_cluster |right>``.

    Returns one ``(eigenvalue, weight)`` pair per eigenvalue cluster of
    ``m``, with P the oblique spectral projector of the cluster; the
    weights sum to ``<left|right>``. Requires semi-simple clusters.
    """
    w, vl, vr = scipy.linalg.eig(m, left=True, right=True)
    terms = []
    for cluster in eigenvalue_clusters(w):
        u = vr[:, cluster]
        v = vl[:, cluster].conj()     # columns conjugated: rows of v.T act from the left
        overlap = v.T @ u
        try:
            inv = np.linalg.inv(overlap)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                "defective eigenvalue cluster: spectral projector undefined"
            ) from exc
        weight = complex((left_probe @ u) @ inv @ (v.T @ right_probe))
        terms.append((complex(np.mean(w[cluster])), weight))
    return terms
