"""Transfer matrices, their spectra, and radial spectral statistics.

The site transfer matrix of a rank-3 tensor ``A`` with square bonds is the
``chi^2 x chi^2`` operator ``T = sum_s conj(A^s) (x) A^s`` in the repo-wide
row-major Kronecker convention, so ``T @ vec(X) = vec(conj(A^s) X A^s.T)``
summed over ``s``. For a right-isometric tensor the flattened identity is a
right eigenvector with eigenvalue 1; for a left-isometric tensor it is a
left eigenvector. Null bond directions (explicit zero columns/rows) show up
as exact zero eigenvalues and are deliberately kept: their pooled fraction
is the order parameter for measurement-dominated ensembles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import (CapExceededError, ConfigError, ConvergenceError,
                     DimensionMismatchError, NumericalError)
from .linalg import DENSE_EIG_CAP, eig_general, kron, spectral_terms
from .mps import MpsState

if TYPE_CHECKING:
    from .circuits import CircuitSpec

UNIT_EIGENVALUE_BAND = 1e-6     # |lambda| > 1 - band counts as a unit eigenvalue
MODULUS_SLACK = 1e-8            # tolerated overshoot of |lambda| beyond 1


@dataclass
class TransferSpectrum:
    """Eigenvalue multiset of one site transfer matrix plus provenance."""

    eigenvalues: np.ndarray
    chi: int
    site: int | None = None
    spec: "CircuitSpec | None" = None
    unit_eigenvalues_removed: bool = False
    n_unit: int = 0

    def moduli(self) -> np.ndarray:
        return np.abs(self.eigenvalues)

    def nonunit_eigenvalues(self) -> np.ndarray:
        if self.unit_eigenvalues_removed:
            return self.eigenvalues
        keep = np.abs(self.eigenvalues) <= 1.0 - UNIT_EIGENVALUE_BAND
        return self.eigenvalues[keep]


@dataclass
class RadialDensity:
    """Histogram of eigenvalue moduli normalized as a probability density."""

    bin_edges: np.ndarray
    density: np.ndarray

    def integral(self) -> float:
        return float(np.sum(self.density * np.diff(self.bin_edges)))


def transfer_matrix(tensor: np.ndarray) -> np.ndarray:
    """Dense site transfer matrix ``sum_s conj(A^s) (x) A^s``."""
    a = np.asarray(tensor, dtype=np.complex128)
    if a.ndim != 3:
        raise DimensionMismatchError("transfer_matrix expects a rank-3 tensor")
    chi_l, d, chi_r = a.shape
    if chi_l != chi_r:
        raise DimensionMismatchError(
            f"transfer_matrix needs square bonds, got ({chi_l}, {chi_r})"
        )
    out = np.zeros((chi_l * chi_l, chi_r * chi_r), dtype=np.complex128)
    for s in range(d):
        out += kron(np.conj(a[:, s, :]), a[:, s, :])
    return out


def operator_transfer_matrix(tensor: np.ndarray, op: np.ndarray) -> np.ndarray:
    """Transfer matrix dressed with a one-site operator ``op``."""
    a = np.asarray(tensor, dtype=np.complex128)
    d = a.shape[1]
    op = np.asarray(op, dtype=np.complex128)
    if op.shape != (d, d):
        raise DimensionMismatchError(f"operator must be {d} x {d}, got {op.shape}")
    out = np.zeros((a.shape[0] ** 2, a.shape[2] ** 2), dtype=np.complex128)
    for t in range(d):
        for s in range(d):
            if op[t, s] != 0.0:
                out += op[t, s] * kron(np.conj(a[:, t, :]), a[:, s, :])
    return out


def _gauge_defect(tensor: np.ndarray, gauge: str) -> float:
    """Deviation of the isometry condition, allowing explicit null directions."""
    if gauge == "left_canonical":
        p = np.einsum("aib,aic->bc", np.conj(tensor), tensor, optimize=True)
    elif gauge == "right_canonical":
        p = np.einsum("aib,cib->ac", tensor, np.conj(tensor), optimize=True)
    else:
        raise ConfigError(f"unknown gauge {gauge!r}")
    # On-support isometry: the Gram matrix must be a Hermitian projector.
    return max(np.linalg.norm(p - p.conj().T), np.linalg.norm(p @ p - p))


def spectrum(tensor: np.ndarray, gauge: str | None = "left_canonical",
             remove_unit: bool = False, site: int | None = None,
             spec: "CircuitSpec | None" = None,
             cap: int = DENSE_EIG_CAP) -> TransferSpectrum:
    """Full eigenvalue multiset of a site transfer matrix.

    Args:
        tensor: rank-3 site tensor with square bonds.
        gauge: expected isometry gauge ("left_canonical" or
            "right_canonical"); pass None to skip the gauge check.
        remove_unit: drop eigenvalues within 1e-6 of the unit circle
            (the convention used by pooled radial densities).
        site, spec: provenance recorded on the result.
        cap: dense eigensolver cap.

    Raises:
        NumericalError: if the gauge check fails or any modulus exceeds
            1 + 1e-8.
    """
    a = np.asarray(tensor, dtype=np.complex128)
    if gauge is not None:
        defect = _gauge_defect(a, gauge)
        if defect > 1e-8:
            raise NumericalError(f"tensor is not {gauge} (defect {defect:.2e})")
    tm = transfer_matrix(a)
    w = eig_general(tm, cap=cap).eigenvalues
    moduli = np.abs(w)
    if gauge is not None and moduli.max(initial=0.0) > 1.0 + MODULUS_SLACK:
        raise NumericalError(f"eigenvalue modulus {moduli.max():.6f} exceeds 1")
    n_unit = int(np.sum(moduli > 1.0 - UNIT_EIGENVALUE_BAND))
    if remove_unit:
        w = w[moduli <= 1.0 - UNIT_EIGENVALUE_BAND]
    return TransferSpectrum(eigenvalues=w, chi=a.shape[0], site=site, spec=spec,
                            unit_eigenvalues_removed=remove_unit, n_unit=n_unit)


def site_tensor_in_gauge(state: MpsState, site: int, gauge: str) -> np.ndarray:
    """Tensor at ``site`` with the requested isometry gauge, from a copy."""
    work = state.copy()
    if gauge == "left_canonical":
        if site >= work.N - 1:
            raise ConfigError("cannot left-canonicalize the last site tensor")
        work.canonicalize(site + 1, normalize=False)
    elif gauge == "right_canonical":
        if site == 0:
            raise ConfigError("cannot right-canonicalize the first site tensor")
        work.canonicalize(site - 1, normalize=False)
    else:
        raise ConfigError(f"unknown gauge {gauge!r}")
    return work.tensors[site]


def central_site_spectrum(state: MpsState, gauge: str = "left_canonical",
                          remove_unit: bool = False,
                          spec: "CircuitSpec | None" = None) -> TransferSpectrum:
    """Spectrum of the tensor at the central site in the requested gauge."""
    site = state.N // 2
    tensor = site_tensor_in_gauge(state, site, gauge)
    return spectrum(tensor, gauge=gauge, remove_unit=remove_unit, site=site, spec=spec)


def radial_density(spectra: Sequence[TransferSpectrum] | Iterable[TransferSpectrum],
                   bins: int = 100) -> RadialDensity:
    """Pooled histogram of |lambda| over [0, 1], normalized to unit mass."""
    spectra = list(spectra)
    if not spectra:
        raise ConfigError("radial_density: no spectra given")
    moduli = np.concatenate([s.moduli() for s in spectra])
    if moduli.size == 0:
        raise ConfigError("radial_density: spectra contain no eigenvalues")
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(np.clip(moduli, 0.0, 1.0), bins=edges)
    density = counts / (moduli.size * np.diff(edges))
    return RadialDensity(bin_edges=edges, density=density)


def density_difference(a: RadialDensity, b: RadialDensity) -> RadialDensity:
    """Signed per-bin difference ``a - b`` on identical binning."""
    if a.bin_edges.shape != b.bin_edges.shape or \
            not np.allclose(a.bin_edges, b.bin_edges, atol=1e-12, rtol=0.0):
        raise ConfigError("density_difference: binning mismatch")
    return RadialDensity(bin_edges=a.bin_edges.copy(), density=a.density - b.density)


def small_eig_fraction(spectra: Sequence[TransferSpectrum], rho: float) -> float:
    """Fraction of pooled non-unit eigenvalues with ``|lambda| < rho``."""
    if not 0.0 < rho <= 1.0:
        raise ConfigError(f"rho must lie in (0, 1], got {rho}")
    spectra = list(spectra)
    if not spectra:
        raise ConfigError("small_eig_fraction: no spectra given")
    moduli = np.concatenate([np.abs(s.nonunit_eigenvalues()) for s in spectra])
    if moduli.size == 0:
        raise ConfigError("small_eig_fraction: no non-unit eigenvalues")
    return float(np.mean(moduli < rho))


def spectral_gap(spec: TransferSpectrum | np.ndarray) -> tuple[float, float]:
    """Gap ``1 - |lambda_max|`` and length ``-1/log|lambda_max|``.

    ``lambda_max`` is the largest-modulus eigenvalue after excluding the
    single eigenvalue closest to 1. By convention the length is 0 when
    ``lambda_max`` vanishes and inf when the gap closes.
    """
    w = spec.eigenvalues if isinstance(spec, TransferSpectrum) else np.asarray(spec)
    if w.size < 2:
        raise ConfigError("spectral_gap needs at least two eigenvalues")
    drop = int(np.argmin(np.abs(w - 1.0)))
    rest = np.delete(w, drop)
    lam = float(np.max(np.abs(rest)))
    gap = 1.0 - lam
    if lam == 0.0:
        xi = 0.0
    elif lam >= 1.0:
        xi = np.inf
    else:
        xi = -1.0 / np.log(lam)
    return gap, xi


def connected_correlator(tensor: np.ndarray, op: np.ndarray, r: int,
                         cap: int = DENSE_EIG_CAP) -> complex:
    """Connected two-point function of ``op`` at separation ``r + 1`` sites.

    Evaluates the eigenexpansion over the transfer spectrum (all modes
    except the unit one) and, as a cross-check, the direct r-fold
    transfer application; both must agree to 1e-8 whenever the
    eigendecomposition fits under the dense cap (otherwise only the
    direct path runs).

    Args:
        tensor: uniform site tensor in canonical gauge.
        op: one-site observable matrix.
        r: number of sites between the two operator insertions (>= 0).
    """
    if r < 0:
        raise ConfigError("separation r must be >= 0")
    tm = transfer_matrix(tensor)
    tm_op = operator_transfer_matrix(tensor, op)
    dim = tm.shape[0]

    # Leading pair of the plain transfer matrix defines the boundaries.
    w, vl, vr = scipy.linalg.eig(tm, left=True, right=True)
    lead = int(np.argmax(np.abs(w)))
    l1 = vl[:, lead].conj()
    r1 = vr[:, lead]
    l1 = l1 / (l1 @ r1)

    mean = l1 @ tm_op @ r1
    vec = tm_op @ r1
    for _ in range(r):
        vec = tm @ vec
    direct = l1 @ tm_op @ vec - mean * mean

    if dim <= cap:
        terms = spectral_terms(tm, l1 @ tm_op, tm_op @ r1)
        total = 0.0 + 0.0j
        for lam, weight in terms:
            if abs(lam - 1.0) < 1e-8:
                continue
            total += (lam ** r) * weight
        if abs(total - direct) > 1e-8 * max(1.0, abs(direct)):
            raise NumericalError(
                f"correlator paths disagree: {total} vs {direct}"
            )
        return complex(total)
    return complex(direct)


def canonicalize_uniform(tensor: np.ndarray, gauge: str = "left",
                         cap: int = DENSE_EIG_CAP) -> np.ndarray:
    """Canonical form of a uniform site tensor via its transfer fixed point.

    Finds the dominant fixed point of the (left or right) transfer map,
    takes its positive square root and conjugates the tensor so that it
    becomes an isometry on the fixed point's support; the similarity
    leaves the transfer spectrum unchanged up to overall normalization.

    Raises:
        ConvergenceError: when the dominant eigenvalue is not isolated
            enough to define the gauge.
    """
    a = np.asarray(tensor, dtype=np.complex128)
    chi = a.shape[0]
    if a.shape[2] != chi:
        raise DimensionMismatchError("canonicalize_uniform needs square bonds")
    if chi * chi > cap:
        raise CapExceededError(f"transfer matrix dimension {chi*chi} exceeds cap {cap}")
    if gauge == "left":
        m = np.einsum("isk,jsl->klij", np.conj(a), a, optimize=True).reshape(chi * chi, chi * chi)
    elif gauge == "right":
        m = np.einsum("isk,jsl->ijkl", a, np.conj(a), optimize=True).reshape(chi * chi, chi * chi)
    else:
        raise ConfigError(f"unknown gauge {gauge!r}")
    w, vr = scipy.linalg.eig(m)
    order = np.argsort(-np.abs(w))
    lead, second = order[0], order[1] if w.size > 1 else None
    nu = w[lead]
    if abs(nu) == 0.0:
        raise ConvergenceError("transfer map has zero spectral radius")
    if second is not None and abs(w[second]) > abs(nu) * (1.0 - 1e-10) \
            and abs(w[second] - nu) > 1e-8 * abs(nu):
        raise ConvergenceError("dominant transfer eigenvalue is not isolated")
    x = vr[:, lead].reshape(chi, chi)
    x = x + x.conj().T
    evals, q = np.linalg.eigh(x)
    if abs(evals.min()) > abs(evals.max()):
        evals, x = -evals, -x
    evals = np.clip(evals, 0.0, None)
    scale = evals.max()
    if scale == 0.0:
        raise ConvergenceError("fixed point of the transfer map vanished")
    root = q @ np.diag(np.sqrt(evals)) @ q.conj().T
    inv_sqrt = np.array([1.0 / np.sqrt(e) if e > 1e-12 * scale else 0.0 for e in evals])
    root_inv = q @ np.diag(inv_sqrt) @ q.conj().T
    if gauge == "left":
        out = np.einsum("ab,bsc,cd->asd", root, a, root_inv, optimize=True)
    else:
        out = np.einsum("ab,bsc,cd->asd", root_inv, a, root, optimize=True)
    return out / np.sqrt(abs(nu))
