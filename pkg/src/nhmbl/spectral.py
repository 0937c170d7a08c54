"""Singular value and biorthogonal eigen decompositions of dense complex matrices."""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

CYCLIC_ORACLE_CAP = 1000
EXCEPTIONAL_OVERLAP = 1e-12


class DecompositionError(RuntimeError):
    """LAPACK failed to converge on a matrix."""


class ExceptionalPointWarning(RuntimeWarning):
    """Left and right eigenvectors are (nearly) orthogonal: defective matrix."""


@dataclass(frozen=True)
class SvdResult:
    """``H = U diag(sigma) V^dagger`` with ``sigma`` descending.

    ``left`` holds the u_n as columns, ``right`` the v_n. Both are ``None``
    when only singular values were requested.
    """

    sigma: np.ndarray
    left: np.ndarray | None = field(default=None, repr=False)
    right: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class EigResult:
    """``H = R diag(E) L^dagger`` with unit-norm right vectors and ``L^dagger R = 1``."""

    eigenvalues: np.ndarray
    right: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    defective: bool = False
    min_overlap: float = 1.0


def fingerprint(matrix: np.ndarray) -> str:
    arr = np.ascontiguousarray(matrix)
    return hashlib.sha256(arr.tobytes()).hexdigest()[:16]


def _check_finite(matrix: np.ndarray) -> np.ndarray:
    H = np.asarray(matrix)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise ValueError("matrix has non-finite entries")
    return H


def fix_phases(vectors: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Phases that make the first non-negligible component of each column real positive."""
    mags = np.abs(vectors)
    first = np.argmax(mags > tol * mags.max(axis=0, keepdims=True), axis=0)
    lead = vectors[first, np.arange(vectors.shape[1])]
    return np.conj(lead) / np.abs(lead)


def svd(matrix: np.ndarray, compute_vectors: bool = True) -> SvdResult:
    """Dense SVD straight from the matrix (no ``H^dagger H``)."""
    H = _check_finite(matrix)
    try:
        try:
            out = sla.svd(H, compute_uv=compute_vectors, lapack_driver="gesdd",
                          check_finite=False)
        except np.linalg.LinAlgError:
            # gesdd occasionally fails where the slower QR-iteration driver converges
            out = sla.svd(H, compute_uv=compute_vectors, lapack_driver="gesvd",
                          check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"SVD did not converge for matrix {fingerprint(H)}") from exc

    if not compute_vectors:
        return SvdResult(sigma=out)
    U, s, Vh = out
    V = Vh.conj().T
    phase = fix_phases(V)
    V = V * phase
    U = U * phase
    return SvdResult(sigma=s, left=U, right=V)


def _clusters(eigenvalues: np.ndarray, tol: float) -> list[np.ndarray]:
    pts = np.column_stack([eigenvalues.real, eigenvalues.imag])
    pairs = cKDTree(pts).query_pairs(tol, output_type="ndarray")
    n = len(eigenvalues)
    if len(pairs) == 0:
        return []
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    ncomp, labels = connected_components(graph, directed=False)
    counts = np.bincount(labels, minlength=ncomp)
    return [np.flatnonzero(labels == c) for c in np.flatnonzero(counts > 1)]


def eig_biorthogonal(matrix: np.ndarray, degeneracy_tol: float = 1e-9) -> EigResult:
    """Right/left eigenvectors paired so that ``L^dagger R`` is the identity.

    Eigenvalues are sorted by real part, then imaginary part. Hermitian input
    goes through ``eigh`` and returns ``L = R``. Near-degenerate clusters
    (within ``degeneracy_tol`` times the matrix scale) are biorthonormalized
    blockwise. If a left/right pair is nearly orthogonal the matrix is close
    to an exceptional point: an ``ExceptionalPointWarning`` is issued and the
    result is flagged ``defective``.
    """
    H = _check_finite(matrix)
    if np.array_equal(H, H.conj().T):
        try:
            E, R = sla.eigh(H, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise DecompositionError(f"eigh did not converge for matrix {fingerprint(H)}") from exc
        R = R * fix_phases(R)
        return EigResult(eigenvalues=E.astype(np.complex128), right=R, left=R.copy())

    try:
        E, VL, VR = sla.eig(H, left=True, right=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"eig did not converge for matrix {fingerprint(H)}") from exc

    order = np.lexsort((E.imag, E.real))
    E, VL, VR = E[order], VL[:, order], VR[:, order]
    VR = VR / np.linalg.norm(VR, axis=0)
    VR = VR * fix_phases(VR)
    VL = VL / np.linalg.norm(VL, axis=0)

    overlaps = np.einsum("ij,ij->j", VL.conj(), VR)
    scale = max(1.0, float(np.max(np.abs(H))))
    blocks = _clusters(E, degeneracy_tol * scale)
    single = np.ones(len(E), dtype=bool)
    for block in blocks:
        single[block] = False
    # pairing within a degenerate block is arbitrary, so only singletons are
    # tested pairwise; blocks are tested through their overlap matrix
    min_overlap = float(np.min(np.abs(overlaps[single]))) if single.any() else 1.0

    safe = np.where(np.abs(overlaps) > 0, overlaps, 1.0)
    L = VL / safe.conj()
    for block in blocks:
        S = VL[:, block].conj().T @ VR[:, block]
        smin = float(np.linalg.svd(S, compute_uv=False)[-1])
        min_overlap = min(min_overlap, smin)
        if smin >= EXCEPTIONAL_OVERLAP:
            L[:, block] = VL[:, block] @ np.linalg.inv(S).conj().T
    defective = min_overlap < EXCEPTIONAL_OVERLAP

    if defective:
        warnings.warn(
            f"near-exceptional point: min left/right overlap {min_overlap:.2e} "
            f"(matrix {fingerprint(H)})",
            ExceptionalPointWarning,
            stacklevel=2,
        )
    return EigResult(eigenvalues=E, right=VR, left=L, defective=defective,
                     min_overlap=min_overlap)


def cyclic_svd_oracle(matrix: np.ndarray, cap: int = CYCLIC_ORACLE_CAP) -> np.ndarray:
    """Singular values from the Hermitian block matrix ``[[0, H], [H^dagger, 0]]``.

    Its spectrum is ``{+sigma_n, -sigma_n}``; the upper half is returned in
    descending order. Meant for cross-checking :func:`svd`.
    """
    H = _check_finite(matrix)
    D = H.shape[0]
    if D > cap:
        raise ValueError(f"dimension {D} exceeds the cyclic oracle cap {cap}")
    C = np.zeros((2 * D, 2 * D), dtype=np.complex128)
    C[:D, D:] = H
    C[D:, :D] = H.conj().T
    w = sla.eigvalsh(C, check_finite=False)
    return np.abs(w[D:][::-1])
