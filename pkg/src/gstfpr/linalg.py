"""Rank conventions shared by every module.

One relative cutoff decides every numerical rank in the package, so that
amplified-basis sizes, the amplifiable-parameter count and completeness
verdicts can never contradict each other.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.linalg as sla

RANK_TOL = 1e-6


def svd(M, full_matrices: bool = False, compute_uv: bool = True):
    """``numpy.linalg.svd`` with a fallback to LAPACK gesvd when gesdd fails to converge."""
    try:
        return np.linalg.svd(M, full_matrices=full_matrices, compute_uv=compute_uv)
    except np.linalg.LinAlgError:
        return sla.svd(M, full_matrices=full_matrices, compute_uv=compute_uv,
                       lapack_driver="gesvd")


def singular_values(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros(0)
    return svd(M, compute_uv=False)


def rank_from_singular_values(s, tol: float = RANK_TOL) -> int:
    if len(s) == 0 or s[0] <= 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def numerical_rank(M, tol: float = RANK_TOL) -> int:
    """Count of singular values above ``tol * sigma_max``."""
    return rank_from_singular_values(singular_values(M), tol)


def range_basis(M, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical column space of ``M``."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros((M.shape[0], 0))
    U, s, _ = svd(M)
    return U[:, :rank_from_singular_values(s, tol)]


def pmap(fn, items, workers: int | None = None) -> list:
    """``list(map(fn, items))``, run on a thread pool when ``workers > 1``.

    numpy releases the GIL inside LAPACK calls, so threads give real
    speedup for the per-germ and per-circuit work this is used for.
    """
    items = list(items)
    if not workers or workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
