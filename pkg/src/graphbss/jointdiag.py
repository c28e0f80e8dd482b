"""Whitening and orthogonal joint diagonalization."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EIG_REL_THRESHOLD = 1e-12


class WhiteningError(np.linalg.LinAlgError):
    """Sample covariance (or a Gram matrix) is numerically singular."""


def inv_sqrtm_sym(s: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Symmetric inverse square root of a symmetric positive definite matrix.

    Eigenvalues below ``1e-12`` times the largest raise
    :class:`WhiteningError` instead of being clamped.
    """
    s = 0.5 * (s + s.T)
    vals, vecs = np.linalg.eigh(s)
    top = vals[-1]
    if not top > 0 or vals[0] <= EIG_REL_THRESHOLD * top:
        raise WhiteningError(
            f"{what} is rank deficient: smallest eigenvalue {vals[0]:.3e} "
            f"vs largest {top:.3e}")
    r = (vecs / np.sqrt(vals)) @ vecs.T
    return 0.5 * (r + r.T)


def whiten(x: np.ndarray):
    """Prewhiten a (P, N) data matrix with its uncentered sample covariance.

    Returns
    -------
    x_white : ndarray, shape (P, N)
        ``s0_invsqrt @ x``, whose sample covariance is the identity.
    s0_invsqrt : ndarray, shape (P, P)
        Symmetric inverse square root of ``x @ x.T / N``.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[1]
    s0 = x @ x.T / n
    s0_invsqrt = inv_sqrtm_sym(s0, "sample covariance")
    return s0_invsqrt @ x, s0_invsqrt


def symmetric_orthogonalize(u: np.ndarray) -> np.ndarray:
    """Return ``(U U^T)^{-1/2} U``, the orthogonal polar factor of `u`.

    Computed from the SVD ``U = A diag(s) B^T`` as ``A B^T``, which stays
    accurate when the rows of `u` are nearly collinear.
    """
    u = np.asarray(u, dtype=float)
    a, sv, bt = np.linalg.svd(u)
    if not sv[0] > 0 or sv[-1] <= EIG_REL_THRESHOLD * sv[0]:
        raise WhiteningError(
            f"cannot orthogonalize: smallest singular value {sv[-1]:.3e}")
    return a @ bt


def off_energy(mats: np.ndarray) -> float:
    """Sum of squared off-diagonal entries over a stack of matrices."""
    mask = ~np.eye(mats.shape[-1], dtype=bool)
    return float(np.sum(mats[:, mask] ** 2))


@dataclass
class JointDiagResult:
    u: np.ndarray
    converged: bool
    sweeps: int
    off_trace: list = field(default_factory=list)


def joint_diagonalize(mats, tol: float = 1e-10,
                      max_sweeps: int = 200) -> JointDiagResult:
    """Orthogonal joint approximate diagonalization by Givens rotations.

    Finds an orthogonal `u` that maximizes ``sum_k ||diag(u M_k u^T)||^2``
    over the set of symmetric matrices `mats`. Pairs ``(i, j), i < j`` are
    swept cyclically, each rotation using the closed-form optimal angle for
    the whole set.

    Parameters
    ----------
    mats : sequence of ndarray, each (P, P)
        Symmetric matrices (tolerance 1e-10 relative to their scale).
    tol : float
        Stop once every rotation angle in a sweep is below `tol` radians.
    max_sweeps : int
        Sweep budget. Exhausting it returns ``converged=False``.

    Returns
    -------
    JointDiagResult
        ``u`` plus convergence diagnostics; ``off_trace`` holds the
        off-diagonal energy before the first sweep and after each sweep.
    """
    a = np.array([np.asarray(m, dtype=float) for m in mats])
    if a.ndim != 3 or a.shape[0] == 0 or a.shape[1] != a.shape[2]:
        raise ValueError("need a non-empty stack of square matrices")
    scale = max(np.max(np.abs(a)), 1.0)
    if np.max(np.abs(a - a.transpose(0, 2, 1))) > 1e-10 * scale:
        raise ValueError("joint_diagonalize expects symmetric matrices")
    a = 0.5 * (a + a.transpose(0, 2, 1))
    p = a.shape[1]
    v = np.eye(p)
    trace = [off_energy(a)]
    converged = p == 1
    sweeps = 0
    while not converged and sweeps < max_sweeps:
        sweeps += 1
        largest = 0.0
        for i in range(p - 1):
            for j in range(i + 1, p):
                g0 = a[:, i, i] - a[:, j, j]
                g1 = a[:, i, j] + a[:, j, i]
                ton = g0 @ g0 - g1 @ g1
                toff = 2.0 * (g0 @ g1)
                angle = 0.5 * np.arctan2(toff, ton + np.hypot(ton, toff))
                if abs(angle) <= tol:
                    continue
                largest = max(largest, abs(angle))
                c, s = np.cos(angle), np.sin(angle)
                ai = a[:, :, i].copy()
                a[:, :, i] = c * ai + s * a[:, :, j]
                a[:, :, j] = c * a[:, :, j] - s * ai
                ai = a[:, i, :].copy()
                a[:, i, :] = c * ai + s * a[:, j, :]
                a[:, j, :] = c * a[:, j, :] - s * ai
                vi = v[:, i].copy()
                v[:, i] = c * vi + s * v[:, j]
                v[:, j] = c * v[:, j] - s * vi
        trace.append(off_energy(a))
        converged = largest <= tol
    return JointDiagResult(u=v.T.copy(), converged=converged, sweeps=sweeps,
                           off_trace=trace)
