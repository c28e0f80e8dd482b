"""Accuracy measures for unmixing estimates and their Monte Carlo summaries."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

MAX_EXACT_P = 8


@dataclass(frozen=True)
class MdResult:
    """Minimum distance index with the correction that attains it.

    ``perm[i]`` is the source matched to row ``i`` of ``gamma_hat @ omega``.
    """

    raw: float
    perm: tuple
    signs: np.ndarray

    @property
    def value(self) -> float:
        return min(max(self.raw, 0.0), 1.0)


def _row_weights(gamma_hat, omega):
    gamma_hat = np.asarray(gamma_hat, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if gamma_hat.ndim != 2 or gamma_hat.shape != omega.shape \
            or gamma_hat.shape[0] != gamma_hat.shape[1]:
        raise ValueError("gamma_hat and omega must be square and of equal size")
    p = gamma_hat.shape[0]
    if p > MAX_EXACT_P:
        raise ValueError(f"exact permutation search is limited to P <= {MAX_EXACT_P}")
    if p < 2:
        raise ValueError("the MD index needs P >= 2")
    g = gamma_hat @ omega
    norms = np.sum(g ** 2, axis=1)
    if np.any(norms == 0):
        raise ValueError("gamma_hat @ omega has a zero row")
    return g, g ** 2 / norms[:, None]


def md_search(gamma_hat, omega) -> MdResult:
    """Exact MD index by search over all row-to-source assignments.

    For ``G = gamma_hat @ omega`` and an assignment ``pi`` the best row
    scales are closed-form least squares, leaving
    ``sum_i (1 - g_{i,pi(i)}^2 / ||g_i||^2)``; the index squared is the
    smallest such sum divided by ``P - 1``.
    """
    g, w = _row_weights(gamma_hat, omega)
    p = g.shape[0]
    rows = np.arange(p)
    best, best_perm = -np.inf, None
    for perm in itertools.permutations(range(p)):
        total = w[rows, perm].sum()
        if total > best:
            best, best_perm = total, perm
    d2 = (p - best) / (p - 1)
    signs = np.sign(g[rows, best_perm])
    signs[signs == 0] = 1.0
    return MdResult(raw=float(np.sqrt(max(d2, 0.0))), perm=best_perm, signs=signs)


def md_index(gamma_hat, omega) -> float:
    """Minimum distance index in [0, 1]; zero iff ``gamma_hat`` equals
    ``omega^{-1}`` up to row permutation, sign and scale.

    Raises
    ------
    ValueError
        For mismatched shapes, ``P < 2`` or ``P > 8``.
    """
    return md_search(gamma_hat, omega).value


def align(omega_hat, omega) -> np.ndarray:
    """Reorder and re-sign the columns of a mixing estimate to match `omega`.

    Uses the assignment that attains the MD index of ``omega_hat^{-1}``.
    Column scales are left alone because every estimator here already
    fixes the source scale.
    """
    omega_hat = np.asarray(omega_hat, dtype=float)
    res = md_search(np.linalg.inv(omega_hat), omega)
    out = np.empty_like(omega_hat)
    for i, src in enumerate(res.perm):
        out[:, src] = res.signs[i] * omega_hat[:, i]
    return out


@dataclass
class Summary:
    """Monte Carlo summary over ``reps`` repetitions (``None`` when absent)."""

    reps: int
    n: int
    mean_nmd2: float
    se_nmd2: float
    var_all: float | None = None
    se_var_all: float | None = None
    var_off: float | None = None
    se_var_off: float | None = None


def _sum_of_variances(samples: np.ndarray):
    r = samples.shape[0]
    dev = np.sum((samples - samples.mean(axis=0)) ** 2, axis=1)
    est = dev.sum() / (r - 1)
    se = r / (r - 1) * dev.std(ddof=1) / np.sqrt(r)
    return float(est), float(se)


def aggregate(md_values, n: int, p: int, aligned_omegas=None) -> Summary:
    """Summarize repetitions.

    Parameters
    ----------
    md_values : array_like, shape (R,)
        MD index per repetition.
    n, p : int
        Graph size and number of sources.
    aligned_omegas : array_like, shape (R, P, P), optional
        Aligned mixing estimates; adds ``N`` times the summed entry variances
        over all entries and over the off-diagonal entries.
    """
    md = np.asarray(md_values, dtype=float)
    r = md.size
    if r < 2:
        raise ValueError("aggregate needs at least two repetitions")
    v = n * (p - 1) * md ** 2
    out = Summary(reps=r, n=n, mean_nmd2=float(v.mean()),
                  se_nmd2=float(v.std(ddof=1) / np.sqrt(r)))
    if aligned_omegas is not None:
        om = np.asarray(aligned_omegas, dtype=float).reshape(r, p * p)
        off = ~np.eye(p, dtype=bool).ravel()
        va, sa = _sum_of_variances(om)
        vo, so = _sum_of_variances(om[:, off])
        out.var_all, out.se_var_all = n * va, n * sa
        out.var_off, out.se_var_off = n * vo, n * so
    return out
