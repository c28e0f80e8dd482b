"""Fisher information and Cramer-Rao bounds for Gaussian graph-signal BSS.

Sources are independent zero-mean Gaussian vectors ``z_p ~ N(0, C_p(theta_p))``
mixed as ``X = Omega Z``. Parameters are ``vec(Omega)`` (column-major)
followed by the stacked source parameters.

Models are passed as a sequence of ``(CovarianceModel, theta)`` pairs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .sources import CovarianceModel, gma1_derivative  # noqa: F401  (re-export)

IDENT_REL_TOL = 1e-6


class NonIdentifiable(ValueError):
    """The bound does not exist for this configuration."""

    def __init__(self, msg, pair=None):
        super().__init__(msg)
        self.pair = pair


def _chol(c):
    try:
        return cho_factor(c, lower=True)
    except np.linalg.LinAlgError as e:
        raise np.linalg.LinAlgError(f"covariance not positive definite: {e}") from None


def kappa(ci: np.ndarray, cj: np.ndarray) -> float:
    """``tr(C_j^{-1} C_i)``."""
    return float(np.trace(cho_solve(_chol(cj), ci)))


@dataclass
class _SourceTerms:
    c: np.ndarray
    chol: tuple
    s: np.ndarray        # tr(C^{-1} D_m)
    j_theta: np.ndarray  # 0.5 tr(C^{-1} D_a C^{-1} D_b)


def _source_terms(model: CovarianceModel, theta) -> _SourceTerms:
    c = model.covariance(theta)
    ch = _chol(c)
    cd = [cho_solve(ch, d) for d in model.derivatives(theta)]
    m = len(cd)
    s = np.array([np.trace(a) for a in cd])
    jt = np.empty((m, m))
    for a in range(m):
        for b in range(a, m):
            jt[a, b] = jt[b, a] = 0.5 * np.sum(cd[a] * cd[b].T)
    return _SourceTerms(c, ch, s, jt)


def _all_terms(models):
    terms = [_source_terms(m, th) for m, th in models]
    ns = {t.c.shape[0] for t in terms}
    if len(ns) != 1:
        raise ValueError(f"sources disagree on node count: {sorted(ns)}")
    return terms, ns.pop()


def _kappa_matrix(terms) -> np.ndarray:
    p = len(terms)
    k = np.empty((p, p))
    for i in range(p):
        for j in range(p):
            k[i, j] = float(np.trace(cho_solve(terms[j].chol, terms[i].c)))
    return k


def zeta(model: CovarianceModel, theta, n: int | None = None) -> float:
    """Information left for the source scale after profiling out theta.

    ``2N - s^T J_theta^{-1} s``; equals ``2N`` for parameter-free models
    and when the covariance does not depend on theta.
    """
    t = _source_terms(model, theta)
    n = t.c.shape[0] if n is None else n
    return _zeta_from_terms(t, n)


def _zeta_from_terms(t: _SourceTerms, n: int) -> float:
    # a parameter that leaves C unchanged (e.g. theta on an empty graph)
    # carries no information and takes none from the scale
    if t.s.size == 0 or not np.any(t.s):
        return 2.0 * n
    return float(2.0 * n - t.s @ np.linalg.solve(t.j_theta, t.s))


@dataclass
class FimBlocks:
    """Blocks of the Fisher information for ``(vec(Omega), theta)``."""

    j_omega: np.ndarray
    j_theta: np.ndarray
    j_omega_theta: np.ndarray

    def assembled(self) -> np.ndarray:
        return np.block([[self.j_omega, self.j_omega_theta],
                         [self.j_omega_theta.T, self.j_theta]])


def fim(omega: np.ndarray, models) -> FimBlocks:
    """Closed-form Fisher information blocks."""
    omega = np.asarray(omega, dtype=float)
    terms, n = _all_terms(models)
    p = len(terms)
    if omega.shape != (p, p):
        raise ValueError(f"omega must be {p}x{p}")
    gi = np.linalg.inv(omega)
    git = gi.T
    k = _kappa_matrix(terms)
    eye = np.eye(p)
    j_om = np.zeros((p * p, p * p))
    for i in range(p):
        for j in range(p):
            if i == j:
                mid = np.diag(k[i].copy())
                mid[i, i] = 2.0 * n
            else:
                mid = n * np.outer(eye[j], eye[i])
            j_om[i * p:(i + 1) * p, j * p:(j + 1) * p] = git @ mid @ gi
    sizes = [t.s.size for t in terms]
    m = sum(sizes)
    j_th = np.zeros((m, m))
    j_ot = np.zeros((p * p, m))
    off = 0
    for q, t in enumerate(terms):
        mq = sizes[q]
        j_th[off:off + mq, off:off + mq] = t.j_theta
        j_ot[q * p:(q + 1) * p, off:off + mq] = np.outer(git @ eye[q], t.s)
        off += mq
    return FimBlocks(j_om, j_th, j_ot)


def _cx(omega, covs):
    n = covs[0].shape[0]
    p = len(covs)
    big_om = np.kron(np.eye(n), omega)
    cz = sum(np.kron(c, np.outer(e, e)) for c, e in zip(covs, np.eye(p)))
    return big_om @ cz @ big_om.T


def slepian_bangs_oracle(omega: np.ndarray, models, param_perturbation=None,
                         max_dim: int = 200) -> np.ndarray:
    """Fisher information assembled numerically from the full data covariance.

    Builds ``C_x = (I_N kron Omega) C_z (I_N kron Omega^T)`` explicitly and
    evaluates ``J_ij = 0.5 tr(C_x^{-1} dC_x/dphi_i C_x^{-1} dC_x/dphi_j)``.
    Derivatives are analytic unless `param_perturbation` gives a step for
    central finite differences of ``C_x(phi)``. Test-scale only.
    """
    omega = np.asarray(omega, dtype=float)
    p = omega.shape[0]
    thetas = [np.atleast_1d(np.asarray(th, dtype=float)) if m.param_count else np.zeros(0)
              for m, th in models]
    covs = [m.covariance(th) for m, th in models]
    n = covs[0].shape[0]
    if n * p > max_dim:
        raise ValueError(f"oracle limited to N*P <= {max_dim}, got {n * p}")
    cx = _cx(omega, covs)
    eye_p = np.eye(p)
    big_om = np.kron(np.eye(n), omega)
    cz = sum(np.kron(c, np.outer(e, e)) for c, e in zip(covs, eye_p))

    derivs = []
    h = param_perturbation
    for l in range(p):
        for k in range(p):
            if h is None:
                e_kl = np.outer(eye_p[k], eye_p[l])
                a = big_om @ cz @ np.kron(np.eye(n), e_kl.T)
                derivs.append(a + a.T)
            else:
                op, om = omega.copy(), omega.copy()
                op[k, l] += h
                om[k, l] -= h
                derivs.append((_cx(op, covs) - _cx(om, covs)) / (2 * h))
    for q, (model, _) in enumerate(models):
        for mi in range(model.param_count):
            if h is None:
                d = model.derivative(thetas[q], mi)
                derivs.append(big_om @ np.kron(d, np.outer(eye_p[q], eye_p[q])) @ big_om.T)
            else:
                tp, tm = thetas[q].copy(), thetas[q].copy()
                tp[mi] += h
                tm[mi] -= h
                cp, cm = list(covs), list(covs)
                cp[q] = model.covariance(tp)
                cm[q] = model.covariance(tm)
                derivs.append((_cx(omega, cp) - _cx(omega, cm)) / (2 * h))
    ch = _chol(cx)
    sol = [cho_solve(ch, d) for d in derivs]
    dim = len(sol)
    j = np.empty((dim, dim))
    for a in range(dim):
        for b in range(a, dim):
            j[a, b] = j[b, a] = 0.5 * np.sum(sol[a] * sol[b].T)
    return j


def _identifiability(k: np.ndarray, zetas: np.ndarray, n: int):
    p = k.shape[0]
    margin = np.full((p, p), np.inf)
    for i in range(p):
        for j in range(i + 1, p):
            margin[i, j] = margin[j, i] = k[i, j] * k[j, i] - n * n
    return margin


def _check_identifiable(k, zetas, n):
    margin = _identifiability(k, zetas, n)
    p = k.shape[0]
    for i in range(p):
        for j in range(i + 1, p):
            if margin[i, j] < IDENT_REL_TOL * n * n:
                raise NonIdentifiable(
                    f"sources {i} and {j} are not identifiable: "
                    f"kappa_ij*kappa_ji - N^2 = {margin[i, j]:.3e}", pair=(i, j))
    for i, z in enumerate(zetas):
        if z <= IDENT_REL_TOL * n:
            raise NonIdentifiable(f"source {i} scale not identifiable: zeta={z:.3e}",
                                  pair=(i, i))
    return margin


def _crb_identity(k: np.ndarray, diag_terms: np.ndarray, n: int) -> np.ndarray:
    p = k.shape[0]
    eye = np.eye(p)
    out = np.zeros((p * p, p * p))
    for i in range(p):
        for j in range(p):
            if i == j:
                mid = np.zeros((p, p))
                mid[i, i] = 1.0 / diag_terms[i]
                for l in range(p):
                    if l != i:
                        mid[l, l] = k[l, i] / (k[i, l] * k[l, i] - n * n)
            else:
                mid = -n / (k[i, j] * k[j, i] - n * n) * np.outer(eye[j], eye[i])
            out[i * p:(i + 1) * p, j * p:(j + 1) * p] = mid
    return out


def _sandwich_omega(crb_i, omega):
    big = np.kron(np.eye(omega.shape[0]), omega)
    out = big @ crb_i @ big.T
    return 0.5 * (out + out.T)


def _prepare(models):
    terms, n = _all_terms(models)
    k = _kappa_matrix(terms)
    zetas = np.array([_zeta_from_terms(t, n) for t in terms])
    return terms, n, k, zetas


def crb_identity(models, known_theta: bool = False) -> np.ndarray:
    """Bound on ``vec(Omega)`` at ``Omega = I``."""
    _, n, k, zetas = _prepare(models)
    _check_identifiable(k, zetas, n)
    d = np.full(len(zetas), 2.0 * n) if known_theta else zetas
    return _crb_identity(k, d, n)


def crb_omega(omega: np.ndarray, models) -> np.ndarray:
    """Cramer-Rao bound for ``vec(Omega)`` with unknown source parameters.

    Raises
    ------
    NonIdentifiable
        If some pair has ``kappa_ij kappa_ji`` within ``1e-6 N^2`` of ``N^2``
        or some source has vanishing scale information.
    """
    return _sandwich_omega(crb_identity(models), np.asarray(omega, float))


def crb_omega_known_theta(omega: np.ndarray, models) -> np.ndarray:
    """Cramer-Rao bound for ``vec(Omega)`` when the source parameters are known."""
    return _sandwich_omega(crb_identity(models, known_theta=True),
                           np.asarray(omega, float))


def crb_gamma(omega: np.ndarray, models) -> np.ndarray:
    """Cramer-Rao bound for ``vec(Gamma)``, ``Gamma = Omega^{-1}``."""
    gamma = np.linalg.inv(np.asarray(omega, float))
    big = np.kron(gamma.T, np.eye(gamma.shape[0]))
    out = big @ crb_identity(models) @ big.T
    return 0.5 * (out + out.T)


class SpectralGma1:
    """Normalized GMA(1) source whose covariance is handled in the graph
    eigenbasis, so bound evaluations over many ``theta`` cost O(N) each
    (plus one O(N^2) overlap per pair of distinct graphs)."""

    def __init__(self, w):
        self.w = w
        self.ev, self.q = np.linalg.eigh(np.asarray(w.data, dtype=float))
        self.n = self.ev.size

    def terms(self, theta: float):
        """Covariance eigenvalues, ``s`` and ``J_theta`` at `theta`."""
        a = 1.0 + theta * self.ev
        if np.min(np.abs(a)) < 1e-12:
            raise np.linalg.LinAlgError("I + theta W is singular")
        tot = np.sum(a ** 2)
        sigma2 = self.n / tot
        dsigma2 = -self.n * 2.0 * np.sum(a * self.ev) / tot ** 2
        c = sigma2 * a ** 2
        r = (dsigma2 * a ** 2 + 2.0 * sigma2 * a * self.ev) / c
        return c, float(np.sum(r)), 0.5 * float(np.sum(r ** 2))


def crb_identity_spectral(sources, known_theta: bool = False, overlaps=None):
    """Bound on ``vec(Omega)`` at ``Omega = I`` for normalized GMA(1) sources.

    Parameters
    ----------
    sources : sequence of (SpectralGma1, float)
        Sources sharing a graph should share the :class:`SpectralGma1`
        object; their overlap is then the identity.
    overlaps : dict, optional
        Cache for the squared eigenbasis overlaps keyed by object ids,
        reused across calls with the same graphs.
    """
    overlaps = {} if overlaps is None else overlaps
    p = len(sources)
    n = sources[0][0].n
    evals = [src.terms(float(th)) for src, th in sources]
    k = np.empty((p, p))
    for i in range(p):
        for j in range(p):
            si, sj = sources[i][0], sources[j][0]
            ci, cj = evals[i][0], evals[j][0]
            if si is sj:
                k[i, j] = float(np.sum(ci / cj))
                continue
            key = (id(sj), id(si))
            if key not in overlaps:
                overlaps[key] = (sj.q.T @ si.q) ** 2
            k[i, j] = float((1.0 / cj) @ overlaps[key] @ ci)
    zetas = np.array([2.0 * n - (s * s / jt if s else 0.0) for _, s, jt in evals])
    _check_identifiable(k, zetas, n)
    d = np.full(p, 2.0 * n) if known_theta else zetas
    return _crb_identity(k, d, n)


@dataclass
class CrbReport:
    crb_omega: np.ndarray | None
    crb_omega_known_theta: np.ndarray | None
    crb_gamma: np.ndarray | None
    kappa: np.ndarray
    zeta: np.ndarray
    identifiable: np.ndarray
    margin: np.ndarray
    fim_condition: float
    notes: list = field(default_factory=list)


def crb_report(omega: np.ndarray, models) -> CrbReport:
    """All bounds plus identifiability diagnostics.

    Non-identifiable configurations give ``None`` bounds instead of raising.
    """
    omega = np.asarray(omega, float)
    terms, n, k, zetas = _prepare(models)
    margin = _identifiability(k, zetas, n)
    ident = margin >= IDENT_REL_TOL * n * n
    np.fill_diagonal(ident, zetas > IDENT_REL_TOL * n)
    blocks = fim(omega, models)
    cond = float(np.linalg.cond(blocks.assembled()))
    if not ident.all():
        return CrbReport(None, None, None, k, zetas, ident, margin, cond,
                         ["non-identifiable"])
    c_i = _crb_identity(k, zetas, n)
    c_known = _crb_identity(k, np.full(len(zetas), 2.0 * n), n)
    gamma = np.linalg.inv(omega)
    big_g = np.kron(gamma.T, np.eye(len(zetas)))
    cg = big_g @ c_i @ big_g.T
    return CrbReport(_sandwich_omega(c_i, omega), _sandwich_omega(c_known, omega),
                     0.5 * (cg + cg.T), k, zetas, ident, margin, cond)
