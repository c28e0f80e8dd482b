"""Unmixing-matrix estimators for graph signals.

All estimators prewhiten the data and then search for an orthogonal
rotation ``U``; the unmixing estimate is ``U @ whitener``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .graphs import AdjacencyMatrix
from .jointdiag import joint_diagonalize, symmetric_orthogonalize, whiten
from .sources import gma1_covariance, normalized_sigma2

log = logging.getLogger(__name__)


class DegenerateGraphError(ValueError):
    """A graph power annihilates the data, so autocorrelation is undefined."""


class GraphSet:
    """Adjacency matrices with the highest power used for each.

    Parameters
    ----------
    entries : sequence of (AdjacencyMatrix, int) or AdjacencyMatrix
        Bare matrices default to a maximal power of 1.
    per_node : bool
        Passed to :func:`graph_autocorrelation`.
    """

    def __init__(self, entries, per_node: bool = True):
        self.per_node = per_node
        norm = []
        for e in entries:
            if isinstance(e, AdjacencyMatrix):
                w, k = e, 1
            else:
                w, k = e
            if int(k) != k or k < 1:
                raise ValueError(f"maximal power must be >= 1, got {k}")
            norm.append((w, int(k)))
        if not norm:
            raise ValueError("GraphSet needs at least one graph")
        self.entries = norm

    def __len__(self):
        return sum(k for _, k in self.entries)

    def __iter__(self):
        for w, kmax in self.entries:
            for k in range(1, kmax + 1):
                yield w, k

    def autocorrelations(self, x_white: np.ndarray) -> list[np.ndarray]:
        return [graph_autocorrelation(x_white, w.power_float(k), k, self.per_node)
                for w, k in self]


@dataclass
class SeparationResult:
    """Outcome of one estimator run.

    ``gamma_hat == u_hat @ whitener`` holds exactly.
    """

    gamma_hat: np.ndarray
    u_hat: np.ndarray
    whitener: np.ndarray
    converged: bool = True
    iterations: int = 0
    objective_trace: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def build(cls, u, whitener, **kw) -> SeparationResult:
        return cls(gamma_hat=u @ whitener, u_hat=u, whitener=whitener, **kw)


def _sym(a):
    return 0.5 * (a + a.T)


def graph_autocovariance(x_white: np.ndarray, w_k: np.ndarray, k: int) -> np.ndarray:
    """``X W^k X^T / (N - k)``, symmetrized."""
    n = x_white.shape[1]
    if not k < n:
        raise ValueError(f"power {k} must be smaller than N={n}")
    return _sym(x_white @ np.asarray(w_k, dtype=float) @ x_white.T) / (n - k)


def graph_autocorrelation(x_white: np.ndarray, w_k: np.ndarray, k: int,
                          per_node: bool = True) -> np.ndarray:
    """Scale-free graph autocorrelation.

    With ``per_node=False`` this is ``P X W^k X^T / ||W^k X^T||_F``. The
    default additionally divides by ``sqrt(N)``, so the entries stay O(1) as
    the graph grows, like the sample cumulants they are combined with in
    the composite objectives. The joint diagonalizer of graph matrices
    alone is unaffected by this common factor.

    Invariant to positive rescaling of the graph.
    """
    p, n = x_white.shape
    wx = x_white @ np.asarray(w_k, dtype=float)  # (W^k X^T)^T for symmetric W
    denom = np.linalg.norm(wx)
    if denom == 0:
        raise DegenerateGraphError(f"graph power {k} maps the data to zero")
    if per_node:
        denom *= np.sqrt(n)
    return p * _sym(wx @ x_white.T) / denom


def _diag_energy(u, mats) -> float:
    if len(mats) == 0:
        return 0.0
    m = np.asarray(mats)
    d = np.einsum("ja,mab,jb->mj", u, m, u)
    return float(np.sum(d ** 2))


def grade(x: np.ndarray, graphs: GraphSet, tol: float = 1e-10,
          max_sweeps: int = 200) -> SeparationResult:
    """Graph decorrelation: jointly diagonalize graph autocorrelations."""
    return graph_jade(x, graphs, lam=1.0, tol=tol, max_sweeps=max_sweeps)


def jade_cumulants(x_white: np.ndarray) -> list[np.ndarray]:
    """Fourth-order cumulant matrices ``C^{k,l}``, k, l = 1..P (row-major).

    Uses sample averages, so every matrix vanishes in expectation for
    Gaussian data.
    """
    p, n = x_white.shape
    q = np.einsum("ki,li,ai,bi->klab", x_white, x_white, x_white, x_white,
                  optimize=True) / n
    eye = np.eye(p)
    # E^{kl} + E^{lk} + delta_kl I
    q -= np.einsum("ka,lb->klab", eye, eye)
    q -= np.einsum("la,kb->klab", eye, eye)
    q -= np.einsum("kl,ab->klab", eye, eye)
    q = 0.5 * (q + q.transpose(1, 0, 2, 3))  # exact symmetry in (k, l)
    return [_sym(q[k, l]) for k in range(p) for l in range(p)]


def graph_jade(x: np.ndarray, graphs: GraphSet | None, lam: float = 0.8,
               tol: float = 1e-10, max_sweeps: int = 200) -> SeparationResult:
    """Joint diagonalization of graph autocorrelation and cumulant matrices.

    Maximizes ``lam * f_graph + (1 - lam) * f_jade`` by diagonalizing the
    union of ``sqrt(lam) S`` and ``sqrt(1 - lam) C``; each term is
    quadratic in its matrix, so the weights carry over exactly. Matrices
    with zero weight are left out, which makes ``lam=1`` identical to
    :func:`grade` and ``lam=0`` identical to :func:`jade`.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    x_white, whitener = whiten(x)
    s_mats = []
    if lam > 0:
        if graphs is None:
            raise ValueError("graph part requested but no graphs given")
        s_mats = graphs.autocorrelations(x_white)
    c_mats = jade_cumulants(x_white) if lam < 1 else []
    mats = []
    if lam > 0:
        mats += [np.sqrt(lam) * s for s in s_mats] if lam != 1 else s_mats
    if lam < 1:
        mats += [np.sqrt(1.0 - lam) * c for c in c_mats] if lam != 0 else c_mats
    jd = joint_diagonalize(mats, tol=tol, max_sweeps=max_sweeps)
    u = jd.u
    diag = {
        "graph_part": lam * _diag_energy(u, s_mats),
        "nongauss_part": (1.0 - lam) * _diag_energy(u, c_mats),
    }
    if not jd.converged:
        log.warning("joint diagonalization did not converge in %d sweeps", jd.sweeps)
    return SeparationResult.build(u, whitener, converged=jd.converged,
                                  iterations=jd.sweeps,
                                  objective_trace=jd.off_trace,
                                  diagnostics=diag)


def jade(x: np.ndarray, tol: float = 1e-10, max_sweeps: int = 200) -> SeparationResult:
    """JADE: joint diagonalization of the fourth-order cumulant matrices."""
    return graph_jade(x, None, lam=0.0, tol=tol, max_sweeps=max_sweeps)


@dataclass(frozen=True)
class Nonlinearity:
    """FastICA contrast ``G = G0 - E[G0(y)]`` with its derivatives."""

    G0: Callable
    g: Callable
    g_prime: Callable
    gauss_mean: float
    name: str = "custom"

    def G(self, x):
        return self.G0(x) - self.gauss_mean


def _log_cosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2.0 * x)) - np.log(2.0)


def gaussian_expectation(f: Callable, order: int = 200) -> float:
    """E[f(y)] for standard normal y by Gauss-Hermite quadrature."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(order)
    return float(np.sum(weights * f(nodes)) / np.sqrt(2.0 * np.pi))


def tanh_nonlinearity(order: int = 200) -> Nonlinearity:
    """The ``log cosh`` contrast (g = tanh)."""
    return Nonlinearity(
        G0=_log_cosh,
        g=np.tanh,
        g_prime=lambda x: 1.0 - np.tanh(x) ** 2,
        gauss_mean=gaussian_expectation(_log_cosh, order),
        name="tanh",
    )


def _sign_rows(b: np.ndarray, u: np.ndarray | None = None) -> np.ndarray:
    """Flip rows of `b` so they point along the rows of `u`, or, without
    `u`, so that each row's largest-magnitude entry is positive."""
    if u is None:
        idx = np.argmax(np.abs(b), axis=1)
        s = np.sign(b[np.arange(b.shape[0]), idx])
    else:
        s = np.sign(np.sum(b * u, axis=1))
    s[s == 0] = 1.0
    return b * s[:, None]


def graph_fastica_objective(u, x_white, s_mats, nonlin, lam) -> float:
    f1 = _diag_energy(u, s_mats)
    f2 = float(np.sum(np.mean(nonlin.G(u @ x_white), axis=1) ** 2))
    return lam * f1 + (1.0 - lam) * f2


def _fastica_run(u, x_white, s_arr, s_mats, nonlin, lam, tol, max_iter, rng,
                 max_restarts, sign_rule="align"):
    p, n = x_white.shape
    trace = [graph_fastica_objective(u, x_white, s_mats, nonlin, lam)]
    restarts = np.zeros(p, dtype=int)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        ref = u if sign_rule == "align" else None
        b = np.zeros((p, p))
        if lam > 0:
            su = np.einsum("mab,jb->mja", s_arr, u)
            q = np.einsum("mja,ja->mj", su, u)
            b += _sign_rows(2.0 * lam * np.einsum("mj,mja->ja", q, su), ref)
        if lam < 1:
            y = u @ x_white
            gmean = np.mean(nonlin.G(y), axis=1)
            fast = (nonlin.g(y) @ x_white.T / n
                    - np.mean(nonlin.g_prime(y), axis=1)[:, None] * u)
            b += _sign_rows((1.0 - lam) * gmean[:, None] * fast, ref)
        norms = np.linalg.norm(b, axis=1)
        bad = norms <= 1e-12 * max(norms.max(), 1e-300)
        if np.any(bad):
            restarts[bad] += 1
            if np.any(restarts > max_restarts):
                log.warning("graph_fastica: row restart budget exhausted")
                break
            b[bad] = rng.standard_normal((int(bad.sum()), p))
        u_new = symmetric_orthogonalize(b)
        change = float(np.max(1.0 - np.abs(np.sum(u_new * u, axis=1))))
        u = u_new
        trace.append(graph_fastica_objective(u, x_white, s_mats, nonlin, lam))
        if change < tol:
            converged = True
            break
    return u, converged, it, trace, int(restarts.sum())


def _default_starts(x_white, s_mats, lam):
    """Identity plus the rotations found by joint diagonalization of each part."""
    p = x_white.shape[0]
    starts = {}
    c_mats = jade_cumulants(x_white) if lam < 1 else []
    if lam > 0:
        starts["graph"] = joint_diagonalize(s_mats).u
    if lam < 1:
        starts["cumulant"] = joint_diagonalize(c_mats).u
    if 0 < lam < 1:
        w = 0.8
        starts["combined"] = joint_diagonalize(
            [np.sqrt(w) * m for m in s_mats]
            + [np.sqrt(1.0 - w) * c for c in c_mats]).u
    # last, so that it only wins by a clear margin: unlike the others this
    # start does not move with the data
    starts["identity"] = np.eye(p)
    return starts


def graph_fastica(x: np.ndarray, graphs: GraphSet | None,
                  nonlinearity: Nonlinearity | None = None, lam: float = 0.001,
                  tol: float = 1e-9, max_iter: int = 2000, init=None,
                  rng: np.random.Generator | None = None,
                  max_restarts: int = 5, sign_rule: str = "align") -> SeparationResult:
    """Fixed-point Graph FastICA.

    Each row ``u_j`` is replaced by the sum of the graph-decorrelation
    direction ``2 lam sum S u_j (u_j^T S u_j)`` and the squared-FastICA
    direction ``(1 - lam) mean G(u_j^T x) (mean x g(u_j^T x) - mean g'(u_j^T x) u_j)``.
    The two directions are sign-matched, summed and the new matrix is
    symmetrically orthogonalized.

    The iteration has many fixed points. Without `init` it is run from the
    joint diagonalizers of the graph matrices, of the cumulant matrices and
    of their 0.8/0.2 weighted union (whichever parts are active) and from
    the identity. The run reaching the largest composite objective wins;
    near-ties go to the earlier start.

    Each direction is sign-aligned with the current row before summing
    (``sign_rule="align"``). The alternative ``"max_entry"`` makes the
    largest-magnitude entry of each direction positive; it is discontinuous
    where two entries tie in magnitude and can then cycle.

    Parameters
    ----------
    lam : float
        Weight of the graph part; ``lam=0`` is squared symmetric FastICA.
    tol : float
        Convergence once ``max_j (1 - |u_j^new . u_j^old|) < tol``.
    init : ndarray, optional
        Single orthogonal starting matrix, replacing the multi-start.
    rng : Generator, optional
        Used only to restart rows whose update vanishes.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if sign_rule not in ("align", "max_entry"):
        raise ValueError(f"unknown sign rule {sign_rule!r}")
    nonlin = nonlinearity or tanh_nonlinearity()
    x_white, whitener = whiten(x)
    p, n = x_white.shape
    s_mats = []
    if lam > 0:
        if graphs is None:
            raise ValueError("graph part requested but no graphs given")
        s_mats = graphs.autocorrelations(x_white)
    s_arr = np.asarray(s_mats) if s_mats else np.zeros((0, p, p))
    rng = rng if rng is not None else np.random.default_rng(0)

    if init is None:
        starts = _default_starts(x_white, s_mats, lam)
    else:
        starts = {"given": symmetric_orthogonalize(np.asarray(init, float))}
    best = None
    total_it = 0
    for name, u0 in starts.items():
        run = _fastica_run(u0, x_white, s_arr, s_mats, nonlin, lam, tol,
                           max_iter, rng, max_restarts, sign_rule)
        total_it += run[2]
        # earlier starts win near-ties, keeping the choice stable under
        # round-off (and hence the estimator equivariant)
        if best is None or run[3][-1] > best[1][3][-1] + 1e-10 * abs(best[1][3][-1]):
            best = (name, run)
    name, (u, converged, it, trace, restarts) = best
    diag = {
        "graph_part": lam * _diag_energy(u, s_mats),
        "nongauss_part": (1.0 - lam) * float(
            np.sum(np.mean(nonlin.G(u @ x_white), axis=1) ** 2)),
        "restarts": restarts,
        "start": name,
        "total_iterations": total_it,
    }
    if not converged:
        log.warning("graph_fastica did not converge in %d iterations", max_iter)
    return SeparationResult.build(u, whitener, converged=converged,
                                  iterations=it, objective_trace=trace,
                                  diagnostics=diag)


def fastica_sq(x: np.ndarray, nonlinearity: Nonlinearity | None = None,
               **kw) -> SeparationResult:
    """Squared symmetric FastICA (Graph FastICA with ``lam = 0``)."""
    return graph_fastica(x, None, nonlinearity, lam=0.0, **kw)


# ---------------------------------------------------------------------------
# maximum likelihood for two Gaussian GMA(1) sources

DEFAULT_THETA_GRID = np.round(np.arange(0, 121) * 0.005, 10)
DEFAULT_PHI_GRID = np.arange(-360, 361) * (np.pi / 720)


class Gma1Likelihood:
    """Profile log-likelihood of normalized GMA(1) signals on a fixed graph.

    The graph eigendecomposition ``W = Q diag(ev) Q^T`` turns every
    covariance evaluation into O(N) work.
    """

    def __init__(self, w: AdjacencyMatrix, det_factor: float = 0.5):
        self.w = w
        self.n = w.n
        self.ev, self.q = np.linalg.eigh(w.data)
        self.det_factor = det_factor

    def _terms(self, thetas):
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        a = 1.0 + thetas[:, None] * self.ev[None, :]
        sigma2 = self.n / np.sum(a ** 2, axis=1)
        with np.errstate(divide="ignore"):
            logdet = self.n * np.log(sigma2) + 2.0 * np.sum(np.log(np.abs(a)), axis=1)
        singular = np.min(np.abs(a), axis=1) < 1e-12
        return a, sigma2, logdet, singular

    def project(self, z):
        return self.q.T @ np.asarray(z, dtype=float).T

    def loglik(self, z, thetas) -> np.ndarray:
        """``-0.5 z^T C^{-1} z - det_factor * log det C`` over a theta grid."""
        proj = self.project(z)
        a, sigma2, logdet, singular = self._terms(thetas)
        with np.errstate(divide="ignore"):
            quad = np.sum(proj[None, :] ** 2 / a ** 2, axis=1) / sigma2
        out = -0.5 * quad - self.det_factor * logdet
        out[singular] = -np.inf
        return out

    def inverse_form(self, theta, za, zb) -> float:
        """Bilinear form ``za^T C(theta)^{-1} zb``."""
        a, sigma2, _, singular = self._terms([theta])
        if singular[0]:
            raise ValueError(f"GMA(1) covariance singular at theta={theta}")
        return float(np.sum(self.project(za) * self.project(zb) / a[0] ** 2) / sigma2[0])


def gma1_loglik(z, theta: float, w: AdjacencyMatrix,
                det_factor: float = 0.5) -> float:
    """Dense-algebra GMA(1) log-likelihood with normalized variance."""
    c = gma1_covariance(w, theta, normalized_sigma2(w, theta))
    sign, logdet = np.linalg.slogdet(c)
    z = np.asarray(z, dtype=float)
    return float(-0.5 * z @ np.linalg.solve(c, z) - det_factor * logdet)


def rotation(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


def ml_two_sources(x: np.ndarray, w1: AdjacencyMatrix, w2: AdjacencyMatrix,
                   theta_grid: Sequence[float] | None = None,
                   phi_grid: Sequence[float] | None = None,
                   init: np.ndarray | None = None,
                   loglik_det_factor: float = 0.5,
                   likelihoods: tuple | None = None,
                   match_rows: bool = True) -> SeparationResult:
    """Grid-search ML unmixing for two normalized Gaussian GMA(1) sources.

    1. Initial rotation ``U0`` from GraDe on ``{W1, W2}``, or from `init`
       (an unmixing matrix, e.g. the true one for an oracle run).
    2. Per-source ``theta`` by grid argmax of the profile likelihood.
    3. Rotation angle ``phi`` by grid argmax of the summed likelihood of the
       rotated initial sources.
    4. ``gamma_hat = U(phi) U0 whitener``.

    With ``match_rows`` the two initial sources are first assigned to the
    graphs in the order that gives the larger profile likelihood.
    `likelihoods` may pass precomputed :class:`Gma1Likelihood` objects for
    ``(w1, w2)``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != 2:
        raise ValueError("ml_two_sources handles exactly two sources")
    tgrid = DEFAULT_THETA_GRID if theta_grid is None else np.asarray(theta_grid, float)
    pgrid = DEFAULT_PHI_GRID if phi_grid is None else np.asarray(phi_grid, float)
    if tgrid.size == 0 or pgrid.size == 0:
        raise ValueError("grids must be non-empty")
    if likelihoods is None:
        l1 = Gma1Likelihood(w1, loglik_det_factor)
        l2 = l1 if w2 is w1 else Gma1Likelihood(w2, loglik_det_factor)
    else:
        l1, l2 = likelihoods

    if init is None:
        graphs = GraphSet([w1] if w2 is w1 else [w1, w2])
        first = grade(x, graphs)
        whitener, u0 = first.whitener, first.u_hat
        x_white = whitener @ x
    else:
        x_white, whitener = whiten(x)
        u0 = symmetric_orthogonalize(np.asarray(init, float) @ np.linalg.inv(whitener))
    z0 = u0 @ x_white

    ll = [[l1.loglik(z0[r], tgrid) for r in range(2)],
          [l2.loglik(z0[r], tgrid) for r in range(2)]]
    swapped = False
    if match_rows and l1 is not l2:
        keep = ll[0][0].max() + ll[1][1].max()
        swap = ll[0][1].max() + ll[1][0].max()
        swapped = swap > keep
    if swapped:
        u0 = u0[::-1].copy()
        z0 = z0[::-1].copy()
        ll = [[ll[0][1], ll[0][0]], [ll[1][1], ll[1][0]]]
    i1 = int(np.argmax(ll[0][0]))
    i2 = int(np.argmax(ll[1][1]))
    th1, th2 = float(tgrid[i1]), float(tgrid[i2])
    on_edge = [i in (0, tgrid.size - 1) for i in (i1, i2)]

    za, zb = z0
    f1 = [l1.inverse_form(th1, za, za), l1.inverse_form(th1, za, zb),
          l1.inverse_form(th1, zb, zb)]
    f2 = [l2.inverse_form(th2, za, za), l2.inverse_form(th2, za, zb),
          l2.inverse_form(th2, zb, zb)]
    c, s = np.cos(pgrid), np.sin(pgrid)
    # source 1 = c za - s zb, source 2 = s za + c zb
    quad = (c * c * f1[0] - 2 * c * s * f1[1] + s * s * f1[2]
            + s * s * f2[0] + 2 * c * s * f2[1] + c * c * f2[2])
    k = int(np.argmin(quad))
    phi = float(pgrid[k])
    u = rotation(phi) @ u0
    diag = {
        "theta_hat": (th1, th2),
        "phi_hat": phi,
        "theta_on_boundary": on_edge,
        "rows_swapped": swapped,
    }
    if any(on_edge):
        log.debug("ML theta estimate on grid boundary: %s", (th1, th2))
    return SeparationResult.build(u, whitener, iterations=1, diagnostics=diag)
