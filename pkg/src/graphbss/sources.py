"""Graph moving-average sources, their covariance models, and mixing."""
from __future__ import annotations

import abc
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import yaml

from .graphs import AdjacencyMatrix, load_edge_list

NORMALIZED = "normalized"


class ModelError(ValueError):
    """Invalid source-model parameters."""


class DegenerateModelError(ModelError):
    """The GMA filter ``I + theta W`` is singular."""


@dataclass(frozen=True)
class InnovationLaw:
    """Standardized (mean 0, variance 1) innovation distribution.

    `kind` is one of ``gaussian``, ``student_t``, ``uniform``,
    ``exponential``; `df` is used only by ``student_t`` and must exceed 2.
    """

    kind: str = "gaussian"
    df: float | None = None

    KINDS = ("gaussian", "student_t", "uniform", "exponential")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ModelError(f"unknown innovation law {self.kind!r}")
        if self.kind == "student_t":
            if self.df is None or not self.df > 2:
                raise ModelError(
                    f"student_t needs df > 2 for finite variance, got {self.df}")

    @classmethod
    def parse(cls, text: str) -> InnovationLaw:
        """Parse short names such as ``gaussian``, ``t5``, ``uniform``."""
        t = text.strip().lower()
        if t in ("gaussian", "normal"):
            return cls("gaussian")
        if t in ("uniform", "exponential"):
            return cls(t)
        if t.startswith("student_t"):
            t = "t" + t[len("student_t"):].strip("()")
        if t.startswith("t") and t[1:]:
            return cls("student_t", float(t[1:]))
        raise ModelError(f"cannot parse innovation law {text!r}")

    def label(self) -> str:
        if self.kind == "student_t":
            return f"t{self.df:g}"
        return self.kind

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return draw_innovations(self, n, rng)


def draw_innovations(law: InnovationLaw, n: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Draw `n` i.i.d. innovations with zero mean and unit variance."""
    if n < 1:
        raise ModelError(f"n must be >= 1, got {n}")
    if law.kind == "gaussian":
        return rng.standard_normal(n)
    if law.kind == "student_t":
        df = law.df
        return rng.standard_t(df, n) * np.sqrt((df - 2.0) / df)
    if law.kind == "uniform":
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), n)
    return rng.exponential(1.0, n) - 1.0


def _filter_matrix(w: AdjacencyMatrix, theta: Sequence[float]) -> np.ndarray:
    a = np.eye(w.n)
    for lag, th in enumerate(theta, start=1):
        if th != 0:
            a = a + th * w.power_float(lag)
    return a


def normalized_sigma2(w: AdjacencyMatrix, theta) -> float:
    """Innovation variance making ``tr(C) = N`` for a GMA filter.

    `theta` may be a scalar (GMA(1)) or a sequence of coefficients.
    """
    thetas = np.atleast_1d(np.asarray(theta, dtype=float))
    a = _filter_matrix(w, thetas)
    return w.n / float(np.sum(a * a))


def normalized_sigma2_derivative(w: AdjacencyMatrix, theta: float) -> float:
    """d sigma^2(theta) / d theta for the GMA(1) normalization."""
    wf = w.data
    a = np.eye(w.n) + theta * wf
    t = float(np.sum(a * a))
    dt = float(np.trace(wf + wf.T + 2.0 * theta * wf @ wf.T))
    return -w.n * dt / t ** 2


def _check_invertible(w: AdjacencyMatrix, theta: float):
    sign, logdet = np.linalg.slogdet(np.eye(w.n) + theta * w.data)
    if sign == 0 or not np.isfinite(logdet):
        raise DegenerateModelError(f"I + theta W is singular at theta={theta}")


def gma1_covariance(w: AdjacencyMatrix, theta: float,
                    sigma2: float) -> np.ndarray:
    """Covariance ``sigma2 (I + theta W)(I + theta W)^T`` of a GMA(1) signal."""
    _check_invertible(w, theta)
    a = np.eye(w.n) + theta * w.data
    c = sigma2 * (a @ a.T)
    return 0.5 * (c + c.T)


class CovarianceModel(abc.ABC):
    """Source covariance ``C(theta)`` with parameter derivatives."""

    @property
    @abc.abstractmethod
    def param_count(self) -> int:
        ...

    @property
    @abc.abstractmethod
    def n(self) -> int:
        ...

    @abc.abstractmethod
    def covariance(self, theta) -> np.ndarray:
        ...

    @abc.abstractmethod
    def derivative(self, theta, m: int) -> np.ndarray:
        """Partial derivative of the covariance w.r.t. parameter `m`."""

    def derivatives(self, theta) -> list[np.ndarray]:
        return [self.derivative(theta, m) for m in range(self.param_count)]


class Gma1Normalized(CovarianceModel):
    """GMA(1) covariance with ``sigma^2(theta) = N / tr((I+theta W)(I+theta W)^T)``."""

    def __init__(self, w: AdjacencyMatrix):
        self.w = w

    @property
    def param_count(self):
        return 1

    @property
    def n(self):
        return self.w.n

    def covariance(self, theta):
        th = float(np.squeeze(theta))
        return gma1_covariance(self.w, th, normalized_sigma2(self.w, th))

    def derivative(self, theta, m=0):
        if m != 0:
            raise IndexError(m)
        return gma1_derivative(self.w, float(np.squeeze(theta)))


class Gma1Fixed(CovarianceModel):
    """GMA(1) covariance with a fixed innovation variance."""

    def __init__(self, w: AdjacencyMatrix, sigma2: float = 1.0):
        self.w = w
        self.sigma2 = float(sigma2)

    @property
    def param_count(self):
        return 1

    @property
    def n(self):
        return self.w.n

    def covariance(self, theta):
        return gma1_covariance(self.w, float(np.squeeze(theta)), self.sigma2)

    def derivative(self, theta, m=0):
        if m != 0:
            raise IndexError(m)
        return gma1_derivative(self.w, float(np.squeeze(theta)), self.sigma2)


class FixedCovariance(CovarianceModel):
    """Known covariance with no free parameters."""

    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)

    @property
    def param_count(self):
        return 0

    @property
    def n(self):
        return self.c.shape[0]

    def covariance(self, theta=None):
        return self.c

    def derivative(self, theta, m):
        raise IndexError("fixed covariance has no parameters")


def gma1_derivative(w: AdjacencyMatrix, theta: float,
                    sigma2: float | None = None) -> np.ndarray:
    """Derivative of the GMA(1) covariance with respect to theta.

    With ``sigma2=None`` the variance follows the trace normalization and
    its own theta-dependence contributes a second term; a fixed `sigma2`
    drops that term.
    """
    wf = w.data
    a = np.eye(w.n) + theta * wf
    inner = wf + wf.T + 2.0 * theta * (wf @ wf.T)
    if sigma2 is not None:
        return sigma2 * inner
    s2 = normalized_sigma2(w, theta)
    ds2 = normalized_sigma2_derivative(w, theta)
    d = s2 * inner + ds2 * (a @ a.T)
    return 0.5 * (d + d.T)


@dataclass
class GmaSpec:
    """One GMA(M) graph-signal source."""

    w: AdjacencyMatrix
    theta: tuple = (0.0,)
    sigma2: Union[float, str] = NORMALIZED
    innovation: InnovationLaw = field(default_factory=InnovationLaw)

    def __post_init__(self):
        self.theta = tuple(float(t) for t in np.atleast_1d(self.theta))
        if not self.theta:
            raise ModelError("GMA order must be >= 1")
        if isinstance(self.sigma2, str):
            if self.sigma2 != NORMALIZED:
                raise ModelError(f"sigma2 must be a number or {NORMALIZED!r}")
        elif not self.sigma2 > 0:
            raise ModelError(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def order(self) -> int:
        return len(self.theta)

    def variance(self) -> float:
        if self.sigma2 == NORMALIZED:
            return normalized_sigma2(self.w, self.theta)
        return float(self.sigma2)

    def covariance_model(self) -> CovarianceModel:
        if self.order != 1:
            raise ModelError("covariance models are provided for GMA(1) only")
        if self.sigma2 == NORMALIZED:
            return Gma1Normalized(self.w)
        return Gma1Fixed(self.w, self.sigma2)


def gma_generate(spec: GmaSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw ``z = sqrt(sigma2) (I + sum_l theta_l W^l) y``."""
    y = np.sqrt(spec.variance()) * draw_innovations(spec.innovation, spec.w.n, rng)
    z = y
    for lag, th in enumerate(spec.theta, start=1):
        if th != 0:
            z = z + th * (spec.w.power_float(lag) @ y)
    return z


@dataclass
class Scenario:
    """P independent GMA sources on N nodes mixed by a full-rank matrix."""

    specs: list
    omega: np.ndarray

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        p = len(self.specs)
        if p < 1:
            raise ModelError("scenario needs at least one source")
        if self.omega.shape != (p, p):
            raise ModelError(f"omega must be {p}x{p}, got {self.omega.shape}")
        if not np.linalg.cond(self.omega) < 1.0 / np.finfo(float).eps:
            raise ModelError("mixing matrix is singular")
        ns = {s.w.n for s in self.specs}
        if len(ns) != 1:
            raise ModelError(f"sources disagree on node count: {sorted(ns)}")

    @property
    def p(self) -> int:
        return len(self.specs)

    @property
    def n(self) -> int:
        return self.specs[0].w.n

    def to_dict(self) -> dict:
        sources = []
        for s in self.specs:
            sources.append({
                "theta": list(s.theta),
                "sigma2": s.sigma2,
                "innovation": s.innovation.label(),
                "graph": {"n": s.w.n, "edges": s.w.edges().tolist()},
            })
        return {"n": self.n, "omega": self.omega.tolist(), "sources": sources}

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> Scenario:
        specs = []
        cache = {}
        for s in d["sources"]:
            g = s["graph"]
            if "file" in g:
                path = Path(g["file"])
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                key = str(path)
                if key not in cache:
                    cache[key] = load_edge_list(path, g.get("n", d.get("n")))
                w = cache[key]
            else:
                key = repr(g["edges"])
                if key not in cache:
                    cache[key] = AdjacencyMatrix.from_edges(
                        g.get("n", d.get("n")), g["edges"])
                w = cache[key]
            specs.append(GmaSpec(
                w=w,
                theta=s.get("theta", [0.0]),
                sigma2=s.get("sigma2", NORMALIZED),
                innovation=InnovationLaw.parse(s.get("innovation", "gaussian")),
            ))
        omega = d.get("omega")
        if omega is None:
            omega = np.eye(len(specs))
        return cls(specs, omega)

    def save(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False,
                                             default_flow_style=None))

    @classmethod
    def load(cls, path) -> Scenario:
        path = Path(path)
        return cls.from_dict(yaml.safe_load(path.read_text()), path.parent)


def mix(scenario: Scenario, rng: np.random.Generator):
    """Generate sources and their mixture.

    Each source draws from its own child stream of `rng`, so adding or
    reordering sources does not change the others.

    Returns
    -------
    x : ndarray, shape (P, N)
        Observed mixture ``omega @ z``.
    z : ndarray, shape (P, N)
        Latent sources.
    """
    streams = rng.spawn(scenario.p)
    z = np.vstack([gma_generate(s, g) for s, g in zip(scenario.specs, streams)])
    x = scenario.omega @ z
    return x, z


def save_signals_csv(path, mat: np.ndarray) -> None:
    """Dump a (P, N) signal matrix as CSV, one row per signal."""
    np.savetxt(path, np.atleast_2d(mat), delimiter=",", fmt="%.17g")


def load_signals_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=","))
