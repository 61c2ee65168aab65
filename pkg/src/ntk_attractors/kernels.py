"""Infinite-width covariance and neural tangent kernels of bias-free MLPs.

Conventions: weights have variance 1 and each layer divides by the square
root of its fan-in, so the first-layer covariance is ``x'x / n0``.  A depth-L
network has L weight matrices; depth 1 is the linear kernel.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .activations import ERF_SIGMOID, Activation
from .quadrature import DEFAULT_QUADRATURE, PairRule, Quadrature, expect_1d

log = logging.getLogger(__name__)

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)
MAX_CONDITION = 1e14


class IllConditionedKernel(np.linalg.LinAlgError):
    def __init__(self, condition: float, jitter: float):
        super().__init__(
            f"kernel Gram matrix is numerically singular (condition ~ {condition:.3g} "
            f"after jitter {jitter:g})")
        self.condition = condition
        self.jitter = jitter


# ---------------------------------------------------------------------------
# data


@dataclass(frozen=True, eq=False)
class Dataset:
    """Training inputs stored as the columns of ``X`` (n0 x n), all of norm ``r``."""

    X: np.ndarray
    r: float
    rho: np.ndarray = field(repr=False)

    @classmethod
    def from_columns(cls, X, rtol: float = 1e-10, check_rank: bool = True) -> "Dataset":
        X = np.array(X, dtype=np.float64, copy=True)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[1] == 0:
            raise ValueError(f"data matrix must be 2-D with at least one column, got shape {X.shape}")
        norms = np.linalg.norm(X, axis=0)
        r = float(np.mean(norms))
        if r == 0.0 or np.max(np.abs(norms - r)) > rtol * r:
            raise ValueError(f"columns must share a common nonzero norm; got norms {norms}")
        n0, n = X.shape
        if check_rank and n <= n0:
            rank = np.linalg.matrix_rank(X)
            if rank < n:
                raise ValueError(f"data matrix is rank deficient: rank {rank} < n = {n}")
        rho = np.clip(X.T @ X / r ** 2, -1.0, 1.0)
        np.fill_diagonal(rho, 1.0)
        X.setflags(write=False)
        rho.setflags(write=False)
        return cls(X, r, rho)

    @property
    def n0(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def column(self, i: int) -> np.ndarray:
        return self.X[:, i]


def random_dataset(n0: int, n: int, r: float, rng: np.random.Generator) -> Dataset:
    """n points drawn uniformly on the sphere of radius r in R^n0."""
    X = rng.standard_normal((n0, n))
    X *= r / np.linalg.norm(X, axis=0)
    return Dataset.from_columns(X)


# ---------------------------------------------------------------------------
# expectations


@dataclass(frozen=True)
class CovPair:
    q_aa: float
    q_ab: float
    q_bb: float
    layer: int = 1

    def __post_init__(self):
        if self.q_aa < 0 or self.q_bb < 0:
            raise ValueError(f"negative variance in {self}")

    @property
    def correlation(self) -> float:
        d = np.sqrt(self.q_aa * self.q_bb)
        return self.q_ab / d if d > 0 else 0.0


def t_operator(cov: CovPair, f_order: int, g_order: int, act: Activation,
               quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """E[act^(f_order)(u) act^(g_order)(v)] for (u, v) ~ N(0, cov)."""
    if act.is_linear:
        return _linear_t(cov.q_ab, f_order, g_order, act)
    rule = PairRule(cov.q_aa, cov.q_ab, cov.q_bb, quad)
    return rule.expect(lambda u: act(u, f_order), lambda v: act(v, g_order))


def _linear_t(q_ab: float, f_order: int, g_order: int, act: Activation) -> float:
    a, b = act.slope, act.intercept
    if f_order >= 2 or g_order >= 2:
        return 0.0
    moments = {(0, 0): a * a * q_ab + b * b, (0, 1): a * b, (1, 0): a * b, (1, 1): a * a}
    return moments[(f_order, g_order)]


def _self_moment(act: Activation, q: float, quad: Quadrature) -> float:
    """E[act(u)^2], u ~ N(0, q)."""
    if act.is_linear:
        return act.slope ** 2 * q + act.intercept ** 2
    return expect_1d(lambda u: act(u) ** 2, q, quad)


# ---------------------------------------------------------------------------
# recursion


@dataclass
class NTKTrace:
    """Per-layer quantities; index 0 is layer 1.

    ``sigma_dot[0]`` is None since the first layer has no derivative kernel.
    """

    covs: list
    sigma_dot: list
    theta: list
    grad: np.ndarray | None = None

    @property
    def value(self) -> float:
        return self.theta[-1]


def _check_pair(xh, x):
    xh = np.asarray(xh, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64).ravel()
    if xh.shape != x.shape or x.size == 0:
        raise ValueError(f"inputs must be nonempty vectors of equal dimension, got {xh.shape} and {x.shape}")
    return xh, x


def ntk_recursion(xh, x, L: int, act: Activation, quad: Quadrature = DEFAULT_QUADRATURE,
                  with_grad: bool = False) -> NTKTrace:
    """Covariance, derivative-covariance and NTK recursions for Theta^(L)(xh, x).

    With ``with_grad`` the gradient of Theta^(L) in its second argument is
    carried forward layer by layer using Price's theorem:
    d E[f(u)g(v)] / d q_uv = E[f'(u)g'(v)] and d/d q_vv = E[f(u)g''(v)] / 2.
    """
    if L < 1:
        raise ValueError(f"depth must be >= 1, got {L}")
    xh, x = _check_pair(xh, x)
    n0 = x.size
    q_aa, q_ab, q_bb = xh @ xh / n0, xh @ x / n0, x @ x / n0
    theta = q_ab
    covs, sigma_dot, thetas = [CovPair(q_aa, q_ab, q_bb, 1)], [None], [theta]
    if with_grad:
        d_ab = xh / n0
        d_bb = 2.0 * x / n0
        d_theta = xh / n0

    for layer in range(2, L + 1):
        m = _layer_moments(act, q_aa, q_ab, q_bb, quad, with_grad)
        if with_grad:
            d_sdot = m["t22"] * d_ab + 0.5 * m["t13"] * d_bb
            d_ab_next = m["t11"] * d_ab + 0.5 * m["t02"] * d_bb
            d_theta = d_theta * m["t11"] + theta * d_sdot + d_ab_next
            d_bb = m["dbb"] * d_bb
            d_ab = d_ab_next
        theta = theta * m["t11"] + m["t00"]
        q_aa, q_ab, q_bb = m["aa"], m["t00"], m["bb"]
        covs.append(CovPair(q_aa, q_ab, q_bb, layer))
        sigma_dot.append(m["t11"])
        thetas.append(theta)

    return NTKTrace(covs, sigma_dot, thetas, d_theta if with_grad else None)


def _layer_moments(act: Activation, q_aa, q_ab, q_bb, quad: Quadrature, with_grad: bool) -> dict:
    m = {"aa": _self_moment(act, q_aa, quad), "bb": _self_moment(act, q_bb, quad)}
    if act.is_linear:
        m["t00"] = _linear_t(q_ab, 0, 0, act)
        m["t11"] = act.slope ** 2
        if with_grad:
            m.update(t22=0.0, t13=0.0, t02=0.0, dbb=act.slope ** 2)
        return m

    rule = PairRule(q_aa, q_ab, q_bb, quad)
    g_orders = (0, 1, 2, 3) if with_grad else (0, 1)
    inner = {k: rule.inner(lambda v, k=k: act(v, k)) for k in g_orders}
    f_vals = {k: act(rule.u, k) for k in (0, 1, 2)}

    def pair(fo, go):
        return float(np.sum(rule.w1 * f_vals[fo] * inner[go]))

    m["t00"] = pair(0, 0)
    m["t11"] = pair(1, 1)
    if with_grad:
        m["t22"] = pair(2, 2)
        m["t13"] = pair(1, 3)
        m["t02"] = pair(0, 2)
        m["dbb"] = expect_1d(lambda v: act(v, 1) ** 2 + act(v) * act(v, 2), q_bb, quad)
    return m


# ---------------------------------------------------------------------------
# closed form for the two-layer erf-scaled sigmoid network


def _erf_ntk_from_products(s, nh, nx, n0):
    """Two-layer erf-sigmoid NTK from inner products s = xh'x, nh = |xh|^2, nx = |x|^2."""
    p = nx + 2.0 * n0
    q = nh + 2.0 * n0
    det = p * q - s * s
    if np.any(det <= 0):
        raise ValueError("degenerate input pair: (2 n0 + |x|^2)(2 n0 + |xh|^2) - (xh'x)^2 <= 0")
    arg = np.clip(s / np.sqrt(p * q), -1.0, 1.0)
    return s / (2 * np.pi * np.sqrt(det)) + np.arcsin(arg) / (2 * np.pi) + 0.25


def closed_form_ntk_2layer(xh, x, n0: int | None = None) -> float:
    """Theta^(2)(xh, x) for the sigmoid approximated by 0.5 * erf(x / 2) + 0.5."""
    xh, x = _check_pair(xh, x)
    n0 = x.size if n0 is None else n0
    return float(_erf_ntk_from_products(xh @ x, xh @ xh, x @ x, n0))


def gradient_components(xh, x, n0: int | None = None):
    """The two parts of d Theta^(2)(xh, x) / dx for the erf-sigmoid network.

    The first comes from the arcsin (activation covariance) term, the second
    from the first-layer covariance times the derivative covariance.
    """
    xh, x = _check_pair(xh, x)
    n0 = x.size if n0 is None else n0
    s, nh, nx = xh @ x, xh @ xh, x @ x
    p, q = nx + 2.0 * n0, nh + 2.0 * n0
    pq = p * q
    a = np.clip(s / np.sqrt(pq), -1.0, 1.0)
    g1 = (xh * pq - x * (q * s)) / (2 * np.pi * np.sqrt(1.0 - a * a) * pq ** 1.5)
    det = pq - s * s
    g2 = (xh * det - s * (q * x - s * xh)) / (2 * np.pi * det ** 1.5)
    return g1, g2


def ntk_gradient(xh, x, mode: str = "closed_form", act: Activation = ERF_SIGMOID,
                 n0: int | None = None, quad: Quadrature = DEFAULT_QUADRATURE) -> np.ndarray:
    """d Theta^(2)(xh, x) / dx.

    ``closed_form`` assumes the erf-scaled sigmoid; ``generic`` evaluates the
    four Gaussian expectations of ``act``'s derivatives by quadrature.
    """
    xh, x = _check_pair(xh, x)
    n0 = x.size if n0 is None else n0
    if mode == "closed_form":
        if act.kind != "erf_scaled_sigmoid":
            raise ValueError("closed_form gradient requires the erf_scaled_sigmoid activation")
        g1, g2 = gradient_components(xh, x, n0)
        return g1 + g2
    if mode != "generic":
        raise ValueError(f"unknown mode {mode!r}")

    s = xh @ x
    cov = CovPair(xh @ xh / n0, s / n0, x @ x / n0)
    t = lambda i, j: t_operator(cov, i, j, act, quad)  # noqa: E731
    return ((s / n0 ** 2) * t(2, 2) * xh + (2.0 / n0) * t(1, 1) * xh
            + (s / n0 ** 2) * t(1, 3) * x + (1.0 / n0) * t(0, 2) * x)


# ---------------------------------------------------------------------------
# Gram matrix and kernel vector


@dataclass(eq=False)
class KernelSystem:
    """Factorized NTK Gram matrix of a training set."""

    K: np.ndarray
    depth: int
    act: Activation
    jitter: float
    condition: float
    _factor: tuple = field(repr=False)
    quad: Quadrature = DEFAULT_QUADRATURE
    closed_form: bool = True

    @classmethod
    def from_gram(cls, K, depth: int, act: Activation, quad: Quadrature = DEFAULT_QUADRATURE,
                  closed_form: bool = True) -> "KernelSystem":
        K = np.asarray(K, dtype=np.float64)
        if not np.allclose(K, K.T, rtol=0, atol=1e-12 * max(1.0, np.abs(K).max())):
            raise ValueError("Gram matrix is not symmetric")
        K = 0.5 * (K + K.T)
        condition = np.inf
        for jitter in JITTER_LADDER:
            Kj = K + jitter * np.eye(K.shape[0])
            ev = np.linalg.eigvalsh(Kj)
            condition = ev[-1] / ev[0] if ev[0] > 0 else np.inf
            if condition > MAX_CONDITION:
                continue
            try:
                factor = cho_factor(Kj, lower=True)
            except np.linalg.LinAlgError:
                continue
            if jitter > 0:
                log.info("Gram matrix needed jitter %g (condition %.3g)", jitter, condition)
            return cls(K, depth, act, jitter, condition, factor, quad, closed_form)
        raise IllConditionedKernel(condition, JITTER_LADDER[-1])

    @property
    def n(self) -> int:
        return self.K.shape[0]

    def kernel_vector(self, data: "Dataset", x, with_grad: bool = True):
        return kernel_vector(data, x, self.depth, self.act, self.quad, self.closed_form, with_grad)

    def solve(self, B) -> np.ndarray:
        return cho_solve(self._factor, np.asarray(B, dtype=np.float64))


def _uses_closed_form(L: int, act: Activation, closed_form: bool) -> bool:
    return closed_form and L == 2 and act.kind == "erf_scaled_sigmoid"


def gram_matrix(data: Dataset, L: int, act: Activation, quad: Quadrature = DEFAULT_QUADRATURE,
                closed_form: bool = True) -> np.ndarray:
    X = data.X
    if _uses_closed_form(L, act, closed_form):
        G = X.T @ X
        d = np.diag(G)
        return _erf_ntk_from_products(G, d[:, None], d[None, :], data.n0)
    n = data.n
    K = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            K[i, j] = K[j, i] = ntk_recursion(X[:, i], X[:, j], L, act, quad).value
    return K


def kernel_system(data: Dataset, L: int, act: Activation, quad: Quadrature = DEFAULT_QUADRATURE,
                  closed_form: bool = True) -> KernelSystem:
    return KernelSystem.from_gram(gram_matrix(data, L, act, quad, closed_form), L, act, quad, closed_form)


def kernel_vector(data: Dataset, x, L: int, act: Activation, quad: Quadrature = DEFAULT_QUADRATURE,
                  closed_form: bool = True, with_grad: bool = True):
    """k_x (n,) and, optionally, its gradient d k_x / dx (n x n0; row i is d Theta(x_i, x) / dx)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != data.n0:
        raise ValueError(f"query has dimension {x.size}, data has {data.n0}")
    X = data.X
    if _uses_closed_form(L, act, closed_form):
        kx = _erf_ntk_from_products(X.T @ x, np.sum(X * X, axis=0), x @ x, data.n0)
        if not with_grad:
            return kx
        grad = np.stack([sum(gradient_components(X[:, i], x, data.n0)) for i in range(data.n)])
        return kx, grad
    traces = [ntk_recursion(X[:, i], x, L, act, quad, with_grad=with_grad) for i in range(data.n)]
    kx = np.array([t.value for t in traces])
    if not with_grad:
        return kx
    return kx, np.stack([t.grad for t in traces])


def gram_and_kvec(data: Dataset, x, L: int, act: Activation, quad: Quadrature = DEFAULT_QUADRATURE,
                  closed_form: bool = True):
    """(KernelSystem, k_x, d k_x / dx) for a query point x."""
    ks = kernel_system(data, L, act, quad, closed_form)
    kx, dk = kernel_vector(data, x, L, act, quad, closed_form)
    return ks, kx, dk


def erf_pair_expectations(q_aa: float, q_ab: float, q_bb: float):
    """Known Gaussian expectations for erf: (E[erf(u)erf(v)], E[erf'(u)erf'(v)])."""
    t00 = 2.0 / np.pi * np.arcsin(np.clip(2.0 * q_ab / np.sqrt((1 + 2 * q_aa) * (1 + 2 * q_bb)), -1, 1))
    t11 = 4.0 / np.pi / np.sqrt((1 + 2 * q_aa) * (1 + 2 * q_bb) - 4 * q_ab ** 2)
    return float(t00), float(t11)
