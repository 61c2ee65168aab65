"""Gaussian expectations of one and two variables by quadrature.

Small variances use tensorized Gauss-Hermite on the Cholesky-whitened pair.
For large variances a sigmoidal integrand becomes a near-step on the scale of
the Gaussian, which Hermite rules resolve poorly, so a composite
Gauss-Legendre rule is used instead, with panel breakpoints placed both on the
Gaussian scale and around the activation's transition region.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

# |correlation| at or above this is treated as an exactly rank-one covariance
MAX_CORRELATION = 1.0 - 1e-12
# variances below this are treated as a point mass at zero
ZERO_VARIANCE = 1e-14

_TAIL = 13.0
_GAUSS_BREAKS = np.array([0.0, 1, 2, 3, 4, 5, 6, 7, 8, 10, _TAIL])
_GAUSS_BREAKS = np.concatenate([-_GAUSS_BREAKS[:0:-1], _GAUSS_BREAKS])
_FEATURE_BREAKS = np.array([0.0, 0.5, 1, 2, 4, 8, 16, 32, 64])
_FEATURE_BREAKS = np.concatenate([-_FEATURE_BREAKS[:0:-1], _FEATURE_BREAKS])
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class Quadrature:
    """Quadrature budget.

    hermite_nodes: Gauss-Hermite nodes per dimension.
    panel_nodes: Gauss-Legendre nodes per panel of the composite rule.
    hermite_max_var: largest variance handled by the Hermite rule.
    """

    hermite_nodes: int = 80
    panel_nodes: int = 10
    hermite_max_var: float = 0.25

    def doubled(self) -> "Quadrature":
        return replace(self, hermite_nodes=2 * self.hermite_nodes, panel_nodes=2 * self.panel_nodes)


DEFAULT_QUADRATURE = Quadrature()


@lru_cache(maxsize=16)
def _hermite(n: int):
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return x, w * _INV_SQRT_2PI


@lru_cache(maxsize=16)
def _legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def _composite_rule(features, n_panel: int, rows: int):
    """Nodes and weights (rows, M) for E[F(Z)], Z ~ N(0, 1).

    ``features`` is a list of (center, scale) pairs, each broadcastable to
    ``(rows,)``; breakpoints are laid out around each center at multiples of
    its scale, in addition to a fixed grid on the Gaussian scale.
    """
    parts = [np.broadcast_to(_GAUSS_BREAKS, (rows, _GAUSS_BREAKS.size))]
    for center, scale in features:
        center = np.broadcast_to(np.asarray(center, dtype=float), (rows,))
        scale = np.broadcast_to(np.asarray(scale, dtype=float), (rows,))
        parts.append(center[:, None] + scale[:, None] * _FEATURE_BREAKS[None, :])
    bp = np.sort(np.clip(np.concatenate(parts, axis=1), -_TAIL, _TAIL), axis=1)
    lo, hi = bp[:, :-1], bp[:, 1:]
    t, w = _legendre(n_panel)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, :, None] + half[:, :, None] * t[None, None, :]).reshape(rows, -1)
    weights = (half[:, :, None] * w[None, None, :]).reshape(rows, -1)
    weights = weights * _INV_SQRT_2PI * np.exp(-0.5 * nodes * nodes)
    return nodes, weights


def _check_variance(q: float, name: str) -> float:
    if not np.isfinite(q) or q < -ZERO_VARIANCE:
        raise ValueError(f"{name} must be a non-negative variance, got {q}")
    return max(q, 0.0)


def expect_1d(f, var: float, quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """E[f(u)] for u ~ N(0, var)."""
    var = _check_variance(float(var), "var")
    u, w = _rule_1d(var, quad)
    return float(np.dot(w, f(u)))


class PairRule:
    """Quadrature nodes for (u, v) ~ N(0, [[q_aa, q_ab], [q_ab, q_bb]]).

    One rule serves several expectations on the same covariance:
    ``E[f(u) g(v)] = sum_i w1_i f(u_i) sum_j w2_ij g(v_ij)``.
    """

    def __init__(self, q_aa: float, q_ab: float, q_bb: float,
                 quad: Quadrature = DEFAULT_QUADRATURE, psd_tol: float = 1e-9):
        q_aa = _check_variance(float(q_aa), "q_aa")
        q_bb = _check_variance(float(q_bb), "q_bb")
        q_ab = float(q_ab)
        if q_ab * q_ab > q_aa * q_bb * (1.0 + psd_tol) + ZERO_VARIANCE ** 2:
            raise ValueError(
                f"covariance is not PSD: q_ab^2={q_ab ** 2:.6g} > q_aa*q_bb={q_aa * q_bb:.6g}")
        self.cov = (q_aa, q_ab, q_bb)

        if q_aa < ZERO_VARIANCE:
            v, w = _rule_1d(q_bb, quad)
            self.u, self.w1 = np.zeros(1), np.ones(1)
            self.v, self.w2 = v[None, :], w[None, :]
            return
        if q_bb < ZERO_VARIANCE:
            self.u, self.w1 = _rule_1d(q_aa, quad)
            self.v, self.w2 = np.zeros((self.u.size, 1)), np.ones((self.u.size, 1))
            return

        a, b = np.sqrt(q_aa), np.sqrt(q_bb)
        rho = q_ab / (a * b)
        if abs(rho) >= MAX_CORRELATION:
            # rank-one covariance: v is a deterministic multiple of u
            self.u, self.w1 = _rule_1d(q_aa, quad)
            self.v = (np.sign(rho) * b / a * self.u)[:, None]
            self.w2 = np.ones((self.u.size, 1))
            return
        s = np.sqrt(1.0 - rho * rho)

        if max(q_aa, q_bb) <= quad.hermite_max_var:
            x, w = _hermite(quad.hermite_nodes)
            z1, w1 = x, w
            z2, w2 = np.broadcast_to(x, (x.size, x.size)), np.broadcast_to(w, (x.size, x.size))
        else:
            # u = a z1 varies on scale 1/a in z1; E[g(v) | z1] varies on the
            # scale where b*rho*z1 crosses the activation's transition
            spread = b * s
            outer = [(0.0, 1.0 / a)]
            if rho != 0.0:
                outer.append((0.0, max(1.0, spread) / (b * abs(rho))))
            z1, w1 = _composite_rule(outer, quad.panel_nodes, 1)
            z1, w1 = z1[0], w1[0]
            z2, w2 = _composite_rule([(-rho * z1 / s, 1.0 / spread)], quad.panel_nodes, z1.size)
        self.u, self.w1 = a * z1, w1
        self.v, self.w2 = b * (rho * z1[:, None] + s * z2), w2

    def inner(self, g) -> np.ndarray:
        """E[g(v) | u] at every outer node."""
        return np.sum(self.w2 * g(self.v), axis=1)

    def expect(self, f, g) -> float:
        return float(np.sum(self.w1 * f(self.u) * self.inner(g)))


def _rule_1d(var: float, quad: Quadrature):
    sd = np.sqrt(var)
    if var < ZERO_VARIANCE:
        return np.zeros(1), np.ones(1)
    if var <= quad.hermite_max_var:
        x, w = _hermite(quad.hermite_nodes)
        return sd * x, w
    z, w = _composite_rule([(0.0, 1.0 / sd)], quad.panel_nodes, 1)
    return sd * z[0], w[0]


def expect_2d(f, g, q_aa: float, q_ab: float, q_bb: float,
              quad: Quadrature = DEFAULT_QUADRATURE, psd_tol: float = 1e-9) -> float:
    """E[f(u) g(v)] for (u, v) ~ N(0, [[q_aa, q_ab], [q_ab, q_bb]])."""
    return PairRule(q_aa, q_ab, q_bb, quad, psd_tol).expect(f, g)
