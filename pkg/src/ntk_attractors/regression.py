"""Infinite-width trained function and Jacobian from NTK kernel regression.

With targets equal to inputs, gradient flow to zero loss gives

    f(x) = (X - f0(X)) K^-1 k_x + f0(x)
    J(x) = (X - f0(X)) K^-1 dk_x/dx + J0(x)

where f0, J0 come from the network at initialization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import Activation
from .kernels import Dataset, KernelSystem
from .network import NetworkParams, forward, jacobian

NEAR_ONE_WINDOW = 1e-3
SURROGATE_WIDTH = 2 ** 14


class SpectralFailure(np.linalg.LinAlgError):
    pass


class InitSurrogate:
    """Realization of the initial network f0 used in the regression formulas.

    ``zero`` sets f0 = 0 and J0 = 0, the large-input-norm idealization.
    ``finite_width`` samples a wide network with the given width and seed.
    """

    def __init__(self, mode: str = "zero", network: NetworkParams | None = None):
        if mode not in ("zero", "finite_width"):
            raise ValueError(f"unknown surrogate mode {mode!r}")
        if (mode == "finite_width") != (network is not None):
            raise ValueError("finite_width mode needs a network; zero mode takes none")
        self.mode = mode
        self.network = network

    @classmethod
    def zero(cls) -> "InitSurrogate":
        return cls("zero")

    @classmethod
    def finite_width(cls, n0: int, act: Activation, width: int = SURROGATE_WIDTH, seed: int = 0,
                     depth: int = 2) -> "InitSurrogate":
        net = NetworkParams.init(n0, [width] * (depth - 1), act, np.random.default_rng(seed))
        return cls("finite_width", net)

    def f0(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.network is None:
            return np.zeros_like(x)
        return forward(self.network, x)[0]

    def j0(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).ravel()
        if self.network is None:
            return np.zeros((x.size, x.size))
        return jacobian(self.network, x)


def _coefficients(data: Dataset, ks: KernelSystem, init: InitSurrogate, drop_f0: bool = False):
    """(X - f0(X)) K^-1 as an (n0, n) matrix."""
    if ks.n != data.n:
        raise ValueError(f"kernel system has {ks.n} points, data has {data.n}")
    targets = data.X if drop_f0 else data.X - init.f0(data.X)
    return ks.solve(targets.T).T


def f_infinity(data: Dataset, ks: KernelSystem, init: InitSurrogate, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    kx = ks.kernel_vector(data, x, with_grad=False)
    return _coefficients(data, ks, init) @ kx + init.f0(x)


def jacobian_infinity(data: Dataset, ks: KernelSystem, init: InitSurrogate, x,
                      approx_large_r: bool = False) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    _, dk = ks.kernel_vector(data, x)
    return _coefficients(data, ks, init, drop_f0=approx_large_r) @ dk + init.j0(x)


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    largest_norm: float
    operator_norm: float
    count_near_one: int
    window: float

    def near_one_fraction(self) -> float:
        return self.count_near_one / self.eigenvalues.size


def spectrum(J, window: float = NEAR_ONE_WINDOW) -> SpectrumReport:
    J = np.asarray(J, dtype=np.float64)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {J.shape}")
    if not np.all(np.isfinite(J)):
        raise ValueError("matrix has non-finite entries")
    try:
        ev = np.linalg.eigvals(J)
        sv = np.linalg.svd(J, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise SpectralFailure(f"eigen/singular value computation did not converge: {exc}") from exc
    _check_conjugate_pairs(ev)
    ev = ev[np.lexsort((ev.imag, ev.real))]
    largest = float(np.max(np.abs(ev))) if ev.size else 0.0
    opnorm = float(sv[0]) if sv.size else 0.0
    return SpectrumReport(ev, largest, opnorm, int(np.sum(np.abs(ev - 1.0) < window)), window)


def _check_conjugate_pairs(ev, tol: float = 1e-8) -> None:
    a = np.sort_complex(ev)
    b = np.sort_complex(np.conj(ev))
    scale = max(1.0, float(np.max(np.abs(ev)))) if ev.size else 1.0
    if ev.size and np.max(np.abs(a - b)) > tol * scale:
        raise SpectralFailure("eigenvalues of a real matrix are not closed under conjugation")
