"""Finite-width bias-free MLP autoencoders trained by full-batch gradient descent.

Layer recursion: ``h1 = W0 x / sqrt(n0)``, ``a_l = act(h_l)``,
``h_{l+1} = W_l a_l / sqrt(n_l)``; the output ``f(x) = h_L`` is linear.

Checkpoint layout (all integers unsigned 32-bit little-endian, floats
IEEE-754 binary64 little-endian)::

    offset 0   8 bytes   magic b"NTKAE001"
           8   u32       L, the number of weight matrices
          12   u32 x (L+1) layer dims n_0 .. n_L
               u32       activation kind, index into activations.KINDS
               f64       slope
               f64       intercept
               f64 ...   W_0, ..., W_{L-1}, each row-major (n_{l+1} x n_l)
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .activations import KINDS, Activation

log = logging.getLogger(__name__)

MAGIC = b"NTKAE001"


class TrainingDiverged(FloatingPointError):
    def __init__(self, iteration: int, loss: float):
        super().__init__(f"training diverged at iteration {iteration} (loss={loss})")
        self.iteration = iteration
        self.loss = loss


class CheckpointError(ValueError):
    pass


@dataclass(eq=False)
class NetworkParams:
    dims: tuple
    weights: list
    act: Activation

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.dims) < 2:
            raise ValueError("need at least an input and an output dimension")
        if self.dims[0] != self.dims[-1]:
            raise ValueError(f"autoencoder output dim {self.dims[-1]} != input dim {self.dims[0]}")
        if len(self.weights) != len(self.dims) - 1:
            raise ValueError("one weight matrix per layer transition required")
        for l, W in enumerate(self.weights):
            if W.shape != (self.dims[l + 1], self.dims[l]):
                raise ValueError(f"W{l} has shape {W.shape}, expected {(self.dims[l + 1], self.dims[l])}")

    @classmethod
    def init(cls, n0: int, widths, act: Activation, rng) -> "NetworkParams":
        """Standard-Gaussian weights; ``widths`` are the hidden sizes n_1..n_{L-1}."""
        rng = np.random.default_rng(rng)
        dims = (n0, *[int(w) for w in widths], n0)
        weights = [rng.standard_normal((dims[l + 1], dims[l])) for l in range(len(dims) - 1)]
        return cls(dims, weights, act)

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def n0(self) -> int:
        return self.dims[0]

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.dims, [W.copy() for W in self.weights], self.act)

    def __call__(self, x):
        return forward(self, x)[0]


@dataclass
class ForwardCache:
    pre: list   # h_1 .. h_{L-1}
    post: list  # a_0 = x, a_1 .. a_{L-1}


def forward(p: NetworkParams, x):
    """Output f(x) and the per-layer cache; ``x`` may be a vector or an (n0, m) batch."""
    a = np.asarray(x, dtype=np.float64)
    if a.shape[0] != p.n0:
        raise ValueError(f"input dimension {a.shape[0]} != n0 = {p.n0}")
    pre, post = [], [a]
    for l, W in enumerate(p.weights[:-1]):
        h = W @ a / np.sqrt(p.dims[l])
        a = p.act(h)
        pre.append(h)
        post.append(a)
    out = p.weights[-1] @ a / np.sqrt(p.dims[-2])
    return out, ForwardCache(pre, post)


def jacobian(p: NetworkParams, x, cache: ForwardCache | None = None) -> np.ndarray:
    """Input-output Jacobian at a single point via the layerwise product formula."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if cache is None:
        _, cache = forward(p, x)
    J = p.weights[0] / np.sqrt(p.dims[0])
    for l in range(1, p.depth):
        J = (p.weights[l] / np.sqrt(p.dims[l])) @ (p.act(cache.pre[l - 1], 1)[:, None] * J)
    return J


def loss(p: NetworkParams, X) -> float:
    """(1/2n) sum_i |f(x_i) - x_i|^2 over the columns of X."""
    X = np.asarray(X, dtype=np.float64)
    R = p(X) - X
    return 0.5 * float(np.sum(R * R)) / X.shape[1]


def loss_and_grad(p: NetworkParams, X):
    X = np.asarray(X, dtype=np.float64)
    out, cache = forward(p, X)
    R = out - X
    n = X.shape[1]
    value = 0.5 * float(np.sum(R * R)) / n
    grads = [None] * p.depth
    delta = R / n
    for l in range(p.depth - 1, -1, -1):
        scale = 1.0 / np.sqrt(p.dims[l])
        grads[l] = scale * (delta @ cache.post[l].T)
        if l > 0:
            delta = scale * (p.weights[l].T @ delta) * p.act(cache.pre[l - 1], 1)
    return value, grads


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1.0
    threshold: float = 1e-7
    max_iter: int = 500_000
    seed: int = 0
    log_every: int = 100

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if not self.threshold > 0:
            raise ValueError(f"loss threshold must be positive, got {self.threshold}")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")


@dataclass
class TrainResult:
    params: NetworkParams
    losses: list = field(default_factory=list)  # (iteration, loss) pairs
    converged: bool = False
    iterations: int = 0
    loss_increases: int = 0

    @property
    def final_loss(self) -> float:
        return self.losses[-1][1]


def train(p: NetworkParams, X, cfg: TrainConfig = TrainConfig()) -> TrainResult:
    """Full-batch gradient descent on a copy of ``p`` until loss < threshold."""
    X = np.asarray(getattr(X, "X", X), dtype=np.float64)
    p = p.copy()
    res = TrainResult(p)
    prev = np.inf
    for it in range(cfg.max_iter + 1):
        value, grads = loss_and_grad(p, X)
        if not np.isfinite(value):
            raise TrainingDiverged(it, value)
        if value > prev:
            res.loss_increases += 1
            if res.loss_increases == 1:
                log.warning("loss increased at step %d: %.6g -> %.6g", it, prev, value)
        prev = value
        if value < cfg.threshold or it == cfg.max_iter:
            res.losses.append((it, value))
            res.converged = value < cfg.threshold
            res.iterations = it
            break
        if it % cfg.log_every == 0:
            res.losses.append((it, value))
            log.debug("step %d loss %.6g", it, value)
        for W, G in zip(p.weights, grads):
            W -= cfg.lr * G
    if not res.converged:
        log.info("training stopped at max_iter=%d with loss %.3g", cfg.max_iter, res.final_loss)
    return res


def save_checkpoint(p: NetworkParams, path) -> None:
    header = MAGIC + struct.pack(f"<I{len(p.dims)}I", p.depth, *p.dims)
    header += struct.pack("<Idd", KINDS.index(p.act.kind), p.act.slope, p.act.intercept)
    with open(path, "wb") as fh:
        fh.write(header)
        for W in p.weights:
            fh.write(np.ascontiguousarray(W, dtype="<f8").tobytes())


def load_checkpoint(path) -> NetworkParams:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:8] != MAGIC:
        raise CheckpointError(f"bad magic {buf[:8]!r} at offset 0")
    off = 8

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(buf):
            raise CheckpointError(f"truncated checkpoint at offset {off}")
        vals = struct.unpack_from(fmt, buf, off)
        off += size
        return vals

    (L,) = take("<I")
    dims = take(f"<{L + 1}I")
    kind, slope, intercept = take("<Idd")
    if kind >= len(KINDS):
        raise CheckpointError(f"unknown activation index {kind} at offset {off - 20}")
    weights = []
    for l in range(L):
        count = dims[l + 1] * dims[l]
        if off + 8 * count > len(buf):
            raise CheckpointError(f"truncated checkpoint at offset {off}")
        W = np.frombuffer(buf, dtype="<f8", count=count, offset=off).reshape(dims[l + 1], dims[l])
        weights.append(W.astype(np.float64))
        off += 8 * count
    if off != len(buf):
        raise CheckpointError(f"{len(buf) - off} trailing bytes at offset {off}")
    return NetworkParams(dims, weights, Activation(KINDS[kind], slope, intercept))
