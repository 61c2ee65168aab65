"""Seeded experiment grids producing plot-ready tables.

Each experiment expands its configuration into cells (one per grid point) and
runs ``repetitions`` independent tasks per cell.  Task (cell c, repetition k)
draws all of its randomness from ``derive_seed(seed, experiment, c, k)``, so
results do not depend on scheduling or on the number of workers.  Rows are
merged in (cell, repetition) order.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import theory
from .activations import ERF_SIGMOID, KINDS, Activation
from .attractor import DEFAULT_MAX_ITER, DEFAULT_TOL, basin_probe
from .idx import read_idx
from .kernels import Dataset, kernel_system, random_dataset
from .network import NetworkParams, TrainConfig, jacobian, train
from .regression import InitSurrogate, jacobian_infinity, spectrum
from .seeding import derive_rng, derive_seed

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EXPERIMENTS = ("depth_single", "linear_hist", "radius_curve", "basin_curve", "mnist_basin",
               "activation_compare", "verify_all")


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "radius_curve"
    n0: int = 0            # 0, () and "" select the experiment's default
    n: int = 0
    r_grid: tuple = ()
    width_grid: tuple = ()
    depth: int = 2
    depth_grid: tuple = (2, 3, 4)
    n_grid: tuple = (2, 5, 8)
    activation: str = "sigmoid"
    activations: tuple = ("sigmoid", "erf", "tanh")
    sigma_grid: tuple = (0.0, 0.05, 0.1, 0.2)   # noise std as a fraction of r
    seed: int = 0
    repetitions: int = 100
    basin_samples: int = 100
    basin_max_iter: int = DEFAULT_MAX_ITER
    basin_tol: float = DEFAULT_TOL
    lr: float = 1.0
    threshold: float = 1e-7
    max_iter: int = 500_000
    train: bool = True
    ntk_kernel: str = "erf_sigmoid"   # or "exact"
    window: float = 1e-3
    mnist_images: str = ""
    mnist_count: int = 20
    mnist_offset: int = 0
    workers: int = 1
    out: str = ""
    format: str = "csv"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"unknown id {self.experiment!r}; choose from {EXPERIMENTS}")
        defaults = _DEFAULTS.get(self.experiment, _DEFAULTS["radius_curve"])
        for name in ("n0", "n", "r_grid", "width_grid"):
            if not getattr(self, name):
                value = defaults[name]
                object.__setattr__(self, name, value(self) if callable(value) else value)
        for name in ("r_grid", "width_grid", "depth_grid", "n_grid", "activations", "sigma_grid"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(name, "grid must be non-empty")
        if self.repetitions < 1:
            raise ConfigError("repetitions", "must be >= 1")
        if self.format not in ("csv", "json"):
            raise ConfigError("format", f"must be csv or json, got {self.format!r}")
        if self.activation not in KINDS:
            raise ConfigError("activation", f"unknown activation {self.activation!r}")
        for a in self.activations:
            if a not in KINDS:
                raise ConfigError("activations", f"unknown activation {a!r}")
        if self.ntk_kernel not in ("erf_sigmoid", "exact"):
            raise ConfigError("ntk_kernel", "must be erf_sigmoid or exact")
        if any(r <= 0 for r in self.r_grid):
            raise ConfigError("r_grid", "radii must be positive")
        if any(s < 0 for s in self.sigma_grid):
            raise ConfigError("sigma_grid", "noise radii must be non-negative")
        if self.n0 < 1 or self.n < 1:
            raise ConfigError("n0" if self.n0 < 1 else "n", "must be positive")
        if self.experiment == "mnist_basin" and not self.mnist_images:
            raise ConfigError("mnist_images", "path to an IDX image file is required")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")

    @property
    def train_config(self) -> TrainConfig:
        return TrainConfig(lr=self.lr, threshold=self.threshold, max_iter=self.max_iter)

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        """Build from string values, e.g. a parsed key=value file."""
        types = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in types:
                raise ConfigError(key, "unknown configuration key")
            default = types[key].default
            try:
                kwargs[key] = _coerce(raw, default, _ELEMENT_TYPES.get(key))
            except ValueError as exc:
                raise ConfigError(key, str(exc)) from None
        return cls(**kwargs)


_RADIUS_GRID = (1.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0)
_DEFAULTS = {
    # sqrt(n0) is the typical norm of a Gaussian sample
    "depth_single": {"n0": 32, "n": 1, "r_grid": lambda c: (float(np.sqrt(c.n0 or 32)),),
                     "width_grid": (1000,)},
    "linear_hist": {"n0": 10, "n": 5, "r_grid": (1.0,), "width_grid": (1000,)},
    "radius_curve": {"n0": 32, "n": 20, "r_grid": _RADIUS_GRID, "width_grid": (10_000,)},
    "activation_compare": {"n0": 32, "n": 20, "r_grid": _RADIUS_GRID, "width_grid": (10_000,)},
    "basin_curve": {"n0": 32, "n": 5, "r_grid": (2.0, 20.0), "width_grid": (10_000,)},
    "mnist_basin": {"n0": 784, "n": 20, "r_grid": (100.0, 1000.0), "width_grid": (10_000,)},
}
_ELEMENT_TYPES = {"r_grid": float, "width_grid": int, "depth_grid": int, "n_grid": int,
                  "activations": str, "sigma_grid": float}


def _coerce(raw, default, element_type=None):
    if not isinstance(raw, str):
        return tuple(raw) if isinstance(default, tuple) else raw
    raw = raw.strip()
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(default, tuple):
        items = [s.strip() for s in raw.split(",") if s.strip()]
        kind = element_type or (type(default[0]) if default else str)
        return tuple(_scalar(s, kind) for s in items)
    return _scalar(raw, type(default))


def _scalar(s: str, kind):
    if kind is int:
        return int(float(s)) if "e" in s.lower() else int(s)
    if kind is float:
        return float(s)
    return s


def parse_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", f"expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


# ---------------------------------------------------------------------------
# shared pieces


def _act(kind: str) -> Activation:
    return Activation(kind)


def _largest_norm(J) -> float:
    return spectrum(J).largest_norm


def _ntk_prediction(data: Dataset, act: Activation, cfg: ExperimentConfig, depth: int,
                    init: InitSurrogate | None = None) -> float:
    """max_i of the largest eigenvalue norm of J_inf(x_i)."""
    if cfg.ntk_kernel == "erf_sigmoid" and act.kind == "sigmoid" and depth == 2:
        act = ERF_SIGMOID
    ks = kernel_system(data, depth, act)
    init = InitSurrogate.zero() if init is None else init
    return max(_largest_norm(jacobian_infinity(data, ks, init, data.X[:, i])) for i in range(data.n))


def _train(data: Dataset, width: int, depth: int, act: Activation, cfg: ExperimentConfig, rng):
    net = NetworkParams.init(data.n0, [width] * (depth - 1), act, rng)
    return net, train(net, data.X, cfg.train_config)


def _train_fields(res) -> dict:
    return {"final_loss": res.final_loss, "iterations": res.iterations, "filtered": not res.converged}


# ---------------------------------------------------------------------------
# experiments; each task returns a list of row dicts


def _depth_single(cfg, cell, rng):
    L, width, r = cell
    x1 = rng.standard_normal(cfg.n0)
    x1 *= r / np.linalg.norm(x1)
    data = Dataset.from_columns(x1[:, None])
    act = _act(cfg.activation)
    net, res = _train(data, width, L, act, cfg, rng)
    lam0 = _largest_norm(jacobian(net, x1))
    lam_tr = _largest_norm(jacobian(res.params, x1))
    lam_ntk = _ntk_prediction(data, act, dataclasses.replace(cfg, ntk_kernel="exact"), L,
                              InitSurrogate("finite_width", net))
    return [{"depth": L, "width": width, "r": r, "lam_init": lam0, "lam_trained": lam_tr,
             "lam_ntk": lam_ntk, "diff_trained": abs(lam0 - lam_tr), "diff_ntk": abs(lam0 - lam_ntk),
             **_train_fields(res)}]


def _linear_hist(cfg, cell, rng):
    n, width = cell
    r = cfg.r_grid[0]
    data = random_dataset(cfg.n0, n, r, rng)
    act = _act(cfg.activation)
    net, res = _train(data, width, 2, act, cfg, rng)
    rep = spectrum(jacobian(res.params, data.X[:, 0]), cfg.window)
    ks = kernel_system(data, 2, act)
    rep_ntk = spectrum(jacobian_infinity(data, ks, InitSurrogate("finite_width", net), data.X[:, 0]), cfg.window)
    norms = ";".join(f"{v:.6g}" for v in np.sort(np.abs(rep.eigenvalues))[::-1])
    return [{"n": n, "width": width, "r": r, "near_one": rep.count_near_one,
             "near_one_fraction": rep.near_one_fraction(), "near_one_ntk": rep_ntk.count_near_one,
             "predicted": n - 1, "largest_norm": rep.largest_norm, "eig_norms": norms,
             **_train_fields(res)}]


def _radius_cell(cfg, act_kind, r, width, rng):
    data = random_dataset(cfg.n0, cfg.n, r, rng)
    act = _act(act_kind)
    row = {"activation": act_kind, "r": r, "width": width,
           "lam_ntk": _ntk_prediction(data, act, cfg, cfg.depth)}
    if cfg.train:
        _, res = _train(data, width, cfg.depth, act, cfg, rng)
        row["lam_trained"] = max(_largest_norm(jacobian(res.params, data.X[:, i])) for i in range(data.n))
        row.update(_train_fields(res))
    else:
        row.update(lam_trained=float("nan"), final_loss=float("nan"), iterations=0, filtered=False)
    return [row]


def _radius_curve(cfg, cell, rng):
    r, width = cell
    return _radius_cell(cfg, cfg.activation, r, width, rng)


def _activation_compare(cfg, cell, rng):
    act_kind, r, width = cell
    return _radius_cell(cfg, act_kind, r, width, rng)


def _basin_rows(cfg, data, width, rng, base):
    act = _act(cfg.activation)
    _, res = _train(data, width, cfg.depth, act, cfg, rng)
    probe_seed = int(rng.integers(2 ** 63))
    rows = []
    for rel in cfg.sigma_grid:
        rep = basin_probe(res.params, data.X, rel * data.r, cfg.basin_samples, probe_seed,
                          cfg.basin_max_iter, cfg.basin_tol)
        rows.append({**base, "sigma_rel": rel, "sigma": rel * data.r, "success_rate": rep.success_rate,
                     "samples": rep.samples, **_train_fields(res)})
    return rows


def _basin_curve(cfg, cell, rng):
    r, width = cell
    data = random_dataset(cfg.n0, cfg.n, r, rng)
    return _basin_rows(cfg, data, width, rng, {"r": r, "width": width})


def _mnist_basin(cfg, cell, rng):
    r, width = cell
    batch = read_idx(cfg.mnist_images, r, cfg.mnist_count, cfg.mnist_offset)
    data = Dataset.from_columns(batch.images, rtol=1e-8)
    return _basin_rows(cfg, data, width, rng, {"r": r, "width": width, "images": batch.count})


_EXPERIMENTS = {
    "depth_single": (_depth_single, lambda c: product(c.depth_grid, c.width_grid, c.r_grid),
                     ["depth", "width", "r", "lam_init", "lam_trained", "lam_ntk", "diff_trained",
                      "diff_ntk"]),
    "linear_hist": (_linear_hist, lambda c: product(c.n_grid, c.width_grid),
                    ["n", "width", "r", "near_one", "near_one_fraction", "near_one_ntk", "predicted",
                     "largest_norm", "eig_norms"]),
    "radius_curve": (_radius_curve, lambda c: product(c.r_grid, c.width_grid),
                     ["activation", "r", "width", "lam_ntk", "lam_trained"]),
    "activation_compare": (_activation_compare, lambda c: product(c.activations, c.r_grid, c.width_grid),
                           ["activation", "r", "width", "lam_ntk", "lam_trained"]),
    "basin_curve": (_basin_curve, lambda c: product(c.r_grid, c.width_grid),
                    ["r", "width", "sigma_rel", "sigma", "success_rate", "samples"]),
    "mnist_basin": (_mnist_basin, lambda c: product(c.r_grid, c.width_grid),
                    ["r", "width", "images", "sigma_rel", "sigma", "success_rate", "samples"]),
}
_TRAIN_COLUMNS = ["final_loss", "iterations", "filtered"]


def columns(experiment: str) -> list:
    if experiment == "verify_all":
        return ["experiment", "cell", "rep", "seed", "name", "observed", "predicted", "tolerance",
                "passed", "hard", "note"]
    return ["experiment", "cell", "rep", "seed"] + _EXPERIMENTS[experiment][2] + _TRAIN_COLUMNS


def _run_task(args):
    cfg, cell_index, cell, rep = args
    seed = derive_seed(cfg.seed, cfg.experiment, cell_index, rep)
    fn = _EXPERIMENTS[cfg.experiment][0]
    rows = fn(cfg, cell, derive_rng(seed))
    head = {"experiment": cfg.experiment, "cell": cell_index, "rep": rep, "seed": seed}
    return [{**head, **row} for row in rows]


@dataclass
class ExperimentResult:
    experiment: str
    columns: list
    rows: list = field(default_factory=list)

    @property
    def failed_hard(self) -> bool:
        return any(r.get("hard") and not r.get("passed") for r in self.rows)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    cols = columns(cfg.experiment)
    if cfg.experiment == "verify_all":
        recs = theory.verify_all(cfg.seed)
        rows = [{"experiment": "verify_all", "cell": i, "rep": 0, "seed": cfg.seed,
                 **dataclasses.asdict(rec), "note": rec.note or "-"} for i, rec in enumerate(recs)]
        result = ExperimentResult("verify_all", cols, rows)
    else:
        cells = list(_EXPERIMENTS[cfg.experiment][1](cfg))
        tasks = [(cfg, ci, cell, rep) for ci, cell in enumerate(cells) for rep in range(cfg.repetitions)]
        if cfg.workers > 1:
            with ProcessPoolExecutor(cfg.workers) as pool:
                chunks = list(pool.map(_run_task, tasks))
        else:
            chunks = [_run_task(t) for t in tasks]
        result = ExperimentResult(cfg.experiment, cols, [row for chunk in chunks for row in chunk])
    for row in result.rows:
        missing = [c for c in cols if c not in row or row[c] is None or row[c] == ""]
        if missing:
            raise RuntimeError(f"row is missing columns {missing}")
    return result


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def render(result: ExperimentResult, fmt: str = "csv") -> str:
    if fmt == "json":
        rows = [{c: _jsonable(row[c]) for c in result.columns} for row in result.rows]
        return json.dumps(rows, indent=1, allow_nan=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# schema: ntk_attractors/{result.experiment}/v{SCHEMA_VERSION} "
              f"columns={','.join(result.columns)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([_fmt(row[c]) for c in result.columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def write_result(result: ExperimentResult, path: str, fmt: str = "csv") -> None:
    text = render(result, fmt)
    if not path or path == "-":
        print(text, end="")
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)
