"""Polynomial NFIR benchmark: data generation, Monte Carlo study and data-length sweeps.

The true system is ``y = t0 + t1 u + t2 u^2 + t3 u^3 + e`` and the baseline
model is ``theta_1 u + theta_3 u^3``, so the unmodeled part is
``t0 + t2 u^2``.

Seeding: the training input of a study comes from ``data_seed``; the noise
from an independent stream spawned off the same seed; network
initialisations from the model seeds; the noise-free test set from a fixed
``test_seed`` shared by every run.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import CovarianceReport, ErrorReport, error_report, estimate_covariance
from .augmentation import AugmentedModel, Structure, TrainingContext, predict_test_batch
from .errors import DegenerateSignal, DimensionMismatch, OddLengthD1
from .mlp import MlpSpec, forward_batch, xavier_init
from .optimize import TrainSchedule, train
from .regressor import BaselineBasis, Dataset, LagSpec

log = logging.getLogger(__name__)

THETA_STAR = (0.01, 1.0, -0.5, 0.1)
BASIS_NAMES = ("u", "u^3")
INPUT_STD = 0.3
DATASET_KINDS = ("D1", "D2", "D3")
TEST_SEED = 20250101
SWEEP_GRID = (128, 256, 512, 1024, 2048, 4096, 8192, 16384)


@dataclass(frozen=True)
class TrueSystem:
    theta_star: tuple[float, float, float, float] = THETA_STAR
    sigma_e: float = 0.0

    @property
    def theta_b_star(self) -> np.ndarray:
        return np.array([self.theta_star[1], self.theta_star[3]])

    def clean(self, u) -> np.ndarray:
        t0, t1, t2, t3 = self.theta_star
        u = np.asarray(u, dtype=np.float64)
        return t0 + t1 * u + t2 * u**2 + t3 * u**3

    def delta(self, u) -> np.ndarray:
        """Unmodeled terms ``t0 + t2 u^2``."""
        t0, _, t2, _ = self.theta_star
        u = np.asarray(u, dtype=np.float64)
        return t0 + t2 * u**2


def simulate_nfir(system: TrueSystem, u, e) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    if u.shape != e.shape:
        raise DimensionMismatch(f"input shape {u.shape} differs from noise shape {e.shape}")
    return system.clean(u) + e


def gen_input(kind: str, n: int, seed: int) -> np.ndarray:
    """Excitation for the three training designs.

    D1 draws n/2 samples from N(0, 0.3^2) and appends their negation, D2
    draws n samples from the same distribution, D3 from N(-0.01, 0.3^2).
    """
    kind = kind.upper()
    if kind not in DATASET_KINDS:
        raise ValueError(f"unknown dataset kind {kind!r}")
    if n < 2:
        raise ValueError("need at least 2 samples")
    rng = np.random.default_rng(seed)
    if kind == "D1":
        if n % 2:
            raise OddLengthD1("D1 requires even N")
        half = rng.normal(0.0, INPUT_STD, n // 2)
        return np.concatenate([half, -half])
    mean = 0.0 if kind == "D2" else -0.01
    return rng.normal(mean, INPUT_STD, n)


def sigma_from_snr(y_clean, snr_db: float) -> float:
    """Noise std giving ``20 log10(std(y_clean) / sigma_e) = snr_db``."""
    std = float(np.std(np.asarray(y_clean, dtype=np.float64)))
    if std == 0.0:
        raise DegenerateSignal("noise-free output is constant")
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return std * 10.0 ** (-snr_db / 20.0)


def noise_rng(seed) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])


def make_dataset(kind: str, n: int, seed, snr_db: float | None, system: TrueSystem = TrueSystem()):
    """Training data of one design; returns ``(Dataset, sigma_e)``."""
    u = gen_input(kind, n, seed)
    y_clean = system.clean(u)
    sigma = 0.0 if snr_db is None else sigma_from_snr(y_clean, snr_db)
    e = sigma * noise_rng(seed).standard_normal(n) if sigma > 0 else np.zeros(n)
    return Dataset(u, simulate_nfir(system, u, e), LagSpec()), sigma


def make_test_set(n: int = 1024, seed: int = TEST_SEED, system: TrueSystem = TrueSystem()):
    """Noise-free test data with the D2 input distribution."""
    u = np.random.default_rng(seed).normal(0.0, INPUT_STD, n)
    return u, system.clean(u)


def nfir_basis() -> BaselineBasis:
    return BaselineBasis.from_names(BASIS_NAMES, LagSpec())


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_kind: str = "D1"
    n_samples: int = 1024
    snr_db: float | None = None
    n_monte_carlo: int = 10
    data_seed: int = 0
    seeds: tuple[int, ...] | None = None
    schedule: TrainSchedule = field(default_factory=TrainSchedule)
    theta_b_init: tuple[float, ...] = (0.8, 0.03)
    mlp_sizes: tuple[int, ...] = (1, 16, 1)
    structures: tuple[str, ...] = ("standard", "orthogonal")
    n_test: int = 1024
    test_seed: int = TEST_SEED
    curve_points: int = 201

    def __post_init__(self):
        kind = self.dataset_kind.upper()
        if kind not in DATASET_KINDS:
            raise ValueError(f"unknown dataset kind {self.dataset_kind!r}")
        object.__setattr__(self, "dataset_kind", kind)
        if kind == "D1" and self.n_samples % 2:
            raise OddLengthD1("D1 requires even N")
        for s in self.structures:
            Structure(s)

    @property
    def model_seeds(self) -> tuple[int, ...]:
        return tuple(self.seeds) if self.seeds is not None else tuple(range(self.n_monte_carlo))


@dataclass
class RunRecord:
    run_id: int
    structure: str
    dataset: str
    n_samples: int
    snr_db: float | None
    seed: int
    sigma_e: float
    ok: bool = True
    message: str = ""
    test_rmse: float = float("nan")
    theta_b_err: float = float("nan")
    theta_b: list[float] = field(default_factory=list)
    final_loss: float = float("nan")
    wall_ms: float = 0.0
    model: AugmentedModel | None = None
    errors: ErrorReport | None = None
    covariance: CovarianceReport | None = None
    curve: np.ndarray | None = None  # columns u, f_ann_projected, delta_true


def learning_component_curve(model: AugmentedModel, grid, system: TrueSystem = TrueSystem()) -> np.ndarray:
    """Learning-component output with frozen theta_aux on a grid of inputs."""
    grid = np.asarray(grid, dtype=np.float64)
    f = forward_batch(model.mlp, grid[:, None])
    if model.theta_aux is not None:
        f = f - model.basis.regressor(grid[:, None])[:, 0, :] @ model.theta_aux
    return np.column_stack([grid, f, system.delta(grid)])


def _train_one(cfg: ExperimentConfig, ds: Dataset, sigma: float, structure: str, seed: int, run_id: int,
               with_covariance: bool = True) -> RunRecord:
    system = TrueSystem(sigma_e=sigma)
    rec = RunRecord(run_id, structure, cfg.dataset_kind, ds.n_raw, cfg.snr_db, seed, sigma)
    t0 = time.perf_counter()
    try:
        basis = nfir_basis()
        ctx = TrainingContext.from_dataset(ds, basis)
        mlp0 = xavier_init(MlpSpec(cfg.mlp_sizes), seed)
        model0 = AugmentedModel(structure, cfg.theta_b_init, mlp0, basis, ds.lag)
        result = train(ctx, model0, cfg.schedule)
        model = result.model
        u_test, y_test = make_test_set(cfg.n_test, cfg.test_seed, system)
        pred = predict_test_batch(model, u_test[:, None])[:, 0]
        delta = system.delta(ctx.states[:, 0])
        f_ann = forward_batch(model.mlp, ctx.states) if model.structure is Structure.STANDARD else None
        rec.model = model
        rec.test_rmse = float(np.sqrt(np.mean((pred - y_test) ** 2)))
        rec.theta_b = model.theta_b.tolist()
        rec.theta_b_err = float(np.linalg.norm(model.theta_b - system.theta_b_star))
        rec.final_loss = result.final_loss
        rec.errors = error_report(model, ctx.fact, delta, system.theta_b_star, f_ann)
        if with_covariance:
            rec.covariance = estimate_covariance(model, ds)
        rec.curve = learning_component_curve(model, np.linspace(-1.0, 1.0, cfg.curve_points), system)
    except Exception as exc:  # recorded per run, a failed run must not abort the study
        log.warning("run %d (%s, seed %d) failed: %s", run_id, structure, seed, exc)
        rec.ok = False
        rec.message = f"{type(exc).__name__}: {exc}"
    rec.wall_ms = (time.perf_counter() - t0) * 1e3
    return rec


def _map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, *t) for t in tasks]
        return [f.result() for f in futures]


@dataclass
class MonteCarloResult:
    config: ExperimentConfig
    sigma_e: float
    dataset: Dataset
    runs: list[RunRecord]

    def by_structure(self, structure: str) -> list[RunRecord]:
        return [r for r in self.runs if r.structure == structure and r.ok]

    def median(self, structure: str, attr: str) -> float:
        vals = [getattr(r, attr) for r in self.by_structure(structure)]
        return float(np.median(vals)) if vals else float("nan")


def run_monte_carlo(cfg: ExperimentConfig, jobs: int = 1, with_covariance: bool = True) -> MonteCarloResult:
    """Train every structure from every model seed on one shared dataset."""
    ds, sigma = make_dataset(cfg.dataset_kind, cfg.n_samples, cfg.data_seed, cfg.snr_db)
    tasks = []
    run_id = 0
    for seed in cfg.model_seeds:
        for structure in cfg.structures:
            tasks.append((cfg, ds, sigma, structure, seed, run_id, with_covariance))
            run_id += 1
    runs = _map(_train_one, tasks, jobs)
    return MonteCarloResult(cfg, sigma, ds, runs)


@dataclass
class SweepPoint:
    n_samples: int
    structure: str
    mean_error: float
    std_error: float
    errors: list[float]
    n_failed: int = 0


def sweep_data_seed(base: int, n: int, index: int) -> list[int]:
    return [base, n, index]


def _sweep_one(cfg: ExperimentConfig, n: int, index: int, structure: str, seed: int) -> RunRecord:
    ds, sigma = make_dataset(cfg.dataset_kind, n, sweep_data_seed(cfg.data_seed, n, index), cfg.snr_db)
    return _train_one(replace(cfg, n_samples=n), ds, sigma, structure, seed, index, with_covariance=False)


def run_consistency_sweep(cfg: ExperimentConfig, n_values=SWEEP_GRID, jobs: int = 1) -> list[SweepPoint]:
    """Baseline error versus data length, with fresh data for every seed and N."""
    n_values = [int(n) for n in n_values]
    if n_values != sorted(n_values):
        raise ValueError("n_values must be ascending")
    tasks = []
    for n in n_values:
        if cfg.dataset_kind == "D1" and n % 2:
            raise OddLengthD1("D1 requires even N")
        for structure in cfg.structures:
            for i, seed in enumerate(cfg.model_seeds):
                tasks.append((cfg, n, i, structure, seed))
    runs = _map(_sweep_one, tasks, jobs)
    points = []
    for n in n_values:
        for structure in cfg.structures:
            recs = [r for (c, nn, i, s, sd), r in zip(tasks, runs) if nn == n and s == structure]
            errs = [r.theta_b_err for r in recs if r.ok]
            points.append(SweepPoint(
                n_samples=n,
                structure=structure,
                mean_error=float(np.mean(errs)) if errs else float("nan"),
                std_error=float(np.std(errs)) if errs else float("nan"),
                errors=errs,
                n_failed=sum(not r.ok for r in recs),
            ))
    return points
