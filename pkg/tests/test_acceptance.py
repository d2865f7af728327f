"""Acceptance criteria 1-7, each checked at its stated tolerance.

Every test records one ``ACCEPTANCE n: PASS/FAIL`` line; the lines are
repeated in the terminal summary.  Criteria 2 and 6 take minutes on one core.
"""
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from orthoaugm.analysis import theoretical_orth_error, theoretical_std_error
from orthoaugm.augmentation import TrainingContext
from orthoaugm.experiments import (
    SWEEP_GRID,
    ExperimentConfig,
    TrueSystem,
    make_dataset,
    nfir_basis,
    run_consistency_sweep,
    run_monte_carlo,
)

SYSTEM = TrueSystem()
TESTS = Path(__file__).parent


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def noiseless_d1():
    cfg = ExperimentConfig("D1", 1024, None, structures=("orthogonal",))
    return timed(run_monte_carlo, cfg)


@pytest.fixture(scope="module")
def noisy_d1():
    return timed(run_monte_carlo, ExperimentConfig("D1", 1024, 30.0))


def test_1_noiseless_recovery(noiseless_d1, verdict):
    mc, secs = noiseless_d1
    runs = mc.runs
    worst_err = max(r.theta_b_err for r in runs)
    worst_loss = max(r.final_loss for r in runs)
    ok = (len(runs) == 10 and all(r.ok for r in runs)
          and worst_err < 1e-3 and worst_loss < 1e-8 and secs < 120)
    assert verdict(1, ok, f"max theta_b error {worst_err:.2e} (< 1e-3), max final loss {worst_loss:.2e} "
                          f"(< 1e-8), {len(runs)} runs in {secs:.0f} s (< 120 s)")


@pytest.mark.slow
def test_2_noisy_monte_carlo(noisy_d1, verdict):
    mc, secs = noisy_d1
    orth = mc.median("orthogonal", "theta_b_err")
    std = mc.median("standard", "theta_b_err")
    rmse = {s: mc.median(s, "test_rmse") for s in ("orthogonal", "standard")}
    checks = {
        "orthogonal median in [0.002, 0.05]": 0.002 <= orth <= 0.05,
        "standard >= 5x orthogonal": std >= 5 * orth,
        "test RMSE within 3x of 5.5e-4": all(5.5e-4 / 3 <= v <= 5.5e-4 * 3 for v in rmse.values()),
        "runtime < 300 s": secs < 300,
    }
    failed = [k for k, v in checks.items() if not v]
    detail = (f"median theta_b error orth {orth:.4g}, std {std:.4g}; median test RMSE orth "
              f"{rmse['orthogonal']:.3g}, std {rmse['standard']:.3g}; {secs:.0f} s")
    if failed:
        detail += "; failed: " + ", ".join(failed)
    assert verdict(2, not failed, detail)


def test_3_covariance_block_diagonal(noiseless_d1, noisy_d1, verdict):
    runs = [r for r in noiseless_d1[0].runs + noisy_d1[0].runs if r.ok and r.structure == "orthogonal"]
    worst = max(r.covariance.max_cross_block for r in runs)
    std_runs = [r.covariance.max_cross_block for r in noisy_d1[0].runs if r.ok and r.structure == "standard"]
    assert verdict(3, worst < 1e-6 and len(runs) == 20,
                   f"max cross block over {len(runs)} orthogonal models {worst:.2e} (< 1e-6); "
                   f"standard models for reference: median {np.median(std_runs):.2e}")


def test_4_error_formula_closure(noiseless_d1, verdict):
    rows, ok = [], True
    for kind in ("D2", "D3"):
        cfg = ExperimentConfig(kind, 1024, None, n_monte_carlo=3, structures=("orthogonal",))
        mc = run_monte_carlo(cfg, with_covariance=False)
        ctx = TrainingContext.from_dataset(mc.dataset, nfir_basis())
        c = np.linalg.norm(np.linalg.pinv(ctx.phi), 2)
        for r in mc.runs:
            gap = abs(r.theta_b_err - r.errors.theoretical_orth_error)
            bound = 100 * c * math.sqrt(ctx.n_samples * r.final_loss)
            ok &= r.ok and gap <= bound
            rows.append(gap / bound if bound > 0 else math.inf)
    d1 = [r.errors.theoretical_orth_error for r in noiseless_d1[0].runs]
    ok &= all(v == 0.0 for v in d1)
    assert verdict(4, ok, f"max gap/bound on D2, D3 = {max(rows):.3g} (<= 1); "
                          f"D1 theoretical error values {sorted(set(d1))}")


def test_5_worst_case_standard_error(verdict):
    ok, worst, details = True, 0.0, []
    norm = float(np.linalg.norm(SYSTEM.theta_b_star))
    for kind in ("D1", "D2", "D3"):
        ds, _ = make_dataset(kind, 1024, 0, None)
        ctx = TrainingContext.from_dataset(ds, nfir_basis())
        u = ctx.states[:, 0]
        delta = SYSTEM.delta(u)
        e_std = theoretical_std_error(ctx.fact, ctx.phi @ SYSTEM.theta_b_star + delta, delta)
        e_orth = theoretical_orth_error(ctx.fact, delta)
        worst = max(worst, abs(e_std - norm))
        ok &= abs(e_std - norm) <= 1e-10 and e_std > e_orth
        details.append(f"{kind} e_std {e_std:.12f} > e_orth {e_orth:.3g}")
    assert verdict(5, ok, f"max |e_std - ||theta_b*||| = {worst:.1e} (<= 1e-10); " + "; ".join(details))


@pytest.mark.slow
def test_6_consistency_trends(verdict):
    t0 = time.perf_counter()
    d2 = run_consistency_sweep(ExperimentConfig("D2", 128, None, structures=("orthogonal",)),
                               [128, 512, 2048, 8192])
    d2_means = [p.mean_error for p in d2]
    d2_ok = all(b < a for a, b in zip(d2_means, d2_means[1:]))

    d3 = run_consistency_sweep(ExperimentConfig("D3", 128, None, structures=("orthogonal",)), SWEEP_GRID)
    a, b = d3[-2].mean_error, d3[-1].mean_error
    d3_rel = abs(b - a) / max(a, b)
    d3_ok = d3_rel < 0.25

    d1 = run_consistency_sweep(ExperimentConfig("D1", 1024, 30.0), [1024, 16384])
    m = {(p.n_samples, p.structure): p.mean_error for p in d1}
    orth_ratio = m[(16384, "orthogonal")] / m[(1024, "orthogonal")]
    std_ratio = m[(16384, "standard")] / m[(1024, "standard")]
    d1_ok = orth_ratio < 0.5 and not std_ratio < 0.5
    failed_runs = sum(p.n_failed for p in d2 + d3 + d1)
    secs = time.perf_counter() - t0
    ok = d2_ok and d3_ok and d1_ok and secs < 1200 and failed_runs == 0
    assert verdict(6, ok, "D2 means " + ", ".join(f"{v:.3g}" for v in d2_means)
                   + f" (strictly decreasing: {d2_ok}); D3 last two {a:.4g}, {b:.4g}, rel diff {d3_rel:.3f} (< 0.25); "
                   f"D1 30 dB ratio 16384/1024 orth {orth_ratio:.3f} (< 0.5), std {std_ratio:.3f} (>= 0.5); "
                   f"{failed_runs} failed runs; {secs:.0f} s (< 1200 s)")


PROPERTY_TESTS = [
    "test_linalg.py::test_projector_properties",
    "test_linalg.py::test_span_is_annihilated",
    "test_mlp.py::test_backprop_matches_finite_differences",
    "test_mlp.py::test_jacobian_matches_finite_differences",
    "test_augmentation.py::test_gradient_matches_finite_differences",
    "test_augmentation.py::test_gradient_with_separate_projection_set",
    "test_augmentation.py::test_standard_structure_non_uniqueness",
    "test_regressor.py::test_d1_column_sums_are_exactly_zero",
    "test_analysis.py::test_d1_defect_is_exactly_zero",
    "test_optimize.py::test_lbfgs_dim5_quadratic_oracle",
    "test_optimize.py::test_lbfgs_finite_termination_on_quadratics",
    "test_optimize.py::test_lbfgs_converges_without_refinement",
    "test_optimize.py::test_training_is_bit_reproducible",
    "test_experiments.py::test_monte_carlo_is_bit_reproducible",
    "test_cli.py::test_study_is_idempotent_apart_from_timing",
]


def test_7_property_suites(verdict):
    ids = [str(TESTS / t) for t in PROPERTY_TESTS]
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *ids],
                          capture_output=True, text=True, cwd=TESTS.parent)
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    assert verdict(7, proc.returncode == 0, f"{len(PROPERTY_TESTS)} property tests: {summary}"), proc.stdout
