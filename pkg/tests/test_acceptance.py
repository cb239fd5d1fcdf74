"""Acceptance criteria 1-10 at their stated tolerances.

Each test records one ``PASS``/``FAIL`` line, printed in the pytest terminal
summary (and to stdout when run as a script).
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from daiscope.checks import gradient_error, max_relative_difference
from daiscope.design import (
    BoundContext,
    GridSpec,
    delta_theta_singular_set,
    evaluate,
    kmin_regions,
    singular_approach,
    sweep,
)
from daiscope.fisher import block_diagonalize, geometry_jacobian
from daiscope.geometry import Scenario, SpoofShift
from daiscope.linalg import inv_spd
from daiscope.mismatch import (
    COS2_FLOOR,
    closed_form_intermediate,
    mcrb_sandwich,
    misspecified_paths,
    pseudo_true_locations,
    round_trip_error,
)
from daiscope.signal_model import SystemConfig, VirtualChannelParams, default_gains, generate_pilots

from conftest import ACCEPTANCE_LINES, ALICE, EVE, random_scenario, reference_scenario

# first oracle run, seed 0; frozen as a regression constant
ZERO_SHIFT_RMSE = 0.032682601349571704
RUNTIME_BUDGET_S = 60.0


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def reference():
    cfg = SystemConfig()
    scenario = reference_scenario(cfg)
    ctx = BoundContext.build(scenario, cfg)
    start = time.perf_counter()
    grid = sweep(scenario, cfg, GridSpec(n_tau=64, n_theta=64), ctx=ctx)
    elapsed = time.perf_counter() - start
    return ctx, grid, elapsed


def test_criterion_01_peak(reference):
    ctx, grid, elapsed = reference
    assert grid.shape == (64, 64)
    assert grid.delta_tau_values[-1] == pytest.approx(ctx.cfg.n_ts)
    assert grid.delta_theta_values[-1] == pytest.approx(math.pi / 2)
    peak = float(np.max(grid.rmse[np.isfinite(grid.rmse)]))
    ok = peak > 150.0 and elapsed < RUNTIME_BUDGET_S
    record(1, "64x64 sweep peak RMSE > 150 m", ok, f"max rmse {peak:.2f} m, sweep {elapsed:.1f} s")


def test_criterion_02_zero_shift(reference):
    ctx, _, _ = reference
    rep = evaluate(ctx, SpoofShift(0.0, 0.0))
    sc = ctx.scenario
    jac = geometry_jacobian(sc.alice.as_array(), sc.eve.as_array(),
                            [v.as_array() for v in sc.scatterers], ctx.cfg.light_speed)
    crb = inv_spd(jac.T @ rep.efim @ jac)
    crb_diff = max_relative_difference(rep.mcrb.psi, crb)
    bias_max = float(np.max(np.abs(rep.mcrb.bias_part)))
    rmse = rep.rmse
    ok = (
        bias_max < 1e-20
        and crb_diff <= 1e-9
        and math.isfinite(rmse)
        and rmse < 1.0
        and rmse == pytest.approx(ZERO_SHIFT_RMSE, rel=1e-9)
    )
    record(2, "zero shift equals true CRB", ok,
           f"|bias_part|max {bias_max:.1e}, psi vs CRB {crb_diff:.1e}, rmse {rmse:.6f} m")


def test_criterion_03_round_trip(reference):
    ctx, _, _ = reference
    spec = GridSpec(n_tau=32, n_theta=32)
    worst, checked, excluded, failures = 0.0, 0, 0, []
    for dth in spec.delta_theta_values():
        for dtau in spec.delta_tau_values(ctx.cfg):
            shifted = ctx.shifted(SpoofShift(float(dtau), float(dth)))
            k = int(np.argmin(shifted.toa))
            if math.cos(shifted.aod[k]) ** 2 < COS2_FLOOR:
                excluded += 1
                continue
            try:
                pseudo = pseudo_true_locations(shifted, ctx.scenario.eve, ctx.cfg.light_speed)
            except Exception as exc:  # any failure on a non-singular cell counts
                failures.append((dtau, dth, str(exc)))
                continue
            model = misspecified_paths(pseudo, ctx.scenario.eve, ctx.cfg.light_speed)
            worst = max(worst, round_trip_error(model, shifted))
            checked += 1
    ok = not failures and worst <= 1e-9 and checked > 0
    record(3, "round-trip law on 32x32 grid", ok,
           f"{checked} cells, {excluded} singular excluded, worst {worst:.1e}, {len(failures)} failures")


def test_criterion_04_route_equivalence():
    rng = np.random.default_rng(2024)
    cfg = SystemConfig()
    worst, draws, attempts = 0.0, 0, 0
    while draws < 100 and attempts < 1000:
        attempts += 1
        sc = random_scenario(rng, cfg)
        ctx = BoundContext.build(sc, cfg)
        shift = SpoofShift(float(rng.uniform(0, cfg.n_ts)), float(rng.uniform(-math.pi / 2, math.pi / 2)))
        rep = evaluate(ctx, shift)
        if rep.pseudo is None or rep.unstable or rep.cos2 < COS2_FLOOR:
            continue
        ga = mcrb_sandwich(rep.pseudo, rep.efim, sc, cfg, ctx.shifted(shift))
        worst = max(worst, max_relative_difference(ga.psi, rep.mcrb.psi))
        draws += 1
    ok = draws == 100 and worst <= 1e-8
    record(4, "sandwich route equals direct route", ok,
           f"{draws} non-singular draws of {attempts}, worst {worst:.1e}")


def test_criterion_05_gradients():
    rng = np.random.default_rng(5)
    cfg = SystemConfig()
    pilots = generate_pilots(cfg)
    worst = 0.0
    for _ in range(10):
        sc = random_scenario(rng, cfg)
        ctx = BoundContext.build(sc, cfg)
        shift = SpoofShift(float(rng.uniform(0, cfg.n_ts)), float(rng.uniform(-1.2, 1.2)))
        vc = VirtualChannelParams(ctx.shifted(shift), sc.gains)
        worst = max(worst, gradient_error(vc, pilots, cfg))
    record(5, "analytic gradient vs central differences", worst <= 1e-5,
           f"10 scenarios x 12 coordinates, worst {worst:.1e}")


def test_criterion_06_psd(reference):
    _, grid, _ = reference
    fim_min = float(np.min(grid.fim_min_eig))
    gap_min = float(np.min(grid.efim_gap_min_eig))
    finite = np.all(np.isfinite(grid.fim_min_eig)) and np.all(np.isfinite(grid.efim_gap_min_eig))
    ok = finite and fim_min >= -1e-8 and gap_min >= -1e-8
    record(6, "FIM PSD and EFIM dominance on every cell", ok,
           f"min eig/lambda_max: FIM {fim_min:.1e}, J1-EFIM {gap_min:.1e}")


def test_criterion_07_singularity(reference):
    ctx, grid, _ = reference
    members, rising, worst_cos2 = 0, 0, 0.0
    all_flagged = True
    for k, region in sorted(kmin_regions(ctx, grid.delta_tau_values).items()):
        dtau = region[len(region) // 2]
        for member in delta_theta_singular_set(float(ctx.true_paths.aod[k]), range(-1, 2)):
            members += 1
            rep = evaluate(ctx, SpoofShift(dtau, member))
            shifted = ctx.shifted(SpoofShift(dtau, member))
            cos2 = math.cos(shifted.aod[rep.kmin]) ** 2
            worst_cos2 = max(worst_cos2, cos2)
            flagged = rep.kmin == k and cos2 < 1e-12 and (
                rep.closed_form is None or (rep.closed_form.unstable and rep.closed_form.value == math.inf)
            )
            all_flagged &= flagged
            rmse = [evaluate(ctx, SpoofShift(dtau, float(d))).rmse for d in singular_approach(member)]
            rising += bool(np.all(np.isfinite(rmse)) and np.all(np.diff(rmse) > 0))
    ok = all_flagged and rising == members
    record(7, "singular set drives bound to infinity", ok,
           f"{members} members, max cos^2 {worst_cos2:.1e}, strictly rising approaches {rising}/{members}")


def _single_path_context(n_symbols: int, seed: int) -> BoundContext:
    cfg = SystemConfig(n_symbols=n_symbols, seed=seed)
    sc = Scenario(ALICE, EVE, (), default_gains(ALICE, EVE, (), cfg))
    return BoundContext.build(sc, cfg)


def test_criterion_08_asymptotics():
    shift = SpoofShift(0.2, 0.3)
    # exact equality where the EFIM is exactly block diagonal (single path)
    ctx = _single_path_context(16, 0)
    rep = evaluate(ctx, shift)
    inter = closed_form_intermediate(rep.pseudo, block_diagonalize(rep.efim), ctx.scenario, ctx.cfg)
    trace = rep.mcrb.psi[0, 0] + rep.mcrb.psi[1, 1]
    exact_diff = abs(inter - trace) / trace
    # finite-G gap, averaged over pilot draws, must shrink as G grows
    gs = (16, 64, 256, 1024, 4096)
    seeds = range(16)
    gaps = []
    for g in gs:
        vals = []
        for seed in seeds:
            ctx = _single_path_context(g, seed)
            rep = evaluate(ctx, shift)
            inter_g = closed_form_intermediate(rep.pseudo, block_diagonalize(rep.efim), ctx.scenario, ctx.cfg)
            vals.append(abs(rep.closed_form.value - inter_g))
        gaps.append(float(np.mean(vals)))
    monotone = bool(np.all(np.diff(gaps) < 0))
    ok = exact_diff <= 1e-8 and monotone
    record(8, "closed form approaches intermediate as G grows", ok,
           f"intermediate vs MCRB {exact_diff:.1e}; mean gaps " + ", ".join(f"{x:.2e}" for x in gaps))


def test_criterion_09_structure(reference):
    ctx, grid, _ = reference
    mask = np.isfinite(grid.rmse) & np.isfinite(grid.bias_norm)
    rho = float(spearmanr(grid.rmse[mask], grid.bias_norm[mask]).statistic)
    rmse = np.array([evaluate(ctx, SpoofShift(float(t), 0.3)).rmse for t in grid.delta_tau_values])
    interior = (rmse[1:-1] > rmse[:-2]) & (rmse[1:-1] > rmse[2:])
    ok = rho > 0 and bool(interior.any()) and np.all(np.isfinite(rmse))
    record(9, "RMSE tracks bias; delay slice non-monotone", ok,
           f"spearman {rho:.3f}, interior maxima at dtheta=0.3: {int(interior.sum())}")


def test_criterion_10_determinism(tmp_path):
    files = ("rmse.csv", "bias_norm.csv", "cos2.csv", "kmin.csv")
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        env = dict(os.environ, DAISCOPE_OUT=str(out))
        proc = subprocess.run([sys.executable, "-m", "daiscope.cli", "sweep", "--seed", "0"],
                              env=env, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append([(out / f).read_bytes() for f in files])
    same = outs[0] == outs[1]
    record(10, "repeated sweep CSVs byte-identical", same,
           f"{len(files)} files, {sum(len(b) for b in outs[0])} bytes")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
