"""``daiscope`` command line: bound, sweep, optimize, validate."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checks import CheckResult, run_checks
from .config import ConfigError, RunConfig, load_config
from .design import BoundContext, BoundReport, SweepGrid, choose_shift, evaluate, sweep
from .fisher import orthogonality_residual
from .geometry import GeometryError, SpoofShift
from .signal_model import VirtualChannelParams

OUT_ENV = "DAISCOPE_OUT"
DEFAULT_OUT = "daiscope_out"
CSV_LAYERS = ("rmse", "bias_norm", "cos2", "kmin")


def _jsonable(obj):
    """Recursively convert to JSON-safe values; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _provenance(run: RunConfig) -> dict:
    return {"tool": "daiscope", "version": __version__, "config_sha256": run.digest()}


def _shift_record(shift: SpoofShift, ts: float) -> dict:
    return {
        "delta_tau_us": shift.delta_tau,
        "delta_tau_ts": shift.delta_tau / ts,
        "delta_theta_rad": shift.delta_theta,
        "delta_theta_deg": math.degrees(shift.delta_theta),
    }


def _report_record(rep: BoundReport, ctx: BoundContext) -> dict:
    shift = _shift_record(rep.shift, ctx.cfg.ts)
    out: dict = {"shift": shift, "kmin": rep.kmin, "error": rep.error}
    if rep.mcrb is not None:
        m = rep.mcrb
        out["mcrb"] = {
            "psi": m.psi,
            "estimation_part": m.estimation_part,
            "bias_part": m.bias_part,
            "rmse_eve": m.rmse_eve,
            "unstable": m.unstable,
            "reason": m.reason,
        }
    else:
        out["mcrb"] = None
    if rep.closed_form is not None:
        cf = rep.closed_form
        out["closed_form"] = {
            "value": cf.value,
            "c1": cf.c1,
            "c2": cf.c2,
            "tau_kmin": cf.tau_kmin,
            "cos2_term": cf.cos2_term,
            "bias_sq": cf.bias_sq,
            "psi_slack": cf.psi_slack,
            "design_objective": cf.design_objective,
            "unstable": cf.unstable,
        }
    else:
        out["closed_form"] = None
    if rep.pseudo is not None:
        p = rep.pseudo
        out["pseudo_true"] = {
            "alice": [p.alice.x, p.alice.y],
            "scatterers": [[v.x, v.y] for v in p.scatterers],
            "labels": p.labels,
            "b_values": list(p.b_values),
            "kmin": p.kmin,
        }
    else:
        out["pseudo_true"] = None
    vc = VirtualChannelParams(ctx.shifted(rep.shift), ctx.scenario.gains)
    out["diagnostics"] = {
        "bias_norm": rep.bias_norm,
        "sigma2": ctx.sigma2,
        "orthogonality_residual": orthogonality_residual(vc, ctx.pilots, ctx.cfg, ctx.sigma2),
        "unstable": rep.unstable,
    }
    return out


def _context(run: RunConfig) -> BoundContext:
    cfg = run.system_config()
    try:
        scenario = run.build_scenario(cfg)
    except (ValueError, GeometryError) as exc:
        raise ConfigError(str(exc), "scenario") from exc
    return BoundContext.build(scenario, cfg, run.psi_slack)


def cmd_bound(run: RunConfig, out: Path, args) -> int:
    ctx = _context(run)
    rep = evaluate(ctx, run.spoof_shift())
    payload = {"provenance": _provenance(run), **_report_record(rep, ctx)}
    _write_json(out / "report.json", payload)
    status = "unstable" if rep.unstable else f"rmse_eve={_fmt(rep.rmse)}"
    print(f"bound: {status}  -> {out / 'report.json'}")
    return 0


def _write_csv(path: Path, grid: SweepGrid, layer: np.ndarray, header: str) -> None:
    lines = [header, "delta_theta\\delta_tau," + ",".join(_fmt(t) for t in grid.delta_tau_values)]
    for th, row in zip(grid.delta_theta_values, layer):
        lines.append(",".join([_fmt(th)] + [_fmt(v) for v in row]))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_sweep(run: RunConfig, out: Path, args) -> int:
    ctx = _context(run)
    grid = sweep(ctx.scenario, ctx.cfg, run.grid_spec(), ctx=ctx)
    prov = _provenance(run)
    header = f"# daiscope {prov['version']} config_sha256={prov['config_sha256']}"
    for name in CSV_LAYERS:
        _write_csv(out / f"{name}.csv", grid, getattr(grid, name), header)
    finite = grid.rmse[np.isfinite(grid.rmse)]
    i, j = np.unravel_index(np.argmax(np.where(np.isfinite(grid.rmse), grid.rmse, -np.inf)), grid.shape)
    summary = {
        "provenance": prov,
        "shape": list(grid.shape),
        "files": [f"{n}.csv" for n in CSV_LAYERS],
        "max_rmse": float(finite.max()) if finite.size else math.inf,
        "argmax": grid.cell(int(i), int(j)),
        "n_unstable": int(grid.unstable.sum()),
        "min_fim_eig_ratio": float(np.nanmin(grid.fim_min_eig)),
        "min_efim_gap_eig_ratio": float(np.nanmin(grid.efim_gap_min_eig)),
    }
    _write_json(out / "sweep.json", summary)
    print(f"sweep: {grid.shape[0]}x{grid.shape[1]} cells, max rmse {_fmt(summary['max_rmse'])} -> {out}")
    return 0


def cmd_optimize(run: RunConfig, out: Path, args) -> int:
    ctx = _context(run)
    choice = choose_shift(ctx, run.grid_spec(), allow_singular=args.allow_singular)
    rep = evaluate(ctx, choice.shift)
    payload = {
        "provenance": _provenance(run),
        "shift": _shift_record(choice.shift, ctx.cfg.ts),
        "kmin": choice.kmin,
        "objective": choice.objective,
        "singular_member": choice.singular_member,
        "singular": choice.singular,
        "allow_singular": bool(args.allow_singular),
        "report": _report_record(rep, ctx),
    }
    _write_json(out / "optimize.json", payload)
    print(
        f"delta_tau={_fmt(choice.shift.delta_tau)} us  delta_theta={_fmt(choice.shift.delta_theta)} rad  "
        f"kmin={choice.kmin}  rmse_eve={_fmt(rep.rmse)}  unstable={rep.unstable}"
    )
    return 0


def cmd_validate(run: RunConfig, out: Path, args) -> int:
    try:
        ctx = _context(run)
    except ConfigError as exc:
        print(CheckResult("precondition", "fail", detail=exc.message).line())
        return 1
    results = [CheckResult("precondition", "pass")] + run_checks(ctx, run.spoof_shift())
    for r in results:
        print(r.line())
    ok = all(r.ok for r in results)
    print("validate: " + ("all checks passed" if ok else "FAILED"))
    return 0 if ok else 1


COMMANDS = {"bound": cmd_bound, "sweep": cmd_sweep, "optimize": cmd_optimize, "validate": cmd_validate}


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="daiscope", description=__doc__)
    parser.add_argument("--version", action="version", version=f"daiscope {__version__}")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="YAML run config (default: bundled reference scenario)")
    parser.add_argument("--out", help=f"output directory (else ${OUT_ENV}, else ./{DEFAULT_OUT})")
    parser.add_argument("--seed", type=_u64, help="override system.seed")
    parser.add_argument("--allow-singular", action="store_true",
                        help="optimize: allow a singular delta_theta")
    return parser


def resolve_out(arg: str | None) -> Path:
    return Path(arg or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = load_config(args.config).with_seed(args.seed)
        out = resolve_out(args.out)
        if args.command != "validate":
            out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](run, out, args)
    except ConfigError as exc:
        print(json.dumps(exc.record()), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
