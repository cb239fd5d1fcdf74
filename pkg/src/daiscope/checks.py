"""Numerical self-checks used by ``daiscope validate`` and the test suite.

Finite differences here are verification oracles only; nothing in the bound
computation falls back to them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .design import BoundContext, evaluate
from .fisher import Layout, partition, response_gradients
from .geometry import Paths, SpoofShift
from .linalg import min_eig_ratio
from .mismatch import COS2_FLOOR, mcrb_sandwich, misspecified_paths, round_trip_error
from .signal_model import PilotSet, SystemConfig, VirtualChannelParams, response_block


def _unpack(xi: np.ndarray, n_paths: int) -> VirtualChannelParams:
    lay = Layout(n_paths)
    gains = xi[lay.gain_re] + 1j * xi[lay.gain_im]
    return VirtualChannelParams(Paths(xi[lay.tau], xi[lay.theta]), gains)


def pack(vc: VirtualChannelParams) -> np.ndarray:
    return np.concatenate([vc.paths.toa, vc.paths.aod, vc.gains.real, vc.gains.imag])


def fd_gradients(
    vc: VirtualChannelParams, pilots: PilotSet, cfg: SystemConfig, step: float = 1e-7
) -> np.ndarray:
    """Central differences of the noiseless response in every xi coordinate."""
    xi = pack(vc)
    n = len(vc.paths)
    out = np.empty(pilots.symbols.shape[:2] + (xi.size,), dtype=complex)
    for a in range(xi.size):
        up, down = xi.copy(), xi.copy()
        up[a] += step
        down[a] -= step
        out[..., a] = (response_block(_unpack(up, n), pilots, cfg)
                       - response_block(_unpack(down, n), pilots, cfg)) / (2 * step)
    return out


def gradient_error(
    vc: VirtualChannelParams,
    pilots: PilotSet,
    cfg: SystemConfig,
    step: float = 1e-7,
    floor: float = 1e-3,
) -> float:
    """Worst per-coordinate relative error of the analytic gradient.

    Each coordinate's error is normalised by its own partial, floored at
    ``floor`` times the largest partial so that vanishing partials (an AOD at
    +-pi/2) are judged in absolute terms.
    """
    analytic = response_gradients(vc, pilots, cfg)
    numeric = fd_gradients(vc, pilots, cfg, step)
    norms = np.linalg.norm(analytic, axis=(0, 1))
    denom = np.maximum(norms, floor * norms.max())
    diff = np.linalg.norm(analytic - numeric, axis=(0, 1))
    return float(np.max(diff / denom))


def max_relative_difference(a: np.ndarray, b: np.ndarray) -> float:
    scale = np.max(np.abs(b))
    return float(np.max(np.abs(a - b)) / scale) if scale > 0 else float(np.max(np.abs(a - b)))


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str  # "pass" | "fail" | "skip"
    residual: float | None = None
    threshold: float | None = None
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status != "fail"

    def line(self) -> str:
        parts = [f"{self.status.upper():4s} {self.name}"]
        if self.residual is not None:
            parts.append(f"residual={self.residual:.3e}")
        if self.threshold is not None:
            parts.append(f"threshold={self.threshold:.0e}")
        if self.detail:
            parts.append(self.detail)
        return "  ".join(parts)


def _bounded(name, value, threshold, sense="le") -> CheckResult:
    ok = value <= threshold if sense == "le" else value >= threshold
    return CheckResult(name, "pass" if ok else "fail", value, threshold)


def run_checks(ctx: BoundContext, shift: SpoofShift) -> list[CheckResult]:
    results: list[CheckResult] = []
    report = evaluate(ctx, shift)
    vc = VirtualChannelParams(ctx.shifted(shift), ctx.scenario.gains)

    no_pseudo = report.pseudo is None or report.cos2 < COS2_FLOOR
    if report.pseudo is None:
        why = report.error
    elif report.cos2 < COS2_FLOOR:
        why = f"cos^2={report.cos2:.2e} at apparent LOS path {report.kmin}"
    else:
        why = report.error

    if no_pseudo:
        results.append(CheckResult("round_trip", "skip", detail=f"singular shift: {why}"))
    else:
        model = misspecified_paths(report.pseudo, ctx.scenario.eve, ctx.cfg.light_speed)
        results.append(_bounded("round_trip", round_trip_error(model, vc.paths), 1e-9))

    if no_pseudo or report.unstable:
        results.append(CheckResult("route_equivalence", "skip", detail=f"singular shift: {why}"))
    else:
        general = mcrb_sandwich(report.pseudo, report.efim, ctx.scenario, ctx.cfg, vc.paths)
        diff = max_relative_difference(general.psi, report.mcrb.psi)
        results.append(_bounded("route_equivalence", diff, 1e-8))

    results.append(_bounded("gradient_fd", gradient_error(vc, ctx.pilots, ctx.cfg), 1e-5))
    results.append(_bounded("fim_psd", min_eig_ratio(report.fim), -1e-8, sense="ge"))
    if report.efim is None:
        results.append(CheckResult("efim_dominance", "fail", detail=report.error or ""))
    else:
        gap = partition(report.fim)[0] - report.efim
        results.append(_bounded("efim_dominance", min_eig_ratio(gap), -1e-8, sense="ge"))
    if report.mcrb is not None and not report.mcrb.unstable:
        rmse = report.mcrb.rmse_eve
        results.append(CheckResult("rmse_finite", "pass" if math.isfinite(rmse) else "fail", rmse))
    return results
