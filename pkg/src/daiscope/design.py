"""Choosing the spoofing shifts: singular angle set, grid sweeps and the
delay-shift search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .fisher import SingularNuisanceError, compute_efim, compute_fim, partition
from .geometry import (
    GeometryError,
    Paths,
    Scenario,
    SpoofShift,
    apply_shift,
    forward_geometry,
    kmin_index,
    wrapped_sine,
)
from .linalg import min_eig_ratio
from .mismatch import (
    COS2_FLOOR,
    ClosedFormBound,
    McrbResult,
    PseudoTrueLocations,
    closed_form_bound,
    mcrb,
    pseudo_true_locations,
)
from .signal_model import (
    PilotSet,
    SystemConfig,
    VirtualChannelParams,
    generate_pilots,
    snr_to_noise_variance,
)


class NoFeasiblePointError(ValueError):
    pass


@dataclass(frozen=True)
class BoundContext:
    """Everything that stays fixed while the shift varies."""

    scenario: Scenario
    cfg: SystemConfig
    pilots: PilotSet = field(repr=False)
    sigma2: float
    true_paths: Paths
    psi_slack: float = 0.0

    @classmethod
    def build(cls, scenario: Scenario, cfg: SystemConfig, psi_slack: float = 0.0) -> "BoundContext":
        pilots = generate_pilots(cfg)
        sigma2 = snr_to_noise_variance(scenario, pilots, cfg)
        true_paths = forward_geometry(scenario, cfg.light_speed)
        return cls(scenario, cfg, pilots, sigma2, true_paths, psi_slack)

    def shifted(self, shift: SpoofShift) -> Paths:
        return apply_shift(self.true_paths, shift, self.cfg.n_ts)


@dataclass(frozen=True)
class BoundReport:
    shift: SpoofShift
    kmin: int
    mcrb: McrbResult | None
    closed_form: ClosedFormBound | None
    pseudo: PseudoTrueLocations | None
    bias_norm: float
    fim: np.ndarray | None = field(default=None, repr=False)
    efim: np.ndarray | None = field(default=None, repr=False)
    error: str | None = None

    @property
    def rmse(self) -> float:
        return self.mcrb.rmse_eve if self.mcrb is not None else math.inf

    @property
    def unstable(self) -> bool:
        return self.mcrb is None or self.mcrb.unstable

    @property
    def cos2(self) -> float:
        return self.closed_form.cos2_term if self.closed_form is not None else math.nan

    @property
    def objective(self) -> float:
        return self.closed_form.design_objective if self.closed_form is not None else math.nan


def evaluate(ctx: BoundContext, shift: SpoofShift) -> BoundReport:
    """Full misspecified bound and closed form at one shift. Never raises for
    singular geometry; the report carries the reason instead."""
    shifted = ctx.shifted(shift)
    kmin = kmin_index(shifted)
    try:
        pseudo = pseudo_true_locations(shifted, ctx.scenario.eve, ctx.cfg.light_speed)
    except GeometryError as exc:
        return BoundReport(shift, kmin, None, None, None, math.nan, error=str(exc))
    bias_norm = float(np.linalg.norm(pseudo.alice.as_array() - ctx.scenario.alice.as_array()))
    vc = VirtualChannelParams(shifted, ctx.scenario.gains)
    fim = compute_fim(vc, ctx.pilots, ctx.cfg, ctx.sigma2)
    closed = closed_form_bound(pseudo, ctx.scenario, ctx.cfg, ctx.sigma2, ctx.psi_slack)
    try:
        efim = compute_efim(fim)
    except SingularNuisanceError as exc:
        return BoundReport(shift, kmin, None, closed, pseudo, bias_norm, fim, error=str(exc))
    result = mcrb(pseudo, efim, ctx.scenario, ctx.cfg)
    return BoundReport(shift, kmin, result, closed, pseudo, bias_norm, fim, efim, result.reason)


def delta_theta_singular_set(theta_kmin: float, m_range: Iterable[int] = (0,)) -> list[float]:
    """Angle shifts that push the apparent-LOS AOD to +-pi/2 (cos^2 = 0)."""
    if abs(theta_kmin) > math.pi / 2:
        raise ValueError("theta_kmin must lie in [-pi/2, pi/2]")
    base = math.asin(wrapped_sine(1.0 - math.sin(theta_kmin)))
    return [base + 2 * math.pi * m for m in m_range]


def singular_approach(member: float, n_points: int = 5, step: float = 1e-3) -> np.ndarray:
    """Angle shifts approaching a singular-set member from below, nearest last.

    From below the wrapped sine rises continuously to 1, so the path never
    crosses a wrap boundary.
    """
    return member - step * np.arange(n_points, 0, -1)


@dataclass(frozen=True)
class GridSpec:
    """Sweep grid. Ranges are left-open ``(lo, hi]`` with ``n`` evenly spaced
    points including ``hi``; ``None`` ranges default to (0, N Ts] and
    (-pi/2, pi/2]. Explicit value lists override ranges."""

    n_tau: int = 64
    n_theta: int = 64
    tau_range: tuple[float, float] | None = None
    theta_range: tuple[float, float] | None = None
    tau_values: tuple[float, ...] | None = None
    theta_values: tuple[float, ...] | None = None

    def delta_tau_values(self, cfg: SystemConfig) -> np.ndarray:
        if self.tau_values is not None:
            return np.asarray(self.tau_values, dtype=float)
        lo, hi = self.tau_range if self.tau_range is not None else (0.0, cfg.n_ts)
        return _left_open(lo, hi, self.n_tau)

    def delta_theta_values(self) -> np.ndarray:
        if self.theta_values is not None:
            return np.asarray(self.theta_values, dtype=float)
        lo, hi = self.theta_range if self.theta_range is not None else (-math.pi / 2, math.pi / 2)
        return _left_open(lo, hi, self.n_theta)


def _left_open(lo: float, hi: float, n: int) -> np.ndarray:
    if n < 1 or not lo < hi:
        raise ValueError(f"invalid grid ({lo}, {hi}] with {n} points")
    return lo + (hi - lo) * np.arange(1, n + 1) / n


@dataclass(frozen=True)
class SweepGrid:
    """Per-cell summaries; every layer is indexed ``[theta_index, tau_index]``."""

    delta_tau_values: np.ndarray
    delta_theta_values: np.ndarray
    rmse: np.ndarray
    bias_norm: np.ndarray
    cos2: np.ndarray
    kmin: np.ndarray
    objective: np.ndarray
    unstable: np.ndarray
    fim_min_eig: np.ndarray
    efim_gap_min_eig: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.rmse.shape

    def cell(self, i_theta: int, i_tau: int) -> dict:
        return {
            "delta_tau": float(self.delta_tau_values[i_tau]),
            "delta_theta": float(self.delta_theta_values[i_theta]),
            "rmse": float(self.rmse[i_theta, i_tau]),
            "bias_norm": float(self.bias_norm[i_theta, i_tau]),
            "cos2": float(self.cos2[i_theta, i_tau]),
            "kmin": int(self.kmin[i_theta, i_tau]),
            "objective": float(self.objective[i_theta, i_tau]),
        }


def sweep(
    scenario: Scenario,
    cfg: SystemConfig,
    grid_spec: GridSpec | None = None,
    ctx: BoundContext | None = None,
) -> SweepGrid:
    grid_spec = grid_spec or GridSpec()
    ctx = ctx or BoundContext.build(scenario, cfg)
    taus = grid_spec.delta_tau_values(ctx.cfg)
    thetas = grid_spec.delta_theta_values()
    shape = (thetas.size, taus.size)
    layers = {name: np.full(shape, math.nan) for name in
              ("rmse", "bias_norm", "cos2", "objective", "fim_min_eig", "efim_gap_min_eig")}
    kmin = np.zeros(shape, dtype=int)
    unstable = np.zeros(shape, dtype=bool)
    for i, dth in enumerate(thetas):
        for j, dtau in enumerate(taus):
            rep = evaluate(ctx, SpoofShift(float(dtau), float(dth)))
            kmin[i, j] = rep.kmin
            unstable[i, j] = rep.unstable
            layers["rmse"][i, j] = rep.rmse
            layers["bias_norm"][i, j] = rep.bias_norm
            layers["cos2"][i, j] = rep.cos2
            layers["objective"][i, j] = rep.objective
            if rep.fim is not None:
                layers["fim_min_eig"][i, j] = min_eig_ratio(rep.fim)
            if rep.efim is not None:
                j1 = partition(rep.fim)[0]
                layers["efim_gap_min_eig"][i, j] = min_eig_ratio(j1 - rep.efim)
    return SweepGrid(taus, thetas, kmin=kmin, unstable=unstable, **layers)


def optimize_delta_tau(
    scenario: Scenario,
    cfg: SystemConfig,
    delta_theta: float,
    grid: Sequence[float],
    ctx: BoundContext | None = None,
) -> tuple[float, float]:
    """Grid maximiser of C2 tau_kmin^2 / cos^2 + ||p_bar - p||^2 over delta_tau.

    Singular points (unbounded objective) are skipped; ties go to the smaller
    delta_tau.
    """
    if len(grid) == 0:
        raise ValueError("empty delta_tau grid")
    ctx = ctx or BoundContext.build(scenario, cfg)
    best: tuple[float, float] | None = None
    for dtau in sorted(float(t) for t in grid):
        rep = evaluate(ctx, SpoofShift(dtau, delta_theta))
        value = rep.objective
        if rep.closed_form is None or rep.closed_form.unstable or not math.isfinite(value):
            continue
        if best is None or value > best[1]:
            best = (dtau, value)
    if best is None:
        raise NoFeasiblePointError(f"every delta_tau is singular at delta_theta={delta_theta}")
    return best


def kmin_regions(ctx: BoundContext, taus: Sequence[float]) -> dict[int, list[float]]:
    """Delay shifts grouped by which path becomes the apparent LOS."""
    regions: dict[int, list[float]] = {}
    for dtau in taus:
        shifted = ctx.shifted(SpoofShift(float(dtau), 0.0))
        regions.setdefault(kmin_index(shifted), []).append(float(dtau))
    return regions


@dataclass(frozen=True)
class DesignChoice:
    shift: SpoofShift
    kmin: int
    objective: float
    singular_member: float
    singular: bool


def choose_shift(
    ctx: BoundContext, grid_spec: GridSpec | None = None, allow_singular: bool = False
) -> DesignChoice:
    """Pick (delta_tau, delta_theta) following the closed-form design rules.

    For each apparent-LOS path k reachable on the delay grid, delta_theta is
    the angle grid point nearest the singular member for theta*_k that is not
    itself singular (or the member itself with ``allow_singular``). The delay
    shift then maximises the closed-form objective; the best k wins.
    """
    grid_spec = grid_spec or GridSpec()
    taus = grid_spec.delta_tau_values(ctx.cfg)
    thetas = grid_spec.delta_theta_values()
    best: DesignChoice | None = None
    for k, region in sorted(kmin_regions(ctx, taus).items()):
        member = delta_theta_singular_set(float(ctx.true_paths.aod[k]))[0]
        if allow_singular:
            candidates = []
            for dtau in region:
                rep = evaluate(ctx, SpoofShift(dtau, member))
                if rep.closed_form is not None:
                    candidates.append((rep.closed_form.bias_sq, -dtau))
            if not candidates:
                continue
            bias_sq, neg_tau = max(candidates)
            choice = DesignChoice(SpoofShift(-neg_tau, member), k, math.inf, member, True)
            if best is None or bias_sq > _bias_key(ctx, best):
                best = choice
            continue
        order = np.argsort(np.abs(thetas - member), kind="stable")
        for idx in order:
            dth = float(thetas[idx])
            if _apparent_los_cos2(ctx, k, dth) < COS2_FLOOR:
                continue
            try:
                dtau, obj = optimize_delta_tau(ctx.scenario, ctx.cfg, dth, taus, ctx=ctx)
            except NoFeasiblePointError:
                continue
            choice = DesignChoice(SpoofShift(dtau, dth), k, obj, member, False)
            if best is None or obj > best.objective:
                best = choice
            break
    if best is None:
        raise NoFeasiblePointError("no feasible shift on the grid")
    return best


def _apparent_los_cos2(ctx: BoundContext, k: int, delta_theta: float) -> float:
    wrapped = wrapped_sine(math.sin(ctx.true_paths.aod[k]) + math.sin(delta_theta))
    return math.cos(math.asin(wrapped)) ** 2


def _bias_key(ctx: BoundContext, choice: DesignChoice) -> float:
    rep = evaluate(ctx, choice.shift)
    return rep.closed_form.bias_sq if rep.closed_form is not None else -math.inf
