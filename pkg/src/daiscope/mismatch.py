"""Misspecified-model bounds on Eve's localization.

Eve fits the unshifted planar geometry to shifted delays and angles. The
pseudo-true locations solve that fit exactly, so the generalized information
matrices collapse to ``B = -A`` and the bound is the pseudo-true CRB plus the
squared geometric bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fisher import Layout, location_jacobian
from .geometry import (
    DegenerateGeometryError,
    GeometryError,
    Paths,
    Position2D,
    Scenario,
    kmin_index,
    labelled_geometry,
    path_sources,
)
from .linalg import COND_LIMIT, SingularMatrixError, inv_spd, scaled_condition
from .signal_model import SystemConfig

ROUND_TRIP_RTOL = 1e-9
# cos^2 below this counts as exactly singular
COS2_FLOOR = 1e-12


class SingularGeometryError(GeometryError):
    """No finite pseudo-true scatterer location exists for this shift."""


class InternalInversionError(RuntimeError):
    """Pseudo-true locations failed to reproduce the shifted parameters."""


@dataclass(frozen=True)
class PseudoTrueLocations:
    """Locations Eve's misspecified model converges to.

    ``scatterers[s - 1]`` is slot ``s``; ``labels`` gives the path label that
    feeds each slot (slot ``kmin`` is fed by path 0 when ``kmin != 0``).
    """

    alice: Position2D
    scatterers: tuple[Position2D, ...]
    kmin: int
    b_values: tuple[float, ...]
    shifted: Paths = field(repr=False)

    @property
    def labels(self) -> list[int]:
        return path_sources(len(self.scatterers) + 1, self.kmin)[1:]

    def location_vector(self) -> np.ndarray:
        pts = [self.alice] + list(self.scatterers)
        return np.array([c for q in pts for c in (q.x, q.y)], dtype=float)


def _angle_gap(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # difference between line directions, i.e. modulo pi
    d = np.mod(a - b + math.pi / 2, math.pi) - math.pi / 2
    return np.abs(d)


def path_residual(model: Paths, target: Paths) -> np.ndarray:
    """eta(target) - eta(model) with angle differences taken modulo pi."""
    d_theta = np.mod(target.aod - model.aod + math.pi / 2, math.pi) - math.pi / 2
    return np.concatenate([target.toa - model.toa, d_theta])


def round_trip_error(model: Paths, target: Paths) -> float:
    """Relative discrepancy between two path sets (max over TOA and AOD parts)."""
    toa = np.max(np.abs(model.toa - target.toa)) / max(np.max(np.abs(target.toa)), 1e-300)
    aod = np.max(_angle_gap(model.aod, target.aod)) / max(np.max(np.abs(target.aod)), 1.0)
    return float(max(toa, aod))


def pseudo_true_locations(shifted: Paths, eve, c: float) -> PseudoTrueLocations:
    """Closed-form inverse of the planar geometry applied to shifted parameters."""
    z = eve.as_array() if hasattr(eve, "as_array") else np.asarray(eve, dtype=float)
    kmin = kmin_index(shifted)
    ranges = c * shifted.toa
    dirs = np.stack([np.cos(shifted.aod), np.sin(shifted.aod)], axis=1)
    p_bar = z - ranges[kmin] * dirs[kmin]
    w = z - p_bar
    w2 = float(w @ w)

    src = path_sources(len(shifted), kmin)
    scatterers = []
    b_values = []
    for slot in range(1, len(shifted)):
        j = src[slot]
        den = ranges[j] - float(w @ dirs[j])
        if abs(den) <= 1e-12 * max(ranges[j], 1.0):
            raise SingularGeometryError(f"path {j} is collinear with the apparent LOS path")
        b = (ranges[j] ** 2 - w2) / den
        b_values.append(float(b))
        v = p_bar + 0.5 * b * dirs[j]
        scatterers.append(Position2D(float(v[0]), float(v[1])))

    pseudo = PseudoTrueLocations(
        alice=Position2D(float(p_bar[0]), float(p_bar[1])),
        scatterers=tuple(scatterers),
        kmin=kmin,
        b_values=tuple(b_values),
        shifted=shifted,
    )
    try:
        model = misspecified_paths(pseudo, z, c)
    except DegenerateGeometryError as exc:
        raise SingularGeometryError(str(exc)) from exc
    err = round_trip_error(model, shifted)
    if not err <= ROUND_TRIP_RTOL:
        raise InternalInversionError(f"round-trip relative error {err:.3g}")
    return pseudo


def misspecified_paths(pseudo: PseudoTrueLocations, eve, c: float) -> Paths:
    """Eve's model o(phi) evaluated at the pseudo-true locations, label order."""
    z = eve.as_array() if hasattr(eve, "as_array") else np.asarray(eve, dtype=float)
    return labelled_geometry(
        pseudo.alice.as_array(),
        z,
        [v.as_array() for v in pseudo.scatterers],
        c,
        los_path=pseudo.kmin,
    )


def location_fim(pseudo: PseudoTrueLocations, efim: np.ndarray, eve, cfg: SystemConfig):
    """Pull the EFIM back to location coordinates: Pi^T J_eta Pi."""
    jac = location_jacobian(pseudo, eve, cfg)
    fim = jac.T @ efim @ jac
    return 0.5 * (fim + fim.T), jac


def generalized_fim_a(pseudo, efim, eve, cfg: SystemConfig) -> np.ndarray:
    """Expected Hessian of Eve's log-likelihood at the pseudo-true point.

    The curvature term vanishes because o(phi_bar) reproduces eta_bar exactly.
    """
    fim, _ = location_fim(pseudo, efim, eve, cfg)
    return -fim


def generalized_fim_b(pseudo, efim, eve, cfg: SystemConfig, target: Paths | None = None):
    """Expected outer product of Eve's score at the pseudo-true point.

    ``target`` is the true (shifted) parameter set; the residual between it and
    Eve's model enters as a rank-one term, so ``B = -A`` only when the
    round trip is exact.
    """
    fim, jac = location_fim(pseudo, efim, eve, cfg)
    if target is None:
        return fim
    model = misspecified_paths(pseudo, eve, cfg.light_speed)
    g = jac.T @ efim @ path_residual(model, target)
    return fim + np.outer(g, g)


@dataclass(frozen=True)
class McrbResult:
    psi: np.ndarray
    estimation_part: np.ndarray
    bias_part: np.ndarray
    rmse_eve: float
    unstable: bool = False
    reason: str | None = None


def _assemble(estimation, bias_vec, unstable, reason) -> McrbResult:
    bias_part = np.outer(bias_vec, bias_vec)
    psi = estimation + bias_part
    result = McrbResult(psi, estimation, bias_part, math.inf, unstable, reason)
    return McrbResult(psi, estimation, bias_part, eve_rmse(result), unstable, reason)


def _unstable_estimation(n: int) -> np.ndarray:
    est = np.zeros((n, n))
    np.fill_diagonal(est, math.inf)
    return est


def mcrb(
    pseudo: PseudoTrueLocations, efim: np.ndarray, scenario: Scenario, cfg: SystemConfig
) -> McrbResult:
    """Psi = J_phi_bar^-1 + (phi_bar - phi)(phi_bar - phi)^T."""
    fim, _ = location_fim(pseudo, efim, scenario.eve, cfg)
    bias = pseudo.location_vector() - scenario.location_vector()
    try:
        estimation = inv_spd(fim, "pseudo-true location FIM")
    except SingularMatrixError as exc:
        return _assemble(_unstable_estimation(fim.shape[0]), bias, True, str(exc))
    return _assemble(estimation, bias, False, None)


def mcrb_sandwich(
    pseudo: PseudoTrueLocations,
    efim: np.ndarray,
    scenario: Scenario,
    cfg: SystemConfig,
    target: Paths | None = None,
) -> McrbResult:
    """General misspecified form A^-1 B A^-1 + bias, with A and B built separately."""
    a = generalized_fim_a(pseudo, efim, scenario.eve, cfg)
    b = generalized_fim_b(pseudo, efim, scenario.eve, cfg, target)
    bias = pseudo.location_vector() - scenario.location_vector()
    cond = scaled_condition(-a)
    if not cond < COND_LIMIT:
        reason = f"generalized FIM A ill-conditioned ({cond:.3g})"
        return _assemble(_unstable_estimation(a.shape[0]), bias, True, reason)
    a_inv = np.linalg.inv(a)
    estimation = a_inv @ b @ a_inv
    return _assemble(0.5 * (estimation + estimation.T), bias, False, None)


def eve_rmse(result: McrbResult) -> float:
    """sqrt(Psi[p_x, p_x] + Psi[p_y, p_y])."""
    if result.unstable:
        return math.inf
    total = result.psi[0, 0] + result.psi[1, 1]
    return math.sqrt(total) if math.isfinite(total) else math.inf


def alice_sensitivity(tau: float, theta: float, c: float) -> np.ndarray:
    """(d p_bar / d [tau, theta])^T for p_bar = z - c tau [cos, sin]; rows tau, theta."""
    return np.array(
        [
            [-c * math.cos(theta), -c * math.sin(theta)],
            [c * tau * math.sin(theta), -c * tau * math.cos(theta)],
        ]
    )


def closed_form_intermediate(
    pseudo: PseudoTrueLocations, efim_blockdiag: np.ndarray, scenario: Scenario, cfg: SystemConfig
) -> float:
    """Tr(T^T J_kmin^-1 T) + ||p_bar - p||^2 using only the apparent-LOS 2x2 block."""
    k = pseudo.kmin
    idx = Layout(len(pseudo.shifted)).eta_block(k)
    block = efim_blockdiag[np.ix_(idx, idx)]
    try:
        block_inv = inv_spd(block, f"EFIM block of path {k}")
    except SingularMatrixError:
        return math.inf
    t = alice_sensitivity(float(pseudo.shifted.toa[k]), float(pseudo.shifted.aod[k]), cfg.light_speed)
    bias = pseudo.alice.as_array() - scenario.alice.as_array()
    return float(np.trace(t.T @ block_inv @ t) + bias @ bias)


@dataclass(frozen=True)
class ClosedFormBound:
    value: float
    c1: float
    c2: float
    tau_kmin: float
    cos2_term: float
    bias_sq: float
    psi_slack: float = 0.0
    unstable: bool = False

    @property
    def design_objective(self) -> float:
        """Delay-dependent part maximised when choosing delta_tau."""
        if self.unstable:
            return math.inf
        return self.c2 * self.tau_kmin**2 / self.cos2_term + self.bias_sq


def closed_form_bound(
    pseudo: PseudoTrueLocations,
    scenario: Scenario,
    cfg: SystemConfig,
    sigma2: float,
    psi_slack: float = 0.0,
) -> ClosedFormBound:
    """Asymptotic closed form C1 + C2 tau^2 / cos^2(theta) + ||p_bar - p||^2."""
    if psi_slack < 0:
        raise ValueError("psi_slack must be non-negative")
    k = pseudo.kmin
    gain2 = abs(scenario.gains[k]) ** 2
    if gain2 == 0:
        raise ValueError(f"gain of path {k} is zero")
    n, g, nt = cfg.n_subcarriers, cfg.n_symbols, cfg.n_tx
    c, ts, lam, d = cfg.light_speed, cfg.ts, cfg.wavelength, cfg.antenna_spacing
    c1 = 3 * sigma2 * c**2 * n * ts**2 / (2 * g * gain2 * math.pi**2 * (n**2 - 1)) - psi_slack / g
    c2 = 3 * sigma2 * c**2 * lam**2 / (2 * g * gain2 * math.pi**2 * d**2 * n * (nt**2 - 1))
    tau = float(pseudo.shifted.toa[k])
    cos2 = math.cos(float(pseudo.shifted.aod[k])) ** 2
    bias = pseudo.alice.as_array() - scenario.alice.as_array()
    bias_sq = float(bias @ bias)
    if cos2 < COS2_FLOOR:
        return ClosedFormBound(math.inf, c1, c2, tau, cos2, bias_sq, psi_slack, True)
    value = c1 + c2 * tau**2 / cos2 + bias_sq
    return ClosedFormBound(value, c1, c2, tau, cos2, bias_sq, psi_slack, False)
