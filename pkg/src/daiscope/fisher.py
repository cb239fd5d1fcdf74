"""Fisher information over channel parameters and its geometric pull-back.

Parameter layout (grouped by kind, K+1 paths)::

    xi  = [tau_0..tau_K, theta_0..theta_K, Re g_0..Re g_K, Im g_0..Im g_K]
    eta = xi[:2(K+1)]

Always index through :class:`Layout`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import DegenerateGeometryError, path_sources
from .linalg import SingularMatrixError, inv_spd
from .signal_model import PilotSet, SystemConfig, VirtualChannelParams, path_terms


@dataclass(frozen=True)
class Layout:
    n_paths: int

    @property
    def n_eta(self) -> int:
        return 2 * self.n_paths

    @property
    def n_xi(self) -> int:
        return 4 * self.n_paths

    @property
    def tau(self) -> slice:
        return slice(0, self.n_paths)

    @property
    def theta(self) -> slice:
        return slice(self.n_paths, 2 * self.n_paths)

    @property
    def gain_re(self) -> slice:
        return slice(2 * self.n_paths, 3 * self.n_paths)

    @property
    def gain_im(self) -> slice:
        return slice(3 * self.n_paths, 4 * self.n_paths)

    @property
    def eta(self) -> slice:
        return slice(0, self.n_eta)

    @property
    def nuisance(self) -> slice:
        return slice(self.n_eta, self.n_xi)

    def tau_index(self, k: int) -> int:
        return k

    def theta_index(self, k: int) -> int:
        return self.n_paths + k

    def path_of(self, index: int) -> int:
        """Path that parameter ``index`` belongs to."""
        return index % self.n_paths

    def eta_block(self, k: int) -> list[int]:
        """eta indices [tau_k, theta_k] of path k."""
        return [self.tau_index(k), self.theta_index(k)]


class SingularNuisanceError(SingularMatrixError):
    pass


def response_gradients(
    vc: VirtualChannelParams, pilots: PilotSet, cfg: SystemConfig
) -> np.ndarray:
    """Analytic d u^(g,n) / d xi for every (g, n); shape (G, N, 4(K+1))."""
    lay = Layout(len(vc.paths))
    delay, beam, dbeam = path_terms(vc, pilots, cfg)
    n = np.arange(cfg.n_subcarriers)
    base = delay[None, :, :] * beam
    out = np.empty(base.shape[:2] + (lay.n_xi,), dtype=complex)
    out[..., lay.tau] = (-2j * math.pi * n / cfg.n_ts)[None, :, None] * vc.gains * base
    out[..., lay.theta] = vc.gains * delay[None, :, :] * dbeam
    out[..., lay.gain_re] = base
    out[..., lay.gain_im] = 1j * base
    return out


def response_gradient(
    vc: VirtualChannelParams, pilots: PilotSet, cfg: SystemConfig, g: int, n: int
) -> np.ndarray:
    return response_gradients(vc, pilots, cfg)[g, n]


def compute_fim(
    vc: VirtualChannelParams, pilots: PilotSet, cfg: SystemConfig, sigma2: float
) -> np.ndarray:
    """J_xi = (2 / sigma^2) sum_{g,n} Re{ (du/dxi)^H du/dxi }."""
    if not sigma2 > 0:
        raise ValueError("noise variance must be positive")
    d = response_gradients(vc, pilots, cfg).reshape(-1, 4 * len(vc.paths))
    fim = (2.0 / sigma2) * np.real(d.conj().T @ d)
    return 0.5 * (fim + fim.T)


def partition(fim: np.ndarray):
    """Split J_xi into (J1, J2, J3, J4) with J4 the gain block."""
    h = fim.shape[0] // 2
    return fim[:h, :h], fim[:h, h:], fim[h:, :h], fim[h:, h:]


def compute_efim(fim: np.ndarray) -> np.ndarray:
    """Schur complement of the gain block: J1 - J2 J4^-1 J3."""
    j1, j2, j3, j4 = partition(np.asarray(fim, dtype=float))
    try:
        j4_inv = inv_spd(j4, "gain block J4")
    except SingularMatrixError as exc:
        raise SingularNuisanceError(exc.name, exc.detail) from exc
    efim = j1 - j2 @ j4_inv @ j3
    return 0.5 * (efim + efim.T)


def block_diagonalize(efim: np.ndarray) -> np.ndarray:
    """Zero every cross-path entry of an EFIM, keeping each path's 2x2 block."""
    lay = Layout(efim.shape[0] // 2)
    out = np.zeros_like(efim)
    for k in range(lay.n_paths):
        idx = np.ix_(lay.eta_block(k), lay.eta_block(k))
        out[idx] = efim[idx]
    return out


def _source_rows(alice, eve, scatterers, c, src):
    # rows (d tau / d phi, d theta / d phi) for one geometric source
    n_loc = 2 * (len(scatterers) + 1)
    d_tau = np.zeros(n_loc)
    d_theta = np.zeros(n_loc)
    if src == 0:
        w = eve - alice
        r = math.hypot(*w)
        if r == 0:
            raise DegenerateGeometryError("Alice and Eve coincide")
        d_tau[0:2] = -w / (c * r)
        d_theta[0:2] = [w[1] / r**2, -w[0] / r**2]
        return d_tau, d_theta
    v = scatterers[src - 1]
    e = v - alice
    f = v - eve
    re, rf = math.hypot(*e), math.hypot(*f)
    if re == 0 or rf == 0:
        raise DegenerateGeometryError(f"scatterer slot {src} coincides with Alice or Eve")
    cols = slice(2 * src, 2 * src + 2)
    d_tau[0:2] = -e / (c * re)
    d_tau[cols] = (e / re + f / rf) / c
    grad_v = np.array([-e[1], e[0]]) / re**2
    d_theta[cols] = grad_v
    d_theta[0:2] = -grad_v
    return d_tau, d_theta


def geometry_jacobian(
    alice,
    eve,
    scatterers: Sequence,
    c: float,
    los_path: int = 0,
) -> np.ndarray:
    """d eta / d phi of the planar forward map, rows in path-label order.

    ``los_path`` is the label carried by the Alice-Eve line (see
    :func:`daiscope.geometry.path_sources`).
    """
    alice = np.asarray(alice, dtype=float)
    eve = np.asarray(eve, dtype=float)
    scatterers = [np.asarray(v, dtype=float) for v in scatterers]
    lay = Layout(len(scatterers) + 1)
    jac = np.zeros((lay.n_eta, lay.n_eta))
    for label, src in enumerate(path_sources(lay.n_paths, los_path)):
        d_tau, d_theta = _source_rows(alice, eve, scatterers, c, src)
        jac[lay.tau_index(label)] = d_tau
        jac[lay.theta_index(label)] = d_theta
    return jac


def location_jacobian(pseudo, eve, cfg: SystemConfig) -> np.ndarray:
    """Jacobian of the misspecified geometric map at the pseudo-true locations."""
    return geometry_jacobian(
        pseudo.alice.as_array(),
        _as_array(eve),
        [v.as_array() for v in pseudo.scatterers],
        cfg.light_speed,
        los_path=pseudo.kmin,
    )


def _as_array(p) -> np.ndarray:
    return p.as_array() if hasattr(p, "as_array") else np.asarray(p, dtype=float)


def cross_path_coherence(fim: np.ndarray) -> float:
    """Largest normalized |J[a, b]| over parameter pairs of different paths."""
    lay = Layout(fim.shape[0] // 4)
    if lay.n_paths < 2:
        return 0.0
    path = np.array([lay.path_of(i) for i in range(lay.n_xi)])
    cross = path[:, None] != path[None, :]
    d = np.sqrt(np.abs(np.diag(fim)))
    denom = np.outer(d, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denom > 0, np.abs(fim) / denom, 0.0)
    return float(np.max(ratio[cross]))


def orthogonality_residual(
    vc: VirtualChannelParams, pilots: PilotSet, cfg: SystemConfig, sigma2: float
) -> float:
    """0 when paths are exactly orthogonal in the FIM sense."""
    if len(vc.paths) < 2:
        return 0.0
    return cross_path_coherence(compute_fim(vc, pilots, cfg, sigma2))
