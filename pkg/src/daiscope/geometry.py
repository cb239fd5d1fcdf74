"""Planar geometry: positions, the TOA/AOD forward map, and delay-angle shifting.

Units follow the rest of the package: meters, microseconds, radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np


class GeometryError(ValueError):
    """Base class for invalid or degenerate geometry."""


class DegenerateGeometryError(GeometryError):
    """Two points that must be distinct coincide."""


class InvalidIntervalError(ValueError):
    pass


@dataclass(frozen=True)
class Position2D:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite position ({self.x}, {self.y})")

    @classmethod
    def from_any(cls, value) -> "Position2D":
        if isinstance(value, Position2D):
            return value
        x, y = value
        return cls(float(x), float(y))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class PathParams:
    """TOA (microseconds) and AOD (radians) of a single path."""

    toa: float
    aod: float


@dataclass(frozen=True)
class Paths:
    """TOAs and AODs of all K+1 paths, index 0 being the LOS path.

    Iterating yields one :class:`PathParams` per path.
    """

    toa: np.ndarray
    aod: np.ndarray

    def __post_init__(self) -> None:
        toa = np.asarray(self.toa, dtype=float).reshape(-1)
        aod = np.asarray(self.aod, dtype=float).reshape(-1)
        if toa.shape != aod.shape or toa.size == 0:
            raise ValueError("toa and aod must be nonempty and of equal length")
        toa.setflags(write=False)
        aod.setflags(write=False)
        object.__setattr__(self, "toa", toa)
        object.__setattr__(self, "aod", aod)

    @classmethod
    def from_list(cls, params: Sequence[PathParams]) -> "Paths":
        return cls([p.toa for p in params], [p.aod for p in params])

    def __len__(self) -> int:
        return self.toa.size

    def __getitem__(self, k: int) -> PathParams:
        return PathParams(float(self.toa[k]), float(self.aod[k]))

    def __iter__(self) -> Iterator[PathParams]:
        for k in range(len(self)):
            yield self[k]

    @property
    def n_paths(self) -> int:
        return len(self)

    def as_eta(self) -> np.ndarray:
        """Location-relevant vector [toa_0..toa_K, aod_0..aod_K]."""
        return np.concatenate([self.toa, self.aod])


@dataclass(frozen=True)
class SpoofShift:
    delta_tau: float = 0.0
    delta_theta: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta_tau) and math.isfinite(self.delta_theta)):
            raise ValueError("spoofing shift must be finite")


@dataclass(frozen=True)
class Scenario:
    """True positions of Alice, Eve and the K scatterers plus the K+1 path gains."""

    alice: Position2D
    eve: Position2D
    scatterers: tuple[Position2D, ...] = ()
    gains: np.ndarray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "alice", Position2D.from_any(self.alice))
        object.__setattr__(self, "eve", Position2D.from_any(self.eve))
        object.__setattr__(
            self, "scatterers", tuple(Position2D.from_any(v) for v in self.scatterers)
        )
        if self.gains is None:
            gains = np.ones(self.n_paths, dtype=complex)
        else:
            gains = np.array(self.gains, dtype=complex).reshape(-1)
        if gains.size != self.n_paths:
            raise ValueError(
                f"expected {self.n_paths} gains for K={self.n_scatterers}, got {gains.size}"
            )
        if np.any(gains == 0) or not np.all(np.isfinite(gains)):
            raise ValueError("all path gains must be finite and nonzero")
        gains.setflags(write=False)
        object.__setattr__(self, "gains", gains)

        p, z = self.alice.as_array(), self.eve.as_array()
        if np.linalg.norm(z - p) == 0:
            raise DegenerateGeometryError("Alice and Eve coincide")
        for k, v in enumerate(self.scatterers, start=1):
            va = v.as_array()
            if np.linalg.norm(va - p) == 0 or np.linalg.norm(va - z) == 0:
                raise DegenerateGeometryError(f"scatterer {k} coincides with Alice or Eve")

    @property
    def n_scatterers(self) -> int:
        return len(self.scatterers)

    @property
    def n_paths(self) -> int:
        return len(self.scatterers) + 1

    def location_vector(self) -> np.ndarray:
        """phi = [p_x, p_y, v_1x, v_1y, ..., v_Kx, v_Ky]."""
        pts = [self.alice] + list(self.scatterers)
        return np.array([c for q in pts for c in (q.x, q.y)], dtype=float)

    def with_gains(self, gains) -> "Scenario":
        return Scenario(self.alice, self.eve, self.scatterers, gains)


def _strict_floor(q: float) -> float:
    # largest integer strictly less than q
    return math.ceil(q) - 1.0


def wrap_halfopen(x: float, t1: float, t2: float) -> float:
    """Reduce ``x`` into the half-open interval ``(t1, t2]``.

    Uses ``x - floor*((x - t1)/(t2 - t1)) * (t2 - t1)`` with ``floor*`` the
    largest integer strictly below its argument, so ``t2`` maps to itself and
    ``t1`` maps to ``t2``.
    """
    if not t1 < t2:
        raise InvalidIntervalError(f"need t1 < t2, got ({t1}, {t2}]")
    period = t2 - t1
    return x - _strict_floor((x - t1) / period) * period


def bearing(dx: float, dy: float) -> float:
    """Principal-branch arctan(dy/dx) reduced to (-pi/2, pi/2]."""
    if dx == 0.0:
        if dy == 0.0:
            raise DegenerateGeometryError("bearing of a zero vector")
        return math.pi / 2
    theta = math.atan(dy / dx)
    if theta <= -math.pi / 2:
        theta += math.pi
    return theta


def path_geometry(
    alice: np.ndarray, eve: np.ndarray, scatterers: Sequence[np.ndarray], c: float
) -> Paths:
    """Forward map from positions to (TOA, AOD), LOS first."""
    alice = np.asarray(alice, dtype=float)
    eve = np.asarray(eve, dtype=float)
    los = eve - alice
    dist = float(np.hypot(*los))
    if dist == 0.0:
        raise DegenerateGeometryError("Alice and Eve coincide")
    toa = [dist / c]
    aod = [bearing(los[0], los[1])]
    for k, v in enumerate(scatterers, start=1):
        v = np.asarray(v, dtype=float)
        a = float(np.hypot(*(v - alice)))
        b = float(np.hypot(*(v - eve)))
        if a == 0.0 or b == 0.0:
            raise DegenerateGeometryError(f"scatterer {k} coincides with Alice or Eve")
        toa.append((a + b) / c)
        aod.append(bearing(v[0] - alice[0], v[1] - alice[1]))
    return Paths(toa, aod)


def forward_geometry(scenario: Scenario, c: float) -> Paths:
    return path_geometry(
        scenario.alice.as_array(),
        scenario.eve.as_array(),
        [v.as_array() for v in scenario.scatterers],
        c,
    )


def apply_shift(params: Paths, shift: SpoofShift, n_ts: float) -> Paths:
    """Shift every TOA by ``delta_tau`` and every AOD sine by ``sin(delta_theta)``.

    Delays wrap into (0, n_ts]; sines wrap into (-1, 1].
    """
    if not n_ts > 0:
        raise InvalidIntervalError("N*Ts must be positive")
    if shift.delta_tau == 0.0 and shift.delta_theta == 0.0:
        return params
    s = math.sin(shift.delta_theta)
    toa = [wrap_halfopen(t + shift.delta_tau, 0.0, n_ts) for t in params.toa]
    aod = [math.asin(wrapped_sine(math.sin(a) + s)) for a in params.aod]
    return Paths(toa, aod)


def wrapped_sine(x: float) -> float:
    """``x`` wrapped into (-1, 1]; rounding can land one ulp past 1, so clamp."""
    return min(wrap_halfopen(x, -1.0, 1.0), 1.0)


def kmin_index(shifted: Paths) -> int:
    """Index of the smallest shifted TOA; the lowest index wins ties."""
    return int(np.argmin(shifted.toa))


def path_sources(n_paths: int, los_path: int = 0) -> list[int]:
    """Geometric source of each path label when path ``los_path`` is taken as LOS.

    Entry ``j`` is 0 for the Alice-Eve line and ``s >= 1`` for scatterer slot
    ``s``. Taking path ``k`` as LOS swaps labels 0 and ``k``; the remaining
    paths keep their own slots.
    """
    if not 0 <= los_path < n_paths:
        raise IndexError(f"LOS path {los_path} out of range for {n_paths} paths")
    src = list(range(n_paths))
    src[0], src[los_path] = src[los_path], src[0]
    return src


def labelled_geometry(
    alice: np.ndarray,
    eve: np.ndarray,
    scatterers: Sequence[np.ndarray],
    c: float,
    los_path: int = 0,
) -> Paths:
    """Forward map in path-label order, with label ``los_path`` on the
    Alice-Eve line (see :func:`path_sources`)."""
    base = path_geometry(alice, eve, scatterers, c)
    src = path_sources(len(base), los_path)
    return Paths(base.toa[src], base.aod[src])
