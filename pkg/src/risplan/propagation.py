"""Deterministic channel synthesis: free-space legs, walls, array steering.

Two regimes, chosen to match how each link is used:

* Base station arrays are far-field: one exact distance from the array
  reference position sets amplitude, carrier phase and delay, and a
  plane-wave steering phasor exp(-j 2 pi offset sin(theta) / lambda)
  distinguishes the antennas.
* The switchable surface is near-field: every element gets its own exact
  two-leg distance, so the wavefront curvature across the aperture is kept.

A ray's amplitude is lambda / (4 pi d) times the wall penetration factor;
walls attenuate, never block. Subcarrier n multiplies a path by
exp(-j 2 pi n spacing delay), n = 0 .. N-1. Speed of light is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CoincidentNodeError, RunError
from .scene import BaseStation, Scene

C_LIGHT_M_S = 299_792_458.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(value: float) -> float:
    if value <= 0.0:
        return -math.inf
    return 10.0 * math.log10(value)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0.0:
        return -math.inf
    return 10.0 * math.log10(watts) + 30.0


def element_positions(
    center, count: int, spacing_m: float, orientation_rad: float = 0.0
) -> np.ndarray:
    """Centred uniform line of elements in the xy-plane, (count, 3)."""
    center = np.asarray(center, dtype=float)
    axis = np.array([math.cos(orientation_rad), math.sin(orientation_rad), 0.0])
    offsets = (np.arange(count) - (count - 1) / 2.0) * spacing_m
    return center[None, :] + offsets[:, None] * axis[None, :]


def bs_antenna_positions(scene: Scene, bs: BaseStation) -> np.ndarray:
    return element_positions(
        bs.position_m, bs.antenna_count, scene.bs_spacing_m(bs), bs.orientation_rad
    )


def surface_element_positions(scene: Scene) -> np.ndarray:
    if scene.ris is None:
        raise RunError("scene has no surface")
    return element_positions(
        scene.ris.position_m,
        scene.ris.element_count,
        scene.ris_spacing_m(),
        scene.ris.orientation_rad,
    )


def fspl_amplitude(distance_m: float, f_hz: float) -> float:
    """Free-space amplitude lambda / (4 pi d)."""
    if distance_m <= 0.0:
        raise CoincidentNodeError(f"zero-length ray (distance {distance_m})")
    return C_LIGHT_M_S / f_hz / (4.0 * math.pi * distance_m)


def _ccw(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(ax, ay, bx, by, px, py):
    # assumes p collinear with a-b
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def _segments_cross(ax, ay, bx, by, cx, cy, dx, dy) -> bool:
    d1 = _ccw(cx, cy, dx, dy, ax, ay)
    d2 = _ccw(cx, cy, dx, dy, bx, by)
    d3 = _ccw(ax, ay, bx, by, cx, cy)
    d4 = _ccw(ax, ay, bx, by, dx, dy)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True
    if d1 == 0 and _on_segment(cx, cy, dx, dy, ax, ay):
        return True
    if d2 == 0 and _on_segment(cx, cy, dx, dy, bx, by):
        return True
    if d3 == 0 and _on_segment(ax, ay, bx, by, cx, cy):
        return True
    if d4 == 0 and _on_segment(ax, ay, bx, by, dx, dy):
        return True
    return False


def wall_attenuation(p1, p2, walls) -> float:
    """Linear amplitude factor <= 1 for the p1 -> p2 ray in the xy-plane.

    Each wall segment the ray crosses, touches at an endpoint, or overlaps
    collinearly contributes its penetration loss exactly once.
    """
    factor = 1.0
    ax, ay = float(p1[0]), float(p1[1])
    bx, by = float(p2[0]), float(p2[1])
    for wall in walls:
        if _segments_cross(
            ax, ay, bx, by, wall.p1_m[0], wall.p1_m[1], wall.p2_m[0], wall.p2_m[1]
        ):
            factor *= 10.0 ** (-wall.penetration_loss_db / 20.0)
    return factor


@dataclass(frozen=True)
class DirectChannel:
    """Far-field view of one base station array from one point.

    All antennas share one delay; gains fold amplitude, wall factor,
    carrier phase and the plane-wave steering phasor.
    """

    gains: np.ndarray  # (A,) complex
    delay_s: float
    distance_m: float

    @property
    def antenna_count(self) -> int:
        return self.gains.shape[0]

    def at_subcarriers(self, count: int, spacing_hz: float) -> np.ndarray:
        """(count, A) frequency-domain response."""
        phases = np.exp(-2j * math.pi * spacing_hz * self.delay_s * np.arange(count))
        return self.gains[None, :] * phases[:, None]


@dataclass(frozen=True)
class RisChannel:
    """Per-element two-leg rays, kept separate so phasing applies later.

    ``bs_to_elements[m]`` and ``elements_to_point[m]`` are the two Friis
    legs with exact per-element distances (near-field: no plane-wave
    shortcut across the aperture). ``bs_steering`` extends the cascade to
    a multi-antenna base station: the full per-antenna cascade is
    ``cascade(ch, phases) * bs_steering``.
    """

    bs_to_elements: np.ndarray  # (M,) complex
    elements_to_point: np.ndarray  # (M,) complex
    element_delays_s: np.ndarray  # (M,) two-leg delays
    element_positions_m: np.ndarray  # (M, 3)
    element_to_point_m: np.ndarray  # (M,) second-leg distances
    bs_steering: np.ndarray  # (A,) unit-magnitude phasors toward the surface
    efficiency: float

    @property
    def element_count(self) -> int:
        return self.bs_to_elements.shape[0]

    @property
    def hop_products(self) -> np.ndarray:
        """(M,) per-element cascade gains before phasing."""
        return self.efficiency * self.bs_to_elements * self.elements_to_point


def _steering(scene: Scene, bs: BaseStation, target) -> np.ndarray:
    """Plane-wave phasors of the array toward a far target, (A,)."""
    center = np.asarray(bs.position_m, dtype=float)
    direction = np.asarray(target, dtype=float) - center
    dist = float(np.linalg.norm(direction))
    if dist == 0.0:
        raise CoincidentNodeError(
            f"target coincides with the base station at {bs.position_m}"
        )
    axis = np.array(
        [math.cos(bs.orientation_rad), math.sin(bs.orientation_rad), 0.0]
    )
    sin_theta = float(axis @ direction) / dist
    offsets = (
        np.arange(bs.antenna_count) - (bs.antenna_count - 1) / 2.0
    ) * scene.bs_spacing_m(bs)
    return np.exp(-2j * math.pi * offsets * sin_theta / scene.wavelength_m)


def direct_channel(scene: Scene, bs_index: int, point) -> DirectChannel:
    bs = scene.bs[bs_index]
    center = np.asarray(bs.position_m, dtype=float)
    point = np.asarray(point, dtype=float)
    dist = float(np.linalg.norm(point - center))
    if dist == 0.0:
        raise CoincidentNodeError(f"point coincides with the base station at {bs.position_m}")
    amp = fspl_amplitude(dist, scene.carrier_hz) * wall_attenuation(
        center, point, scene.walls
    )
    carrier = amp * np.exp(-2j * math.pi * dist / scene.wavelength_m)
    return DirectChannel(
        gains=carrier * _steering(scene, bs, point),
        delay_s=dist / C_LIGHT_M_S,
        distance_m=dist,
    )


def _leg(scene: Scene, elems: np.ndarray, endpoint) -> tuple[np.ndarray, np.ndarray]:
    """(M,) complex gains and (M,) distances from each element to endpoint."""
    endpoint = np.asarray(endpoint, dtype=float)
    diffs = elems - endpoint[None, :]
    dists = np.sqrt(np.sum(diffs * diffs, axis=1))
    if np.any(dists == 0.0):
        m = int(np.argmin(dists))
        raise CoincidentNodeError(
            f"point {endpoint.tolist()} coincides with surface element {m}"
        )
    lam = scene.wavelength_m
    amps = lam / (4.0 * math.pi * dists)
    if scene.walls:
        for m in range(elems.shape[0]):
            amps[m] *= wall_attenuation(elems[m], endpoint, scene.walls)
    return amps * np.exp(-2j * math.pi * dists / lam), dists


def ris_channel(scene: Scene, bs_index: int, point) -> RisChannel:
    if scene.ris is None:
        raise RunError("scene has no surface")
    bs = scene.bs[bs_index]
    elems = surface_element_positions(scene)
    leg1, d1 = _leg(scene, elems, bs.position_m)
    leg2, d2 = _leg(scene, elems, point)
    return RisChannel(
        bs_to_elements=leg1,
        elements_to_point=leg2,
        element_delays_s=(d1 + d2) / C_LIGHT_M_S,
        element_positions_m=elems,
        element_to_point_m=d2,
        bs_steering=_steering(scene, bs, scene.ris.position_m),
        efficiency=scene.ris.element_efficiency,
    )


def cascade(ris_ch: RisChannel, phases) -> complex:
    """Scalar cascade sum_m hop_m exp(j phi_m); linear in every hop."""
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (ris_ch.element_count,):
        raise ValueError(
            f"expected {ris_ch.element_count} phases, got shape {phases.shape}"
        )
    return complex(np.sum(ris_ch.hop_products * np.exp(1j * phases)))
