"""Per-point link metrics: equivalent gain, voice transmit power, spectral efficiency.

All three metrics share one channel evaluation per (base station, point)
pair. `equivalent_gain` reports the post-combining power gain averaged
over subcarriers; `required_tx_power` inverts the uplink voice budget;
`spectral_efficiency` rate-adapts at full power. Out-of-coverage points
are reported as NaN so the mapping layer can treat them uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .beamforming import GainTerms, optimize_gain, point_gain_terms
from .errors import CoincidentNodeError
from .scene import Scene

RIS_MODES = ("off", "optimized")


def _to_db(power_linear: float) -> float:
    return 10.0 * math.log10(power_linear) if power_linear > 0.0 else -math.inf


@dataclass(frozen=True)
class LinkBudget:
    """Resolved uplink budget: scene defaults plus the derived noise power."""

    target_snr_db: float
    max_tx_power_dbm: float
    min_tx_power_dbm: float
    noise_power_dbm: float
    se_max_bps_hz: float


def link_budget(scene: Scene) -> LinkBudget:
    lb = scene.link_budget
    return LinkBudget(
        target_snr_db=lb.target_snr_db,
        max_tx_power_dbm=lb.max_tx_power_dbm,
        min_tx_power_dbm=lb.min_tx_power_dbm,
        noise_power_dbm=scene.noise_power_dbm,
        se_max_bps_hz=lb.se_max_bps_hz,
    )


def _optimized_gain_linear(scene: Scene, terms: GainTerms) -> float:
    """Best quantized configuration, never worse than leaving the surface off."""
    if terms.b.shape[0] == 0:
        return terms.c0
    lookup = scene.ris.phase_lookup_rad
    return max(optimize_gain(terms, lookup).gain, terms.c0)


def _gain_pair_linear(scene: Scene, bs_index: int, point) -> tuple[float, float]:
    terms = point_gain_terms(scene, bs_index, point)
    return terms.c0, _optimized_gain_linear(scene, terms)


def equivalent_gain(scene: Scene, bs_index: int, point, ris_mode: str = "optimized") -> float:
    """Mean-subcarrier power gain in dB, NaN when the point sits on a node."""
    if ris_mode not in RIS_MODES:
        raise ValueError(f"ris_mode must be one of {RIS_MODES}, got {ris_mode!r}")
    try:
        off, best = _gain_pair_linear(scene, bs_index, point)
    except CoincidentNodeError:
        return math.nan
    value = off if ris_mode == "off" else best
    return _to_db(value)


def required_tx_power(gain_db: float, budget: LinkBudget) -> float:
    """Transmit power meeting the voice SNR target, NaN when out of coverage.

    The unclamped solution is pure dB arithmetic; a device cannot go below
    its minimum power, so low demands clamp up, while demands beyond the
    maximum mean the target is unattainable.
    """
    if math.isnan(gain_db):
        return math.nan
    p = budget.target_snr_db + budget.noise_power_dbm - gain_db
    if p > budget.max_tx_power_dbm:
        return math.nan
    return max(p, budget.min_tx_power_dbm)


def spectral_efficiency_from_gain(gain_db: float, budget: LinkBudget) -> float:
    """Shannon rate at full power, floored by the voice target and capped."""
    if math.isnan(gain_db):
        return math.nan
    snr_db = budget.max_tx_power_dbm + gain_db - budget.noise_power_dbm
    if snr_db < budget.target_snr_db:
        return math.nan
    se = math.log2(1.0 + 10.0 ** (snr_db / 10.0))
    return min(se, budget.se_max_bps_hz)


def spectral_efficiency(scene: Scene, bs_index: int, point, ris_mode: str = "optimized") -> float:
    return spectral_efficiency_from_gain(
        equivalent_gain(scene, bs_index, point, ris_mode), link_budget(scene)
    )


def serving_bs(scene: Scene, point) -> int:
    """Association by strongest direct link; ties go to the lowest index.

    The surface is excluded on purpose: a UE picks its cell from ordinary
    reference signals, before any surface optimization happens for it.
    """
    best = 0
    best_gain = -math.inf
    for i in range(len(scene.bs)):
        try:
            gain = point_gain_terms(scene, i, point).c0
        except CoincidentNodeError:
            gain = -math.inf
        if gain > best_gain:
            best, best_gain = i, gain
    return best


def gain_pair(scene: Scene, point) -> tuple[float, float]:
    """(without, with) equivalent gain in dB at the serving base station."""
    bs = serving_bs(scene, point)
    try:
        off, best = _gain_pair_linear(scene, bs, point)
    except CoincidentNodeError:
        return math.nan, math.nan
    return _to_db(off), _to_db(best)


def tx_power_pair(scene: Scene, point) -> tuple[float, float]:
    budget = link_budget(scene)
    off_db, best_db = gain_pair(scene, point)
    return required_tx_power(off_db, budget), required_tx_power(best_db, budget)


def se_pair(scene: Scene, point) -> tuple[float, float]:
    budget = link_budget(scene)
    off_db, best_db = gain_pair(scene, point)
    return (
        spectral_efficiency_from_gain(off_db, budget),
        spectral_efficiency_from_gain(best_db, budget),
    )
