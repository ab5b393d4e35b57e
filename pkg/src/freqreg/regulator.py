"""Disturbance-magnitude regulation from predicted RoCoF, nadir and governor response.

Two formula variants are available for the nadir path.  ``"literal"`` is a
verbatim transcription of the published expressions; ``"consistent"``
integrates a deadband-then-ramp governor response exactly.  The RoCoF path is
the same in both.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .dynamics import DisturbanceEvent
from .grid import (
    InfeasibleDispatch,
    NetworkModel,
    OperatingCondition,
    economic_dispatch,
    with_commitment,
)

log = logging.getLogger(__name__)

VARIANTS = ("consistent", "literal")


class NothingToRegulate(ValueError):
    """No monitored bus violates a limit, so there is nothing to cap."""


class RegulationInfeasible(ValueError):
    def __init__(self, message: str, shortfall_mw: float = 0.0):
        super().__init__(message)
        self.shortfall_mw = shortfall_mw


@dataclass(frozen=True)
class FrequencyLimits:
    rocof_limit: float = -0.5
    nadir_limit: float = 59.6
    f0: float = 60.0

    def __post_init__(self):
        if not self.nadir_limit < self.f0:
            raise ValueError("nadir_limit must lie below f0")
        if not self.rocof_limit < 0:
            raise ValueError("rocof_limit must be negative")

    def with_margin(self, nadir_margin: float = 0.0, rocof_margin: float = 0.0) -> "FrequencyLimits":
        """Tightened limits: nadir raised and RoCoF made less negative by the margins."""
        return replace(self, nadir_limit=self.nadir_limit + nadir_margin,
                       rocof_limit=self.rocof_limit + rocof_margin)

    def violates(self, rocof, nadir) -> np.ndarray:
        """Closed boundary: a value exactly at its limit passes."""
        return (np.asarray(rocof) < self.rocof_limit) | (np.asarray(nadir) < self.nadir_limit)


def _check_variant(variant: str) -> None:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def psi_min_rocof(delta_p: float, rocof_pred: float, limits: FrequencyLimits = FrequencyLimits()) -> float:
    """Smallest reduction of ``delta_p`` that brings a proportional RoCoF up to the limit."""
    if delta_p <= 0:
        raise ValueError("disturbance magnitude must be positive")
    if rocof_pred == 0:
        raise ValueError("predicted RoCoF is zero: no event signature to scale")
    psi = delta_p * (1.0 - limits.rocof_limit / rocof_pred)
    return float(min(max(psi, 0.0), delta_p))


def nadir_closed_form(delta_p: float, p_rr: float, t_d: float, t_nadir: float, m_h: float,
                      f0: float = 60.0, variant: str = "consistent") -> float:
    """Nadir (Hz) from the disturbance, the Eq.-6-style secant ramp and the time to nadir.

    ``m_h`` is 2HS/f_n in MW s/Hz.  In the consistent variant the governor
    starts at ``t_d`` and ramps linearly so that its secant from the event to
    the nadir equals ``p_rr``.
    """
    _check_variant(variant)
    if m_h <= 0:
        raise ValueError("m_h must be positive")
    if not t_nadir > t_d >= 0:
        raise ValueError("need t_nadir > t_d >= 0")
    if variant == "consistent":
        depth = (delta_p * t_nadir - 0.5 * p_rr * t_nadir * (t_nadir - t_d)) / m_h
    else:
        depth = (delta_p * (0.0 - t_nadir) + p_rr * (t_nadir ** 2 - t_d ** 2)) / m_h
    return f0 - depth


def calibrated_inertia(delta_p: float, p_rr: float, t_d: float, t_nadir: float, nadir_old: float,
                       f0: float = 60.0) -> float:
    """M_H that makes the consistent closed form reproduce ``nadir_old``."""
    return (delta_p * t_nadir - 0.5 * p_rr * t_nadir * (t_nadir - t_d)) / (f0 - nadir_old)


SCALINGS = ("droop", "ramp")


def rescaled_governor_inputs(delta_p: float, p_rr: float, t_d: float, t_nadir: float,
                             new_delta_p: float, scaling: str = "droop") -> tuple[float, float]:
    """(p_rr, t_nadir) expected after scaling the disturbance to ``new_delta_p``.

    ``"droop"`` keeps the time to nadir and scales the governor secant with
    the disturbance (proportional droop response).  ``"ramp"`` keeps the
    physical ramp and the deadband and stretches only the ramping interval.
    """
    if scaling not in SCALINGS:
        raise ValueError(f"unknown scaling {scaling!r}")
    lam = new_delta_p / delta_p
    if scaling == "droop":
        return p_rr * lam, t_nadir
    tn = t_d + (t_nadir - t_d) * lam
    return p_rr * t_nadir * lam / tn, tn


def delta_p_max(p0: float, p_rr: float, t_nadir: float, nadir_old: float,
                limits: FrequencyLimits = FrequencyLimits(), variant: str = "consistent",
                t_d: float = 0.0, scaling: str = "droop") -> float:
    """Largest disturbance (MW) whose nadir stays at or above the limit, clamped to [0, p0].

    The consistent variant calibrates M_H so the closed form reproduces
    ``nadir_old`` at ``p0``, then solves closed_form(x) = nadir_limit with the
    governor inputs moved by :func:`rescaled_governor_inputs`.
    """
    _check_variant(variant)
    if not limits.f0 > nadir_old:
        raise ValueError("nadir_old must lie below f0")
    if t_nadir <= 0:
        raise ValueError("t_nadir must be positive")
    if scaling not in SCALINGS:
        raise ValueError(f"unknown scaling {scaling!r}")
    rho = (limits.f0 - limits.nadir_limit) / (limits.f0 - nadir_old)
    if variant == "literal":
        x = p0 - p_rr * (t_nadir - rho * t_nadir)
    elif scaling == "droop":
        # every term of the closed form is proportional to the disturbance
        x = rho * p0
    else:
        # depth * M = a*lam^2 + b*lam with lam = x / p0
        span = max(t_nadir - t_d, 0.0)
        a = span * (p0 - 0.5 * p_rr * t_nadir)
        b = p0 * max(t_d, 0.0)
        if a <= 1e-12 * max(abs(b), 1.0):
            lam = rho
        else:
            c = rho * (a + b)
            lam = (-b + math.sqrt(b * b + 4.0 * a * c)) / (2.0 * a)
        x = lam * p0
    if not x > 0:
        raise RegulationInfeasible("no positive disturbance satisfies the nadir limit")
    return float(min(x, p0))


def compare_variants(p0, p_rr, t_nadir, nadir_old, limits=FrequencyLimits(), t_d=0.0,
                     tol: float = 1e-9, label: str = "", scaling: str = "droop") -> dict:
    """Evaluate both variants; log and flag when they disagree."""
    vals = {}
    for v in VARIANTS:
        try:
            vals[v] = delta_p_max(p0, p_rr, t_nadir, nadir_old, limits, v, t_d, scaling)
        except RegulationInfeasible:
            vals[v] = 0.0
    diverged = abs(vals["literal"] - vals["consistent"]) > tol * max(1.0, abs(p0))
    if diverged:
        log.info("delta_p_max variants diverge%s: literal=%.6f MW consistent=%.6f MW",
                 f" ({label})" if label else "", vals["literal"], vals["consistent"])
    return {"label": label, "literal": vals["literal"], "consistent": vals["consistent"],
            "diverged": bool(diverged)}


def compare_nadir_variants(delta_p, p_rr, t_d, t_nadir, m_h, f0=60.0, tol: float = 1e-9,
                           label: str = "") -> dict:
    """Nadir from both closed forms; logs both values when they disagree."""
    vals = {v: nadir_closed_form(delta_p, p_rr, t_d, t_nadir, m_h, f0, v) for v in VARIANTS}
    diverged = abs(vals["literal"] - vals["consistent"]) > tol
    if diverged:
        log.info("nadir variants diverge%s: literal=%.6f Hz consistent=%.6f Hz",
                 f" ({label})" if label else "", vals["literal"], vals["consistent"])
    return {"label": label, **vals, "diverged": bool(diverged)}


@dataclass
class Predictions:
    """Stage-1 and Stage-2 outputs for one OC and one event."""
    bus_ids: tuple[int, ...]
    rocof: np.ndarray
    nadir: np.ndarray
    ramp_rate: Mapping[int, float] = field(default_factory=dict)   # committed SGs only
    t_nadir: Mapping[int, float] = field(default_factory=dict)


@dataclass
class RegulationOutcome:
    bus_ids: tuple[int, ...]
    psi_rocof: np.ndarray          # MW per bus
    delta_p_max: np.ndarray        # MW per bus, nadir path
    binding_bus: int
    binding_criterion: str
    original_magnitude: float
    capped_magnitude: float
    oc: OperatingCondition
    variant: str
    divergences: list[dict] = field(default_factory=list)
    decommitted_units: int = 0

    @property
    def reduction(self) -> float:
        return self.original_magnitude - self.capped_magnitude


def _system_governor(model: NetworkModel, oc: OperatingCondition, event: DisturbanceEvent,
                     pred: Predictions) -> tuple[float, float]:
    """Aggregate secant ramp of the survivors and their ramp-weighted deadband."""
    gens = [g for g in with_commitment(model, oc.commitment)
            if g.units_online > 0 and g.id != event.target]
    p_rr = sum(max(float(pred.ramp_rate.get(g.id, 0.0)), 0.0) for g in gens)
    w = np.array([g.ramp_limit * g.units_online / g.units_total for g in gens])
    t_d = float(np.dot(w, [g.deadband_time for g in gens]) / w.sum()) if w.sum() > 0 else 0.0
    return p_rr, t_d


def _bus_t_nadir(model: NetworkModel, pred: Predictions, bus: int) -> float | None:
    for g in model.generators:
        if g.bus == bus and g.id in pred.t_nadir:
            return float(pred.t_nadir[g.id])
    return None


def regulate(model: NetworkModel, oc: OperatingCondition, event: DisturbanceEvent,
             pred: Predictions, limits: FrequencyLimits = FrequencyLimits(),
             variant: str = "consistent", scaling: str = "droop") -> RegulationOutcome:
    """Cap the outage target's output so every monitored bus meets both limits, then redispatch."""
    _check_variant(variant)
    rocof = np.asarray(pred.rocof, dtype=float)
    nadir = np.asarray(pred.nadir, dtype=float)
    if not limits.violates(rocof, nadir).any():
        raise NothingToRegulate("no monitored bus violates a limit")
    dp = event.magnitude(oc)
    if dp <= 0:
        raise NothingToRegulate("the outage target carries no load")

    psi = np.array([psi_min_rocof(dp, r, limits) if r < 0 else 0.0 for r in rocof])
    p_rr_sys, t_d = _system_governor(model, oc, event, pred)
    dpmax = np.full(len(rocof), dp)
    divergences = []
    for k, bus in enumerate(pred.bus_ids):
        if nadir[k] >= limits.nadir_limit:
            continue
        tn = _bus_t_nadir(model, pred, bus)
        if tn is None or tn <= 0:
            raise ValueError(f"no time-to-nadir prediction for bus {bus}")
        dpmax[k] = delta_p_max(dp, p_rr_sys, tn, nadir[k], limits, variant, t_d, scaling)
        divergences.append(compare_variants(dp, p_rr_sys, tn, nadir[k], limits, t_d,
                                               label=f"bus {bus}", scaling=scaling))

    cuts = np.concatenate([psi, dp - dpmax])
    j = int(np.argmax(cuts))
    n = len(rocof)
    psi_star = float(cuts[j])
    capped = dp - psi_star
    new_oc, dropped = _redispatch(model, oc, event.target, capped)
    return RegulationOutcome(
        bus_ids=tuple(pred.bus_ids), psi_rocof=psi, delta_p_max=dpmax,
        binding_bus=pred.bus_ids[j % n], binding_criterion="rocof" if j < n else "nadir",
        original_magnitude=dp, capped_magnitude=capped, oc=new_oc, variant=variant,
        divergences=divergences, decommitted_units=dropped)


def _redispatch(model: NetworkModel, oc: OperatingCondition, target: int, cap: float):
    """Merit-order redispatch with the target capped.

    When the cap falls below the target's minimum stable output, target units
    are decommitted one at a time until the floor fits under the cap.
    """
    commitment = dict(oc.commitment)
    gen = model.generator(target)
    dropped = 0
    while commitment[target] > 0:
        floor = gen.p_min * gen.rated_mva * commitment[target] / gen.units_total
        if floor <= cap + 1e-9:
            break
        commitment[target] -= 1
        dropped += 1
    try:
        new = economic_dispatch(model, oc.loading, commitment, oc.cig_output,
                                caps={target: cap}, oc_id=oc.id)
    except InfeasibleDispatch as exc:
        raise RegulationInfeasible(f"redispatch infeasible: {exc}", exc.shortfall_mw) from exc
    return new, dropped
