"""Static network description, CIG displacement arithmetic and operating conditions."""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import yaml

FIXTURE_DIR_ENV = "FREQREG_FIXTURE_DIR"
UNITS_PER_GENERATOR = 4


class FixtureError(ValueError):
    """Unknown or malformed network fixture."""


class InfeasibleDispatch(ValueError):
    """Demand cannot be met within generator limits."""

    def __init__(self, message: str, shortfall_mw: float = 0.0):
        super().__init__(message)
        self.shortfall_mw = shortfall_mw


class InvalidOperatingCondition(ValueError):
    pass


@dataclass(frozen=True)
class Bus:
    id: int
    load_mw: float
    load_mvar: float


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float = 0.0


@dataclass(frozen=True)
class SyncGenerator:
    """Equivalent synchronous generator made of ``units_total`` equal units.

    ``p_min``/``p_max`` are the dispatch limits and ``governor_max`` the
    governor output ceiling, all in per unit of the effective rating.
    ``ramp_limit`` is the governor slew cap (MW/s) with every unit online;
    it scales with the number of units committed.
    """

    id: int
    bus: int
    rated_mva: float
    H: float
    p_min: float = 0.2
    p_max: float = 0.85
    q_min: float = -0.3
    q_max: float = 0.7
    droop: float = 0.05
    ramp_limit: float = 10.0
    deadband_time: float = 0.5
    damping: float = 1.0
    transient_reactance: float = 0.25
    marginal_cost: float = 20.0
    governor_lag: float = 0.3
    governor_max: float = 1.0
    units_total: int = UNITS_PER_GENERATOR
    units_online: int = UNITS_PER_GENERATOR

    def __post_init__(self):
        if not 0 < self.p_min < self.p_max <= 1:
            raise ValueError(f"SG{self.id}: need 0 < p_min < p_max <= 1")
        if self.H <= 0 or self.rated_mva <= 0:
            raise ValueError(f"SG{self.id}: H and rated_mva must be positive")
        if not 0 <= self.units_online <= self.units_total:
            raise ValueError(f"SG{self.id}: units_online out of range")


@dataclass(frozen=True)
class CIGUnit:
    bus: int
    displaced_generators: tuple[int, ...] = (4, 5, 6, 7)
    r: float = 1.0
    s: float = 0.0


@dataclass(frozen=True)
class NetworkModel:
    name: str
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[SyncGenerator, ...]
    cig: CIGUnit
    nominal_frequency: float = 60.0
    base_mva: float = 100.0
    monitored_buses: tuple[int, ...] = ()

    def __post_init__(self):
        ids = {b.id for b in self.buses}
        if not set(self.monitored_buses) <= ids:
            raise FixtureError("monitored buses must be network buses")
        if self.cig.bus not in ids:
            raise FixtureError("CIG bus is not a network bus")
        for line in self.lines:
            if line.from_bus not in ids or line.to_bus not in ids:
                raise FixtureError(f"line {line.from_bus}-{line.to_bus} references unknown bus")
        for gen in self.generators:
            if gen.bus not in ids:
                raise FixtureError(f"SG{gen.id} at unknown bus {gen.bus}")
        if not _connected(ids, self.lines):
            raise FixtureError("network graph is not connected")

    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    @property
    def generator_ids(self) -> list[int]:
        return [g.id for g in self.generators]

    def generator(self, gen_id: int) -> SyncGenerator:
        for g in self.generators:
            if g.id == gen_id:
                return g
        raise KeyError(f"no generator {gen_id}")

    def base_load(self) -> float:
        return sum(b.load_mw for b in self.buses)


@dataclass(frozen=True)
class OperatingCondition:
    loading: float
    commitment: Mapping[int, int]
    dispatch: Mapping[int, float]
    cig_output: float
    id: str = ""

    def demand(self, model: NetworkModel) -> float:
        return self.loading * model.base_load()


def _connected(ids: set[int], lines: Iterable[Line]) -> bool:
    adj: dict[int, set[int]] = {i: set() for i in ids}
    for line in lines:
        adj[line.from_bus].add(line.to_bus)
        adj[line.to_bus].add(line.from_bus)
    start = next(iter(ids))
    seen = {start}
    stack = [start]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen == ids


# -- fixtures ---------------------------------------------------------------

def _fixture_path(name: str, data_dir: str | os.PathLike | None) -> Path:
    if data_dir is None:
        data_dir = os.environ.get(FIXTURE_DIR_ENV)
    if data_dir is not None:
        path = Path(data_dir) / f"{name}.yaml"
    else:
        path = Path(str(resources.files("freqreg") / "data" / f"{name}.yaml"))
    if not path.is_file():
        raise FixtureError(f"unknown fixture {name!r}")
    return path


def _table(doc: dict, key: str, required: list[str]) -> list[dict]:
    try:
        section = doc[key]
        columns = section["columns"]
        rows = section["rows"]
    except (KeyError, TypeError) as exc:
        raise FixtureError(f"fixture table {key!r} is missing or malformed") from exc
    missing = set(required) - set(columns)
    if missing:
        raise FixtureError(f"table {key!r} lacks columns {sorted(missing)}")
    out = []
    for row in rows:
        if len(row) != len(columns):
            raise FixtureError(f"table {key!r}: row {row} has {len(row)} fields")
        out.append(dict(zip(columns, row)))
    return out


def load_network(fixture_name: str, data_dir: str | os.PathLike | None = None) -> NetworkModel:
    """Load a network fixture by name, e.g. ``"ieee39"``.

    Fixtures are looked up in ``data_dir``, then ``$FREQREG_FIXTURE_DIR``,
    then the package data directory.
    """
    path = _fixture_path(fixture_name, data_dir)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise FixtureError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise FixtureError(f"{path} is not a key/value document")

    try:
        buses = tuple(Bus(int(r["id"]), float(r["load_mw"]), float(r["load_mvar"]))
                      for r in _table(doc, "buses", ["id", "load_mw", "load_mvar"]))
        lines = tuple(Line(int(r["from_bus"]), int(r["to_bus"]), float(r["r"]), float(r["x"]),
                           float(r.get("b", 0.0)))
                      for r in _table(doc, "lines", ["from_bus", "to_bus", "r", "x"]))
        gens = []
        for r in _table(doc, "generators", ["id", "bus", "rated_mva", "H"]):
            kwargs = {k: v for k, v in r.items() if k not in ("id", "bus", "rated_mva", "H")}
            gens.append(SyncGenerator(id=int(r["id"]), bus=int(r["bus"]),
                                      rated_mva=float(r["rated_mva"]), H=float(r["H"]),
                                      **{k: float(v) for k, v in kwargs.items()}))
        cig_doc = doc["cig"]
        cig = CIGUnit(bus=int(cig_doc["bus"]),
                      displaced_generators=tuple(int(i) for i in cig_doc.get("displaced_generators", ())),
                      r=float(cig_doc.get("r", 1.0)), s=float(cig_doc.get("s", 0.0)))
        return NetworkModel(
            name=str(doc.get("name", fixture_name)),
            buses=buses,
            lines=lines,
            generators=tuple(gens),
            cig=cig,
            nominal_frequency=float(doc["nominal_frequency_hz"]),
            base_mva=float(doc["system_base_mva"]),
            monitored_buses=tuple(int(b) for b in doc["monitored_buses"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FixtureError):
            raise
        raise FixtureError(f"malformed fixture {path}: {exc}") from exc


# -- displacement arithmetic --------------------------------------------------

def effective_rating(gen: SyncGenerator) -> float:
    """Rating (MVA) of the units still online: ``u * S_old / 4``."""
    return gen.units_online * (gen.rated_mva / gen.units_total)


def cig_capacity(displaced: Iterable[SyncGenerator], r: float = 1.0, s: float = 0.0) -> float:
    """CIG rating (MVA) replacing the displaced units of each generator in ``displaced``."""
    if r < 0 or s < 0:
        raise ValueError("r and s must be non-negative")
    total = 0.0
    for gen in displaced:
        per_unit = gen.rated_mva / gen.units_total
        total += r * (gen.units_total + 1 - gen.units_online) * per_unit + s * gen.rated_mva
    return total


def with_commitment(model: NetworkModel, commitment: Mapping[int, int]) -> list[SyncGenerator]:
    """Generators of ``model`` with ``units_online`` taken from ``commitment``."""
    return [replace(g, units_online=int(commitment.get(g.id, g.units_online))) for g in model.generators]


def cig_capacity_for(model: NetworkModel, commitment: Mapping[int, int]) -> float:
    gens = {g.id: g for g in with_commitment(model, commitment)}
    displaced = [gens[i] for i in model.cig.displaced_generators]
    return cig_capacity(displaced, model.cig.r, model.cig.s)


def system_kinetic_energy(model: NetworkModel, oc: OperatingCondition) -> float:
    """Stored kinetic energy (MW s) of the committed machines at nominal speed."""
    return sum(g.H * effective_rating(g) for g in with_commitment(model, oc.commitment))


# -- dispatch -------------------------------------------------------------------

def economic_dispatch(
    model: NetworkModel,
    loading: float,
    commitment: Mapping[int, int],
    cig_output: float,
    caps: Mapping[int, float] | None = None,
    oc_id: str = "",
) -> OperatingCondition:
    """Lossless merit-order dispatch with minimum-output floors.

    Every committed unit starts at its floor ``p_min * S_eff``; the remaining
    demand is filled in ascending marginal cost (ties by generator id) up to
    ``min(p_max * S_eff, caps[id])``.
    """
    caps = dict(caps or {})
    demand = loading * model.base_load()
    gens = [g for g in with_commitment(model, commitment) if g.units_online > 0]

    floors, ceilings = {}, {}
    for g in gens:
        s_eff = effective_rating(g)
        floors[g.id] = g.p_min * s_eff
        ceilings[g.id] = g.p_max * s_eff
        if g.id in caps:
            if caps[g.id] < floors[g.id]:
                raise InfeasibleDispatch(
                    f"cap {caps[g.id]:.3f} MW on SG{g.id} is below its floor {floors[g.id]:.3f} MW")
            ceilings[g.id] = min(ceilings[g.id], caps[g.id])

    residual = demand - cig_output - sum(floors.values())
    if residual < 0:
        raise InfeasibleDispatch(
            f"minimum outputs exceed demand by {-residual:.3f} MW", shortfall_mw=residual)
    headroom = sum(ceilings[i] - floors[i] for i in floors)
    if residual > headroom:
        raise InfeasibleDispatch(
            f"demand exceeds available capacity by {residual - headroom:.3f} MW",
            shortfall_mw=residual - headroom)

    dispatch = dict(floors)
    for g in sorted(gens, key=lambda g: (g.marginal_cost, g.id)):
        if residual <= 0:
            break
        take = min(ceilings[g.id] - floors[g.id], residual)
        dispatch[g.id] += take
        residual -= take

    full = {g.id: dispatch.get(g.id, 0.0) for g in model.generators}
    commit = {g.id: int(commitment.get(g.id, g.units_online)) for g in model.generators}
    return OperatingCondition(loading=loading, commitment=commit, dispatch=full,
                              cig_output=cig_output, id=oc_id)


def dispatch_cost(model: NetworkModel, oc: OperatingCondition) -> float:
    """Hourly production cost of the synchronous fleet ($/h)."""
    return sum(model.generator(i).marginal_cost * p for i, p in oc.dispatch.items())


def validate_oc(model: NetworkModel, oc: OperatingCondition, tol: float = 1e-6) -> None:
    """Raise :class:`InvalidOperatingCondition` if limits or power balance fail."""
    for g in with_commitment(model, oc.commitment):
        p = oc.dispatch.get(g.id, 0.0)
        s_eff = effective_rating(g)
        if g.units_online == 0:
            if abs(p) > tol:
                raise InvalidOperatingCondition(f"SG{g.id} is decommitted but dispatched {p} MW")
            continue
        if p < g.p_min * s_eff - tol or p > g.p_max * s_eff + tol:
            raise InvalidOperatingCondition(
                f"SG{g.id} dispatch {p:.4f} MW outside [{g.p_min * s_eff:.4f}, {g.p_max * s_eff:.4f}]")
    mismatch = sum(oc.dispatch.values()) + oc.cig_output - oc.demand(model)
    if abs(mismatch) > tol * model.base_mva:
        raise InvalidOperatingCondition(f"power balance mismatch {mismatch:.3e} MW")


def full_commitment(model: NetworkModel) -> dict[int, int]:
    return {g.id: g.units_total for g in model.generators}

