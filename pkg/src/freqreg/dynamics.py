"""Classical multi-machine frequency simulator.

Machines are classical (constant EMF behind transient reactance) rotors
coupled through a lossless, linearised network in which loads and the CIG
are constant active-power injections.  Network buses are Kron-eliminated,
so the electrical output of the live machines is ``P_e = A @ delta + c``.

Each governor holds its mechanical power until its deadband time has
elapsed after the disturbance, then slews toward its droop target with a
first-order lag whose rate is capped by the machine's ramp limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .grid import NetworkModel, OperatingCondition, effective_rating, with_commitment

TWO_PI = 2.0 * math.pi


class SingularNetworkError(ValueError):
    """Kron elimination hit a singular block (an island without a machine)."""


class SimulationConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.005
    horizon: float = 20.0
    rocof_window: float = 0.5
    disturbance_time: float = 1.0
    governors: bool = True
    divergence_hz: float = 5.0
    keep_traces: bool = False
    scheme: str = "rk4"

    def __post_init__(self):
        if self.dt <= 0:
            raise SimulationConfigError("dt must be positive")
        if self.rocof_window < self.dt:
            raise SimulationConfigError("rocof_window must be at least one step")
        if self.horizon <= self.disturbance_time:
            raise SimulationConfigError("horizon must exceed the disturbance time")
        if self.disturbance_time < 0:
            raise SimulationConfigError("disturbance time must be non-negative")
        if self.scheme != "rk4":
            raise SimulationConfigError(f"unsupported integration scheme {self.scheme!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def event_step(self) -> int:
        return int(round(self.disturbance_time / self.dt))


@dataclass(frozen=True)
class DisturbanceEvent:
    target: int = 5
    kind: str = "generator-outage"

    def __post_init__(self):
        if self.kind != "generator-outage":
            raise ValueError(f"unsupported disturbance kind {self.kind!r}")

    def magnitude(self, oc: OperatingCondition) -> float:
        """Pre-fault output (MW) of the outaged machine."""
        return float(oc.dispatch.get(self.target, 0.0))


@dataclass
class Traces:
    time: np.ndarray            # (T,)
    bus_freq: np.ndarray        # (T, N) Hz
    machine_freq: np.ndarray    # (T, G) Hz
    mech_power: np.ndarray      # (T, G) MW
    bus_ids: tuple[int, ...]
    gen_ids: tuple[int, ...]
    gen_bus_index: np.ndarray   # (G,) column of bus_freq for each machine, -1 if unmonitored
    committed: np.ndarray       # (G,) bool, online before the event
    tripped: np.ndarray         # (G,) bool
    nominal_frequency: float = 60.0


@dataclass
class FrequencyOutcome:
    bus_ids: tuple[int, ...]
    gen_ids: tuple[int, ...]
    rocof: np.ndarray           # Hz/s, most negative windowed slope
    rocof_initial: np.ndarray   # Hz/s, first-step slope after the event
    nadir: np.ndarray           # Hz
    t_nadir: np.ndarray         # s after the event
    gen_t_nadir: np.ndarray     # s, time to nadir at each machine's own bus
    ramp_rate: np.ndarray       # MW/s per machine, secant to that machine's bus nadir
    p_at_nadir: np.ndarray      # MW
    p0: np.ndarray              # MW, mechanical power before the event
    committed: np.ndarray       # bool
    tripped: np.ndarray         # bool
    diverged: bool = False
    traces: Traces | None = field(default=None, repr=False)

    def bus(self, bus_id: int) -> dict[str, float]:
        i = self.bus_ids.index(bus_id)
        return {"rocof": float(self.rocof[i]), "nadir": float(self.nadir[i]),
                "t_nadir": float(self.t_nadir[i])}


# -- network reduction -----------------------------------------------------------

def kron_eliminate(Y: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Schur complement of ``Y`` onto the ``keep`` nodes."""
    Y = np.asarray(Y)
    keep = list(keep)
    elim = [i for i in range(Y.shape[0]) if i not in set(keep)]
    if not elim:
        return Y[np.ix_(keep, keep)].copy()
    Yee = Y[np.ix_(elim, elim)]
    _check_invertible(Yee)
    Ykk = Y[np.ix_(keep, keep)]
    Yke = Y[np.ix_(keep, elim)]
    Yek = Y[np.ix_(elim, keep)]
    return Ykk - Yke @ np.linalg.solve(Yee, Yek)


def _check_invertible(block: np.ndarray) -> None:
    if block.size == 0:
        return
    cond = np.linalg.cond(block)
    if not np.isfinite(cond) or cond > 1e13:
        raise SingularNetworkError("singular elimination block: part of the network has no machine")


def _gen_reactance(model: NetworkModel, gen) -> float:
    """Transient reactance on the system base for the units online."""
    return gen.transient_reactance * model.base_mva / effective_rating(gen)


def kron_reduce(
    model: NetworkModel,
    oc: OperatingCondition,
    exclude: Sequence[int] = (),
    lossless: bool = False,
) -> np.ndarray:
    """Complex admittance matrix over the internal nodes of committed machines.

    Loads (scaled by the OC loading) are constant admittances at 1 pu voltage,
    the CIG a negative one, and each committed machine sits behind its
    transient reactance.  Machines listed in ``exclude`` are removed, which is
    how an outage is represented.  With ``lossless`` line resistance and
    load/CIG admittances are dropped.
    """
    gens = [g for g in with_commitment(model, oc.commitment)
            if g.units_online > 0 and g.id not in set(exclude)]
    index = {b: i for i, b in enumerate(model.bus_ids)}
    nb, ng = len(index), len(gens)
    Y = np.zeros((nb + ng, nb + ng), dtype=complex)

    def stamp(i, j, y):
        Y[i, i] += y
        Y[j, j] += y
        Y[i, j] -= y
        Y[j, i] -= y

    for line in model.lines:
        z = complex(0.0 if lossless else line.r, line.x)
        stamp(index[line.from_bus], index[line.to_bus], 1.0 / z)
    if not lossless:
        for bus in model.buses:
            s = oc.loading * complex(bus.load_mw, -bus.load_mvar) / model.base_mva
            Y[index[bus.id], index[bus.id]] += s
        Y[index[model.cig.bus], index[model.cig.bus]] -= oc.cig_output / model.base_mva
    for k, g in enumerate(gens):
        stamp(index[g.bus], nb + k, 1.0 / complex(0.0, _gen_reactance(model, g)))
    return kron_eliminate(Y, range(nb, nb + ng))


@dataclass
class _Reduction:
    gen_ids: list[int]
    A: np.ndarray        # MW/rad, Laplacian over live machines
    c: np.ndarray        # MW, load/CIG injections mapped onto machines
    W: np.ndarray        # (buses, live machines) bus-angle participation


def _dc_reduction(model: NetworkModel, oc: OperatingCondition, live: list) -> _Reduction:
    index = {b: i for i, b in enumerate(model.bus_ids)}
    nb, ng = len(index), len(live)
    L = np.zeros((nb + ng, nb + ng))

    def stamp(i, j, b):
        L[i, i] += b
        L[j, j] += b
        L[i, j] -= b
        L[j, i] -= b

    for line in model.lines:
        stamp(index[line.from_bus], index[line.to_bus], 1.0 / line.x)
    for k, g in enumerate(live):
        stamp(index[g.bus], nb + k, 1.0 / _gen_reactance(model, g))

    p_bus = np.array([-oc.loading * b.load_mw for b in model.buses]) / model.base_mva
    p_bus[index[model.cig.bus]] += oc.cig_output / model.base_mva

    Lnn = L[:nb, :nb]
    _check_invertible(Lnn)
    Lng = L[:nb, nb:]
    Lgg = L[nb:, nb:]
    solved = np.linalg.solve(Lnn, np.column_stack([Lng, p_bus]))
    Lnn_inv_Lng, Lnn_inv_p = solved[:, :ng], solved[:, ng]
    A = (Lgg - Lng.T @ Lnn_inv_Lng) * model.base_mva
    c = (Lng.T @ Lnn_inv_p) * model.base_mva
    return _Reduction([g.id for g in live], A, c, -Lnn_inv_Lng)


# -- per-case arrays ----------------------------------------------------------------

@dataclass
class _Case:
    A_pre: np.ndarray
    c_pre: np.ndarray
    A_post: np.ndarray
    c_post: np.ndarray
    W_pre: np.ndarray     # (N monitored, G) machine -> bus frequency map
    W_post: np.ndarray
    alive_pre: np.ndarray
    alive_post: np.ndarray
    inv_m: np.ndarray     # Hz/s per MW, zero for offline slots
    damping: np.ndarray   # MW/Hz
    droop_gain: np.ndarray
    ramp: np.ndarray
    lag: np.ndarray
    p_gov_max: np.ndarray
    deadband_steps: np.ndarray
    dispatch: np.ndarray
    committed: np.ndarray
    tripped: np.ndarray
    gen_bus_index: np.ndarray


def _prepare(model: NetworkModel, oc: OperatingCondition, event: DisturbanceEvent | None,
             config: SimConfig) -> _Case:
    gens = with_commitment(model, oc.commitment)
    G = len(gens)
    slot = {g.id: k for k, g in enumerate(gens)}
    committed = np.array([g.units_online > 0 for g in gens])
    tripped = np.zeros(G, dtype=bool)
    if event is not None:
        if event.target not in slot or not committed[slot[event.target]]:
            raise ValueError(f"disturbance target SG{event.target} is not committed")
        tripped[slot[event.target]] = True
    alive_post = committed & ~tripped
    if not alive_post.any():
        raise ValueError("no machine survives the disturbance")

    mon = list(model.monitored_buses)
    bus_pos = {b: i for i, b in enumerate(model.bus_ids)}

    def block(live_mask):
        live = [g for g, a in zip(gens, live_mask) if a]
        red = _dc_reduction(model, oc, live)
        A = np.zeros((G, G))
        c = np.zeros(G)
        idx = [slot[i] for i in red.gen_ids]
        A[np.ix_(idx, idx)] = red.A
        c[idx] = red.c
        W = np.zeros((len(mon), G))
        for r, b in enumerate(mon):
            own = [slot[g.id] for g in live if g.bus == b]
            if own:
                W[r, own[0]] = 1.0
            else:
                W[r, idx] = red.W[bus_pos[b]]
        return A, c, W

    A_pre, c_pre, W_pre = block(committed)
    if event is None:
        A_post, c_post, W_post = A_pre, c_pre, W_pre
    else:
        A_post, c_post, W_post = block(alive_post)

    f_n = model.nominal_frequency
    s_eff = np.array([effective_rating(g) for g in gens])
    share = np.array([g.units_online / g.units_total for g in gens])
    inv_m = np.where(committed, f_n / (2.0 * np.array([g.H for g in gens]) * np.maximum(s_eff, 1e-12)), 0.0)
    gen_bus_index = np.array([mon.index(g.bus) if g.bus in mon else -1 for g in gens])
    return _Case(
        A_pre=A_pre, c_pre=c_pre, A_post=A_post, c_post=c_post, W_pre=W_pre, W_post=W_post,
        alive_pre=committed.astype(float), alive_post=alive_post.astype(float),
        inv_m=inv_m,
        damping=np.array([g.damping for g in gens]) * s_eff / f_n,
        droop_gain=s_eff / (np.array([g.droop for g in gens]) * f_n),
        ramp=np.array([g.ramp_limit for g in gens]) * share,
        lag=np.array([g.governor_lag for g in gens]),
        p_gov_max=np.array([g.governor_max for g in gens]) * s_eff,
        deadband_steps=np.array([int(math.ceil(g.deadband_time / config.dt - 1e-9)) for g in gens]),
        dispatch=np.array([float(oc.dispatch.get(g.id, 0.0)) for g in gens]),
        committed=committed, tripped=tripped, gen_bus_index=gen_bus_index,
    )


def _stack(cases: list[_Case]) -> dict[str, np.ndarray]:
    return {name: np.stack([getattr(c, name) for c in cases])
            for name in _Case.__dataclass_fields__}


def _equilibrium_angles(A: np.ndarray, c: np.ndarray, p: np.ndarray, alive: np.ndarray) -> np.ndarray:
    """Angles with ``A @ delta + c = p`` on live slots (first live slot as reference)."""
    delta = np.zeros_like(p)
    for b in range(A.shape[0]):
        idx = np.flatnonzero(alive[b] > 0)
        if len(idx) > 1:
            rest = idx[1:]
            rhs = p[b, rest] - c[b, rest]
            delta[b, rest] = np.linalg.solve(A[b][np.ix_(rest, rest)], rhs)
    return delta


def _integrate(arr: dict[str, np.ndarray], config: SimConfig, event: bool):
    """Fixed-step RK4 over the batch. Returns machine frequency deviation and P_m traces."""
    dt = config.dt
    n = config.n_steps
    k0 = config.event_step if event else n + 1
    B, G = arr["dispatch"].shape

    delta = _equilibrium_angles(arr["A_pre"], arr["c_pre"], arr["dispatch"], arr["alive_pre"])

    def p_elec(A, c, d):
        return np.einsum("bij,bj->bi", A, d) + c

    pm = p_elec(arr["A_pre"], arr["c_pre"], delta) * arr["alive_pre"]
    p_ref = pm.copy()
    dfreq = np.zeros((B, G))

    freq_log = np.empty((n + 1, B, G))
    pm_log = np.empty((n + 1, B, G))
    freq_log[0] = dfreq
    pm_log[0] = pm

    inv_m, damp = arr["inv_m"], arr["damping"]
    gain, ramp, lag, pmax = arr["droop_gain"], arr["ramp"], arr["lag"], arr["p_gov_max"]
    act_step = k0 + arr["deadband_steps"]

    for k in range(n):
        post = k >= k0
        A = arr["A_post"] if post else arr["A_pre"]
        c = arr["c_post"] if post else arr["c_pre"]
        alive = arr["alive_post"] if post else arr["alive_pre"]
        im = inv_m * alive
        active = (k >= act_step) & (alive > 0) if config.governors else None
        gov = post and config.governors and bool(active.any())

        def rhs(d, f, p):
            dd = TWO_PI * f * alive
            df = (p - p_elec(A, c, d) - damp * f) * im
            if gov:
                target = np.clip(p_ref - gain * f, 0.0, pmax)
                dp = np.where(active, np.clip((target - p) / lag, -ramp, ramp), 0.0)
            else:
                dp = np.zeros_like(p)
            return dd, df, dp

        a1, b1, c1 = rhs(delta, dfreq, pm)
        h = 0.5 * dt
        a2, b2, c2 = rhs(delta + h * a1, dfreq + h * b1, pm + h * c1)
        a3, b3, c3 = rhs(delta + h * a2, dfreq + h * b2, pm + h * c2)
        a4, b4, c4 = rhs(delta + dt * a3, dfreq + dt * b3, pm + dt * c3)
        sixth = dt / 6.0
        delta = delta + sixth * (a1 + 2 * a2 + 2 * a3 + a4)
        dfreq = dfreq + sixth * (b1 + 2 * b2 + 2 * b3 + b4)
        pm = pm + sixth * (c1 + 2 * c2 + 2 * c3 + c4)
        freq_log[k + 1] = dfreq
        pm_log[k + 1] = pm
    return freq_log, pm_log, p_ref


# -- metrics ----------------------------------------------------------------------------

def _metrics(time, bus_f, pm, gen_bus_index, committed, tripped, config: SimConfig, f0: float):
    """Vectorised metric extraction. Arrays carry a leading time axis and a batch axis."""
    dt = time[1] - time[0]
    k0 = int(round(config.disturbance_time / dt))
    w = int(round(config.rocof_window / dt))
    n_post = len(time) - 1 - k0
    if w > n_post:
        raise SimulationConfigError("RoCoF window is longer than the post-event horizon")

    post = bus_f[k0:]                                    # (T', B, N)
    slopes = (post[w:] - post[:-w]) / (w * dt)
    rocof = slopes.min(axis=0)
    rocof_initial = (post[1] - post[0]) / dt
    after = post[1:]
    arg = after.argmin(axis=0)                           # (B, N)
    nadir = np.take_along_axis(after, arg[None], axis=0)[0]
    t_nadir = (arg + 1) * dt

    B, G = committed.shape
    gi = np.clip(gen_bus_index, 0, None)
    k_nadir = k0 + 1 + np.take_along_axis(arg, gi, axis=1)           # (B, G)
    tn_gen = np.take_along_axis(t_nadir, gi, axis=1)
    p_nadir = np.take_along_axis(pm, k_nadir[None], axis=0)[0]
    p0 = pm[k0]
    live = committed & ~tripped & (gen_bus_index >= 0)
    ramp_rate = np.where(live, (p_nadir - p0) / tn_gen, 0.0)
    p_at_nadir = np.where(live, p_nadir, 0.0)
    diverged = (np.abs(bus_f - f0) > config.divergence_hz).any(axis=(0, 2))
    tn_gen = np.where(gen_bus_index >= 0, tn_gen, 0.0)
    return rocof, rocof_initial, nadir, t_nadir, tn_gen, ramp_rate, p_at_nadir, p0, diverged


def extract_metrics(traces: Traces, config: SimConfig) -> FrequencyOutcome:
    """Per-bus RoCoF/nadir/time-to-nadir and per-machine governor ramp from traces."""
    if traces.time[-1] - config.disturbance_time < config.rocof_window - 1e-12:
        raise SimulationConfigError("RoCoF window is longer than the post-event horizon")
    committed = np.asarray(traces.committed, dtype=bool)[None]
    tripped = np.asarray(traces.tripped, dtype=bool)[None]
    gbi = np.asarray(traces.gen_bus_index)[None]
    out = _metrics(traces.time, traces.bus_freq[:, None], traces.mech_power[:, None], gbi,
                   committed, tripped, config, traces.nominal_frequency)
    rocof, r0, nadir, tn, tg, prr, pn, p0, div = (np.asarray(x)[0] for x in out)
    return FrequencyOutcome(
        bus_ids=traces.bus_ids, gen_ids=traces.gen_ids, rocof=rocof, rocof_initial=r0,
        nadir=nadir, t_nadir=tn, gen_t_nadir=tg, ramp_rate=prr, p_at_nadir=pn, p0=p0,
        committed=committed[0], tripped=tripped[0], diverged=bool(div), traces=traces)


# -- public simulation API ----------------------------------------------------------

def simulate_batch(
    model: NetworkModel,
    ocs: Sequence[OperatingCondition],
    event: DisturbanceEvent | None,
    config: SimConfig = SimConfig(),
    chunk: int = 64,
    workers: int = 1,
) -> list[FrequencyOutcome]:
    """Simulate many OCs with one vectorised integration per chunk.

    Every run is independent; results are in input order whatever the
    worker count.
    """
    parts = [list(ocs[s:s + chunk]) for s in range(0, len(ocs), chunk)]
    if workers > 1 and len(parts) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = pool.map(_simulate_chunk, [model] * len(parts), parts,
                            [event] * len(parts), [config] * len(parts))
            return [r for block in done for r in block]
    out: list[FrequencyOutcome] = []
    for part in parts:
        out.extend(_simulate_chunk(model, part, event, config))
    return out


def _simulate_chunk(model, ocs, event, config, models=None) -> list[FrequencyOutcome]:
    models = models or [model] * len(ocs)
    cases = [_prepare(m, oc, event, config) for m, oc in zip(models, ocs)]
    arr = _stack(cases)
    freq_log, pm_log, _ = _integrate(arr, config, event is not None)
    f0 = model.nominal_frequency
    k0 = config.event_step if event is not None else config.n_steps + 1
    n = config.n_steps
    time = np.arange(n + 1) * config.dt
    # pre-event samples use the pre-event bus map
    bus_dev = np.einsum("bng,tbg->tbn", arr["W_post"], freq_log)
    if k0 <= n:
        bus_dev[:k0] = np.einsum("bng,tbg->tbn", arr["W_pre"], freq_log[:k0])
    bus_f = f0 + bus_dev
    metrics = _metrics(time, bus_f, pm_log, arr["gen_bus_index"], arr["committed"],
                       arr["tripped"], config, f0)
    rocof, r0, nadir, tn, tg, prr, pn, p0, div = metrics
    bus_ids = tuple(model.monitored_buses)
    gen_ids = tuple(model.generator_ids)
    results = []
    for b in range(len(ocs)):
        traces = None
        if config.keep_traces:
            traces = Traces(time=time, bus_freq=bus_f[:, b].copy(), machine_freq=f0 + freq_log[:, b].copy(),
                            mech_power=pm_log[:, b].copy(), bus_ids=bus_ids, gen_ids=gen_ids,
                            gen_bus_index=arr["gen_bus_index"][b], committed=arr["committed"][b],
                            tripped=arr["tripped"][b], nominal_frequency=f0)
        results.append(FrequencyOutcome(
            bus_ids=bus_ids, gen_ids=gen_ids, rocof=rocof[b], rocof_initial=r0[b], nadir=nadir[b],
            t_nadir=tn[b], gen_t_nadir=tg[b], ramp_rate=prr[b], p_at_nadir=pn[b], p0=p0[b],
            committed=arr["committed"][b], tripped=arr["tripped"][b], diverged=bool(div[b]),
            traces=traces))
    return results


def simulate_cases(models: Sequence[NetworkModel], ocs: Sequence[OperatingCondition],
                   event: DisturbanceEvent | None, config: SimConfig = SimConfig()) -> list[FrequencyOutcome]:
    """Batch runs whose machine parameters differ but whose layout is shared.

    Every model must have the same generator ids, monitored buses and
    nominal frequency; only the per-case arrays change.
    """
    if len(models) != len(ocs) or not models:
        raise ValueError("need one model per operating condition")
    ref = models[0]
    for m in models[1:]:
        if (m.generator_ids != ref.generator_ids or m.monitored_buses != ref.monitored_buses
                or m.nominal_frequency != ref.nominal_frequency):
            raise ValueError("models differ in layout; simulate them separately")
    return _simulate_chunk(ref, list(ocs), event, config, list(models))


def simulate(model: NetworkModel, oc: OperatingCondition, event: DisturbanceEvent | None,
             config: SimConfig = SimConfig()) -> FrequencyOutcome:
    """Simulate one OC; ``event=None`` runs the undisturbed system."""
    return _simulate_chunk(model, [oc], event, config)[0]


def coi_frequency(machine_freq: np.ndarray, model: NetworkModel, oc: OperatingCondition,
                  exclude: Sequence[int] = ()) -> np.ndarray:
    """Inertia-weighted mean of machine frequencies, one value per time step.

    ``machine_freq`` has one column per generator of ``model`` (model order).
    Machines that are decommitted or in ``exclude`` carry zero weight.
    """
    gens = with_commitment(model, oc.commitment)
    w = np.array([g.H * effective_rating(g) if g.id not in set(exclude) else 0.0 for g in gens])
    if w.sum() <= 0:
        raise ValueError("no committed machine to weight")
    return np.asarray(machine_freq) @ (w / w.sum())


def write_traces(path: str | Path, traces: Traces) -> None:
    """Plain-text dump: time then one column per monitored bus, 6 decimals."""
    header = "time " + " ".join(f"bus{b}" for b in traces.bus_ids)
    data = np.column_stack([traces.time, traces.bus_freq])
    np.savetxt(path, data, fmt="%.6f", header=header, comments="")


def read_traces(path: str | Path) -> tuple[np.ndarray, np.ndarray, list[int]]:
    with open(path) as fh:
        header = fh.readline().split()
    data = np.loadtxt(path, skiprows=1, ndmin=2)
    buses = [int(h[3:]) for h in header[1:]]
    return data[:, 0], data[:, 1:], buses


def single_machine_case(H: float, S: float, delta_p: float, ramp: float = 0.0, t_d: float = 0.0,
                        f_n: float = 60.0, droop: float = 0.01, lag: float = 0.01,
                        damping: float = 0.0) -> tuple[NetworkModel, OperatingCondition, DisturbanceEvent]:
    """Two-bus case whose only survivor is one machine (H, S) after a ``delta_p`` MW outage.

    Machine 1 at bus 1 serves half its rating; machine 2 at bus 2 carries the
    ``delta_p`` that is lost.  After the outage the survivor sees a constant
    electrical load, so its frequency follows the single-machine swing equation.
    """
    from .grid import Bus, CIGUnit, Line, SyncGenerator

    p0 = 0.5 * S
    survivor = SyncGenerator(id=1, bus=1, rated_mva=S, H=H, p_min=0.01, p_max=0.99, droop=droop,
                             ramp_limit=ramp, deadband_time=t_d, damping=damping,
                             transient_reactance=0.2, governor_lag=lag, governor_max=1.0)
    lost = SyncGenerator(id=2, bus=2, rated_mva=2.0 * delta_p, H=H, p_min=0.01, p_max=0.99,
                         damping=damping, transient_reactance=0.2)
    model = NetworkModel(
        name="single-machine",
        buses=(Bus(1, p0 + delta_p, 0.0), Bus(2, 0.0, 0.0)),
        lines=(Line(1, 2, 0.0, 0.1),),
        generators=(survivor, lost),
        cig=CIGUnit(bus=1, displaced_generators=(), r=1.0, s=0.0),
        nominal_frequency=f_n,
        monitored_buses=(1, 2),
    )
    oc = OperatingCondition(loading=1.0, commitment={1: 4, 2: 4}, dispatch={1: p0, 2: delta_p},
                            cig_output=0.0, id="single-machine")
    return model, oc, DisturbanceEvent(target=2)


def governor_triangle_depth(H: float, S: float, delta_p: float, ramp: float, t_d: float,
                            f_n: float = 60.0) -> tuple[float, float]:
    """Nadir depth (Hz) and time to nadir (s) for a deadband-then-ramp response, no damping."""
    m = 2.0 * H * S / f_n
    t_n = t_d + delta_p / ramp
    return delta_p * (t_n + t_d) / (2.0 * m), t_n
