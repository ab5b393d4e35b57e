"""Screen, predict governor response, regulate, redispatch, validate."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import (
    Dataset,
    feature_names,
    governor_target_names,
    metrics_target_names,
    oc_features,
)
from .dynamics import DisturbanceEvent, SimConfig, simulate_batch
from .grid import NetworkModel, OperatingCondition, with_commitment
from .ml import RegressorBundle, predict, rmse
from .regulator import (
    FrequencyLimits,
    NothingToRegulate,
    Predictions,
    RegulationInfeasible,
    RegulationOutcome,
    regulate,
)


class LayoutMismatch(ValueError):
    pass


@dataclass(frozen=True)
class PipelineOptions:
    variant: str = "consistent"
    scaling: str = "droop"
    validate: str = "sim"          # none | ml | sim | both
    passes: int = 1
    nadir_margin: float = 0.0
    rocof_margin: float = 0.0
    sim_config: SimConfig = SimConfig()

    def __post_init__(self):
        if self.validate not in ("none", "ml", "sim", "both"):
            raise ValueError(f"unknown validation mode {self.validate!r}")
        if not 1 <= self.passes <= 3:
            raise ValueError("passes must be between 1 and 3")


@dataclass
class Stage1Result:
    bus_ids: tuple[int, ...]
    rocof: np.ndarray
    nadir: np.ndarray
    violations: list[int]


def _check_layout(bundle: RegressorBundle, model: NetworkModel, targets: list[str]) -> None:
    if bundle.feature_names != feature_names(model):
        raise LayoutMismatch("bundle features do not match the model's feature layout")
    if bundle.target_names != targets:
        raise LayoutMismatch(f"bundle targets {bundle.target_names[:2]}... do not match {targets[:2]}...")


def stage1_screen(bundle: RegressorBundle, model: NetworkModel, oc: OperatingCondition,
                  limits: FrequencyLimits = FrequencyLimits()) -> Stage1Result:
    _check_layout(bundle, model, metrics_target_names(model))
    y = predict(bundle, oc_features(model, oc))
    n = len(model.monitored_buses)
    rocof, nadir = y[:n], y[n:]
    bad = limits.violates(rocof, nadir)
    buses = tuple(model.monitored_buses)
    return Stage1Result(buses, rocof, nadir, [b for b, v in zip(buses, bad) if v])


def stage2_governor(bundle: RegressorBundle, model: NetworkModel,
                    oc: OperatingCondition) -> tuple[dict[int, float], dict[int, float]]:
    """Predicted (ramp rate, time to nadir) keyed by committed generator id."""
    _check_layout(bundle, model, governor_target_names(model))
    y = predict(bundle, oc_features(model, oc))
    G = len(model.generators)
    prr, tn = {}, {}
    for k, g in enumerate(with_commitment(model, oc.commitment)):
        if g.units_online > 0:
            prr[g.id] = float(y[k])
            tn[g.id] = float(y[G + k])
    return prr, tn


@dataclass
class PipelineEntry:
    oc_id: str
    initial: Stage1Result
    regulation: RegulationOutcome | None = None
    rescreen: Stage1Result | None = None
    passes: int = 0
    status: str = "compliant-predicted"    # compliant-predicted | regulated | infeasible
    error: str = ""
    shortfall_mw: float = 0.0
    sim_unregulated: dict | None = None    # {"rocof": [...], "nadir": [...]}
    sim_regulated: dict | None = None

    @property
    def sim_pass(self) -> bool | None:
        final = self.sim_regulated if self.sim_regulated is not None else self.sim_unregulated
        if final is None:
            return None
        return bool(final["compliant"])

    def record(self) -> dict:
        r = {
            "oc_id": self.oc_id,
            "status": self.status,
            "violating_buses": " ".join(map(str, self.initial.violations)),
            "pred_min_rocof": float(np.min(self.initial.rocof)),
            "pred_min_nadir": float(np.min(self.initial.nadir)),
            "passes": self.passes,
            "error": self.error,
            "shortfall_mw": self.shortfall_mw,
        }
        if self.regulation is not None:
            reg = self.regulation
            r.update({"original_mw": reg.original_magnitude, "capped_mw": reg.capped_magnitude,
                      "binding_bus": reg.binding_bus, "binding_criterion": reg.binding_criterion,
                      "variant": reg.variant})
        if self.rescreen is not None:
            r.update({"rescreen_min_rocof": float(np.min(self.rescreen.rocof)),
                      "rescreen_min_nadir": float(np.min(self.rescreen.nadir)),
                      "rescreen_violations": len(self.rescreen.violations)})
        for tag, sim in (("unreg", self.sim_unregulated), ("reg", self.sim_regulated)):
            if sim is not None:
                r.update({f"sim_{tag}_min_nadir": float(np.min(sim["nadir"])),
                          f"sim_{tag}_min_rocof": float(np.min(sim["rocof"])),
                          f"sim_{tag}_bus_pass": int(sim["bus_pass"]),
                          f"sim_{tag}_compliant": int(sim["compliant"])})
                if self.regulation is not None and tag == "reg":
                    err = np.abs(np.asarray(self.rescreen.rocof) - np.asarray(sim["rocof"])) \
                        if self.rescreen is not None else None
                    if err is not None:
                        r["rocof_est_err_max"] = float(err.max())
                        r["rocof_est_err_min"] = float(err.min())
        return r


def _run_ml(model, oc, event, bundles, limits, options) -> PipelineEntry:
    b1, b2 = bundles
    screen_limits = limits.with_margin(options.nadir_margin, options.rocof_margin)
    first = stage1_screen(b1, model, oc, screen_limits)
    entry = PipelineEntry(oc.id, first)
    if not first.violations:
        return entry
    current, screen = oc, first
    for k in range(options.passes):
        prr, tn = stage2_governor(b2, model, current)
        pred = Predictions(screen.bus_ids, screen.rocof, screen.nadir, prr, tn)
        try:
            reg = regulate(model, current, event, pred, screen_limits, options.variant, options.scaling)
        except NothingToRegulate:
            break
        except RegulationInfeasible as exc:
            entry.status, entry.error, entry.shortfall_mw = "infeasible", str(exc), exc.shortfall_mw
            return entry
        if entry.regulation is not None:
            reg.original_magnitude = entry.regulation.original_magnitude
        entry.regulation, entry.passes, entry.status = reg, k + 1, "regulated"
        current = reg.oc
        if event.magnitude(current) <= 0:
            break
        # the re-screen is cheap; it also feeds the RoCoF estimation error
        screen = stage1_screen(b1, model, current, screen_limits)
        entry.rescreen = screen
        if not screen.violations:
            break
    return entry


def _sim_summary(res, limits: FrequencyLimits) -> dict:
    bad = limits.violates(res.rocof, res.nadir)
    return {"rocof": [float(v) for v in res.rocof], "nadir": [float(v) for v in res.nadir],
            "bus_pass": int((~bad).sum()), "n_bus": len(bad), "compliant": bool(not bad.any()),
            "diverged": bool(res.diverged)}


def _no_event_summary(model, limits) -> dict:
    n = len(model.monitored_buses)
    return {"rocof": [0.0] * n, "nadir": [limits.f0] * n, "bus_pass": n, "n_bus": n,
            "compliant": True, "diverged": False}


def run_batch(model: NetworkModel, ocs: Sequence[OperatingCondition], event: DisturbanceEvent,
              bundles: tuple[RegressorBundle, RegressorBundle],
              limits: FrequencyLimits = FrequencyLimits(),
              options: PipelineOptions = PipelineOptions()) -> "PipelineReport":
    """Run the pipeline on every OC; simulator validation is batched."""
    entries = [_run_ml(model, oc, event, bundles, limits, options) for oc in ocs]
    if options.validate in ("sim", "both"):
        todo = [(e, oc) for e, oc in zip(entries, ocs) if e.status == "regulated"]
        base = simulate_batch(model, [oc for _, oc in todo], event, options.sim_config)
        for (e, _), res in zip(todo, base):
            e.sim_unregulated = _sim_summary(res, limits)
        live = [(e, e.regulation.oc) for e, _ in todo if event.magnitude(e.regulation.oc) > 0]
        regs = simulate_batch(model, [oc for _, oc in live], event, options.sim_config)
        for (e, _), res in zip(live, regs):
            e.sim_regulated = _sim_summary(res, limits)
        for e, _ in todo:
            if e.sim_regulated is None:
                e.sim_regulated = _no_event_summary(model, limits)
    return PipelineReport(entries, limits, options.variant)


def run_pipeline(model: NetworkModel, oc: OperatingCondition, event: DisturbanceEvent,
                 bundles: tuple[RegressorBundle, RegressorBundle],
                 limits: FrequencyLimits = FrequencyLimits(),
                 options: PipelineOptions = PipelineOptions()) -> PipelineEntry:
    return run_batch(model, [oc], event, bundles, limits, options).entries[0]


# -- reporting -------------------------------------------------------------------

TABLE2_FIELDS = (
    "Unregulated Model Minimum Nadir (Hz)",
    "Unregulated Model Maximum Nadir (Hz)",
    "Regulated Model Minimum Nadir (Hz)",
    "Regulated Model Maximum Nadir (Hz)",
    "Regulated Model Accuracy (%)",
    "Regulated Model Accuracy by bus (%)",
    "RoCoF Estimation Error Minimum (Hz/s)",
    "RoCoF Estimation Error Maximum (Hz/s)",
    "Regulated OCs",
    "Infeasible OCs",
)


def aggregate(records: list[dict]) -> dict[str, float]:
    """Table-II style summary computed only from per-OC records."""
    reg = [r for r in records if r["status"] == "regulated" and "sim_reg_compliant" in r]
    out: dict[str, float] = {k: float("nan") for k in TABLE2_FIELDS}
    out["Regulated OCs"] = float(len(reg))
    out["Infeasible OCs"] = float(sum(r["status"] == "infeasible" for r in records))
    if reg:
        un = [r["sim_unreg_min_nadir"] for r in reg]
        rg = [r["sim_reg_min_nadir"] for r in reg]
        out["Unregulated Model Minimum Nadir (Hz)"] = min(un)
        out["Unregulated Model Maximum Nadir (Hz)"] = max(un)
        out["Regulated Model Minimum Nadir (Hz)"] = min(rg)
        out["Regulated Model Maximum Nadir (Hz)"] = max(rg)
        out["Regulated Model Accuracy (%)"] = 100.0 * sum(r["sim_reg_compliant"] for r in reg) / len(reg)
        n_bus = sum(r["n_bus"] for r in reg) if "n_bus" in reg[0] else None
        passed = sum(r["sim_reg_bus_pass"] for r in reg)
        out["Regulated Model Accuracy by bus (%)"] = 100.0 * passed / n_bus if n_bus else float("nan")
        errs = [r for r in reg if "rocof_est_err_max" in r]
        if errs:
            out["RoCoF Estimation Error Minimum (Hz/s)"] = min(r["rocof_est_err_min"] for r in errs)
            out["RoCoF Estimation Error Maximum (Hz/s)"] = max(r["rocof_est_err_max"] for r in errs)
    return out


@dataclass
class PipelineReport:
    entries: list[PipelineEntry]
    limits: FrequencyLimits = FrequencyLimits()
    variant: str = "consistent"

    def records(self) -> list[dict]:
        out = []
        for e in self.entries:
            r = e.record()
            sim = e.sim_regulated or e.sim_unregulated
            if sim is not None:
                r["n_bus"] = sim["n_bus"]
            out.append(r)
        return out

    def summary(self) -> dict[str, float]:
        return aggregate(self.records())

    def never_worse(self) -> bool:
        regs = [e for e in self.entries if e.sim_regulated is not None and e.sim_unregulated is not None]
        return all(np.min(e.sim_regulated["nadir"]) >= np.min(e.sim_unregulated["nadir"]) for e in regs)

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        records = self.records()
        write_records(out / "pipeline.csv", records)
        (out / "pipeline.json").write_text(json.dumps(
            {"records": records, "entries": [_entry_json(e) for e in self.entries]},
            indent=1, sort_keys=True) + "\n")
        (out / "summary.txt").write_text(format_summary(self.summary()))


def _entry_json(e: PipelineEntry) -> dict:
    d = {"oc_id": e.oc_id, "initial": {"rocof": list(map(float, e.initial.rocof)),
                                       "nadir": list(map(float, e.initial.nadir))},
         "sim_unregulated": e.sim_unregulated, "sim_regulated": e.sim_regulated}
    if e.regulation is not None:
        oc = e.regulation.oc
        d["regulated_oc"] = {"loading": oc.loading, "cig_output": oc.cig_output,
                             "commitment": {str(k): v for k, v in oc.commitment.items()},
                             "dispatch": {str(k): v for k, v in oc.dispatch.items()}}
        d["psi_rocof"] = list(map(float, e.regulation.psi_rocof))
        d["delta_p_max"] = list(map(float, e.regulation.delta_p_max))
        d["divergences"] = e.regulation.divergences
    return d


def write_records(path: str | Path, records: list[dict]) -> None:
    keys: list[str] = []
    for r in records:
        keys += [k for k in r if k not in keys]
    with open(path, "w") as fh:
        fh.write(",".join(keys) + "\n")
        for r in records:
            fh.write(",".join(_cell(r.get(k, "")) for k in keys) + "\n")


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    s = str(v)
    return '"' + s.replace('"', "'") + '"' if "," in s else s


def format_summary(summary: dict[str, float]) -> str:
    width = max(len(k) for k in summary)
    return "".join(f"{k:<{width}}  {v:.4f}\n" for k, v in summary.items())


# -- model evaluation ----------------------------------------------------------------

@dataclass
class EvaluationReport:
    bus_ids: tuple[int, ...]
    gen_ids: tuple[int, ...]
    rocof_rmse: np.ndarray
    nadir_rmse: np.ndarray
    ramp_rmse: np.ndarray
    t_nadir_rmse: np.ndarray
    ramp_rmse_pct_rating: np.ndarray
    n_rows: int

    def rows(self) -> list[dict]:
        out = []
        for k, b in enumerate(self.bus_ids):
            out.append({"bus": b, "sg": self.gen_ids[k], "rocof_rmse": float(self.rocof_rmse[k]),
                        "nadir_rmse": float(self.nadir_rmse[k]), "ramp_rate_rmse": float(self.ramp_rmse[k]),
                        "ramp_rate_rmse_pct": float(self.ramp_rmse_pct_rating[k]),
                        "t_nadir_rmse": float(self.t_nadir_rmse[k])})
        return out

    def text(self) -> str:
        lines = [f"{'Bus':>4} {'SG':>3} {'RoCoF (Hz/s)':>13} {'Nadir (Hz)':>11} "
                 f"{'RampRate (MW/s)':>16} {'% rating':>9} {'TimeToNadir (s)':>16}"]
        for r in self.rows():
            lines.append(f"{r['bus']:>4} {r['sg']:>3} {r['rocof_rmse']:>13.4f} {r['nadir_rmse']:>11.4f} "
                         f"{r['ramp_rate_rmse']:>16.4f} {r['ramp_rate_rmse_pct']:>9.4f} {r['t_nadir_rmse']:>16.4f}")
        return "\n".join(lines) + "\n"


def evaluate_models(model: NetworkModel, bundles: tuple[RegressorBundle, RegressorBundle],
                    test: Dataset) -> EvaluationReport:
    if len(test) == 0:
        raise ValueError("empty test set")
    b1, b2 = bundles
    _check_layout(b1, model, metrics_target_names(model))
    _check_layout(b2, model, governor_target_names(model))
    m_err = rmse(test.metrics_targets(model), predict(b1, test.features))
    g_true = test.governor_targets(model)
    g_pred = predict(b2, test.features)
    mask = np.hstack([test.masks(model)] * 2)
    g_err = np.sqrt(np.sum(np.where(mask, (g_true - g_pred) ** 2, 0.0), axis=0)
                    / np.maximum(mask.sum(axis=0), 1))
    n, G = len(model.monitored_buses), len(model.generators)
    rating = np.array([g.rated_mva for g in model.generators])
    gen_at_bus = [next((g.id for g in model.generators if g.bus == b), 0) for b in model.monitored_buses]
    return EvaluationReport(tuple(model.monitored_buses), tuple(gen_at_bus), m_err[:n], m_err[n:],
                            g_err[:G], g_err[G:], 100.0 * g_err[:G] / rating, len(test))
