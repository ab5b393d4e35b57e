"""Command-line entry point: ``freqreg <subcommand> ...``.

Exit codes: 0 success, 1 domain infeasibility, 2 usage or I/O error.
Every subcommand writes ``run_manifest.json`` next to its outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import shutil
import sys
import tempfile
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np
import yaml

from .dataset import (
    SweepSpec,
    feature_names,
    generate_dataset,
    governor_target_names,
    load_dataset,
    metrics_target_names,
    train_test_split,
)
from .dynamics import DisturbanceEvent, SimConfig, simulate_batch, write_traces, read_traces
from .grid import (
    FixtureError,
    OperatingCondition,
    load_network,
    system_kinetic_energy,
    economic_dispatch,
    full_commitment,
    cig_capacity_for,
    validate_oc,
    InvalidOperatingCondition,
)
from .ml import RegressorBundle, TrainConfig, grid_search, train
from .pipeline import LayoutMismatch, PipelineOptions, evaluate_models, format_summary, run_batch
from .regulator import SCALINGS, VARIANTS, FrequencyLimits
from .report import traces_csv, traces_svg

log = logging.getLogger("freqreg")

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(path: Path, command: str, config: dict, inputs: list, outputs: list,
                   started: float, seeds: dict | None = None) -> Path:
    manifest = {
        "subcommand": command,
        "config": config,
        "seeds": seeds or {},
        "inputs": [str(p) for p in inputs],
        "outputs": {str(Path(p).name): _sha256(Path(p)) for p in outputs if Path(p).is_file()},
        "wall_clock_s": round(time.time() - started, 3),
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _args_config(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _load_structured(path: str) -> object:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"file not found: {path}")
    text = p.read_text()
    try:
        return json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from exc


def _model(args):
    try:
        return load_network(args.fixture, args.data_dir)
    except FixtureError as exc:
        raise UsageError(str(exc)) from exc


# -- fixture ---------------------------------------------------------------------

def cmd_fixture(args) -> int:
    model = _model(args)
    commit = full_commitment(model)
    oc = economic_dispatch(model, 1.0, commit, cig_capacity_for(model, commit))
    print(f"fixture {model.name}: {len(model.buses)} buses, {len(model.lines)} lines, "
          f"{len(model.generators)} generators, CIG at bus {model.cig.bus}")
    print(f"base load {model.base_load():.1f} MW, f_n {model.nominal_frequency} Hz, "
          f"kinetic energy (full commitment) {system_kinetic_energy(model, oc):.0f} MW s")
    print(f"{'SG':>3} {'bus':>4} {'S (MVA)':>8} {'H (s)':>6} {'R':>6} {'ramp':>6} {'t_D':>5} {'cost':>5}")
    for g in model.generators:
        print(f"{g.id:>3} {g.bus:>4} {g.rated_mva:>8.0f} {g.H:>6.2f} {g.droop:>6.3f} "
              f"{g.ramp_limit:>6.1f} {g.deadband_time:>5.2f} {g.marginal_cost:>5.1f}")
    return EXIT_OK


# -- gen-data --------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    started = time.time()
    model = _model(args)
    spec_dict = {}
    if args.sweep_spec:
        loaded = _load_structured(args.sweep_spec)
        if not isinstance(loaded, dict):
            raise UsageError("sweep spec must be a mapping")
        spec_dict.update(loaded)
    if args.seed is not None:
        spec_dict["seed"] = args.seed
    if args.n_samples is not None:
        spec_dict["n_samples"] = None if args.n_samples <= 0 else args.n_samples
    try:
        spec = SweepSpec.from_dict(spec_dict)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad sweep spec: {exc}") from exc

    out = Path(args.out)
    print(f"sweep: {len(spec.grid())} grid points, {len(spec.points())} to simulate")
    tmp = Path(tempfile.mkdtemp(prefix=".gen-", dir=out.parent if out.parent.exists() else None))
    try:
        ds, manifest = generate_dataset(model, spec, tmp, workers=args.workers)
        out.mkdir(parents=True, exist_ok=True)
        for f in tmp.iterdir():
            shutil.move(str(f), out / f.name)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    c = manifest["counts"]
    print(f"rows {c['rows']}, skipped {c['skipped_infeasible']}, diverged {c['diverged']}")
    write_manifest(out / "run_manifest.json", "gen-data", {**_args_config(args), "sweep": asdict(spec)},
                   [args.sweep_spec] if args.sweep_spec else [],
                   sorted(p for p in out.iterdir() if p.name != "run_manifest.json"), started,
                   {"sweep": spec.seed})
    return EXIT_OK


# -- train -----------------------------------------------------------------------

def _parse_grid(text: str | None) -> list[dict]:
    if not text:
        return [{}]
    grid = _load_structured(text) if Path(text).is_file() else json.loads(text)
    if isinstance(grid, dict):
        # mapping of parameter -> list of values: expand to the cartesian product
        import itertools
        keys = sorted(grid)
        grid = [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]
    if not isinstance(grid, list) or not all(isinstance(g, dict) for g in grid) or not grid:
        raise UsageError("--grid must be a nonempty list of parameter mappings")
    for g in grid:
        if "hidden" in g:
            g["hidden"] = tuple(g["hidden"])
    return grid


def _split(args, ds):
    train_rows, test_rows = train_test_split(ds.stable(), args.fraction, args.split_seed)
    return train_rows, test_rows


def cmd_train(args) -> int:
    started = time.time()
    model = _model(args)
    ds = _load_ds(args.dataset)
    if args.model == "metrics":
        names = metrics_target_names(model)
    else:
        names = governor_target_names(model)
    if ds.feature_names != feature_names(model) or not set(names) <= set(ds.target_names):
        raise UsageError("dataset columns do not match the fixture layout")
    try:
        grid = _parse_grid(args.grid)
    except json.JSONDecodeError as exc:
        raise UsageError(f"cannot parse --grid: {exc}") from exc
    tr, _ = _split(args, ds)
    base = TrainConfig(seed=args.seed)
    if args.epochs is not None:
        base = base.replace(max_epochs=args.epochs)
    try:
        if len(grid) > 1:
            best, table = grid_search(tr.features, tr.columns(names), grid, base, k=args.folds, seed=args.seed)
            print(f"{'#':>3} {'mean':>10} {'std':>10} {'params':>8}  candidate")
            for row in table:
                print(f"{row['order']:>3} {row['mean']:>10.6f} {row['std']:>10.6f} "
                      f"{row['n_parameters']:>8}  {json.dumps(row['params'], sort_keys=True)}")
        else:
            best, table = base.replace(**grid[0]), []
    except TypeError as exc:
        raise UsageError(f"bad grid parameter: {exc}") from exc
    bundle = train(tr.features, tr.columns(names), best, feature_names(model), names)
    bundle.metadata["cv_table"] = table
    bundle.metadata["model"] = args.model
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    bundle.save(out)
    print(f"saved {args.model} bundle ({len(names)} outputs) to {out}")
    write_manifest(out.with_suffix(".manifest.json"), "train", _args_config(args), [args.dataset], [out], started,
                   {"train": args.seed, "split": args.split_seed})
    return EXIT_OK


def _load_ds(path):
    try:
        return load_dataset(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read dataset {path}: {exc}") from exc


def _load_bundles(paths):
    if len(paths) != 2:
        raise UsageError("--bundles takes the metrics bundle then the governor bundle")
    try:
        return tuple(RegressorBundle.load(p) for p in paths)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot load bundle: {exc}") from exc


# -- evaluate --------------------------------------------------------------------

def cmd_evaluate(args) -> int:
    started = time.time()
    model = _model(args)
    bundles = _load_bundles(args.bundles)
    ds = _load_ds(args.dataset)
    tr, te = _split(args, ds)
    rows = {"test": te, "train": tr, "all": ds.stable()}[args.split]
    try:
        rep = evaluate_models(model, bundles, rows)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    text = rep.text()
    print(text, end="")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "table1.txt").write_text(text)
    from .pipeline import write_records
    write_records(out / "table1.csv", rep.rows())
    write_manifest(out / "run_manifest.json", "evaluate", _args_config(args), [args.dataset, *args.bundles],
                   [out / "table1.txt", out / "table1.csv"], started, {"split": args.split_seed})
    return EXIT_OK


# -- regulate --------------------------------------------------------------------

def _oc_from_json(d: dict, idx: int) -> OperatingCondition:
    try:
        return OperatingCondition(
            loading=float(d["loading"]), cig_output=float(d["cig_output"]),
            commitment={int(k): int(v) for k, v in d["commitment"].items()},
            dispatch={int(k): float(v) for k, v in d["dispatch"].items()},
            id=str(d.get("id", f"oc{idx}")))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed operating condition #{idx}: {exc}") from exc


def _parse_limits(text: str | None) -> FrequencyLimits:
    if not text:
        return FrequencyLimits()
    try:
        if Path(text).is_file():
            d = _load_structured(text)
            return FrequencyLimits(**d)
        rocof, nadir = (float(v) for v in text.split(","))
        return FrequencyLimits(rocof_limit=rocof, nadir_limit=nadir)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad --limits: {exc}") from exc


def _select_ocs(args, model, limits):
    if args.oc:
        data = _load_structured(args.oc)
        items = data if isinstance(data, list) else [data]
        ocs = [_oc_from_json(d, i) for i, d in enumerate(items)]
        for oc in ocs:
            try:
                validate_oc(model, oc)
            except InvalidOperatingCondition as exc:
                raise UsageError(f"{oc.id}: {exc}") from exc
        return ocs
    if not args.dataset:
        raise UsageError("give --oc FILE or --dataset DIR")
    ds = _load_ds(args.dataset)
    _, te = _split(args, ds)
    y = te.metrics_targets(model)
    n = len(model.monitored_buses)
    if args.subset == "violating":
        te = te.subset(np.flatnonzero(limits.violates(y[:, :n], y[:, n:]).any(axis=1)))
    ocs = te.operating_conditions(model)
    return ocs[: args.limit] if args.limit else ocs


def cmd_regulate(args) -> int:
    started = time.time()
    model = _model(args)
    bundles = _load_bundles(args.bundles)
    limits = _parse_limits(args.limits)
    ocs = _select_ocs(args, model, limits)
    if not ocs:
        raise UsageError("no operating conditions selected")
    event = DisturbanceEvent(target=args.target)
    options = PipelineOptions(variant=args.variant, scaling=args.scaling, validate=args.validate,
                              passes=args.passes,
                              nadir_margin=args.nadir_margin, rocof_margin=args.rocof_margin)
    report = run_batch(model, ocs, event, bundles, limits, options)
    out = Path(args.out)
    report.save(out)
    print(format_summary(report.summary()), end="")
    outputs = [out / "pipeline.csv", out / "pipeline.json", out / "summary.txt"]

    # traces for the first regulated OC, for the report command
    first = next((e for e in report.entries if e.regulation is not None
                  and event.magnitude(e.regulation.oc) > 0), None)
    if first is not None:
        src = next(oc for oc in ocs if oc.id == first.oc_id)
        cfg = SimConfig(keep_traces=True)
        unreg, reg = simulate_batch(model, [src, first.regulation.oc], event, cfg)
        write_traces(out / "trace_unregulated.txt", unreg.traces)
        write_traces(out / "trace_regulated.txt", reg.traces)
        outputs += [out / "trace_unregulated.txt", out / "trace_regulated.txt"]
    write_manifest(out / "run_manifest.json", "regulate", _args_config(args),
                   [p for p in (args.oc, args.dataset, *args.bundles) if p], outputs, started,
                   {"split": args.split_seed})
    infeasible = sum(e.status == "infeasible" for e in report.entries)
    attempted = sum(e.status in ("infeasible", "regulated") for e in report.entries)
    if infeasible and (len(ocs) == 1 or infeasible == attempted):
        print(f"regulation infeasible for {infeasible} OC(s)", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


# -- report ----------------------------------------------------------------------

def cmd_report(args) -> int:
    started = time.time()
    run = Path(args.run_dir)
    summary = run / "summary.txt"
    if not summary.is_file():
        raise UsageError(f"{run} has no summary.txt; run 'regulate' first")
    outputs = []
    if args.format == "text":
        print(summary.read_text(), end="")
        table1 = run / "table1.txt"
        if table1.is_file():
            print(table1.read_text(), end="")
    else:
        tu, tr = run / "trace_unregulated.txt", run / "trace_regulated.txt"
        if not (tu.is_file() and tr.is_file()):
            raise UsageError(f"{run} has no trace files")
        t, fu, buses = read_traces(tu)
        _, fr, _ = read_traces(tr)
        limit = _nadir_limit_from_run(run)
        if args.format == "csv":
            path = run / "traces.csv"
            traces_csv(path, t, {"unregulated": fu, "regulated": fr}, buses)
        else:
            path = run / "traces.svg"
            traces_svg(path, t, fu, fr, buses, limit=limit)
        outputs.append(path)
        print(f"wrote {path}")
    write_manifest(run / "report_manifest.json", "report", _args_config(args),
                   [summary], outputs, started)
    return EXIT_OK


def _nadir_limit_from_run(run: Path) -> float:
    m = run / "run_manifest.json"
    try:
        cfg = json.loads(m.read_text())["config"]
        return _parse_limits(cfg.get("limits")).nadir_limit
    except (OSError, KeyError, ValueError, UsageError):
        return FrequencyLimits().nadir_limit


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="freqreg", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def fixture_args(sp):
        sp.add_argument("--fixture", default="ieee39")
        sp.add_argument("--data-dir", default=None,
                        help="fixture directory (default: $FREQREG_FIXTURE_DIR, then packaged data)")

    def split_args(sp):
        sp.add_argument("--fraction", type=float, default=0.7)
        sp.add_argument("--split-seed", type=int, default=0)

    sp = sub.add_parser("fixture", help="summarise a network fixture")
    fixture_args(sp)
    sp.set_defaults(func=cmd_fixture)

    sp = sub.add_parser("gen-data", help="sweep operating conditions and simulate the outage")
    fixture_args(sp)
    sp.add_argument("--sweep-spec", default=None, help="YAML/JSON mapping of SweepSpec fields")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--n-samples", type=int, default=None, help="0 runs the full grid")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("train", help="fit one regressor bundle")
    fixture_args(sp)
    split_args(sp)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--model", choices=("metrics", "governor"), required=True)
    sp.add_argument("--grid", default=None, help="JSON list of overrides, or a file holding one")
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--epochs", type=int, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="bundle path (.json)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="per-bus and per-SG RMSE on a split")
    fixture_args(sp)
    split_args(sp)
    sp.add_argument("--bundles", nargs=2, required=True, metavar=("METRICS", "GOVERNOR"))
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--split", choices=("test", "train", "all"), default="test")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("regulate", help="run screen/regulate/redispatch on OCs")
    fixture_args(sp)
    split_args(sp)
    sp.add_argument("--bundles", nargs=2, required=True, metavar=("METRICS", "GOVERNOR"))
    sp.add_argument("--oc", default=None, help="JSON file with one OC or a list of OCs")
    sp.add_argument("--dataset", default=None, help="take OCs from this dataset's test split")
    sp.add_argument("--subset", choices=("violating", "all"), default="violating")
    sp.add_argument("--limit", type=int, default=0, help="use at most this many OCs")
    sp.add_argument("--limits", default=None, help="'ROCOF,NADIR' or a YAML/JSON file")
    sp.add_argument("--variant", choices=VARIANTS, default="consistent")
    sp.add_argument("--validate", choices=("none", "ml", "sim", "both"), default="sim")
    sp.add_argument("--scaling", choices=SCALINGS, default="droop",
                    help="how the governor inputs move when the disturbance shrinks")
    sp.add_argument("--passes", type=int, default=1, choices=(1, 2, 3))
    sp.add_argument("--nadir-margin", type=float, default=0.0, help="Hz added to the nadir limit when screening")
    sp.add_argument("--rocof-margin", type=float, default=0.0, help="Hz/s added to the RoCoF limit when screening")
    sp.add_argument("--target", type=int, default=5)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_regulate)

    sp = sub.add_parser("report", help="render a regulate run")
    sp.add_argument("--run-dir", required=True)
    sp.add_argument("--format", choices=("text", "csv", "svg"), default="text")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, LayoutMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
