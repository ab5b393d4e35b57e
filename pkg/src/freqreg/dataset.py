"""Operating-condition sweep and the feature/target tables built from it."""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dynamics import DisturbanceEvent, SimConfig, simulate_batch
from .grid import (
    InfeasibleDispatch,
    NetworkModel,
    OperatingCondition,
    cig_capacity,
    economic_dispatch,
    effective_rating,
    full_commitment,
    with_commitment,
)

log = logging.getLogger(__name__)

FEATURES_FILE = "features.csv"
TARGETS_FILE = "targets.csv"
MANIFEST_FILE = "manifest.json"


def default_loadings() -> tuple[float, ...]:
    return tuple(round(0.6 + 0.025 * k, 6) for k in range(18))


@dataclass(frozen=True)
class SweepSpec:
    loadings: tuple[float, ...] = field(default_factory=default_loadings)
    unit_levels: tuple[int, ...] = (1, 2, 3, 4)
    displaced: tuple[int, ...] = (4, 5, 6, 7)
    cig_range: tuple[float, float] = (100.0, 1000.0)
    outage_target: int = 5
    seed: int = 0
    n_samples: int | None = 2200
    chunk: int = 128

    def __post_init__(self):
        if not self.loadings or not self.unit_levels or not self.displaced:
            raise ValueError("sweep grids must be nonempty")
        if self.cig_range[0] > self.cig_range[1]:
            raise ValueError("cig_range must be (low, high)")
        if self.n_samples is not None and self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if any(u not in (0, 1, 2, 3, 4) for u in self.unit_levels):
            raise ValueError("unit levels must lie in 0..4")

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        d = dict(d)
        for key in ("loadings", "unit_levels", "displaced", "cig_range"):
            if key in d:
                d[key] = tuple(d[key])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown sweep keys: {sorted(unknown)}")
        return cls(**d)

    def grid(self) -> list[tuple[float, tuple[int, ...]]]:
        combos = list(itertools.product(self.unit_levels, repeat=len(self.displaced)))
        return [(l, c) for l in self.loadings for c in combos]

    def points(self) -> list[tuple[float, tuple[int, ...]]]:
        """Grid points to run, in sweep order (a seeded subsample when n_samples is set)."""
        grid = self.grid()
        if self.n_samples is None or self.n_samples >= len(grid):
            return grid
        rng = np.random.default_rng(self.seed)
        keep = np.sort(rng.choice(len(grid), size=self.n_samples, replace=False))
        return [grid[i] for i in keep]


def feature_names(model: NetworkModel) -> list[str]:
    ids = model.generator_ids
    return ["loading", "cig_output"] + [f"d{i}" for i in ids] + [f"o{i}" for i in ids]


def metrics_target_names(model: NetworkModel) -> list[str]:
    b = model.monitored_buses
    return [f"rocof_b{i}" for i in b] + [f"nadir_b{i}" for i in b]


def governor_target_names(model: NetworkModel) -> list[str]:
    ids = model.generator_ids
    return [f"prr_sg{i}" for i in ids] + [f"tnadir_sg{i}" for i in ids]


def mask_names(model: NetworkModel) -> list[str]:
    return [f"mask_sg{i}" for i in model.generator_ids]


def oc_features(model: NetworkModel, oc: OperatingCondition) -> np.ndarray:
    gens = model.generators
    d = [float(oc.dispatch.get(g.id, 0.0)) for g in gens]
    o = [effective_rating(g) for g in with_commitment(model, oc.commitment)]
    return np.array([oc.loading, oc.cig_output] + d + o)


def oc_from_features(model: NetworkModel, x: Sequence[float], oc_id: str = "") -> OperatingCondition:
    """Inverse of oc_features; unit counts are recovered from the effective ratings."""
    x = np.asarray(x, dtype=float)
    G = len(model.generators)
    d, o = x[2:2 + G], x[2 + G:2 + 2 * G]
    commitment, dispatch = {}, {}
    for g, dg, og in zip(model.generators, d, o):
        u = int(round(og * g.units_total / g.rated_mva))
        commitment[g.id] = u
        dispatch[g.id] = float(dg) if u > 0 else 0.0
    return OperatingCondition(loading=float(x[0]), commitment=commitment, dispatch=dispatch,
                              cig_output=float(x[1]), id=oc_id)


@dataclass
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    feature_names: list[str]
    target_names: list[str]
    ids: list[str]
    diverged: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def columns(self, names: Sequence[str]) -> np.ndarray:
        idx = [self.target_names.index(n) for n in names]
        return self.targets[:, idx]

    def metrics_targets(self, model: NetworkModel) -> np.ndarray:
        return self.columns(metrics_target_names(model))

    def governor_targets(self, model: NetworkModel) -> np.ndarray:
        return self.columns(governor_target_names(model))

    def masks(self, model: NetworkModel) -> np.ndarray:
        return self.columns(mask_names(model)).astype(bool)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.features[idx], self.targets[idx], list(self.feature_names),
                       list(self.target_names), [self.ids[i] for i in idx], self.diverged[idx])

    def stable(self) -> "Dataset":
        return self.subset(np.flatnonzero(~self.diverged))

    def operating_conditions(self, model: NetworkModel) -> list[OperatingCondition]:
        return [oc_from_features(model, x, i) for x, i in zip(self.features, self.ids)]


def build_oc(model: NetworkModel, spec: SweepSpec, loading: float, units: tuple[int, ...],
             oc_id: str = "") -> OperatingCondition:
    """Commitment from unit levels, CIG from the displaced capacity, dispatch by merit order."""
    commitment = full_commitment(model)
    for gid, u in zip(spec.displaced, units):
        commitment[gid] = int(u)
    displaced = [model.generator(g) for g in spec.displaced]
    cig = cig_capacity([replace(g, units_online=commitment[g.id]) for g in displaced],
                       model.cig.r, model.cig.s)
    lo, hi = spec.cig_range
    if not lo <= cig <= hi:
        raise InfeasibleDispatch(f"CIG output {cig:.1f} MW outside {spec.cig_range}")
    return economic_dispatch(model, loading, commitment, cig, oc_id=oc_id)


def generate_dataset(
    model: NetworkModel,
    spec: SweepSpec = SweepSpec(),
    out_dir: str | Path | None = None,
    config: SimConfig = SimConfig(),
    workers: int = 1,
) -> tuple[Dataset, dict]:
    """Run the sweep and return the table plus its manifest (written when out_dir is given)."""
    points = spec.points()
    log.info("sweep: %d grid points, %d to run", len(spec.grid()), len(points))
    ocs, skipped = [], []
    for k, (loading, units) in enumerate(points):
        oc_id = f"l{loading:.3f}_u{''.join(map(str, units))}"
        try:
            oc = build_oc(model, spec, loading, units, oc_id)
        except InfeasibleDispatch as exc:
            skipped.append({"id": oc_id, "reason": str(exc)})
            continue
        if oc.dispatch.get(spec.outage_target, 0.0) <= 0.0:
            skipped.append({"id": oc_id, "reason": "outage target offline"})
            continue
        ocs.append(oc)

    event = DisturbanceEvent(target=spec.outage_target)
    outcomes = simulate_batch(model, ocs, event, config, chunk=spec.chunk, workers=workers)

    X = np.array([oc_features(model, oc) for oc in ocs]).reshape(len(ocs), -1)
    rows = []
    for oc, res in zip(ocs, outcomes):
        mask = np.asarray(res.committed, dtype=float)
        rows.append(np.concatenate([res.rocof, res.nadir, res.ramp_rate,
                                    np.where(res.committed, res.gen_t_nadir, 0.0), mask]))
    Y = np.array(rows).reshape(len(ocs), -1)
    diverged = np.array([r.diverged for r in outcomes], dtype=bool)
    tnames = metrics_target_names(model) + governor_target_names(model) + mask_names(model)
    ds = Dataset(X, Y, feature_names(model), tnames, [oc.id for oc in ocs], diverged)

    fnames = ds.feature_names
    manifest = {
        "fixture": model.name,
        "sweep": asdict(spec),
        "sim_config": asdict(config),
        "counts": {
            "grid_points": len(spec.grid()),
            "attempted": len(points),
            "skipped_infeasible": len(skipped),
            "diverged": int(diverged.sum()),
            "rows": len(ds),
        },
        "skipped": skipped,
        "diverged_ids": [i for i, d in zip(ds.ids, diverged) if d],
        "feature_ranges": _ranges(X, fnames),
        "target_ranges": _ranges(Y, tnames),
    }
    if out_dir is not None:
        save_dataset(ds, out_dir)
        Path(out_dir, MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return ds, manifest


def _ranges(a: np.ndarray, names: list[str]) -> dict[str, list[float]]:
    if len(a) == 0:
        return {n: [] for n in names}
    return {n: [float(a[:, j].min()), float(a[:, j].max())] for j, n in enumerate(names)}


def save_dataset(ds: Dataset, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_table(out / FEATURES_FILE, ds.ids, ds.feature_names, ds.features)
    extra = np.column_stack([ds.targets, ds.diverged.astype(float)]) if len(ds) else np.zeros((0, len(ds.target_names) + 1))
    _write_table(out / TARGETS_FILE, ds.ids, ds.target_names + ["diverged"], extra)


def _write_table(path: Path, ids: list[str], names: list[str], data: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(["id"] + names) + "\n")
        for i, row in zip(ids, data):
            fh.write(",".join([i] + ["%.17g" % v for v in row]) + "\n")


def _read_table(path: Path) -> tuple[list[str], list[str], np.ndarray]:
    with open(path) as fh:
        names = fh.readline().strip().split(",")[1:]
        ids, rows = [], []
        for line in fh:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            ids.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    data = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return ids, names, data


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    ids, fnames, X = _read_table(path / FEATURES_FILE)
    tids, tnames, Y = _read_table(path / TARGETS_FILE)
    if ids != tids:
        raise ValueError("feature and target tables list different rows")
    if tnames[-1] != "diverged":
        raise ValueError("target table lacks the diverged column")
    return Dataset(X, Y[:, :-1], fnames, tnames[:-1], ids, Y[:, -1].astype(bool))


def check_consistency(model: NetworkModel, ds: Dataset) -> None:
    """Every o column must equal u*S/4 for an integer u in 0..4."""
    G = len(model.generators)
    o = ds.features[:, 2 + G:2 + 2 * G]
    S = np.array([g.rated_mva for g in model.generators])
    u = o * 4.0 / S
    if not np.allclose(u, np.round(u), atol=1e-9) or (np.round(u) < 0).any() or (np.round(u) > 4).any():
        raise ValueError("effective-rating columns are not u*S/4 for integer u")


def split_indices(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if n == 0:
        raise ValueError("cannot split an empty set")
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie strictly between 0 and 1")
    perm = np.random.default_rng(seed).permutation(n)
    k = int(np.floor(n * fraction))
    return perm[:k], perm[k:]


def train_test_split(rows, fraction: float = 0.7, seed: int = 0):
    """Shuffled split into floor(n*fraction) training rows and the remainder."""
    n = len(rows)
    tr, te = split_indices(n, fraction, seed)
    if isinstance(rows, Dataset):
        return rows.subset(tr), rows.subset(te)
    if isinstance(rows, np.ndarray):
        return rows[tr], rows[te]
    return [rows[i] for i in tr], [rows[i] for i in te]
