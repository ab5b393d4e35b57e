import json

import numpy as np
import pytest

from freqreg.dataset import (
    SweepSpec,
    build_oc,
    feature_names,
    governor_target_names,
    metrics_target_names,
)
from freqreg.dynamics import DisturbanceEvent, simulate_batch
from freqreg.pipeline import (
    LayoutMismatch,
    PipelineOptions,
    TABLE2_FIELDS,
    aggregate,
    evaluate_models,
    run_batch,
    run_pipeline,
    stage1_screen,
    stage2_governor,
)
from freqreg.regulator import FrequencyLimits

from conftest import constant_bundle

OUTAGE = DisturbanceEvent(target=5)


def metrics_bundle(model, rocof, nadir):
    return constant_bundle(feature_names(model), metrics_target_names(model),
                           np.concatenate([np.broadcast_to(rocof, 10), np.broadcast_to(nadir, 10)]))


def governor_bundle(model, ramp=5.0, tn=4.0):
    return constant_bundle(feature_names(model), governor_target_names(model),
                           np.concatenate([np.full(10, ramp), np.full(10, tn)]))


@pytest.fixture(scope="module")
def oc(model):
    return build_oc(model, SweepSpec(), 0.9, (4, 4, 4, 4), "base")


def test_safe_case_exits_early(model, oc):
    bundles = (metrics_bundle(model, -0.1, 59.9), governor_bundle(model))
    entry = run_pipeline(model, oc, OUTAGE, bundles)
    assert entry.initial.violations == []
    assert entry.status == "compliant-predicted"
    rec = entry.record()
    assert "capped_mw" not in rec and "binding_bus" not in rec
    assert entry.sim_regulated is None and entry.sim_unregulated is None


def test_predictions_at_limits_pass(model, oc):
    res = stage1_screen(metrics_bundle(model, -0.5, 59.6), model, oc, FrequencyLimits())
    assert res.violations == []


def test_violating_prediction_is_flagged(model, oc):
    rocof = np.full(10, -0.2)
    rocof[3] = -0.9
    res = stage1_screen(metrics_bundle(model, rocof, 59.9), model, oc)
    assert res.violations == [33]


def test_decommitted_generator_is_absent(model):
    oc0 = build_oc(model, SweepSpec(unit_levels=(0, 1, 2, 3, 4)), 0.8, (0, 4, 4, 4), "off")
    prr, tn = stage2_governor(governor_bundle(model), model, oc0)
    assert 4 not in prr and 4 not in tn
    assert set(prr) == set(range(1, 11)) - {4}


def test_layout_mismatch(model, oc):
    wrong = constant_bundle(feature_names(model)[::-1], metrics_target_names(model), 0.0)
    with pytest.raises(LayoutMismatch):
        stage1_screen(wrong, model, oc)
    with pytest.raises(LayoutMismatch):
        stage2_governor(metrics_bundle(model, -0.1, 59.9), model, oc)


def test_options_validation():
    with pytest.raises(ValueError):
        PipelineOptions(validate="never")
    with pytest.raises(ValueError):
        PipelineOptions(passes=4)


def test_regulation_path_with_constant_predictions(model, oc):
    bundles = (metrics_bundle(model, -0.9, 59.9), governor_bundle(model))
    entry = run_pipeline(model, oc, OUTAGE, bundles)
    assert entry.status == "regulated"
    dp = oc.dispatch[5]
    assert entry.regulation.capped_magnitude == pytest.approx(dp * 0.5 / 0.9)
    # the regulated OC is simulated and can only be milder
    assert min(entry.sim_regulated["nadir"]) >= min(entry.sim_unregulated["nadir"])
    assert entry.record()["rocof_est_err_max"] >= 0.0


def test_infeasible_is_recorded_not_raised(model):
    tight = build_oc(model, SweepSpec(), 1.025, (1, 4, 4, 4), "tight")
    bundles = (metrics_bundle(model, -50.0, 59.9), governor_bundle(model))
    report = run_batch(model, [tight], OUTAGE, bundles)
    e = report.entries[0]
    assert e.status == "infeasible"
    assert e.shortfall_mw > 0 and "redispatch" in e.error
    assert report.summary()["Infeasible OCs"] == 1.0


@pytest.fixture(scope="module")
def violating(model, small_dataset):
    ocs = small_dataset.operating_conditions(model)
    res = simulate_batch(model, ocs, OUTAGE)
    lim = FrequencyLimits()
    return [o for o, r in zip(ocs, res) if lim.violates(r.rocof, r.nadir).any()]


def test_batch_report_integrity(model, small_bundles, violating, tmp_path):
    report = run_batch(model, violating, OUTAGE, small_bundles,
                       options=PipelineOptions(validate="both"))
    assert report.never_worse()
    assert aggregate(report.records()) == report.summary()
    report.save(tmp_path)
    saved = json.loads((tmp_path / "pipeline.json").read_text())
    again = aggregate(saved["records"])
    for k in TABLE2_FIELDS:
        a, b = again[k], report.summary()[k]
        assert (np.isnan(a) and np.isnan(b)) or a == b
    text = (tmp_path / "summary.txt").read_text()
    assert "Regulated Model Accuracy (%)" in text
    header = (tmp_path / "pipeline.csv").read_text().splitlines()[0]
    assert header.startswith("oc_id,status")


def test_extra_passes_never_increase_the_cap(model, small_bundles, violating):
    one = run_batch(model, violating[:10], OUTAGE, small_bundles, options=PipelineOptions(validate="none"))
    three = run_batch(model, violating[:10], OUTAGE, small_bundles,
                      options=PipelineOptions(validate="none", passes=3))
    for a, b in zip(one.entries, three.entries):
        if a.regulation and b.regulation:
            assert b.regulation.capped_magnitude <= a.regulation.capped_magnitude + 1e-9
            assert b.regulation.original_magnitude == a.regulation.original_magnitude


def test_evaluate_with_perfect_bundles(model, small_dataset):
    test = small_dataset.subset(np.arange(20))
    row = test.targets[0]
    test.targets = np.tile(row, (len(test), 1))
    m = metrics_target_names(model)
    g = governor_target_names(model)
    b1 = constant_bundle(feature_names(model), m, test.columns(m)[0])
    b2 = constant_bundle(feature_names(model), g, test.columns(g)[0])
    rep = evaluate_models(model, (b1, b2), test)
    for arr in (rep.rocof_rmse, rep.nadir_rmse, rep.ramp_rmse, rep.t_nadir_rmse):
        assert np.all(arr == 0.0)
    assert len(rep.rows()) == 10 and "TimeToNadir" in rep.text()


def test_evaluate_rejects_empty(model, small_dataset, small_bundles):
    with pytest.raises(ValueError):
        evaluate_models(model, small_bundles, small_dataset.subset(np.arange(0)))
