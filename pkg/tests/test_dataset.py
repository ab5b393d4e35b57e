import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freqreg.dataset import (
    SweepSpec,
    check_consistency,
    feature_names,
    generate_dataset,
    governor_target_names,
    load_dataset,
    mask_names,
    metrics_target_names,
    oc_features,
    oc_from_features,
    split_indices,
    train_test_split,
)
from freqreg.grid import effective_rating, with_commitment


def test_layout_names(model):
    assert len(feature_names(model)) == 22
    assert feature_names(model)[:2] == ["loading", "cig_output"]
    assert metrics_target_names(model)[0] == "rocof_b30"
    assert metrics_target_names(model)[-1] == "nadir_b39"
    assert len(governor_target_names(model)) == 20
    assert len(mask_names(model)) == 10


def test_default_sweep_size(default_run):
    ds, manifest, seconds, _ = default_run
    assert 1980 <= len(ds) <= 2420
    assert manifest["counts"]["grid_points"] == 18 * 4 ** 4
    assert manifest["counts"]["rows"] == len(ds)


def test_singleton_sweep(model):
    ds, manifest = generate_dataset(model, SweepSpec(loadings=(0.8,), unit_levels=(3,)))
    assert len(ds) == 1
    assert ds.ids == ["l0.800_u3333"]


def test_same_seed_same_bytes(model, tmp_path):
    spec = SweepSpec(n_samples=12, seed=4)
    generate_dataset(model, spec, out_dir=tmp_path / "a")
    generate_dataset(model, spec, out_dir=tmp_path / "b")
    for name in ("features.csv", "targets.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_written_rows_reload_bit_identical(default_run):
    ds, _, _, out = default_run
    back = load_dataset(out)
    assert back.ids == ds.ids
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.targets, ds.targets)
    assert np.array_equal(back.diverged, ds.diverged)


def test_effective_rating_columns_match_commitment(model, default_run):
    ds = default_run[0]
    check_consistency(model, ds)
    for x in ds.features[::97]:
        oc = oc_from_features(model, x)
        expected = [effective_rating(g) for g in with_commitment(model, oc.commitment)]
        np.testing.assert_array_equal(x[12:22], expected)


def test_consistency_check_rejects_fractional_units(model, small_dataset):
    bad = small_dataset.subset(np.arange(3))
    bad.features = bad.features.copy()
    bad.features[0, 14] += 1.0
    with pytest.raises(ValueError):
        check_consistency(model, bad)


def test_no_constant_target(model, default_run):
    ds = default_run[0]
    # the outaged machine has no governor ramp by construction, and every
    # machine stays committed in the default sweep, so those columns are exempt
    exempt = set(mask_names(model)) | {"prr_sg5"}
    for j, name in enumerate(ds.target_names):
        if name in exempt:
            continue
        assert np.ptp(ds.targets[:, j]) > 0, name


def test_cig_envelope(default_run):
    ds = default_run[0]
    cig = ds.features[:, ds.feature_names.index("cig_output")]
    assert cig.min() >= 100.0 and cig.max() <= 1000.0


def test_manifest_is_complete(default_run):
    _, manifest, _, out = default_run
    on_disk = json.loads((out / "manifest.json").read_text())
    assert on_disk["counts"] == manifest["counts"]
    assert set(on_disk["target_ranges"]) >= {"rocof_b30", "tnadir_sg10"}


def test_feature_round_trip(model, small_dataset):
    for oc in small_dataset.operating_conditions(model)[:20]:
        back = oc_from_features(model, oc_features(model, oc))
        assert back.commitment == oc.commitment
        assert back.dispatch == pytest.approx(oc.dispatch)


def test_default_split_sizes():
    tr, te = split_indices(2200, 0.7, 0)
    assert (len(tr), len(te)) == (1540, 660)


def test_split_seed_sensitivity():
    a = train_test_split(list(range(10)), 0.7, seed=1)
    b = train_test_split(list(range(10)), 0.7, seed=2)
    assert len(a[0]) == len(b[0]) == 7
    assert a[0] != b[0]


@pytest.mark.parametrize("fraction", [1.0, 0.0, -0.1])
def test_split_fraction_errors(fraction):
    with pytest.raises(ValueError):
        split_indices(10, fraction, 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 500), st.floats(0.05, 0.95), st.integers(0, 2 ** 16))
def test_split_is_a_partition(n, fraction, seed):
    tr, te = split_indices(n, fraction, seed)
    assert len(tr) == int(np.floor(n * fraction))
    assert sorted(np.concatenate([tr, te]).tolist()) == list(range(n))


def test_dataset_split_keeps_rows_aligned(small_dataset):
    tr, te = train_test_split(small_dataset, 0.7, 0)
    assert len(tr) + len(te) == len(small_dataset)
    i = small_dataset.ids.index(te.ids[0])
    np.testing.assert_array_equal(te.targets[0], small_dataset.targets[i])


@pytest.mark.parametrize("bad", [dict(loadings=()), dict(cig_range=(10, 1)), dict(n_samples=0),
                                 dict(unit_levels=(5,))])
def test_sweep_spec_validation(bad):
    with pytest.raises(ValueError):
        SweepSpec(**bad)


def test_sweep_spec_from_dict():
    spec = SweepSpec.from_dict({"loadings": [0.7, 0.8], "seed": 3})
    assert spec.loadings == (0.7, 0.8)
    with pytest.raises(ValueError, match="unknown"):
        SweepSpec.from_dict({"loading": [0.7]})
