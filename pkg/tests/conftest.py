import numpy as np
import pytest

from freqreg.dataset import SweepSpec, generate_dataset
from freqreg.grid import load_network
from freqreg.ml import MLPParams, RegressorBundle, Scaler, TrainConfig, train

# filled by test_acceptance.py, printed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def model():
    return load_network("ieee39")


@pytest.fixture(scope="session")
def small_dataset(model):
    ds, manifest = generate_dataset(model, SweepSpec(n_samples=160, seed=11))
    return ds


@pytest.fixture(scope="session")
def small_bundles(model, small_dataset):
    """Quickly trained bundles; accuracy is irrelevant for the plumbing tests."""
    ds = small_dataset.stable()
    cfg = TrainConfig(hidden=(24, 24), max_epochs=150, learning_rate=0.03)
    from freqreg.dataset import governor_target_names, metrics_target_names
    m = metrics_target_names(model)
    g = governor_target_names(model)
    b1 = train(ds.features, ds.columns(m), cfg, ds.feature_names, m)
    b2 = train(ds.features, ds.columns(g), cfg, ds.feature_names, g)
    return b1, b2


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def default_run(model, tmp_path_factory):
    """The default sweep, generated once per session; returns (dataset, manifest, seconds, dir)."""
    import time
    out = tmp_path_factory.mktemp("default-sweep")
    t = time.perf_counter()
    ds, manifest = generate_dataset(model, SweepSpec(), out_dir=out)
    return ds, manifest, time.perf_counter() - t, out


def constant_bundle(fnames, tnames, values):
    """A bundle that predicts ``values`` for every input."""
    m, k = len(fnames), len(tnames)

    def scaler(n, mean):
        return Scaler(np.broadcast_to(np.asarray(mean, float), (n,)).copy(), np.ones(n), np.ones(n),
                      np.zeros(n, bool))

    params = MLPParams([np.zeros((m, k))], [np.zeros(k)])
    return RegressorBundle(scaler(m, 0.0), scaler(k, values), params, list(fnames), list(tnames), {})


@pytest.fixture(scope="session")
def default_bundles(model, default_run):
    """Default-configuration bundles trained on the 70% split of the default sweep."""
    from freqreg.dataset import governor_target_names, metrics_target_names, train_test_split
    ds = default_run[0].stable()
    tr, te = train_test_split(ds, 0.7, 0)
    m, g = metrics_target_names(model), governor_target_names(model)
    b1 = train(tr.features, tr.columns(m), TrainConfig(), ds.feature_names, m)
    b2 = train(tr.features, tr.columns(g), TrainConfig(), ds.feature_names, g)
    return (b1, b2), tr, te
