import time
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freqreg.dataset import SweepSpec, build_oc
from freqreg.dynamics import (
    DisturbanceEvent,
    SimConfig,
    SimulationConfigError,
    SingularNetworkError,
    Traces,
    coi_frequency,
    extract_metrics,
    governor_triangle_depth,
    kron_eliminate,
    kron_reduce,
    read_traces,
    simulate,
    simulate_batch,
    simulate_cases,
    single_machine_case,
    write_traces,
)
from freqreg.grid import Bus, CIGUnit, Line, NetworkModel, OperatingCondition, SyncGenerator

OUTAGE = DisturbanceEvent(target=5)


def toy(lines, buses=None):
    g1 = SyncGenerator(id=1, bus=1, rated_mva=100.0, H=4.0, p_min=0.1, p_max=0.9, transient_reactance=0.2)
    g2 = SyncGenerator(id=2, bus=2, rated_mva=200.0, H=4.0, p_min=0.1, p_max=0.9, transient_reactance=0.3)
    buses = buses or (Bus(1, 20.0, 5.0), Bus(2, 60.0, 10.0))
    model = NetworkModel(name="toy", buses=buses, lines=lines, generators=(g1, g2),
                         cig=CIGUnit(bus=1, displaced_generators=()), monitored_buses=(1, 2))
    oc = OperatingCondition(1.0, {1: 4, 2: 4}, {1: 40.0, 2: 40.0}, 0.0)
    return model, oc


def test_kron_two_bus_hand_elimination():
    model, oc = toy((Line(1, 2, 0.01, 0.1),))
    Yr = kron_reduce(model, oc)
    # internal reactances on the 100 MVA base: 0.2 and 0.15
    ya, yb = 1 / 0.2j, 1 / 0.15j
    yl = 1 / complex(0.01, 0.1)
    Y1, Y2 = complex(0.2, -0.05), complex(0.6, -0.1)
    d11, d22 = ya + yl + Y1, yb + yl + Y2
    det = d11 * d22 - yl * yl
    hand = np.array([[ya - ya * ya * d22 / det, -ya * yb * yl / det],
                     [-ya * yb * yl / det, yb - yb * yb * d11 / det]])
    np.testing.assert_allclose(Yr, hand, rtol=1e-12)


def test_kron_series_node_is_invisible():
    model, oc = toy((Line(1, 2, 0.01, 0.1),))
    split, _ = toy((Line(1, 3, 0.005, 0.05), Line(3, 2, 0.005, 0.05)),
                   buses=(Bus(1, 20.0, 5.0), Bus(2, 60.0, 10.0), Bus(3, 0.0, 0.0)))
    np.testing.assert_allclose(kron_reduce(split, oc), kron_reduce(model, oc), rtol=1e-12)


def test_kron_dangling_bus_is_invisible():
    model, oc = toy((Line(1, 2, 0.01, 0.1),))
    stub, _ = toy((Line(1, 2, 0.01, 0.1), Line(2, 3, 0.0, 0.07)),
                  buses=(Bus(1, 20.0, 5.0), Bus(2, 60.0, 10.0), Bus(3, 0.0, 0.0)))
    np.testing.assert_allclose(kron_reduce(stub, oc), kron_reduce(model, oc), rtol=1e-12)


def test_kron_island_is_singular():
    Y = np.array([[2.0, -1.0, 0.0], [-1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(SingularNetworkError):
        kron_eliminate(Y, [0])


def test_kron_reduce_fixture_is_symmetric(model, small_dataset):
    oc = small_dataset.operating_conditions(model)[0]
    Y = kron_reduce(model, oc, lossless=True)
    assert Y.shape == (10, 10)
    np.testing.assert_allclose(Y, Y.T, atol=1e-10)
    np.testing.assert_allclose(Y.sum(axis=1), 0.0, atol=1e-8)


def test_kron_reduce_drops_outaged_machine(model, small_dataset):
    oc = small_dataset.operating_conditions(model)[0]
    assert kron_reduce(model, oc, exclude=(5,)).shape == (9, 9)


@pytest.fixture(scope="module")
def reference_oc(model):
    return build_oc(model, SweepSpec(), 1.0, (4, 4, 4, 4), "ref")


def test_no_event_equilibrium_is_exact(model, reference_oc):
    t = time.perf_counter()
    res = simulate(model, reference_oc, None, SimConfig(keep_traces=True))
    assert time.perf_counter() - t < 1.0
    assert np.abs(res.traces.bus_freq - 60.0).max() < 1e-9


def test_zero_magnitude_outage(model, reference_oc):
    d = dict(reference_oc.dispatch)
    d[10] += d[5]
    d[5] = 0.0
    oc = replace(reference_oc, dispatch=d)
    res = simulate(model, oc, OUTAGE, SimConfig(keep_traces=True))
    assert np.abs(res.traces.bus_freq - 60.0).max() < 1e-9
    assert np.all(np.abs(res.rocof) < 1e-6)
    assert np.all(res.nadir >= 60.0 - 1e-9)


def test_single_machine_initial_rocof():
    model, oc, ev = single_machine_case(H=5.0, S=1000.0, delta_p=100.0, ramp=20.0, t_d=1.0)
    res = simulate(model, oc, ev, SimConfig())
    expected = -100.0 * 60.0 / (2 * 5.0 * 1000.0)
    assert expected == pytest.approx(-0.6)
    np.testing.assert_allclose(res.rocof_initial, expected, rtol=1e-3)


def test_single_machine_triangle():
    model, oc, ev = single_machine_case(H=5.0, S=1000.0, delta_p=100.0, ramp=20.0, t_d=0.0)
    res = simulate(model, oc, ev, SimConfig())
    assert 60.0 - res.nadir[0] == pytest.approx(1.5, abs=0.02)
    assert res.t_nadir[0] == pytest.approx(5.0, abs=0.02)


def test_time_to_nadir_inverse():
    _, t_n = governor_triangle_depth(5.0, 1000.0, 100.0, 20.0, 0.5)
    assert t_n == pytest.approx(5.5)


@settings(max_examples=12, deadline=None)
@given(H=st.floats(2.0, 8.0), S=st.floats(200.0, 2000.0), frac=st.floats(0.05, 0.3),
       rr=st.floats(0.03, 0.1), td_steps=st.integers(0, 200))
def test_single_machine_matches_triangle(H, S, frac, rr, td_steps):
    dp, ramp, t_d = frac * S, rr * S, td_steps * 0.005
    model, oc, ev = single_machine_case(H, S, dp, ramp, t_d)
    res = simulate(model, oc, ev, SimConfig())
    # independent oracle: integrate the triangle area by hand
    m = 2 * H * S / 60.0
    t_n = t_d + dp / ramp
    depth = (dp * t_d + 0.5 * dp * (t_n - t_d)) / m
    assert 60.0 - res.nadir[0] == pytest.approx(depth, abs=0.02)


def test_halving_dt_converges(model, reference_oc):
    a = simulate(model, reference_oc, OUTAGE, SimConfig(dt=0.005))
    b = simulate(model, reference_oc, OUTAGE, SimConfig(dt=0.0025))
    assert np.abs(a.nadir - b.nadir).max() < 1e-4


def test_locational_spread_in_low_inertia_case(model):
    oc = build_oc(model, SweepSpec(), 1.025, (1, 1, 1, 1), "low")
    res = simulate(model, oc, OUTAGE)
    assert res.nadir.max() - res.nadir.min() > 0.01
    assert res.rocof.max() - res.rocof.min() > 0.01


def test_coi_deceleration_during_deadband(model, reference_oc):
    res = simulate(model, reference_oc, OUTAGE, SimConfig(keep_traces=True))
    tr = res.traces
    coi = coi_frequency(tr.machine_freq, model, reference_oc, exclude=(5,))
    k0 = SimConfig().event_step
    slope = (coi[k0 + 1] - coi[k0]) / SimConfig().dt
    survivors = [g for g in model.generators if g.id != 5]
    energy = sum(g.H * g.rated_mva for g in survivors)
    expected = -reference_oc.dispatch[5] * 60.0 / (2 * energy)
    assert slope == pytest.approx(expected, rel=0.01)


def test_coi_examples(model):
    oc = OperatingCondition(1.0, {g.id: 4 for g in model.generators}, {}, 0.0)
    same = np.full((5, 10), 59.7)
    np.testing.assert_allclose(coi_frequency(same, model, oc), 59.7)

    g1 = replace(model.generator(1), H=1.0, rated_mva=100.0)
    g2 = replace(model.generator(2), H=3.0, rated_mva=100.0)
    pair = replace(model, generators=(g1, g2))
    f = np.array([[59.0, 60.0]])
    assert coi_frequency(f, pair, OperatingCondition(1.0, {1: 4, 2: 4}, {}, 0.0))[0] == pytest.approx(59.75)


def test_coi_is_bounded_by_machines(model, reference_oc):
    res = simulate(model, reference_oc, OUTAGE, SimConfig(keep_traces=True))
    mf = np.delete(res.traces.machine_freq, 4, axis=1)
    mask = [g.id != 5 for g in model.generators]
    coi = coi_frequency(res.traces.machine_freq, model, reference_oc, exclude=(5,))
    assert np.all(coi >= mf.min(axis=1) - 1e-12)
    assert np.all(coi <= mf.max(axis=1) + 1e-12)
    assert sum(mask) == 9


def synthetic_traces(t0=1.0, dt=0.005, horizon=10.0):
    t = np.arange(int(round(horizon / dt)) + 1) * dt
    s = np.clip(t - t0, 0.0, None)
    f = np.where(s <= 5.0, 60.0 - 0.3 * s, 58.5 + 0.1 * (s - 5.0))
    p = 500.0 + 10.0 * s
    return Traces(time=t, bus_freq=f[:, None], machine_freq=f[:, None], mech_power=p[:, None],
                  bus_ids=(30,), gen_ids=(1,), gen_bus_index=np.array([0]),
                  committed=np.array([True]), tripped=np.array([False]))


@pytest.mark.parametrize("window", [0.1, 0.5, 2.0])
def test_extract_metrics_linear_ramp(window):
    out = extract_metrics(synthetic_traces(), SimConfig(horizon=10.0, rocof_window=window))
    assert out.rocof[0] == pytest.approx(-0.3, rel=1e-9)
    assert out.nadir[0] == pytest.approx(58.5)
    assert out.t_nadir[0] == pytest.approx(5.0)
    assert out.ramp_rate[0] == pytest.approx(10.0)


def test_window_longer_than_horizon():
    with pytest.raises(SimulationConfigError):
        extract_metrics(synthetic_traces(horizon=1.2), SimConfig(horizon=1.2, rocof_window=0.5))


@pytest.mark.parametrize("kw", [dict(dt=0.0), dict(horizon=0.5), dict(rocof_window=0.001),
                                dict(disturbance_time=-1.0, horizon=5.0), dict(scheme="euler")])
def test_config_errors(kw):
    with pytest.raises(SimulationConfigError):
        SimConfig(**kw)


def test_divergence_is_flagged(model, reference_oc):
    res = simulate(model, reference_oc, OUTAGE, SimConfig(divergence_hz=0.01))
    assert res.diverged


def test_outcome_invariants(model, small_dataset):
    ocs = small_dataset.operating_conditions(model)[:40]
    for res in simulate_batch(model, ocs, OUTAGE):
        assert np.all(res.nadir <= 60.0)
        assert np.all(res.rocof <= 0.0)
        assert np.all((res.t_nadir > 0) & (res.t_nadir <= 19.0 + 1e-9))
        assert res.ramp_rate[4] == 0.0 and res.tripped[4]


def test_batch_matches_single_runs(model, small_dataset):
    ocs = small_dataset.operating_conditions(model)[:6]
    batch = simulate_batch(model, ocs, OUTAGE, chunk=4)
    pooled = simulate_batch(model, ocs, OUTAGE, chunk=2, workers=2)
    for oc, a, b in zip(ocs, batch, pooled):
        one = simulate(model, oc, OUTAGE)
        np.testing.assert_allclose(a.nadir, one.nadir, rtol=0, atol=1e-12)
        np.testing.assert_array_equal(a.rocof, b.rocof)


def test_trace_file_round_trip(tmp_path, model, reference_oc):
    res = simulate(model, reference_oc, OUTAGE, SimConfig(keep_traces=True))
    write_traces(tmp_path / "t.txt", res.traces)
    t, f, buses = read_traces(tmp_path / "t.txt")
    assert buses == list(range(30, 40))
    np.testing.assert_allclose(f, res.traces.bus_freq, atol=5e-7)
    np.testing.assert_allclose(t, res.traces.time, atol=5e-7)


def test_simulate_cases_matches_single_runs():
    built = [single_machine_case(4.0, 500.0 + 100 * k, 60.0, 30.0, 0.2) for k in range(3)]
    many = simulate_cases([b[0] for b in built], [b[1] for b in built], built[0][2])
    for b, r in zip(built, many):
        np.testing.assert_allclose(r.nadir, simulate(*b).nadir, atol=1e-12)


def test_simulate_cases_rejects_mixed_layouts(model, reference_oc):
    small, oc, _ = single_machine_case(4.0, 500.0, 60.0, 30.0)
    with pytest.raises(ValueError, match="layout"):
        simulate_cases([small, model], [oc, reference_oc], OUTAGE)
