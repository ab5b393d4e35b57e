import numpy as np

from freqreg.report import traces_csv, traces_svg


def test_svg_has_both_panels_and_limit(tmp_path):
    t = np.linspace(0, 20, 401)
    left = 60 - 0.5 * np.outer(np.exp(-t / 5) * np.sin(t / 3), [1.0, 1.1])
    right = 60 - 0.3 * np.outer(np.exp(-t / 5) * np.sin(t / 3), [1.0, 1.1])
    traces_svg(tmp_path / "f.svg", t, left, right, [30, 31], limit=59.6)
    svg = (tmp_path / "f.svg").read_text()
    assert svg.count("<polyline") == 4
    assert "Unregulated" in svg and "Regulated" in svg
    assert svg.count('stroke-dasharray="6,4"') == 2
    assert "bus 31" in svg


def test_csv_columns(tmp_path):
    t = np.arange(5) * 0.1
    f = np.full((5, 2), 60.0)
    traces_csv(tmp_path / "t.csv", t, {"a": f, "b": f - 1}, [30, 31])
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "time,a_bus30,a_bus31,b_bus30,b_bus31"
    assert lines[1].split(",")[3] == "59.000000"
